//! Exact Gaussian sampling of the solution's harmonic coefficients and the
//! variance integrals that define their law.
//!
//! With λ_ℓ = ℓ(ℓ+1) and E(x) = E_α(-x), the coefficients of the solution at
//! time t are
//!
//! ```text
//! V_{ℓ,m}(t) = E(λ_ℓ t^α) ξ_{ℓ,m} + 1_{t>τ} sqrt(A_ℓ) I_{ℓ,m}(t-τ)
//! ```
//!
//! where ξ has power spectrum C_ℓ and I(s) ~ N(0, σ²_{ℓ,s,α}) is the Itô
//! integral of the Mittag-Leffler kernel against an independent Brownian
//! motion.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;
use std::sync::{OnceLock, RwLock};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::write_atomically;
use crate::quadrature::{self, Tolerance};
use crate::specfun::{legendre_p_unchecked, ml_decay};
use crate::spectra::{lambda, m_alpha, AlgebraicSpectrum, Spectrum};

/// Model parameters: fractional order α, noise onset τ, the initial-field
/// spectrum C and the noise spectrum A.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FractionalModel {
    pub alpha: f64,
    pub tau: f64,
    pub spec_c: Spectrum,
    pub spec_a: Spectrum,
}

impl FractionalModel {
    pub fn new(alpha: f64, tau: f64, spec_c: Spectrum, spec_a: Spectrum) -> Result<Self> {
        let m = FractionalModel {
            alpha,
            tau,
            spec_c,
            spec_a,
        };
        m.validate()?;
        Ok(m)
    }

    /// κ₁ = 2.3, κ₂ = 2.5, C̃ = D̃ = 1, Ã = K̃ = 10⁴, τ = 10⁻⁵.
    pub fn reference(alpha: f64) -> Result<Self> {
        FractionalModel::new(
            alpha,
            1e-5,
            AlgebraicSpectrum::new(1.0, 1.0, 2.3)?.into(),
            AlgebraicSpectrum::new(1e4, 1e4, 2.5)?.into(),
        )
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::config("alpha", format!("must lie in (0, 1], got {}", self.alpha)));
        }
        if !(self.tau > 0.0) || !self.tau.is_finite() {
            return Err(Error::config("tau", format!("must be positive, got {}", self.tau)));
        }
        self.spec_c
            .validate()
            .map_err(|e| Error::config("spec_c", e.to_string()))?;
        self.spec_a
            .validate()
            .map_err(|e| Error::config("spec_a", e.to_string()))?;
        Ok(())
    }
}

#[inline]
fn tri(ell: usize, m: usize) -> usize {
    ell * (ell + 1) / 2 + m
}

/// Harmonic coefficients {V_{ℓ,m} : 0 ≤ m ≤ ℓ ≤ L} of a real field. The
/// negative orders follow from V_{ℓ,-m} = (-1)^m conj(V_{ℓ,m}), and V_{ℓ,0}
/// is real.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientSet {
    lmax: usize,
    values: Vec<Complex64>,
    pub time: f64,
    pub seed: u64,
    pub realization: u64,
}

const BINARY_MAGIC: &[u8; 4] = b"SFDC";
const BINARY_VERSION: u32 = 1;

impl CoefficientSet {
    pub fn zeros(lmax: usize) -> Self {
        CoefficientSet {
            lmax,
            values: vec![Complex64::new(0.0, 0.0); tri(lmax, lmax) + 1],
            time: 0.0,
            seed: 0,
            realization: 0,
        }
    }

    pub fn lmax(&self) -> usize {
        self.lmax
    }

    pub fn get(&self, ell: usize, m: usize) -> Complex64 {
        assert!(m <= ell && ell <= self.lmax, "coefficient ({ell},{m}) outside degree {}", self.lmax);
        self.values[tri(ell, m)]
    }

    /// Stores `v`; for m = 0 only the real part is kept.
    pub fn set(&mut self, ell: usize, m: usize, v: Complex64) {
        assert!(m <= ell && ell <= self.lmax, "coefficient ({ell},{m}) outside degree {}", self.lmax);
        self.values[tri(ell, m)] = if m == 0 { Complex64::new(v.re, 0.0) } else { v };
    }

    /// The coefficients of degree ℓ, m = 0..=ℓ.
    pub fn degree(&self, ell: usize) -> &[Complex64] {
        &self.values[tri(ell, 0)..=tri(ell, ell)]
    }

    pub fn degree_mut(&mut self, ell: usize) -> &mut [Complex64] {
        &mut self.values[tri(ell, 0)..=tri(ell, ell)]
    }

    /// |V_{ℓ,0}|² + 2Σ_{m≥1}|V_{ℓ,m}|², the squared L² norm of degree ℓ.
    pub fn degree_power(&self, ell: usize) -> f64 {
        let d = self.degree(ell);
        d[0].norm_sqr() + 2.0 * d[1..].iter().map(|v| v.norm_sqr()).sum::<f64>()
    }

    /// Σ_{ℓ=from}^{L} degree_power(ℓ).
    pub fn tail_power(&self, from: usize) -> f64 {
        (from..=self.lmax).map(|l| self.degree_power(l)).sum()
    }

    /// Copy truncated (or zero-padded) to degree `lmax`.
    pub fn truncated(&self, lmax: usize) -> CoefficientSet {
        let mut out = CoefficientSet::zeros(lmax);
        let n = tri(lmax.min(self.lmax), lmax.min(self.lmax)) + 1;
        out.values[..n].copy_from_slice(&self.values[..n]);
        out.time = self.time;
        out.seed = self.seed;
        out.realization = self.realization;
        out
    }

    /// `self + other`, keeping this set's metadata.
    pub fn add(&self, other: &CoefficientSet) -> Result<CoefficientSet> {
        if self.lmax != other.lmax {
            return Err(Error::Input(format!(
                "cannot add coefficient sets of degree {} and {}",
                self.lmax, other.lmax
            )));
        }
        let mut out = self.clone();
        for (a, b) in out.values.iter_mut().zip(&other.values) {
            *a += *b;
        }
        Ok(out)
    }

    /// `a·self`.
    pub fn scaled(&self, a: f64) -> CoefficientSet {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= a);
        out
    }

    pub fn to_csv_string(&self) -> String {
        let mut s = String::with_capacity(48 * self.values.len() + 16);
        s.push_str("ell,m,re,im\n");
        for ell in 0..=self.lmax {
            for m in 0..=ell {
                let v = self.get(ell, m);
                s.push_str(&format!("{ell},{m},{:.16e},{:.16e}\n", v.re, v.im));
            }
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_atomically(path, |w| w.write_all(self.to_csv_string().as_bytes()))
    }

    /// Parse the CSV layout; the degree is the largest ℓ present and
    /// missing rows are zero.
    pub fn from_csv_reader<R: Read>(r: R) -> Result<CoefficientSet> {
        let mut rows = Vec::new();
        let mut lmax = 0;
        for (i, line) in BufReader::new(r).lines().enumerate() {
            let line = line.map_err(|e| Error::Input(format!("coefficient CSV line {}: {e}", i + 1)))?;
            if i == 0 {
                if line.trim() != "ell,m,re,im" {
                    return Err(Error::Input(format!("coefficient CSV header must be `ell,m,re,im`, got `{line}`")));
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let bad = || Error::Input(format!("coefficient CSV line {}: malformed row `{line}`", i + 1));
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 4 {
                return Err(bad());
            }
            let ell: usize = f[0].trim().parse().map_err(|_| bad())?;
            let m: usize = f[1].trim().parse().map_err(|_| bad())?;
            let re: f64 = f[2].trim().parse().map_err(|_| bad())?;
            let im: f64 = f[3].trim().parse().map_err(|_| bad())?;
            if m > ell {
                return Err(bad());
            }
            lmax = lmax.max(ell);
            rows.push((ell, m, Complex64::new(re, im)));
        }
        let mut out = CoefficientSet::zeros(lmax);
        for (ell, m, v) in rows {
            out.set(ell, m, v);
        }
        Ok(out)
    }

    pub fn read_csv(path: &Path) -> Result<CoefficientSet> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        CoefficientSet::from_csv_reader(f)
    }

    /// "SFDC", version u32, L u32, then (re, im) f64 pairs ordered by ℓ then
    /// m; all little-endian.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(12 + 16 * self.values.len());
        out.extend_from_slice(BINARY_MAGIC);
        out.extend_from_slice(&BINARY_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.lmax as u32).to_le_bytes());
        for v in &self.values {
            out.extend_from_slice(&v.re.to_le_bytes());
            out.extend_from_slice(&v.im.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<CoefficientSet> {
        if bytes.len() < 12 || &bytes[..4] != BINARY_MAGIC {
            return Err(Error::Input("not a coefficient file (missing SFDC header)".into()));
        }
        let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
        let version = word(4);
        if version != BINARY_VERSION {
            return Err(Error::Input(format!("unsupported coefficient file version {version}")));
        }
        let lmax = word(8) as usize;
        let n = tri(lmax, lmax) + 1;
        if bytes.len() != 12 + 16 * n {
            return Err(Error::Input(format!(
                "coefficient file for L={lmax} should hold {} bytes, found {}",
                12 + 16 * n,
                bytes.len()
            )));
        }
        let mut out = CoefficientSet::zeros(lmax);
        for (k, v) in out.values.iter_mut().enumerate() {
            let at = 12 + 16 * k;
            let re = f64::from_le_bytes(bytes[at..at + 8].try_into().unwrap());
            let im = f64::from_le_bytes(bytes[at + 8..at + 16].try_into().unwrap());
            *v = Complex64::new(re, im);
        }
        Ok(out)
    }

    pub fn write_binary(&self, path: &Path) -> Result<()> {
        write_atomically(path, |w| w.write_all(&self.to_bytes()))
    }

    pub fn read_binary(path: &Path) -> Result<CoefficientSet> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        CoefficientSet::from_bytes(&bytes)
    }
}

/// Which independent family of normals a draw belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Role {
    /// Z⁽¹⁾, Z⁽²⁾ of the initial field.
    Initial = 0,
    /// Normals behind the inhomogeneous integrals at the first time.
    Noise = 1,
    /// The extra normals of the second time in a correlated pair.
    NoisePair = 2,
}

/// Counter-based random source. The ChaCha key is derived from
/// (seed, realization); each (ℓ, role) selects its own ChaCha stream, and
/// within a stream orders m = 0..=ℓ are drawn in sequence. Draws therefore do
/// not depend on evaluation order or thread count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub realization: u64,
}

impl RngStream {
    pub fn new(seed: u64, realization: u64) -> Self {
        RngStream { seed, realization }
    }

    /// The generator for degree `ell` and `role`, positioned at its start.
    pub fn generator(&self, ell: usize, role: Role) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.seed.to_le_bytes());
        key[8..16].copy_from_slice(&self.realization.to_le_bytes());
        key[16..24].copy_from_slice(b"sfd-coef");
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(((role as u64) << 48) | ell as u64);
        rng
    }
}

#[inline]
fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::domain(format!("alpha must lie in (0, 1], got {alpha}")));
    }
    Ok(())
}

fn check_nonneg(t: f64, what: &str) -> Result<()> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::domain(format!("{what} must be finite and >= 0, got {t}")));
    }
    Ok(())
}

type Key3 = (usize, u64, u64);
type Key4 = (usize, u64, u64, u64);

fn sigma_cache() -> &'static RwLock<HashMap<Key3, f64>> {
    static C: OnceLock<RwLock<HashMap<Key3, f64>>> = OnceLock::new();
    C.get_or_init(Default::default)
}

fn cross_cache() -> &'static RwLock<HashMap<Key4, f64>> {
    static C: OnceLock<RwLock<HashMap<Key4, f64>>> = OnceLock::new();
    C.get_or_init(Default::default)
}

const SIGMA_TOL: Tolerance = Tolerance {
    abs: 1e-300,
    rel: 1e-12,
    max_panels: 4000,
};

/// 0, then a geometric ladder from `top` down to a thousandth of the
/// smaller of `top` and the relaxation time λ^{-1/α}, then `top`.
fn graded_points(top: f64, relax: f64) -> Vec<f64> {
    let floor = (1e-3 * top.min(relax)).max(1e-30 * top);
    let mut ladder = vec![top];
    let mut b = top;
    while b > floor && ladder.len() < 64 {
        b *= 0.1;
        ladder.push(b);
    }
    ladder.push(0.0);
    ladder.reverse();
    ladder
}

/// Integrate a closure whose evaluations may fail, surfacing the first
/// failure.
fn integrate_fallible<F: FnMut(f64) -> Result<f64>>(mut f: F, points: &[f64], tol: Tolerance) -> Result<f64> {
    let mut failure = None;
    let est = quadrature::integrate(
        |x| match f(x) {
            Ok(v) => v,
            Err(e) => {
                failure.get_or_insert(e);
                0.0
            }
        },
        points,
        tol,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(est?.value)
}

/// σ²_{ℓ,t,α} = ∫_0^t E_α(-λ_ℓ r^α)² dr.
pub fn sigma_squared(ell: usize, t: f64, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    check_nonneg(t, "t")?;
    if t == 0.0 {
        return Ok(0.0);
    }
    if ell == 0 {
        return Ok(t);
    }
    let key = (ell, t.to_bits(), alpha.to_bits());
    if let Some(&v) = sigma_cache().read().expect("cache poisoned").get(&key) {
        return Ok(v);
    }
    let lam = lambda(ell);
    let points = graded_points(t, lam.powf(-1.0 / alpha));
    let v = integrate_fallible(
        |r| {
            let e = ml_decay(alpha, lam * r.powf(alpha))?;
            Ok(e * e)
        },
        &points,
        SIGMA_TOL,
    )?;
    let v = v.clamp(0.0, t);
    sigma_cache().write().expect("cache poisoned").insert(key, v);
    Ok(v)
}

/// Upper bound for σ²_{ℓ,t,α}:
/// λ^{-1/α} + M_α t^{1-2α} λ^{-2} (α < 1/2), λ^{-2}(1 + M ln(λ²t)) (α = 1/2),
/// λ^{-1/α}(1 + M_α) (α > 1/2). The α = 1/2 form is meaningful only for
/// λ²t > 1; see [`sigma_bound_applies`].
pub fn sigma_squared_bound(ell: usize, t: f64, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if ell == 0 {
        return Err(Error::domain("the variance bound needs ell >= 1"));
    }
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::domain(format!("t must be positive, got {t}")));
    }
    let lam = lambda(ell);
    let m = m_alpha(alpha)?;
    Ok(if alpha < 0.5 {
        lam.powf(-1.0 / alpha) + m * t.powf(1.0 - 2.0 * alpha) / (lam * lam)
    } else if alpha == 0.5 {
        (1.0 + m * (lam * lam * t).ln()) / (lam * lam)
    } else {
        lam.powf(-1.0 / alpha) * (1.0 + m)
    })
}

/// Whether the assumptions behind [`sigma_squared_bound`] hold.
pub fn sigma_bound_applies(ell: usize, t: f64, alpha: f64) -> bool {
    ell >= 1 && t > 0.0 && (alpha != 0.5 || lambda(ell).powi(2) * t > 1.0)
}

/// ∫_0^s E_α(-λ(s+h-u)^α) E_α(-λ(s-u)^α) du, the covariance of the
/// inhomogeneous integrals at lags s and s+h.
pub fn cross_sigma(ell: usize, s: f64, h: f64, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    check_nonneg(s, "s")?;
    check_nonneg(h, "h")?;
    if h == 0.0 {
        return sigma_squared(ell, s, alpha);
    }
    if s == 0.0 {
        return Ok(0.0);
    }
    if ell == 0 {
        return Ok(s);
    }
    let key = (ell, s.to_bits(), h.to_bits(), alpha.to_bits());
    if let Some(&v) = cross_cache().read().expect("cache poisoned").get(&key) {
        return Ok(v);
    }
    let lam = lambda(ell);
    let points = graded_points(s, lam.powf(-1.0 / alpha));
    // v = s - u runs from the present back to the start of the noise.
    let v = integrate_fallible(
        |v| Ok(ml_decay(alpha, lam * (v + h).powf(alpha))? * ml_decay(alpha, lam * v.powf(alpha))?),
        &points,
        SIGMA_TOL,
    )?;
    let v = v.max(0.0);
    cross_cache().write().expect("cache poisoned").insert(key, v);
    Ok(v)
}

fn decay_cache() -> &'static RwLock<HashMap<Key3, f64>> {
    static C: OnceLock<RwLock<HashMap<Key3, f64>>> = OnceLock::new();
    C.get_or_init(Default::default)
}

/// E_α(-λ_ℓ t^α), the homogeneous decay factor of degree ℓ.
pub fn decay_factor(ell: usize, t: f64, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    check_nonneg(t, "t")?;
    if ell == 0 || t == 0.0 {
        return Ok(1.0);
    }
    let key = (ell, t.to_bits(), alpha.to_bits());
    if let Some(&v) = decay_cache().read().expect("cache poisoned").get(&key) {
        return Ok(v);
    }
    let v = ml_decay(alpha, lambda(ell) * t.powf(alpha))?;
    decay_cache().write().expect("cache poisoned").insert(key, v);
    Ok(v)
}

/// V_{ℓ,0} = sqrt(C_ℓ) Z, V_{ℓ,m} = sqrt(C_ℓ/2)(Z⁽¹⁾ - iZ⁽²⁾).
pub fn sample_initial(spec_c: &Spectrum, lmax: usize, rng: RngStream) -> CoefficientSet {
    let mut out = CoefficientSet::zeros(lmax);
    out.seed = rng.seed;
    out.realization = rng.realization;
    for ell in 0..=lmax {
        let c = spec_c.value(ell);
        if c == 0.0 {
            continue;
        }
        let mut g = rng.generator(ell, Role::Initial);
        let (sd0, sd) = (c.sqrt(), (0.5 * c).sqrt());
        let d = out.degree_mut(ell);
        d[0] = Complex64::new(sd0 * normal(&mut g), 0.0);
        for v in d.iter_mut().skip(1) {
            let z1 = normal(&mut g);
            let z2 = normal(&mut g);
            *v = Complex64::new(sd * z1, -sd * z2);
        }
    }
    out
}

/// Multiply degree ℓ by E_α(-λ_ℓ t^α).
pub fn evolve_homogeneous(init: &CoefficientSet, t: f64, alpha: f64) -> Result<CoefficientSet> {
    let mut out = init.clone();
    out.time = t;
    if t == 0.0 {
        check_alpha(alpha)?;
        return Ok(out);
    }
    for ell in 1..=out.lmax {
        let f = decay_factor(ell, t, alpha)?;
        out.degree_mut(ell).iter_mut().for_each(|v| *v *= f);
    }
    Ok(out)
}

/// Coefficients of the noise-driven part at time t (zero for t ≤ τ).
pub fn sample_inhomogeneous(
    spec_a: &Spectrum,
    lmax: usize,
    t: f64,
    tau: f64,
    alpha: f64,
    rng: RngStream,
) -> Result<CoefficientSet> {
    check_alpha(alpha)?;
    if !(tau > 0.0) {
        return Err(Error::domain(format!("tau must be positive, got {tau}")));
    }
    check_nonneg(t, "t")?;
    let mut out = CoefficientSet::zeros(lmax);
    out.time = t;
    out.seed = rng.seed;
    out.realization = rng.realization;
    if t <= tau {
        return Ok(out);
    }
    let s = t - tau;
    for ell in 0..=lmax {
        let a = spec_a.value(ell);
        if a == 0.0 {
            continue;
        }
        let sd = sigma_squared(ell, s, alpha)?.sqrt();
        let mut g = rng.generator(ell, Role::Noise);
        let (f0, f) = (a.sqrt() * sd, (0.5 * a).sqrt() * sd);
        let d = out.degree_mut(ell);
        d[0] = Complex64::new(f0 * normal(&mut g), 0.0);
        for v in d.iter_mut().skip(1) {
            let z1 = normal(&mut g);
            let z2 = normal(&mut g);
            *v = Complex64::new(f * z1, -f * z2);
        }
    }
    Ok(out)
}

/// A draw of the full solution's coefficients at time t > 0.
pub fn sample_combined(model: &FractionalModel, lmax: usize, t: f64, rng: RngStream) -> Result<CoefficientSet> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::domain(format!("t must be positive, got {t}")));
    }
    let init = sample_initial(&model.spec_c, lmax, rng);
    let hom = evolve_homogeneous(&init, t, model.alpha)?;
    let inh = sample_inhomogeneous(&model.spec_a, lmax, t, model.tau, model.alpha, rng)?;
    hom.add(&inh)
}

/// Jointly distributed draws at t and t+h. The initial field is shared, and
/// the inhomogeneous integrals at lags s = t-τ and s+h are drawn from their
/// exact bivariate law. The first member equals [`sample_combined`] for the
/// same stream.
pub fn sample_combined_pair(
    model: &FractionalModel,
    lmax: usize,
    t: f64,
    h: f64,
    rng: RngStream,
) -> Result<(CoefficientSet, CoefficientSet)> {
    if !(t > model.tau) || !t.is_finite() {
        return Err(Error::domain(format!("the pair sampler needs t > tau, got t={t}, tau={}", model.tau)));
    }
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::domain(format!("h must be positive, got {h}")));
    }
    let alpha = model.alpha;
    let init = sample_initial(&model.spec_c, lmax, rng);
    let mut first = evolve_homogeneous(&init, t, alpha)?;
    let mut second = evolve_homogeneous(&init, t + h, alpha)?;
    second.time = t + h;
    let s = t - model.tau;
    for ell in 0..=lmax {
        let a = model.spec_a.value(ell);
        if a == 0.0 {
            continue;
        }
        let v1 = sigma_squared(ell, s, alpha)?;
        let v2 = sigma_squared(ell, s + h, alpha)?;
        let c = cross_sigma(ell, s, h, alpha)?;
        let l11 = v1.sqrt();
        let l21 = if l11 > 0.0 { c / l11 } else { 0.0 };
        let mut l22sq = v2 - l21 * l21;
        if l22sq < 0.0 {
            if l22sq < -1e-12 * v2.max(f64::MIN_POSITIVE) {
                return Err(Error::accuracy(format!(
                    "two-time covariance of degree {ell} is not positive semidefinite: var {v1:e}, {v2:e}, cov {c:e}"
                )));
            }
            l22sq = 0.0;
        }
        let l22 = l22sq.sqrt();
        let mut g1 = rng.generator(ell, Role::Noise);
        let mut g2 = rng.generator(ell, Role::NoisePair);
        let a0 = a.sqrt();
        let am = (0.5 * a).sqrt();
        for m in 0..=ell {
            let z1 = normal(&mut g1);
            let w1 = normal(&mut g2);
            if m == 0 {
                first.degree_mut(ell)[0].re += a0 * l11 * z1;
                second.degree_mut(ell)[0].re += a0 * (l21 * z1 + l22 * w1);
            } else {
                let z2 = normal(&mut g1);
                let w2 = normal(&mut g2);
                first.degree_mut(ell)[m] += Complex64::new(am * l11 * z1, -am * l11 * z2);
                second.degree_mut(ell)[m] += Complex64::new(am * (l21 * z1 + l22 * w1), -am * (l21 * z2 + l22 * w2));
            }
        }
    }
    Ok((first, second))
}

/// E|V_{ℓ,m}(t)|² = C_ℓ E_α(-λ_ℓ t^α)² + 1_{t>τ} A_ℓ σ²_{ℓ,t-τ,α}.
pub fn coefficient_variance(model: &FractionalModel, ell: usize, t: f64) -> Result<f64> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::domain(format!("t must be positive, got {t}")));
    }
    let e = decay_factor(ell, t, model.alpha)?;
    let mut v = model.spec_c.value(ell) * e * e;
    if t > model.tau {
        let a = model.spec_a.value(ell);
        if a > 0.0 {
            v += a * sigma_squared(ell, t - model.tau, model.alpha)?;
        }
    }
    Ok(v)
}

/// E|V_{ℓ,m}(t+h) - V_{ℓ,m}(t)|² under the joint law of
/// [`sample_combined_pair`].
pub fn increment_variance(model: &FractionalModel, ell: usize, t: f64, h: f64) -> Result<f64> {
    if !(t > model.tau) || !(h > 0.0) {
        return Err(Error::domain(format!("increment variance needs t > tau and h > 0, got t={t}, h={h}")));
    }
    let alpha = model.alpha;
    let de = decay_factor(ell, t + h, alpha)? - decay_factor(ell, t, alpha)?;
    let mut v = model.spec_c.value(ell) * de * de;
    let a = model.spec_a.value(ell);
    if a > 0.0 {
        let s = t - model.tau;
        let d = sigma_squared(ell, s, alpha)? + sigma_squared(ell, s + h, alpha)? - 2.0 * cross_sigma(ell, s, h, alpha)?;
        v += a * d.max(0.0);
    }
    Ok(v)
}

/// E[U(x,t)U(y,t)] truncated at degree `lmax`, as a function of x·y.
pub fn covariance_function(model: &FractionalModel, t: f64, cos_angle: f64, lmax: usize) -> Result<f64> {
    if !(cos_angle.abs() <= 1.0) {
        return Err(Error::domain(format!("cosine must lie in [-1, 1], got {cos_angle}")));
    }
    let mut s = 0.0;
    for ell in 0..=lmax {
        let p = legendre_p_unchecked(ell, cos_angle);
        s += (2.0 * ell as f64 + 1.0) * coefficient_variance(model, ell, t)? * p;
    }
    Ok(s)
}

/// Var[U(x,t) - U(y,t)] = 2Σ(2ℓ+1)E|V_ℓ|²(1 - P_ℓ(x·y)), truncated at
/// `lmax`. Summing 1 - P_ℓ directly avoids the cancellation in
/// 2(cov(1) - cov(x·y)) at small angles.
pub fn increment_structure(model: &FractionalModel, t: f64, angle: f64, lmax: usize) -> Result<f64> {
    if !(0.0..=std::f64::consts::PI).contains(&angle) {
        return Err(Error::domain(format!("angle must lie in [0, pi], got {angle}")));
    }
    let x = angle.cos();
    // 1 - P_ℓ(x) via the recurrence for D_ℓ = P_ℓ - 1 with x - 1 = -2sin²(θ/2).
    let xm1 = -2.0 * (0.5 * angle).sin().powi(2);
    let (mut d0, mut d1) = (0.0, xm1);
    let mut s = 0.0;
    for ell in 1..=lmax {
        if ell >= 2 {
            let k = ell as f64;
            // P_k = ((2k-1)x P_{k-1} - (k-1)P_{k-2})/k rewritten for D = P - 1.
            let d2 = ((2.0 * k - 1.0) * (x * d1 + xm1) - (k - 1.0) * d0) / k;
            d0 = d1;
            d1 = d2;
        }
        s += (2.0 * ell as f64 + 1.0) * coefficient_variance(model, ell, t)? * (-d1);
    }
    Ok(2.0 * s)
}

/// Spectrum view of a model's algebraic parts, for bound computations.
pub fn algebraic_spectra(model: &FractionalModel) -> Option<(&AlgebraicSpectrum, &AlgebraicSpectrum)> {
    Some((model.spec_c.algebraic()?, model.spec_a.algebraic()?))
}

/// Write `set` to `path` as CSV (`.csv`) or the binary layout (anything else).
pub fn write_coefficients(set: &CoefficientSet, path: &Path) -> Result<()> {
    if path.extension().is_some_and(|e| e == "csv") {
        set.write_csv(path)
    } else {
        set.write_binary(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn sigma_examples() {
        assert_eq!(sigma_squared(0, 3.0, 0.4).unwrap(), 3.0);
        assert_eq!(sigma_squared(7, 0.0, 0.4).unwrap(), 0.0);
        let want = (1.0 - (-4.0f64).exp()) / 4.0;
        assert!(rel(sigma_squared(1, 1.0, 1.0).unwrap(), want) < 1e-12);
        assert!(sigma_squared(1, -1.0, 0.5).is_err());
        assert!(sigma_squared(1, 1.0, 0.0).is_err());
    }

    #[test]
    fn sigma_matches_exponential_closed_form() {
        for ell in [1usize, 2, 10, 50, 100] {
            for t in [1e-4, 1e-2, 1.0, 10.0] {
                let lam = lambda(ell);
                let want = -(-2.0 * lam * t).exp_m1() / (2.0 * lam);
                let got = sigma_squared(ell, t, 1.0).unwrap();
                assert!(rel(got, want) < 1e-10, "ell={ell} t={t}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn sigma_half_order_reference() {
        // ∫_0^1 erfcx(6√r)² dr for ℓ = 2 (λ = 6), from a 30-digit quadrature.
        let got = sigma_squared(2, 1.0, 0.5).unwrap();
        assert!(rel(got, SIGMA_HALF_L2_T1) < 1e-10, "{got}");
    }
    const SIGMA_HALF_L2_T1: f64 = 0.035_397_520_888_342_193;

    #[test]
    fn sigma_bound_examples() {
        assert!(rel(sigma_squared_bound(1, 1.0, 1.0).unwrap(), 1.0) < 1e-15);
        let want = (1.0 + std::f64::consts::FRAC_PI_4 * 9000f64.ln()) / 900.0;
        assert!(rel(sigma_squared_bound(5, 10.0, 0.5).unwrap(), want) < 1e-14);
        assert!(sigma_squared_bound(0, 1.0, 0.5).is_err());
        assert!(!sigma_bound_applies(1, 0.1, 0.5));
        assert!(sigma_bound_applies(1, 0.5, 0.5));
    }

    #[test]
    fn cross_sigma_examples() {
        let s = sigma_squared(3, 0.7, 0.6).unwrap();
        assert_eq!(cross_sigma(3, 0.7, 0.0, 0.6).unwrap(), s);
        assert_eq!(cross_sigma(0, 0.7, 0.2, 0.6).unwrap(), 0.7);
        let want = (-2.0f64 * 0.5).exp() * (1.0 - (-4.0f64).exp()) / 4.0;
        assert!(rel(cross_sigma(1, 1.0, 0.5, 1.0).unwrap(), want) < 1e-11);
        assert!(rel(want, 0.090_285_373_543_089_21) < 1e-14);
    }

    #[test]
    fn csv_and_binary_round_trip() {
        let m = FractionalModel::reference(0.75).unwrap();
        let set = sample_combined(&m, 12, 1e-4, RngStream::new(9, 2)).unwrap();
        let back = CoefficientSet::from_csv_reader(set.to_csv_string().as_bytes()).unwrap();
        assert_eq!(back.values, set.values);
        let back = CoefficientSet::from_bytes(&set.to_bytes()).unwrap();
        assert_eq!(back.values, set.values);
        let bytes = set.to_bytes();
        assert_eq!(&bytes[..4], b"SFDC");
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 12);
        assert!(CoefficientSet::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        assert!(CoefficientSet::from_csv_reader("l,m\n".as_bytes()).is_err());
    }

    #[test]
    fn initial_zero_spectrum_is_zero() {
        let z: Spectrum = AlgebraicSpectrum::zero().into();
        let set = sample_initial(&z, 10, RngStream::new(1, 0));
        assert!(set.values.iter().all(|v| *v == Complex64::new(0.0, 0.0)));
    }

    #[test]
    fn draws_are_reproducible_and_distinct() {
        let m = FractionalModel::reference(0.5).unwrap();
        let a = sample_combined(&m, 30, 2e-5, RngStream::new(5, 3)).unwrap();
        let b = sample_combined(&m, 30, 2e-5, RngStream::new(5, 3)).unwrap();
        assert_eq!(a.to_bytes(), b.to_bytes());
        let c = sample_combined(&m, 30, 2e-5, RngStream::new(5, 4)).unwrap();
        assert_ne!(a.values, c.values);
        // Truncating a high-degree draw gives the low-degree draw.
        let big = sample_combined(&m, 60, 2e-5, RngStream::new(5, 3)).unwrap();
        assert_eq!(big.truncated(30).values, a.values);
    }

    #[test]
    fn evolution_identities() {
        let m = FractionalModel::reference(0.5).unwrap();
        let init = sample_initial(&m.spec_c, 8, RngStream::new(1, 1));
        assert_eq!(evolve_homogeneous(&init, 0.0, 0.5).unwrap().values, init.values);
        let ev = evolve_homogeneous(&init, 0.3, 0.5).unwrap();
        assert_eq!(ev.get(0, 0), init.get(0, 0));
    }

    #[test]
    fn inhomogeneous_before_onset_is_zero() {
        let a: Spectrum = AlgebraicSpectrum::new(1e4, 1e4, 2.5).unwrap().into();
        let set = sample_inhomogeneous(&a, 10, 1e-5, 1e-5, 0.5, RngStream::new(1, 0)).unwrap();
        assert!(set.values.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn pair_first_member_matches_single_draw() {
        let m = FractionalModel::reference(0.5).unwrap();
        let rng = RngStream::new(11, 7);
        let (p, q) = sample_combined_pair(&m, 20, 2e-5, 1e-6, rng).unwrap();
        let single = sample_combined(&m, 20, 2e-5, rng).unwrap();
        assert_eq!(p.values, single.values);
        assert_eq!(q.time, 2e-5 + 1e-6);
        assert!(sample_combined_pair(&m, 20, 1e-5, 1e-6, rng).is_err());
    }

    #[test]
    fn variance_examples() {
        let m = FractionalModel::reference(0.5).unwrap();
        assert_eq!(coefficient_variance(&m, 0, 1e-6).unwrap(), 1.0);
        let no_noise = FractionalModel::new(0.5, 1e-5, m.spec_c.clone(), AlgebraicSpectrum::zero().into()).unwrap();
        let e = decay_factor(4, 1e-4, 0.5).unwrap();
        assert!(rel(coefficient_variance(&no_noise, 4, 1e-4).unwrap(), 4f64.powf(-2.3) * e * e) < 1e-14);
    }

    #[test]
    fn covariance_at_zero_lag_is_total_variance() {
        let m = FractionalModel::reference(0.75).unwrap();
        let t = 1e-4;
        let total: f64 = (0..=40).map(|l| (2.0 * l as f64 + 1.0) * coefficient_variance(&m, l, t).unwrap()).sum();
        assert!(rel(covariance_function(&m, t, 1.0, 40).unwrap(), total) < 1e-13);
        let cov1 = covariance_function(&m, t, 1.0, 40).unwrap();
        let cov = covariance_function(&m, t, 0.3f64.cos(), 40).unwrap();
        let st = increment_structure(&m, t, 0.3, 40).unwrap();
        assert!(rel(st, 2.0 * (cov1 - cov)) < 1e-11);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn sigma_monotone_and_below_t(ell in 1usize..200, lt in -6.0f64..1.0, alpha in 0.3f64..=1.0) {
            let t = 10f64.powf(lt);
            let a = sigma_squared(ell, t, alpha).unwrap();
            let b = sigma_squared(ell, 1.5 * t, alpha).unwrap();
            let c = sigma_squared(ell + 1, t, alpha).unwrap();
            prop_assert!(a > 0.0 && a <= t);
            prop_assert!(b > a);
            prop_assert!(c <= a * (1.0 + 1e-12));
            if sigma_bound_applies(ell, t, alpha) {
                prop_assert!(a <= sigma_squared_bound(ell, t, alpha).unwrap());
            }
        }

        #[test]
        fn cross_sigma_obeys_cauchy_schwarz(ell in 1usize..100, ls in -6.0f64..0.0, lh in -7.0f64..0.0, alpha in 0.4f64..=1.0) {
            let (s, h) = (10f64.powf(ls), 10f64.powf(lh));
            let c = cross_sigma(ell, s, h, alpha).unwrap();
            let a = sigma_squared(ell, s, alpha).unwrap();
            let b = sigma_squared(ell, s + h, alpha).unwrap();
            prop_assert!(c >= 0.0 && c <= (a * b).sqrt() * (1.0 + 1e-10));
        }
    }
}
