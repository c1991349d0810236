//! Angular power spectra and the closed-form constants and error bounds of
//! the truncated solution.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::specfun::{gamma, ml_neg, MLParams};

/// λ_ℓ = ℓ(ℓ+1), the eigenvalue of -Δ on degree ℓ.
pub fn lambda(ell: usize) -> f64 {
    let l = ell as f64;
    l * (l + 1.0)
}

/// X_0 = head, X_ℓ = coeff·ℓ^{-κ} for ℓ ≥ 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlgebraicSpectrum {
    pub head: f64,
    pub coeff: f64,
    pub kappa: f64,
}

impl AlgebraicSpectrum {
    pub fn new(head: f64, coeff: f64, kappa: f64) -> Result<Self> {
        let s = AlgebraicSpectrum { head, coeff, kappa };
        s.validate()?;
        Ok(s)
    }

    pub fn zero() -> Self {
        AlgebraicSpectrum {
            head: 0.0,
            coeff: 0.0,
            kappa: 3.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.head >= 0.0 && self.head.is_finite()) || !(self.coeff >= 0.0 && self.coeff.is_finite()) {
            return Err(Error::domain(format!(
                "spectrum head and coeff must be finite and >= 0, got {} and {}",
                self.head, self.coeff
            )));
        }
        if !(self.kappa > 2.0) || !self.kappa.is_finite() {
            return Err(Error::domain(format!("spectrum decay kappa must exceed 2, got {}", self.kappa)));
        }
        Ok(())
    }

    pub fn value(&self, ell: usize) -> f64 {
        if ell == 0 {
            self.head
        } else {
            self.coeff * (ell as f64).powf(-self.kappa)
        }
    }

    pub fn is_zero(&self) -> bool {
        self.head == 0.0 && self.coeff == 0.0
    }
}

/// A power spectrum given either in algebraic form or as an explicit list
/// `[X_0, X_1, ...]` (zero beyond the list). Only the algebraic form carries
/// the decay exponent that the error bounds need.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Spectrum {
    // Listed first: serde would otherwise read a 3-element list as a struct.
    Tabulated(Vec<f64>),
    Algebraic(AlgebraicSpectrum),
}

impl Spectrum {
    pub fn validate(&self) -> Result<()> {
        match self {
            Spectrum::Algebraic(s) => s.validate(),
            Spectrum::Tabulated(v) => {
                if let Some(bad) = v.iter().find(|x| !(**x >= 0.0 && x.is_finite())) {
                    return Err(Error::domain(format!("tabulated spectrum values must be finite and >= 0, found {bad}")));
                }
                Ok(())
            }
        }
    }

    pub fn value(&self, ell: usize) -> f64 {
        match self {
            Spectrum::Algebraic(s) => s.value(ell),
            Spectrum::Tabulated(v) => v.get(ell).copied().unwrap_or(0.0),
        }
    }

    pub fn algebraic(&self) -> Option<&AlgebraicSpectrum> {
        match self {
            Spectrum::Algebraic(s) => Some(s),
            Spectrum::Tabulated(_) => None,
        }
    }
}

impl From<AlgebraicSpectrum> for Spectrum {
    fn from(s: AlgebraicSpectrum) -> Self {
        Spectrum::Algebraic(s)
    }
}

/// sqrt(coeff·(2/(κ-2) + 1/(κ-1))); bounds Σ_{ℓ>L}(2ℓ+1)X_ℓ by its square
/// times L^{2-κ}.
pub fn tail_constant(s: &AlgebraicSpectrum) -> Result<f64> {
    s.validate()?;
    let k = s.kappa;
    Ok((s.coeff * (2.0 / (k - 2.0) + 1.0 / (k - 1.0))).sqrt())
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::domain(format!("alpha must lie in (0, 1], got {alpha}")));
    }
    Ok(())
}

fn check_time(t: f64, what: &str) -> Result<()> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::domain(format!("{what} must be positive and finite, got {t}")));
    }
    Ok(())
}

/// M_α = Γ(1+α)²/|2α-1|, and Γ(3/2)² at α = 1/2.
pub fn m_alpha(alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let g = gamma(1.0 + alpha)?;
    if alpha == 0.5 {
        Ok(g * g)
    } else {
        Ok(g * g / (2.0 * alpha - 1.0).abs())
    }
}

/// γ_α(κ₂): κ₂+2 for α < 1/2, κ₂ for α = 1/2, κ₂+2/α-2 for α > 1/2.
pub fn gamma_alpha_kappa(alpha: f64, kappa2: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if !(kappa2 > 2.0) {
        return Err(Error::domain(format!("kappa2 must exceed 2, got {kappa2}")));
    }
    Ok(if alpha < 0.5 {
        kappa2 + 2.0
    } else if alpha == 0.5 {
        kappa2
    } else {
        kappa2 + 2.0 / alpha - 2.0
    })
}

/// ψ^H_α(t) = Γ(1+α) t^{-α}.
pub fn psi_h(alpha: f64, t: f64) -> Result<f64> {
    check_alpha(alpha)?;
    check_time(t, "t")?;
    Ok(gamma(1.0 + alpha)? * t.powf(-alpha))
}

/// K(t) = sqrt(1 + M_{1/2}(2 + ln t)) for t > 1, sqrt(1 + 2M_{1/2}) otherwise.
pub fn k_half(t: f64) -> Result<f64> {
    check_time(t, "t")?;
    let m = m_alpha(0.5)?;
    Ok(if t > 1.0 {
        (1.0 + m * (2.0 + t.ln())).sqrt()
    } else {
        (1.0 + 2.0 * m).sqrt()
    })
}

/// ψ^I_α(t).
pub fn psi_i(alpha: f64, t: f64) -> Result<f64> {
    check_alpha(alpha)?;
    check_time(t, "t")?;
    let m = m_alpha(alpha)?;
    if alpha < 0.5 {
        Ok((1.0 + m * t.powf(1.0 - 2.0 * alpha)).sqrt())
    } else if alpha == 0.5 {
        k_half(t)
    } else {
        Ok((1.0 + m).sqrt())
    }
}

fn check_degree(l: usize) -> Result<()> {
    if l == 0 {
        return Err(Error::domain("truncation degree L must be at least 1"));
    }
    Ok(())
}

/// λ_L^{-1/α}, the time scale on which degree-L modes relax.
pub fn relaxation_time(l: usize, alpha: f64) -> f64 {
    lambda(l).powf(-1.0 / alpha)
}

/// Bound on the truncation error of the homogeneous part.
pub fn bound_qh(l: usize, t: f64, alpha: f64, spec_c: &AlgebraicSpectrum) -> Result<f64> {
    check_degree(l)?;
    check_alpha(alpha)?;
    check_time(t, "t")?;
    let c = tail_constant(spec_c)?;
    let k1 = spec_c.kappa;
    let lf = l as f64;
    if t <= relaxation_time(l, alpha) {
        Ok(c * lf.powf(-(k1 - 2.0) / 2.0))
    } else {
        Ok(psi_h(alpha, t)? * c * lf.powf(-(2.0 + k1) / 2.0))
    }
}

/// Bound on the truncation error of the inhomogeneous part, for t > τ.
pub fn bound_qi(l: usize, t: f64, tau: f64, alpha: f64, spec_a: &AlgebraicSpectrum) -> Result<f64> {
    check_degree(l)?;
    check_alpha(alpha)?;
    check_time(tau, "tau")?;
    if !(t > tau) {
        return Err(Error::domain(format!("the inhomogeneous bound needs t > tau, got t={t}, tau={tau}")));
    }
    let a = tail_constant(spec_a)?;
    let k2 = spec_a.kappa;
    let lf = l as f64;
    if t <= tau + relaxation_time(l, alpha) {
        Ok(a * lf.powf(-(k2 + 2.0 / alpha - 2.0) / 2.0))
    } else {
        Ok(psi_i(alpha, t - tau)? * a * lf.powf(-gamma_alpha_kappa(alpha, k2)? / 2.0))
    }
}

/// Regime of the combined truncation bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundCase {
    /// t ≤ λ_L^{-1/α} ≤ τ.
    I,
    /// λ_L^{-1/α} < t ≤ τ + λ_L^{-1/α}.
    II,
    /// t > τ + λ_L^{-1/α}.
    III,
}

impl BoundCase {
    pub fn label(self) -> &'static str {
        match self {
            BoundCase::I => "I",
            BoundCase::II => "II",
            BoundCase::III => "III",
        }
    }
}

/// Combined truncation bound with its regime and the decay exponent in L
/// (the bound is a constant times L^{-exponent}).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QBound {
    pub case: BoundCase,
    pub value: f64,
    pub exponent: f64,
}

/// Bound on ||U(t) - U_L(t)||. Boundary points go to the earlier case.
pub fn bound_q_combined(
    l: usize,
    t: f64,
    tau: f64,
    alpha: f64,
    spec_c: &AlgebraicSpectrum,
    spec_a: &AlgebraicSpectrum,
) -> Result<QBound> {
    check_degree(l)?;
    check_alpha(alpha)?;
    check_time(t, "t")?;
    check_time(tau, "tau")?;
    let c = tail_constant(spec_c)?;
    let a = tail_constant(spec_a)?;
    let (k1, k2) = (spec_c.kappa, spec_a.kappa);
    let lf = l as f64;
    let tl = relaxation_time(l, alpha);

    if t <= tl {
        if tau >= tl {
            let exponent = (k1 - 2.0) / 2.0;
            return Ok(QBound {
                case: BoundCase::I,
                value: c * lf.powf(-exponent),
                exponent,
            });
        }
        return Err(Error::domain(format!(
            "t={t} <= lambda_L^(-1/alpha)={tl:e} requires tau >= lambda_L^(-1/alpha) (case I), but tau={tau}"
        )));
    }
    let ph = psi_h(alpha, t)? * c;
    if t <= tau + tl {
        let kappa_hat = (k1 + 2.0).min(k2 + 2.0 / alpha - 2.0);
        let exponent = kappa_hat / 2.0;
        return Ok(QBound {
            case: BoundCase::II,
            value: (ph * ph + a * a).sqrt() * lf.powf(-exponent),
            exponent,
        });
    }
    let pi = psi_i(alpha, t - tau)? * a;
    let kappa_alpha = (k1 + 2.0).min(gamma_alpha_kappa(alpha, k2)?);
    let exponent = kappa_alpha / 2.0;
    Ok(QBound {
        case: BoundCase::III,
        value: (ph * ph + pi * pi).sqrt() * lf.powf(-exponent),
        exponent,
    })
}

/// q(t)·√h with q(t) = sqrt(c·C̃²/t + (1+c)·Ã²).
pub fn increment_bound(
    t: f64,
    h: f64,
    tau: f64,
    alpha: f64,
    spec_c: &AlgebraicSpectrum,
    spec_a: &AlgebraicSpectrum,
    c: f64,
) -> Result<f64> {
    check_alpha(alpha)?;
    check_time(tau, "tau")?;
    check_time(h, "h")?;
    if !(t > tau) {
        return Err(Error::domain(format!("the increment bound needs t > tau, got t={t}, tau={tau}")));
    }
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::domain(format!("increment constant c must be positive, got {c}")));
    }
    let ct = tail_constant(spec_c)?;
    let at = tail_constant(spec_a)?;
    let q = (c * ct * ct / t + (1.0 + c) * at * at).sqrt();
    Ok(q * h.sqrt())
}

fn increment_c_cache() -> &'static Mutex<HashMap<u64, f64>> {
    static CACHE: OnceLock<Mutex<HashMap<u64, f64>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Grid points per decade used when measuring the increment constant.
const INCREMENT_C_PER_DECADE: usize = 40;

/// max over a log grid x ∈ [1e-6, 1e8] of (1+x)·E_{α,α}(-x); computed once
/// per α and cached.
pub fn measured_increment_c(alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if let Some(&c) = increment_c_cache().lock().expect("cache poisoned").get(&alpha.to_bits()) {
        return Ok(c);
    }
    let p = MLParams::new(alpha, alpha)?;
    let n = 14 * INCREMENT_C_PER_DECADE;
    let mut c = 0.0f64;
    for i in 0..=n {
        let x = 10f64.powf(-6.0 + 14.0 * i as f64 / n as f64);
        c = c.max((1.0 + x) * ml_neg(p, x)?);
    }
    increment_c_cache().lock().expect("cache poisoned").insert(alpha.to_bits(), c);
    Ok(c)
}

/// Default truncation degree for the Hölder-constant series.
pub const HOLDER_LMAX: usize = 100_000;

fn check_holder(beta_star: f64, s: &AlgebraicSpectrum) -> Result<()> {
    s.validate()?;
    if !(s.kappa > 2.0 * (1.0 + beta_star)) {
        return Err(Error::domain(format!(
            "Hoelder bound needs kappa > 2(1+beta*) = {}, got kappa={}",
            2.0 * (1.0 + beta_star),
            s.kappa
        )));
    }
    Ok(())
}

/// Σ_{ℓ=1}^{lmax} ℓ^{1+2β*}X_ℓ.
pub fn holder_partial_sum(beta_star: f64, s: &AlgebraicSpectrum, lmax: usize) -> Result<f64> {
    check_holder(beta_star, s)?;
    let p = 1.0 + 2.0 * beta_star;
    Ok((1..=lmax).map(|ell| (ell as f64).powf(p) * s.value(ell)).sum())
}

/// The partial sum to `lmax` plus the integral bound
/// coeff·lmax^{2+2β*-κ}/(κ-2-2β*) on the remainder, so the result bounds the
/// full series from above.
pub fn holder_series(beta_star: f64, s: &AlgebraicSpectrum, lmax: usize) -> Result<f64> {
    let partial = holder_partial_sum(beta_star, s, lmax)?;
    let e = s.kappa - 2.0 - 2.0 * beta_star;
    Ok(partial + s.coeff * (lmax as f64).powf(-e) / e)
}

/// K_{β*} = 2^{4-β*}(K⁽¹⁾ + (t-τ)K⁽²⁾·1_{t>τ}), the constant in
/// Var[U(x,t) - U(y,t)] ≤ K_{β*} d(x,y)^{2β*}.
pub fn holder_envelope(
    beta_star: f64,
    t: f64,
    tau: f64,
    spec_c: &AlgebraicSpectrum,
    spec_a: &AlgebraicSpectrum,
    lmax: usize,
) -> Result<f64> {
    if !(beta_star > 0.0 && beta_star <= 1.0) {
        return Err(Error::domain(format!("beta* must lie in (0, 1], got {beta_star}")));
    }
    check_time(t, "t")?;
    check_time(tau, "tau")?;
    if lmax == 0 {
        return Err(Error::domain("Hoelder series needs lmax >= 1"));
    }
    let k1 = holder_series(beta_star, spec_c, lmax)?;
    let k2 = holder_series(beta_star, spec_a, lmax)?;
    let inhom = if t > tau { (t - tau) * k2 } else { 0.0 };
    Ok(2f64.powf(4.0 - beta_star) * (k1 + inhom))
}

/// The constants reported alongside every bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundConstants {
    #[serde(rename = "c_tail_C")]
    pub c_tail_c: f64,
    #[serde(rename = "c_tail_A")]
    pub c_tail_a: f64,
    pub m_alpha: f64,
    pub gamma_alpha: f64,
    pub increment_c: f64,
}

impl BoundConstants {
    /// `increment_c` overrides the measured constant when given.
    pub fn compute(
        alpha: f64,
        spec_c: &AlgebraicSpectrum,
        spec_a: &AlgebraicSpectrum,
        increment_c: Option<f64>,
    ) -> Result<Self> {
        let increment_c = match increment_c {
            Some(c) if c > 0.0 && c.is_finite() => c,
            Some(c) => return Err(Error::config("increment_c", format!("must be positive, got {c}"))),
            None => measured_increment_c(alpha)?,
        };
        Ok(BoundConstants {
            c_tail_c: tail_constant(spec_c)?,
            c_tail_a: tail_constant(spec_a)?,
            m_alpha: m_alpha(alpha)?,
            gamma_alpha: gamma_alpha_kappa(alpha, spec_a.kappa)?,
            increment_c,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1e-300)
    }

    #[test]
    fn spectrum_examples() {
        let c = AlgebraicSpectrum::new(1.0, 1.0, 2.3).unwrap();
        assert_eq!(c.value(0), 1.0);
        assert_eq!(c.value(1), 1.0);
        let a = AlgebraicSpectrum::new(1e4, 1e4, 2.5).unwrap();
        assert!(close(a.value(10), 31.622_776_601_683_79, 1e-14));
        assert!(AlgebraicSpectrum::new(1.0, 1.0, 2.0).is_err());
        assert!(AlgebraicSpectrum::new(-1.0, 1.0, 3.0).is_err());
    }

    #[test]
    fn tabulated_spectrum() {
        let s: Spectrum = serde_json::from_str("[1.0, 0.5, 0.25]").unwrap();
        assert_eq!(s.value(2), 0.25);
        assert_eq!(s.value(3), 0.0);
        assert!(s.algebraic().is_none());
        let a: Spectrum = serde_json::from_str(r#"{"head": 1, "coeff": 2, "kappa": 3}"#).unwrap();
        assert_eq!(a.value(1), 2.0);
    }

    #[test]
    fn tail_constant_examples() {
        let t = |coeff, kappa| tail_constant(&AlgebraicSpectrum::new(0.0, coeff, kappa).unwrap()).unwrap();
        assert!(close(t(1.0, 2.3), (2.0f64 / 0.3 + 1.0 / 1.3).sqrt(), 1e-15));
        assert!(close(t(1.0, 2.3), 2.726_884_2, 1e-7));
        assert!(close(t(1e4, 2.5), 216.024_689_9, 1e-9));
        assert_eq!(t(0.0, 3.0), 0.0);
    }

    #[test]
    fn m_alpha_examples() {
        assert!(close(m_alpha(0.5).unwrap(), std::f64::consts::FRAC_PI_4, 1e-14));
        assert!(close(m_alpha(1.0).unwrap(), 1.0, 1e-14));
        // 2·Γ(1.75)²
        assert!(close(m_alpha(0.75).unwrap(), 1.689_351_856_515_708_4, 1e-13));
        assert!(m_alpha(0.0).is_err());
        assert!(m_alpha(1.5).is_err());
    }

    #[test]
    fn gamma_alpha_examples() {
        assert_eq!(gamma_alpha_kappa(0.5, 2.5).unwrap(), 2.5);
        assert!(close(gamma_alpha_kappa(0.75, 2.5).unwrap(), 2.5 + 8.0 / 3.0 - 2.0, 1e-15));
        assert_eq!(gamma_alpha_kappa(1.0, 2.7).unwrap(), 2.7);
        assert_eq!(gamma_alpha_kappa(0.25, 2.5).unwrap(), 4.5);
        assert!(gamma_alpha_kappa(0.0, 2.5).is_err());
    }

    #[test]
    fn psi_examples() {
        assert!(close(psi_h(0.5, 1.0).unwrap(), 0.886_226_925_452_758, 1e-14));
        assert!(close(psi_h(1.0, 2.0).unwrap(), 0.5, 1e-15));
        assert!(close(psi_h(0.75, 1e-4).unwrap(), 919.062_526_848_883_2, 1e-12));
        assert!(psi_h(0.5, 0.0).is_err());
        assert!(close(psi_i(0.75, 3.0).unwrap(), 1.639_924_344_753_656, 1e-13));
        assert!(close(psi_i(0.5, 0.5).unwrap(), (1.0 + std::f64::consts::FRAC_PI_2).sqrt(), 1e-14));
        let e2 = 2f64.exp();
        assert!(close(psi_i(0.5, e2).unwrap(), (1.0 + std::f64::consts::PI).sqrt(), 1e-14));
        assert!(psi_i(0.5, -1.0).is_err());
    }

    fn sc() -> AlgebraicSpectrum {
        AlgebraicSpectrum::new(1.0, 1.0, 2.3).unwrap()
    }
    fn sa() -> AlgebraicSpectrum {
        AlgebraicSpectrum::new(1e4, 1e4, 2.5).unwrap()
    }

    #[test]
    fn qh_examples() {
        let c = tail_constant(&sc()).unwrap();
        assert!(close(bound_qh(100, 1e-12, 0.5, &sc()).unwrap(), c * 100f64.powf(-0.15), 1e-14));
        assert!(close(bound_qh(100, 1e-12, 0.5, &sc()).unwrap(), 1.366_7, 1e-3));
        let tl = relaxation_time(7, 0.5);
        assert!(close(bound_qh(7, tl, 0.5, &sc()).unwrap(), c * 7f64.powf(-0.15), 1e-14));
        assert!(close(bound_qh(100, 1.0, 1.0, &sc()).unwrap(), c * 100f64.powf(-2.15), 1e-14));
    }

    #[test]
    fn qi_examples() {
        let a = tail_constant(&sa()).unwrap();
        let tau = 1e-5;
        let t = tau + lambda(100).powi(-2);
        assert!(close(bound_qi(100, t, tau, 0.5, &sa()).unwrap(), a * 100f64.powf(-2.25), 1e-14));
        let want = psi_i(0.5, 9e-5).unwrap() * a * 100f64.powf(-1.25);
        assert!(close(bound_qi(100, 10.0 * tau, tau, 0.5, &sa()).unwrap(), want, 1e-14));
        assert_eq!(bound_qi(100, 1.0, tau, 0.5, &AlgebraicSpectrum::zero()).unwrap(), 0.0);
        assert!(bound_qi(100, tau, tau, 0.5, &sa()).is_err());
    }

    #[test]
    fn combined_cases() {
        let tau = 1e-5;
        let q = bound_q_combined(100, 10.0 * tau, tau, 0.5, &sc(), &sa()).unwrap();
        assert_eq!(q.case, BoundCase::III);
        assert!(close(q.exponent, 1.25, 1e-15));
        let q = bound_q_combined(100, 10.0 * tau, tau, 0.75, &sc(), &sa()).unwrap();
        assert!(close(q.exponent, 3.166_666_666_666_667 / 2.0, 1e-14));
        // Case II for α = 1/2 just after the relaxation time.
        let tl = relaxation_time(100, 0.5);
        let q = bound_q_combined(100, 2.0 * tl, tau, 0.5, &sc(), &sa()).unwrap();
        assert_eq!(q.case, BoundCase::II);
        assert!(close(q.exponent, 2.15, 1e-15));
        let q = bound_q_combined(100, 1e-12, tau, 0.5, &sc(), &sa()).unwrap();
        assert_eq!(q.case, BoundCase::I);
        assert!(close(q.exponent, 0.15, 1e-14));
        // Boundary t = λ_L^{-1/α} belongs to case I.
        let q = bound_q_combined(100, tl, tau, 0.5, &sc(), &sa()).unwrap();
        assert_eq!(q.case, BoundCase::I);
        // Small L: τ < λ_L^{-1/α} leaves case I's second condition violated.
        let e = bound_q_combined(1, 1e-12, tau, 0.5, &sc(), &sa()).unwrap_err();
        assert!(e.to_string().contains("tau"));
    }

    #[test]
    fn increment_examples() {
        let tau = 1e-5;
        let t = tau + 1e-6;
        let v = increment_bound(t, 1e-6, tau, 0.5, &sc(), &sa(), 1.0).unwrap();
        let want = (7.435_897_435_897_436f64 / 1.1e-5 + 2.0 * 46_666.666_666_666_67).sqrt() * 1e-3;
        assert!(close(v, want, 1e-12));
        let z = AlgebraicSpectrum::zero();
        let v = increment_bound(t, 1e-6, tau, 0.5, &z, &sa(), 3.0).unwrap();
        assert!(close(v, 2.0 * tail_constant(&sa()).unwrap() * 1e-3, 1e-14));
        let r = increment_bound(t, 4e-6, tau, 0.5, &sc(), &sa(), 1.0).unwrap()
            / increment_bound(t, 1e-6, tau, 0.5, &sc(), &sa(), 1.0).unwrap();
        assert!(close(r, 2.0, 1e-14));
        assert!(increment_bound(tau, 1e-6, tau, 0.5, &sc(), &sa(), 1.0).is_err());
    }

    #[test]
    fn measured_c_dominates_ml_bound() {
        for &alpha in &[0.5, 0.75, 1.0] {
            let c = measured_increment_c(alpha).unwrap();
            // The grid starts at x = 1e-6, where (1+x)E_{α,α}(-x) ≈ 1/Γ(α).
            assert!(c >= 0.999_99 / gamma(alpha).unwrap());
            assert!(c.is_finite() && c < 10.0);
            // Cached value is stable.
            assert_eq!(c, measured_increment_c(alpha).unwrap());
        }
        // (1+x)e^{-x} decreases on the grid, so the maximum is at x = 1e-6.
        assert!(close(measured_increment_c(1.0).unwrap(), 1.0, 1e-12));
    }

    #[test]
    fn holder_examples() {
        let tau = 1e-5;
        let a = holder_envelope(0.1, tau / 2.0, tau, &sc(), &sa(), 1000).unwrap();
        let k1 = holder_series(0.1, &sc(), 1000).unwrap();
        assert!(close(a, 2f64.powf(3.9) * k1, 1e-14));
        // κ = 4.5, β* = 1: 2³ Σ ℓ³ ℓ^{-4.5} plus the tail remainder.
        let s = AlgebraicSpectrum::new(1.0, 1.0, 4.5).unwrap();
        let direct: f64 = (1..=500).map(|l| (l as f64).powf(-1.5)).sum::<f64>() + 500f64.powf(-0.5) / 0.5;
        let got = holder_envelope(1.0, tau / 2.0, tau, &s, &AlgebraicSpectrum::new(0.0, 0.0, 4.5).unwrap(), 500).unwrap();
        assert!(close(got, 8.0 * direct, 1e-12));
        assert!(holder_envelope(0.2, 1.0, tau, &sc(), &sa(), 10).is_err());
    }

    #[test]
    fn bound_constants_json_keys() {
        let b = BoundConstants::compute(0.5, &sc(), &sa(), Some(1.5)).unwrap();
        let v: serde_json::Value = serde_json::to_value(b).unwrap();
        for k in ["c_tail_C", "c_tail_A", "m_alpha", "gamma_alpha", "increment_c"] {
            assert!(v.get(k).is_some(), "missing {k}");
        }
        assert!(BoundConstants::compute(0.5, &sc(), &sa(), Some(-1.0)).is_err());
    }

    proptest! {
        #[test]
        fn tail_constant_dominates_tails(kappa in 2.05f64..6.0, l in 1usize..=500) {
            let s = AlgebraicSpectrum::new(0.0, 1.0, kappa).unwrap();
            let c = tail_constant(&s).unwrap();
            // Summed tail to a large cutoff plus the exact integral remainder.
            let cut = 200_000usize;
            let mut tail = 0.0;
            for ell in (l + 1)..=cut {
                tail += (2.0 * ell as f64 + 1.0) * s.value(ell);
            }
            let cf = cut as f64;
            tail += 2.0 * cf.powf(2.0 - kappa) / (kappa - 2.0) + cf.powf(1.0 - kappa) / (kappa - 1.0);
            prop_assert!(tail <= c * c * (l as f64).powf(2.0 - kappa) * (1.0 + 1e-12));
        }

        #[test]
        fn combined_bound_nonincreasing_in_l(alpha in 0.3f64..=1.0, lt in -6.0f64..0.0, l in 1usize..400) {
            let tau = 1e-5;
            let t = 10f64.powf(lt);
            let a = bound_q_combined(l, t, tau, alpha, &sc(), &sa());
            let b = bound_q_combined(l + 1, t, tau, alpha, &sc(), &sa());
            if let (Ok(a), Ok(b)) = (a, b) {
                if a.case == b.case {
                    prop_assert!(b.value <= a.value * (1.0 + 1e-12));
                }
            }
        }

        #[test]
        fn holder_sums_bracket_the_series(l in 1usize..2000) {
            let a = holder_partial_sum(0.1, &sc(), l).unwrap();
            let b = holder_partial_sum(0.1, &sc(), l + 50).unwrap();
            prop_assert!(b >= a);
            // Partial sums rise, remainder-corrected values fall.
            let ua = holder_series(0.1, &sc(), l).unwrap();
            let ub = holder_series(0.1, &sc(), l + 50).unwrap();
            prop_assert!(ub <= ua * (1.0 + 1e-12));
            prop_assert!(ub >= b);
        }
    }
}
