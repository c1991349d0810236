//! Gamma, Legendre recursions, spherical harmonics and the Mittag-Leffler
//! function on the negative real axis.
//!
//! Spherical harmonics use the convention in which the surface measure has
//! total mass one, so `Y_{0,0} = 1` and `Σ_m |Y_{ℓ,m}(x)|² = 2ℓ + 1`. They are
//! `√(4π)` times the usual orthonormal harmonics of the unit-area-4π sphere.
//! The Condon–Shortley phase `(-1)^m` sits inside the associated Legendre
//! function.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::quadrature::{self, Tolerance};

/// Γ(x) for positive finite `x`.
pub fn gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::domain(format!("gamma needs a positive finite argument, got {x}")));
    }
    Ok(gamma_pos(x))
}

// The Lanczos sum is most accurate on [1, 2]; the recurrence carries it
// elsewhere at a cost of one rounding per step.
fn gamma_pos(x: f64) -> f64 {
    if !(0.5..=60.0).contains(&x) {
        return statrs::function::gamma::gamma(x);
    }
    let mut z = x;
    let mut scale = 1.0;
    while z >= 2.0 {
        z -= 1.0;
        scale *= z;
    }
    if z < 1.0 {
        scale /= z;
        z += 1.0;
    }
    if z == 1.0 {
        return scale;
    }
    scale * statrs::function::gamma::gamma(z)
}

/// sin(πz) with exact zeros at the integers. Arguments within a few ulps of
/// an integer count as integers, since expressions like `β - αk` land on
/// poles of Γ only up to rounding.
fn sin_pi(z: f64) -> f64 {
    if (z - z.round()).abs() <= 8.0 * f64::EPSILON * z.abs().max(1.0) {
        return 0.0;
    }
    let r = z.rem_euclid(2.0);
    (PI * r).sin()
}

/// 1/Γ(z) for any real `z`; zero at the poles of Γ.
pub(crate) fn rgamma(z: f64) -> f64 {
    if z > 0.0 {
        if z < 170.0 {
            1.0 / gamma_pos(z)
        } else {
            (-statrs::function::gamma::ln_gamma(z)).exp()
        }
    } else {
        let s = sin_pi(z);
        if s == 0.0 {
            return 0.0;
        }
        // 1/Γ(z) = Γ(1-z) sin(πz) / π
        let w = 1.0 - z;
        if w < 170.0 {
            gamma_pos(w) * s / PI
        } else {
            s.signum() * (statrs::function::gamma::ln_gamma(w) + s.abs().ln() - PI.ln()).exp()
        }
    }
}

/// ln|1/Γ(z)| and the sign of 1/Γ(z); `None` at the poles.
fn ln_rgamma_signed(z: f64) -> Option<(f64, f64)> {
    if z > 0.0 {
        return Some((-statrs::function::gamma::ln_gamma(z), 1.0));
    }
    let s = sin_pi(z);
    if s == 0.0 {
        return None;
    }
    Some((statrs::function::gamma::ln_gamma(1.0 - z) + s.abs().ln() - PI.ln(), s.signum()))
}

fn check_unit(x: f64) -> Result<()> {
    if !(x.abs() <= 1.0) {
        return Err(Error::domain(format!("argument must lie in [-1, 1], got {x}")));
    }
    Ok(())
}

/// Legendre polynomial P_ℓ(x) by the three-term recurrence.
pub fn legendre_p(ell: usize, x: f64) -> Result<f64> {
    check_unit(x)?;
    Ok(legendre_p_unchecked(ell, x))
}

pub(crate) fn legendre_p_unchecked(ell: usize, x: f64) -> f64 {
    if ell == 0 {
        return 1.0;
    }
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=ell {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    p1
}

/// Fill `out[ℓ - m]` with N_{ℓ,m}(x) for ℓ = m..=lmax, where
/// N_{ℓ,m} = sqrt((2ℓ+1)(ℓ-m)!/(ℓ+m)!) P_{ℓ,m}(x). The caller supplies
/// `s = sqrt(1 - x²)` so that rings can pass `sin θ` directly.
pub(crate) fn normalized_legendre_column(m: usize, lmax: usize, x: f64, s: f64, out: &mut [f64]) {
    debug_assert!(out.len() > lmax - m);
    let mut pmm = 1.0;
    for k in 1..=m {
        let kf = k as f64;
        pmm *= -s * ((2.0 * kf + 1.0) / (2.0 * kf)).sqrt();
    }
    out[0] = pmm;
    if lmax == m {
        return;
    }
    let mf = m as f64;
    out[1] = x * (2.0 * mf + 3.0).sqrt() * pmm;
    for ell in (m + 2)..=lmax {
        let lf = ell as f64;
        let lm = (lf - mf) * (lf + mf);
        let a = ((2.0 * lf + 1.0) * (2.0 * lf - 1.0) / lm).sqrt();
        let b = ((2.0 * lf + 1.0) * (lf - 1.0 - mf) * (lf - 1.0 + mf) / ((2.0 * lf - 3.0) * lm)).sqrt();
        let i = ell - m;
        out[i] = a * x * out[i - 1] - b * out[i - 2];
    }
}

/// N_{ℓ,m}(x) = sqrt((2ℓ+1)(ℓ-m)!/(ℓ+m)!) P_{ℓ,m}(x), computed without
/// forming the factorials. Finite for ℓ in the thousands.
pub fn assoc_legendre_normalized(ell: usize, m: usize, x: f64) -> Result<f64> {
    if m > ell {
        return Err(Error::domain(format!("order m={m} exceeds degree ell={ell}")));
    }
    check_unit(x)?;
    let s = (1.0 - x * x).max(0.0).sqrt();
    let mut col = vec![0.0; ell - m + 1];
    normalized_legendre_column(m, ell, x, s, &mut col);
    Ok(col[ell - m])
}

/// A point on the unit sphere: colatitude `theta` ∈ [0, π], longitude
/// `phi` ∈ [0, 2π).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphPoint {
    pub theta: f64,
    pub phi: f64,
}

impl SphPoint {
    pub fn new(theta: f64, phi: f64) -> Result<Self> {
        if !(0.0..=PI).contains(&theta) {
            return Err(Error::domain(format!("colatitude {theta} outside [0, pi]")));
        }
        if !(0.0..2.0 * PI).contains(&phi) {
            return Err(Error::domain(format!("longitude {phi} outside [0, 2pi)")));
        }
        Ok(SphPoint { theta, phi })
    }

    pub fn to_unit_vector(self) -> [f64; 3] {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        [st * cp, st * sp, ct]
    }

    /// Cosine of the great-circle angle to `other`.
    pub fn cos_angle(self, other: SphPoint) -> f64 {
        let a = self.to_unit_vector();
        let b = other.to_unit_vector();
        (a[0] * b[0] + a[1] * b[1] + a[2] * b[2]).clamp(-1.0, 1.0)
    }
}

/// Y_{ℓ,m}(θ, φ) for -ℓ ≤ m ≤ ℓ, with Y_{ℓ,-m} = (-1)^m conj(Y_{ℓ,m}).
pub fn spherical_harmonic(ell: usize, m: i64, p: SphPoint) -> Result<Complex64> {
    let am = m.unsigned_abs() as usize;
    if am > ell {
        return Err(Error::domain(format!("|m|={am} exceeds degree ell={ell}")));
    }
    let (s, x) = p.theta.sin_cos();
    let mut col = vec![0.0; ell - am + 1];
    normalized_legendre_column(am, ell, x, s.abs(), &mut col);
    let n = col[ell - am];
    let y = Complex64::from_polar(n, am as f64 * p.phi);
    if m >= 0 {
        Ok(y)
    } else if am % 2 == 0 {
        Ok(y.conj())
    } else {
        Ok(-y.conj())
    }
}

/// Parameters of E_{α,β}: α ∈ (0, 1], β > 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MLParams {
    pub alpha: f64,
    pub beta: f64,
}

impl MLParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::domain(format!("Mittag-Leffler alpha must lie in (0, 1], got {alpha}")));
        }
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(Error::domain(format!("Mittag-Leffler beta must be positive, got {beta}")));
        }
        Ok(MLParams { alpha, beta })
    }
}

/// Target relative accuracy of [`ml_neg`].
pub const ML_REL_TOL: f64 = 1e-10;

// Below this value of x^{1/α} the power series is attempted; above the
// second threshold the asymptotic expansion is. In between (or when an
// attempt's own error estimate is too large) the contour integral is used.
const SERIES_MAX_R: f64 = 4.0;
const ASYMPTOTIC_MIN_R: f64 = 40.0;
// Upper cut of the contour integral, in units of r^{1/α}: e^{-45} ≈ 3e-20.
const CONTOUR_CUT: f64 = 45.0;

/// E_{α,β}(-x) for x ≥ 0.
///
/// Three evaluators are combined: the defining series for small
/// `x^{1/α}`, the algebraic asymptotic expansion for large `x^{1/α}`, and a
/// real integral obtained by collapsing the Hankel contour onto the negative
/// real axis for everything in between. Each returns its own error estimate,
/// and an accuracy error is raised rather than returning a value that misses
/// [`ML_REL_TOL`].
pub fn ml_neg(params: MLParams, x: f64) -> Result<f64> {
    let MLParams { alpha, beta } = MLParams::new(params.alpha, params.beta)?;
    if !(x >= 0.0) || !x.is_finite() {
        return Err(Error::domain(format!("ml_neg needs finite x >= 0, got {x}")));
    }
    if x == 0.0 {
        return Ok(rgamma(beta));
    }
    if alpha == 1.0 {
        if beta == 1.0 {
            return Ok((-x).exp());
        }
        if beta == 2.0 {
            return Ok(-(-x).exp_m1() / x);
        }
    }
    let r = x.powf(1.0 / alpha);
    if r <= SERIES_MAX_R {
        if let Some(v) = ml_series(alpha, beta, x) {
            return Ok(v);
        }
    }
    if r >= ASYMPTOTIC_MIN_R {
        if let Some(v) = ml_asymptotic(alpha, beta, x, r) {
            return Ok(v);
        }
    }
    if alpha < 1.0 && beta <= 1.0 + alpha {
        return ml_contour(alpha, beta, x);
    }
    if let Some(v) = ml_series(alpha, beta, x) {
        return Ok(v);
    }
    Err(Error::accuracy(format!(
        "no Mittag-Leffler evaluator reaches relative accuracy {ML_REL_TOL:e} at alpha={alpha}, beta={beta}, x={x}"
    )))
}

/// Σ (-x)^k / Γ(αk+β), accepted only if the rounding error implied by the
/// sum of term magnitudes stays within tolerance.
fn ml_series(alpha: f64, beta: f64, x: f64) -> Option<f64> {
    let peak = x.powf(1.0 / alpha);
    let mut sum = 0.0;
    let mut comp = 0.0;
    let mut abs_sum = 0.0;
    let mut xk = 1.0;
    for k in 0..2000 {
        let term = xk * rgamma(alpha * k as f64 + beta);
        let signed = if k % 2 == 0 { term } else { -term };
        // Neumaier summation.
        let t = sum + signed;
        if sum.abs() >= signed.abs() {
            comp += (sum - t) + signed;
        } else {
            comp += (signed - t) + sum;
        }
        sum = t;
        abs_sum += term.abs();
        if k as f64 * alpha + beta > peak + 1.0 && term.abs() <= 1e-18 * abs_sum {
            let value = sum + comp;
            let err = 8.0 * f64::EPSILON * (k as f64).sqrt().max(1.0) * abs_sum;
            return (err <= 0.1 * ML_REL_TOL * value.abs()).then_some(value);
        }
        xk *= x;
        if !xk.is_finite() {
            return None;
        }
    }
    None
}

/// Σ_{k≥1} (-1)^{k+1} x^{-k} / Γ(β-αk), truncated before the smallest term.
///
/// The factor sin(π(β-αk)) in 1/Γ for negative arguments makes term sizes
/// oscillate, so truncation is decided on the envelope Γ(1-z)/(π x^k).
fn ml_asymptotic(alpha: f64, beta: f64, x: f64, r: f64) -> Option<f64> {
    let lnx = x.ln();
    let mut sum = 0.0;
    let mut last_env = f64::INFINITY;
    for k in 1..4000 {
        let kf = k as f64;
        let z = beta - alpha * kf;
        let ln_env = if z > 0.0 {
            -statrs::function::gamma::ln_gamma(z)
        } else {
            statrs::function::gamma::ln_gamma(1.0 - z) - PI.ln()
        } - kf * lnx;
        let env = ln_env.exp();
        if env > last_env {
            break;
        }
        last_env = env;
        if let Some((lnr, sign)) = ln_rgamma_signed(z) {
            let mag = (lnr - kf * lnx).exp();
            sum += if k % 2 == 1 { sign * mag } else { -sign * mag };
        }
        if env <= 1e-3 * f64::EPSILON * sum.abs() {
            break;
        }
    }
    // Truncation error is bounded by the envelope at the last retained term;
    // the remainder beyond the Taylor disc of the contour integrand decays
    // like e^{-r}. A sum that is exactly zero is rejected.
    let err = last_env + (-r).exp() + 16.0 * f64::EPSILON * sum.abs();
    (sum != 0.0 && err <= 0.1 * ML_REL_TOL * sum.abs()).then_some(sum)
}

/// Contour integral for 0 < α < 1, β ≤ 1 + α:
/// E_{α,β}(-x) = (1/(απ)) ∫_0^∞ e^{-u^{1/α}} u^{(1-β)/α}
///   (u sin(πβ) + x sin(π(β-α))) / (u² + 2xu cos(πα) + x²) du,
/// plus 1/x when β = 1 + α.
fn ml_contour(alpha: f64, beta: f64, x: f64) -> Result<f64> {
    let sb = (PI * beta).sin();
    let sba = sin_pi(beta - alpha);
    let ca = (PI * alpha).cos();
    let p = (1.0 - beta) / alpha;
    let inv_a = 1.0 / alpha;
    let integrand = |u: f64| {
        if u == 0.0 {
            return 0.0;
        }
        let den = u * u + 2.0 * x * u * ca + x * x;
        (-u.powf(inv_a)).exp() * u.powf(p) * (u * sb + x * sba) / den
    };
    let upper = CONTOUR_CUT.powf(alpha);
    let mut points = vec![0.0];
    let mut interior: Vec<f64> = vec![x, -x * ca, 0.25 * upper.min(x)];
    interior.retain(|&b| b > 0.0 && b < upper);
    interior.sort_by(f64::total_cmp);
    interior.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs());
    points.extend(interior);
    points.push(upper);

    let tol = Tolerance {
        abs: 1e-300,
        rel: 0.02 * ML_REL_TOL,
        max_panels: 2000,
    };
    let est = quadrature::integrate(integrand, &points, tol)?;
    let mut value = est.value / (alpha * PI);
    let mut scale = value.abs();
    if (beta - 1.0 - alpha).abs() <= 1e-14 {
        value += 1.0 / x;
        scale = scale.max(1.0 / x);
    }
    // The integral is sign-definite for β ∈ {α, 1}; otherwise guard against
    // cancellation with the 1/x term.
    let err = est.error / (alpha * PI) + 4.0 * f64::EPSILON * scale;
    if err > ML_REL_TOL * value.abs() {
        return Err(Error::accuracy(format!(
            "Mittag-Leffler contour integral lost accuracy at alpha={alpha}, beta={beta}, x={x}"
        )));
    }
    Ok(value)
}

/// E_α(-x) = E_{α,1}(-x).
pub fn ml_decay(alpha: f64, x: f64) -> Result<f64> {
    ml_neg(MLParams { alpha, beta: 1.0 }, x)
}
