//! The numbered verification checks, shared by the `selftest` command and
//! the acceptance test target.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::Result;
use crate::experiments::{fit_log_log_slope, increment_curve, per_realization, truncation_error_curve, ErrorCurve};
use crate::io::{ensure_dir, write_atomically};
use crate::specfun::{gamma, legendre_p, ml_decay, spherical_harmonic, SphPoint};
use crate::spectra::{holder_envelope, tail_constant, HOLDER_LMAX};
use crate::stochastic::{
    coefficient_variance, increment_structure, sample_combined, sigma_bound_applies, sigma_squared,
    sigma_squared_bound, CoefficientSet, FractionalModel, RngStream,
};
use crate::synthesis::{synthesize, synthesize_point, GridSpec};

/// Full runs every check at its stated size; quick shrinks the Monte Carlo
/// and degree sizes for smoke runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    Full,
    Quick,
}

#[derive(Debug, Clone, Serialize)]
pub struct Part {
    pub label: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub id: u32,
    pub title: &'static str,
    pub passed: bool,
    pub parts: Vec<Part>,
    pub seconds: f64,
    pub budget_seconds: f64,
}

impl Check {
    fn finish(id: u32, title: &'static str, budget_seconds: f64, start: Instant, parts: Vec<Part>) -> Check {
        let seconds = start.elapsed().as_secs_f64();
        let passed = parts.iter().all(|p| p.passed) && seconds <= budget_seconds;
        Check {
            id,
            title,
            passed,
            parts,
            seconds,
            budget_seconds,
        }
    }

    pub fn part(&self, label: &str) -> Option<&Part> {
        self.parts.iter().find(|p| p.label == label)
    }

    /// `PASS criterion 3: σ² correctness (1.2 s, budget 30 s)`
    pub fn summary_line(&self) -> String {
        let budget = if self.budget_seconds.is_finite() {
            format!("budget {:.0} s", self.budget_seconds)
        } else {
            "no budget".to_string()
        };
        format!(
            "{} criterion {}: {} ({:.1} s, {budget})",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.title,
            self.seconds,
        )
    }
}

fn part(label: impl Into<String>, passed: bool, detail: impl Into<String>) -> Part {
    Part {
        label: label.into(),
        passed,
        detail: detail.into(),
    }
}

fn random_point(rng: &mut ChaCha8Rng) -> SphPoint {
    let z: f64 = rng.random_range(-1.0..=1.0);
    let phi: f64 = rng.random_range(0.0..2.0 * PI);
    SphPoint::new(z.acos(), phi).expect("valid point")
}

pub const ADDITION_TOL: f64 = 1e-9;

/// Σ_m Y_{ℓ,m}(x) conj(Y_{ℓ,m}(y)) = (2ℓ+1)P_ℓ(x·y) for ℓ ≤ 60 on random pairs.
pub fn addition_theorem(scale: Scale, seed: u64) -> Result<Check> {
    let start = Instant::now();
    let (lmax, pairs) = match scale {
        Scale::Full => (60usize, 200usize),
        Scale::Quick => (20, 50),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..pairs {
        let (x, y) = (random_point(&mut rng), random_point(&mut rng));
        let c = x.cos_angle(y);
        for ell in 0..=lmax {
            let mut s = Complex64::new(0.0, 0.0);
            for m in -(ell as i64)..=ell as i64 {
                s += spherical_harmonic(ell, m, x)? * spherical_harmonic(ell, m, y)?.conj();
            }
            let want = (2.0 * ell as f64 + 1.0) * legendre_p(ell, c)?;
            let err = (s - want).norm() / (2.0 * ell as f64 + 1.0);
            worst = worst.max(err);
        }
    }
    let parts = vec![part(
        "addition",
        worst <= ADDITION_TOL,
        format!("max error/(2l+1) = {worst:.3e} over l <= {lmax}, {pairs} pairs (tol {ADDITION_TOL:e})"),
    )];
    Ok(Check::finish(1, "addition theorem", 5.0, start, parts))
}

pub const EXP_TOL: f64 = 1e-12;
pub const ERFCX_TOL: f64 = 1e-9;
pub const SHAPE_TOL: f64 = 1e-10;

/// erfcx reference values on [0, 30] (40-digit arithmetic).
pub fn erfcx_table() -> Vec<(f64, f64)> {
    include_str!("../data/erfcx.csv")
        .lines()
        .skip(1)
        .filter_map(|l| {
            let (x, v) = l.split_once(',')?;
            Some((x.trim().parse().ok()?, v.trim().parse().ok()?))
        })
        .collect()
}

/// Mittag-Leffler accuracy at α = 1 and α = 1/2, monotonicity and the
/// two-sided Simon bound.
pub fn mittag_leffler(scale: Scale) -> Result<Check> {
    let start = Instant::now();
    let mut parts = Vec::new();

    let n = match scale {
        Scale::Full => 5000,
        Scale::Quick => 500,
    };
    let mut worst = 0.0f64;
    for i in 0..=n {
        let x = 50.0 * i as f64 / n as f64;
        let got = ml_decay(1.0, x)?;
        worst = worst.max(((got - (-x).exp()) / (-x).exp()).abs());
    }
    parts.push(part(
        "exponential",
        worst <= EXP_TOL,
        format!("max rel error {worst:.3e} on [0, 50] (tol {EXP_TOL:e})"),
    ));

    let mut worst = 0.0f64;
    let mut count = 0;
    for (x, want) in erfcx_table().into_iter().filter(|(x, _)| *x <= 30.0) {
        let got = ml_decay(0.5, x)?;
        worst = worst.max(((got - want) / want).abs());
        count += 1;
    }
    parts.push(part(
        "half-order",
        worst <= ERFCX_TOL && count > 200,
        format!("max rel error {worst:.3e} against erfcx at {count} points (tol {ERFCX_TOL:e})"),
    ));

    let per_decade = match scale {
        Scale::Full => 40,
        Scale::Quick => 8,
    };
    let mut shape_ok = true;
    let mut detail = String::from("monotone and within Simon bounds");
    'alpha: for alpha in [0.1, 0.25, 0.5, 0.75, 0.9] {
        let lo = 1.0 / (gamma(1.0 - alpha)?);
        let hi = 1.0 / gamma(1.0 + alpha)?;
        let mut prev = 1.0;
        for i in 0..=12 * per_decade {
            let x = 10f64.powf(-6.0 + i as f64 / per_decade as f64);
            let e = ml_decay(alpha, x)?;
            let lower = 1.0 / (1.0 + x / lo);
            let upper = 1.0 / (1.0 + x * hi);
            if e > prev * (1.0 + SHAPE_TOL) || e < lower * (1.0 - SHAPE_TOL) || e > upper * (1.0 + SHAPE_TOL) {
                shape_ok = false;
                detail = format!("violated at alpha={alpha}, x={x:e}: E={e:e}, bounds [{lower:e}, {upper:e}]");
                break 'alpha;
            }
            prev = e;
        }
    }
    parts.push(part("shape", shape_ok, detail));
    Ok(Check::finish(2, "Mittag-Leffler accuracy", 10.0, start, parts))
}

pub const SIGMA_CLOSED_TOL: f64 = 1e-9;

/// σ² against the α = 1 closed form, σ² ≤ t, the three-regime bound and
/// monotonicity.
pub fn sigma_squared_checks(scale: Scale) -> Result<Check> {
    let start = Instant::now();
    let mut parts = Vec::new();
    let lmax = match scale {
        Scale::Full => 100,
        Scale::Quick => 30,
    };
    let times = [1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0];
    let mut worst = 0.0f64;
    for ell in 1..=lmax {
        let lam = (ell * (ell + 1)) as f64;
        for &t in &times {
            let want = -(-2.0 * lam * t).exp_m1() / (2.0 * lam);
            let got = sigma_squared(ell, t, 1.0)?;
            worst = worst.max(((got - want) / want).abs());
        }
    }
    parts.push(part(
        "closed form",
        worst <= SIGMA_CLOSED_TOL,
        format!("max rel error {worst:.3e} for l <= {lmax} (tol {SIGMA_CLOSED_TOL:e})"),
    ));

    let ells = [1usize, 2, 3, 5, 10, 20, 50, 100, 200];
    let ts: Vec<f64> = (-6..=1).map(|k| 10f64.powi(k)).collect();
    let mut notes: [Option<String>; 3] = [None, None, None];
    let mut checked = 0;
    for alpha in [0.3, 0.5, 0.75, 1.0] {
        for &ell in &ells {
            let mut prev = 0.0;
            for &t in &ts {
                let v = sigma_squared(ell, t, alpha)?;
                let at = format!("alpha={alpha}, l={ell}, t={t:e}");
                if v > t {
                    notes[0].get_or_insert(format!("sigma^2 > t at {at}"));
                }
                // Saturated values at large λt agree to rounding.
                if v < prev * (1.0 - 1e-12) {
                    notes[2].get_or_insert(format!("decreasing in t at {at}"));
                }
                prev = v;
                if ell > 1 && v > sigma_squared(ell - 1, t, alpha)? * (1.0 + 1e-12) {
                    notes[2].get_or_insert(format!("increasing in l at {at}"));
                }
                if sigma_bound_applies(ell, t, alpha) {
                    checked += 1;
                    let b = sigma_squared_bound(ell, t, alpha)?;
                    if v > b {
                        notes[1].get_or_insert(format!("bound {b:e} < sigma^2 {v:e} at {at}"));
                    }
                }
            }
        }
    }
    let [n_t, n_bound, n_mono] = notes;
    parts.push(part("below t", n_t.is_none(), n_t.unwrap_or_else(|| "sigma^2 <= t on the grid".into())));
    parts.push(part(
        "below bound",
        n_bound.is_none(),
        n_bound.unwrap_or_else(|| format!("sigma^2 <= bound at {checked} grid points where it applies")),
    ));
    parts.push(part(
        "monotone",
        n_mono.is_none(),
        n_mono.unwrap_or_else(|| "non-decreasing in t, non-increasing in l".into()),
    ));
    Ok(Check::finish(3, "sigma^2 correctness", 30.0, start, parts))
}

pub const MC_SIGMAS: f64 = 5.0;

/// Monte Carlo E|V_{ℓ,m}(t)|² against the analytic variance.
pub fn coefficient_law(scale: Scale, seed: u64) -> Result<Check> {
    let start = Instant::now();
    let n = match scale {
        Scale::Full => 10_000,
        Scale::Quick => 2_000,
    };
    let coords = [(0usize, 0usize), (5, 0), (5, 3), (50, 17)];
    let lmax = 50;
    let mut parts = Vec::new();
    for alpha in [0.5, 0.75, 1.0] {
        let model = FractionalModel::reference(alpha)?;
        for (tname, t) in [("tau/2", 0.5 * model.tau), ("10 tau", 10.0 * model.tau)] {
            let draws = per_realization(n, |j| {
                let set = sample_combined(&model, lmax, t, RngStream::new(seed, j))?;
                Ok(coords.map(|(l, m)| set.get(l, m)))
            })?;
            for (k, &(l, m)) in coords.iter().enumerate() {
                let xs: Vec<f64> = draws.iter().map(|d| d[k].norm_sqr()).collect();
                let mean = xs.iter().sum::<f64>() / n as f64;
                let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
                let se = (var / n as f64).sqrt();
                let want = coefficient_variance(&model, l, t)?;
                let z = (mean - want) / se;
                let real_m0 = m != 0 || draws.iter().all(|d| d[k].im == 0.0);
                parts.push(part(
                    format!("alpha={alpha} t={tname} ({l},{m})"),
                    z.abs() <= MC_SIGMAS && real_m0,
                    format!("mean {mean:.6e} vs {want:.6e}, z = {z:+.2}"),
                ));
            }
        }
    }
    Ok(Check::finish(4, "coefficient law", 120.0, start, parts))
}

pub const SLOPE_TOL: f64 = 0.15;
/// Allowed gap between the Monte Carlo slope and the slope of the exact
/// expected estimator.
pub const SLOPE_MC_TOL: f64 = 0.05;

struct TruncationCase {
    key: &'static str,
    alpha: f64,
    t: f64,
    target: f64,
}

const TRUNCATION_CASES: [TruncationCase; 3] = [
    TruncationCase {
        key: "case I alpha=0.5",
        alpha: 0.5,
        t: 1e-12,
        target: -0.15,
    },
    TruncationCase {
        key: "case III alpha=0.5",
        alpha: 0.5,
        t: 1e-4,
        target: -1.25,
    },
    TruncationCase {
        key: "case III alpha=0.75",
        alpha: 0.75,
        t: 1e-4,
        target: -1.583,
    },
];

/// Slope of sqrt(Σ_{ℓ=L+1}^{L̃}(2ℓ+1)E|V_ℓ|²), the estimator without
/// sampling noise, over the same rows.
fn expected_slope(model: &FractionalModel, curve: &ErrorCurve, ltilde: usize, window: (f64, f64)) -> Result<f64> {
    let mut suffix = vec![0.0; ltilde + 2];
    for ell in (0..=ltilde).rev() {
        suffix[ell] = suffix[ell + 1] + (2.0 * ell as f64 + 1.0) * coefficient_variance(model, ell, curve.meta.t)?;
    }
    let mut exact = curve.clone();
    for r in exact.rows.iter_mut() {
        r.empirical = suffix[r.x as usize + 1].sqrt();
    }
    Ok(fit_log_log_slope(&exact, Some(window))?.slope)
}

/// Truncation error slopes in L for the three regimes. Curves are returned
/// for output.
pub fn truncation_slopes(scale: Scale, seed: u64) -> Result<(Check, Vec<(String, ErrorCurve)>)> {
    let start = Instant::now();
    let (ltilde, lgrid, n_real, window): (usize, Vec<usize>, usize, (f64, f64)) = match scale {
        Scale::Full => (400, vec![25, 50, 100, 150, 200, 300], 50, (50.0, 300.0)),
        Scale::Quick => (120, vec![15, 30, 45, 60, 90], 10, (30.0, 90.0)),
    };
    let mut parts = Vec::new();
    let mut curves = Vec::new();
    for case in TRUNCATION_CASES {
        let model = FractionalModel::reference(case.alpha)?;
        let curve = truncation_error_curve(&model, ltilde, &lgrid, case.t, n_real, seed)?;
        let fit = fit_log_log_slope(&curve, Some(window))?;
        let expected = expected_slope(&model, &curve, ltilde, window)?;
        parts.push(part(
            case.key,
            (fit.slope - case.target).abs() <= SLOPE_TOL,
            format!("slope {:.4} vs {:.3} +/- {SLOPE_TOL}", fit.slope, case.target),
        ));
        parts.push(part(
            format!("{} estimator", case.key),
            (fit.slope - expected).abs() <= SLOPE_MC_TOL,
            format!("Monte Carlo slope {:.4} vs expected-estimator slope {expected:.4}", fit.slope),
        ));
        let (rows, share) = curve.bound_coverage();
        parts.push(part(
            format!("{} bound", case.key),
            rows > 0 && share >= 0.95,
            format!("empirical <= bound on {:.0}% of {rows} rows", 100.0 * share),
        ));
        let name = format!("trunc_{}_t{:e}", case.alpha, case.t);
        curves.push((name, curve));
    }
    let budget = 600.0;
    Ok((Check::finish(5, "truncation slopes", budget, start, parts), curves))
}

pub const INCREMENT_SLOPE: (f64, f64) = (0.4, 0.6);

/// 𝒥_{h,L} ∝ √h with t = τ + δ, h = kδ, and the q(t)√h bound.
pub fn increment_scaling(scale: Scale, seed: u64) -> Result<(Check, ErrorCurve)> {
    let start = Instant::now();
    let (lmax, n_real) = match scale {
        Scale::Full => (400, 50),
        Scale::Quick => (60, 10),
    };
    let model = FractionalModel::reference(0.5)?;
    let delta = 1e-6;
    let t = model.tau + delta;
    let hgrid: Vec<f64> = (1..=11).map(|k| k as f64 * delta).collect();
    let curve = increment_curve(&model, lmax, t, &hgrid, n_real, seed, None)?;
    let fit = fit_log_log_slope(&curve, Some((0.0, f64::INFINITY)))?;
    let (rows, share) = curve.bound_coverage();
    let parts = vec![
        part(
            "slope",
            fit.slope >= INCREMENT_SLOPE.0 && fit.slope <= INCREMENT_SLOPE.1,
            format!("slope {:.4} (r2 {:.4}) in [{}, {}]", fit.slope, fit.r2, INCREMENT_SLOPE.0, INCREMENT_SLOPE.1),
        ),
        part(
            "bound",
            rows == hgrid.len() && share == 1.0,
            format!("{} of {rows} rows below q(t)sqrt(h); {}", (share * rows as f64).round(), curve.meta.bound_note),
        ),
    ];
    Ok((Check::finish(6, "increment scaling", 300.0, start, parts), curve))
}

pub const HOLDER_BETA: f64 = 0.1;

/// Var[U(x,t) - U(y,t)] ≤ K_{β*}θ^{2β*}. The variance series is summed to a
/// finite degree and its remainder is bounded above with the tail
/// constants, so the left side is an upper estimate.
pub fn holder_envelope_check(scale: Scale) -> Result<Check> {
    let start = Instant::now();
    let lmax = match scale {
        Scale::Full => 4000,
        Scale::Quick => 600,
    };
    let mut parts = Vec::new();
    for alpha in [0.5, 0.75] {
        let model = FractionalModel::reference(alpha)?;
        let c = model.spec_c.algebraic().expect("algebraic");
        let a = model.spec_a.algebraic().expect("algebraic");
        for (tname, t) in [("tau/2", 0.5 * model.tau), ("10 tau", 10.0 * model.tau)] {
            let k = holder_envelope(HOLDER_BETA, t, model.tau, c, a, HOLDER_LMAX)?;
            let s = (t - model.tau).max(0.0);
            let (tc, ta) = (tail_constant(c)?, tail_constant(a)?);
            let l = lmax as f64;
            // 1 - P_ℓ ≤ 2, E_α ≤ 1 and σ² ≤ s.
            let remainder = 4.0 * (tc * tc * l.powf(2.0 - c.kappa) + s * ta * ta * l.powf(2.0 - a.kappa));
            let mut worst_ratio = 0.0f64;
            let mut at = 0.0;
            for i in 0..=40 {
                let theta = (1e-3f64.ln() + (PI.ln() - 1e-3f64.ln()) * i as f64 / 40.0).exp().min(PI);
                let var = increment_structure(&model, t, theta, lmax)? + remainder;
                let env = k * theta.powf(2.0 * HOLDER_BETA);
                if var / env > worst_ratio {
                    worst_ratio = var / env;
                    at = theta;
                }
            }
            parts.push(part(
                format!("alpha={alpha} t={tname}"),
                worst_ratio <= 1.0,
                format!("max Var/envelope = {worst_ratio:.4} at theta = {at:.3e} (K = {k:.4e})"),
            ));
        }
    }
    Ok(Check::finish(7, "Hoelder envelope", 60.0, start, parts))
}

pub const SYNTH_TOL: f64 = 1e-9;
pub const PARSEVAL_TOL: f64 = 1e-8;

fn random_coefficients(lmax: usize, seed: u64) -> CoefficientSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c = CoefficientSet::zeros(lmax);
    for ell in 0..=lmax {
        for m in 0..=ell {
            c.set(ell, m, Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        }
    }
    c
}

/// Ring synthesis against pointwise evaluation, and Parseval on
/// Gauss–Legendre rings.
pub fn synthesis_oracle(scale: Scale, seed: u64) -> Result<Check> {
    let start = Instant::now();
    let lmax = match scale {
        Scale::Full => 64,
        Scale::Quick => 32,
    };
    let coeffs = random_coefficients(lmax, seed);
    let mut parts = Vec::new();
    // 16 × 32 = 512 points; one FFT-path grid and one direct-path grid.
    for (n_lat, n_lon) in [(16usize, 32usize), (8, 64 * 4 + 1)] {
        let grid = GridSpec::equiangular(n_lat, n_lon)?;
        let map = synthesize(&coeffs, &grid)?;
        let thetas = grid.colatitudes();
        let stride = (n_lat * n_lon).div_ceil(512);
        let mut max_err = 0.0f64;
        let mut max_val = 0.0f64;
        for idx in (0..n_lat * n_lon).step_by(stride) {
            let (j, k) = (idx / n_lon, idx % n_lon);
            let want = synthesize_point(&coeffs, SphPoint::new(thetas[j], grid.longitude(k))?)?;
            max_err = max_err.max((map.get(j, k) - want).abs());
            max_val = max_val.max(want.abs());
        }
        let rel = max_err / max_val;
        parts.push(part(
            format!("pointwise {n_lat}x{n_lon}"),
            rel <= SYNTH_TOL,
            format!("max |fast - naive| / max |naive| = {rel:.3e} (tol {SYNTH_TOL:e})"),
        ));
    }
    let grid = GridSpec::gauss_legendre(lmax + 1, 2 * lmax + 1)?;
    let map = synthesize(&coeffs, &grid)?;
    let w = grid.ring_weights().expect("Gauss-Legendre weights");
    let quad: f64 = (0..grid.n_lat).map(|j| w[j] * map.ring(j).iter().map(|v| v * v).sum::<f64>()).sum();
    let want: f64 = (0..=lmax).map(|l| coeffs.degree_power(l)).sum();
    let rel = ((quad - want) / want).abs();
    parts.push(part(
        "parseval",
        rel <= PARSEVAL_TOL,
        format!("rel error {rel:.3e} (tol {PARSEVAL_TOL:e})"),
    ));
    Ok(Check::finish(8, "synthesis oracle", 60.0, start, parts))
}

/// Identical truncation-curve CSV from repeated runs and from one versus
/// eight worker threads.
pub fn determinism(seed: u64) -> Result<Check> {
    let start = Instant::now();
    let model = FractionalModel::reference(0.75)?;
    let run = || -> Result<String> {
        Ok(truncation_error_curve(&model, 80, &[30, 40, 60], 1e-4, 16, seed)?.to_csv_string())
    };
    let first = run()?;
    let second = run()?;
    #[allow(unused_mut)]
    let mut parts = vec![part("repeat", first == second, "two runs, same seed")];
    #[cfg(feature = "parallel")]
    {
        let pool = |n| rayon::ThreadPoolBuilder::new().num_threads(n).build().expect("thread pool");
        let one = pool(1).install(run)?;
        let eight = pool(8).install(run)?;
        parts.push(part("workers", one == first && eight == first, "1 and 8 worker threads"));
    }
    Ok(Check::finish(9, "determinism", f64::INFINITY, start, parts))
}

/// Everything a self-test run produced.
pub struct Report {
    pub checks: Vec<Check>,
    pub outputs: Vec<PathBuf>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// `criterion,part,status,detail`, without timings, so that repeated
    /// runs give identical bytes.
    pub fn summary_csv(&self) -> String {
        let mut s = String::from("criterion,part,status,detail\n");
        for c in &self.checks {
            for p in &c.parts {
                let status = if p.passed { "PASS" } else { "FAIL" };
                s.push_str(&format!("{},{},{status},\"{}\"\n", c.id, p.label, p.detail.replace('"', "'")));
            }
        }
        s
    }
}

/// Run checks 1-9, printing one line per check through `log`, and write the
/// curves and a summary CSV into `out` when given.
pub fn run_all(scale: Scale, seed: u64, out: Option<&Path>, mut log: impl FnMut(&Check)) -> Result<Report> {
    let mut checks = Vec::new();
    let mut curves = Vec::new();
    let mut push = |c: Check, checks: &mut Vec<Check>| {
        log(&c);
        checks.push(c);
    };
    push(addition_theorem(scale, seed)?, &mut checks);
    push(mittag_leffler(scale)?, &mut checks);
    push(sigma_squared_checks(scale)?, &mut checks);
    push(coefficient_law(scale, seed)?, &mut checks);
    let (c5, trunc) = truncation_slopes(scale, seed)?;
    push(c5, &mut checks);
    curves.extend(trunc);
    let (c6, incr) = increment_scaling(scale, seed)?;
    push(c6, &mut checks);
    curves.push(("increments_0.5".to_string(), incr));
    push(holder_envelope_check(scale)?, &mut checks);
    push(synthesis_oracle(scale, seed)?, &mut checks);
    push(determinism(seed)?, &mut checks);

    let mut report = Report {
        checks,
        outputs: Vec::new(),
    };
    if let Some(dir) = out {
        ensure_dir(dir)?;
        for (name, curve) in &curves {
            let p = dir.join(format!("{name}.csv"));
            curve.write_csv(&p)?;
            report.outputs.push(p);
        }
        let p = dir.join("selftest_summary.csv");
        let text = report.summary_csv();
        write_atomically(&p, |w| w.write_all(text.as_bytes()))?;
        report.outputs.push(p);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quick_checks_that_must_pass() {
        assert!(addition_theorem(Scale::Quick, 1).unwrap().passed);
        assert!(mittag_leffler(Scale::Quick).unwrap().passed);
        assert!(synthesis_oracle(Scale::Quick, 1).unwrap().passed);
        assert!(determinism(3).unwrap().passed);
    }

    #[test]
    fn summary_has_no_timings() {
        let c = addition_theorem(Scale::Quick, 2).unwrap();
        let r = Report {
            checks: vec![c],
            outputs: vec![],
        };
        let csv = r.summary_csv();
        assert!(csv.starts_with("criterion,part,status,detail\n1,addition,PASS,"));
        assert!(!csv.contains(" s,"));
    }

    #[test]
    fn erfcx_table_loads() {
        let t = erfcx_table();
        assert!(t.len() > 240);
        assert_eq!(t[0], (0.0, 1.0));
    }
}

