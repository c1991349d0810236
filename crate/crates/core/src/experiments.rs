//! Monte Carlo error curves, slope fits, evolution snapshots and run
//! manifests.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{ensure_dir, write_atomically};
use crate::spectra::{bound_q_combined, increment_bound, measured_increment_c};
use crate::stochastic::{
    evolve_homogeneous, sample_combined, sample_combined_pair, sample_initial, sample_inhomogeneous, CoefficientSet,
    FractionalModel, RngStream,
};
use crate::synthesis::{synthesize, write_map_csv, write_map_image, FieldMap, GridSpec, ImageOptions};

/// Flag for rows whose bound preconditions fail; such rows are left out of
/// default slope windows.
pub const FLAG_INVALID: &str = "invalid";
/// Flag for rows of models with tabulated spectra, which have no bound.
pub const FLAG_NOBOUND: &str = "nobound";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Abscissa {
    Degree,
    Increment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub x: f64,
    pub empirical: f64,
    pub bound: Option<f64>,
    /// Empty, [`FLAG_INVALID`] or [`FLAG_NOBOUND`].
    pub flag: String,
    /// Bound regime label ("I", "II", "III") for truncation rows.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub case: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveMeta {
    pub experiment: String,
    pub model: FractionalModel,
    pub t: f64,
    /// L̃ for truncation curves, L for increment curves.
    pub degree: usize,
    pub n_real: usize,
    pub seed: u64,
    pub bound_note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorCurve {
    pub abscissa: Abscissa,
    pub rows: Vec<CurveRow>,
    pub meta: CurveMeta,
}

impl ErrorCurve {
    /// `x,empirical,bound,flag`; an empty bound cell means no bound.
    pub fn to_csv_string(&self) -> String {
        let mut s = String::from("x,empirical,bound,flag\n");
        for r in &self.rows {
            let bound = r.bound.map(|b| format!("{b:.16e}")).unwrap_or_default();
            s.push_str(&format!("{:.16e},{:.16e},{},{}\n", r.x, r.empirical, bound, r.flag));
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_atomically(path, |w| w.write_all(self.to_csv_string().as_bytes()))
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("curve serializes");
        write_atomically(path, |w| w.write_all(text.as_bytes()))
    }

    /// Rows with a bound, and the share of them with empirical ≤ bound.
    pub fn bound_coverage(&self) -> (usize, f64) {
        let with: Vec<_> = self.rows.iter().filter(|r| r.bound.is_some()).collect();
        if with.is_empty() {
            return (0, 0.0);
        }
        let ok = with.iter().filter(|r| r.empirical <= r.bound.unwrap()).count();
        (with.len(), ok as f64 / with.len() as f64)
    }
}

/// Least-squares fit of ln(empirical) against ln(x).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub window: (f64, f64),
    pub rows: usize,
}

/// The largest decade [x_max/10, x_max] of unflagged rows with positive
/// empirical values.
pub fn default_window(curve: &ErrorCurve) -> Option<(f64, f64)> {
    let top = curve
        .rows
        .iter()
        .filter(|r| r.flag != FLAG_INVALID && r.empirical > 0.0)
        .map(|r| r.x)
        .fold(f64::NEG_INFINITY, f64::max);
    top.is_finite().then_some((top / 10.0, top))
}

/// Fit over rows with x in `window` (inclusive; [`default_window`] when
/// `None`), skipping invalid rows and non-positive values.
pub fn fit_log_log_slope(curve: &ErrorCurve, window: Option<(f64, f64)>) -> Result<SlopeFit> {
    let window = match window.or_else(|| default_window(curve)) {
        Some(w) => w,
        None => return Err(Error::Input("no usable rows for a slope fit".into())),
    };
    let pts: Vec<(f64, f64)> = curve
        .rows
        .iter()
        .filter(|r| r.x >= window.0 && r.x <= window.1 && r.flag != FLAG_INVALID && r.empirical > 0.0 && r.x > 0.0)
        .map(|r| (r.x.ln(), r.empirical.ln()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::Input(format!(
            "slope fit needs at least 3 usable rows in [{}, {}], found {}",
            window.0,
            window.1,
            pts.len()
        )));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Input("slope fit needs at least two distinct x values".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let r2 = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    Ok(SlopeFit {
        slope,
        intercept,
        r2,
        window,
        rows: pts.len(),
    })
}

/// Evaluate `f(j)` for j in 0..n, in parallel when enabled, returning the
/// results in index order.
pub(crate) fn per_realization<T, F>(n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n as u64).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n as u64).map(f).collect()
    }
}

/// Σ_{ℓ=L+1}^{L̃} power(ℓ) for each L in `lgrid`.
fn tail_sums(set: &CoefficientSet, lgrid: &[usize]) -> Vec<f64> {
    let lt = set.lmax();
    let mut suffix = vec![0.0; lt + 2];
    for ell in (0..=lt).rev() {
        suffix[ell] = suffix[ell + 1] + set.degree_power(ell);
    }
    lgrid.iter().map(|&l| suffix[l + 1]).collect()
}

/// Q_{L,L̃}(t) = sqrt(mean_j Σ_{ℓ=L+1}^{L̃} |V_{ℓ,0}|² + 2Σ_{m≥1}|V_{ℓ,m}|²)
/// with one degree-L̃ draw per realization shared by every L.
pub fn truncation_error_curve(
    model: &FractionalModel,
    ltilde: usize,
    lgrid: &[usize],
    t: f64,
    n_real: usize,
    seed: u64,
) -> Result<ErrorCurve> {
    model.validate()?;
    if lgrid.is_empty() {
        return Err(Error::config("l_grid", "must not be empty"));
    }
    if lgrid.windows(2).any(|w| w[1] <= w[0]) || lgrid[0] == 0 {
        return Err(Error::config("l_grid", "degrees must be >= 1 and strictly ascending"));
    }
    if *lgrid.last().unwrap() >= ltilde {
        return Err(Error::config("l_grid", format!("all degrees must be below L_tilde={ltilde}")));
    }
    if n_real < 2 {
        return Err(Error::config("n_real", "needs at least 2 realizations"));
    }
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::config("t", format!("must be positive, got {t}")));
    }

    let tails = per_realization(n_real, |j| {
        let set = sample_combined(model, ltilde, t, RngStream::new(seed, j))?;
        Ok(tail_sums(&set, lgrid))
    })?;
    let mut mean = vec![0.0; lgrid.len()];
    for row in &tails {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }

    let spectra = model.spec_c.algebraic().zip(model.spec_a.algebraic());
    let mut rows = Vec::with_capacity(lgrid.len());
    for (k, &l) in lgrid.iter().enumerate() {
        let empirical = (mean[k] / n_real as f64).sqrt();
        let (bound, flag, case) = match spectra {
            None => (None, FLAG_NOBOUND.to_string(), None),
            Some((c, a)) => match bound_q_combined(l, t, model.tau, model.alpha, c, a) {
                Ok(b) => (Some(b.value), String::new(), Some(b.case.label().to_string())),
                Err(Error::Domain(_)) => (None, FLAG_INVALID.to_string(), None),
                Err(e) => return Err(e),
            },
        };
        rows.push(CurveRow {
            x: l as f64,
            empirical,
            bound,
            flag,
            case,
        });
    }
    Ok(ErrorCurve {
        abscissa: Abscissa::Degree,
        rows,
        meta: CurveMeta {
            experiment: "truncation".into(),
            model: model.clone(),
            t,
            degree: ltilde,
            n_real,
            seed,
            bound_note: "combined truncation bound, regime per row".into(),
        },
    })
}

/// 𝒥_{h,L}(t) = sqrt(mean_j Σ_ℓ |ΔV_{ℓ,0}|² + 2Σ_{m≥1}|ΔV_{ℓ,m}|²) from exact
/// two-time draws. The same realization streams are used for every h.
/// `increment_c` overrides the measured constant in q(t).
pub fn increment_curve(
    model: &FractionalModel,
    lmax: usize,
    t: f64,
    hgrid: &[f64],
    n_real: usize,
    seed: u64,
    increment_c: Option<f64>,
) -> Result<ErrorCurve> {
    model.validate()?;
    if !(t > model.tau) || !t.is_finite() {
        return Err(Error::config("t", format!("must exceed tau={}, got {t}", model.tau)));
    }
    if hgrid.is_empty() || hgrid.iter().any(|h| !(*h > 0.0) || !h.is_finite()) {
        return Err(Error::config("h_grid", "must be a non-empty list of positive steps"));
    }
    if hgrid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::config("h_grid", "steps must be strictly ascending"));
    }
    if n_real < 2 {
        return Err(Error::config("n_real", "needs at least 2 realizations"));
    }
    let c = match increment_c {
        Some(c) if c > 0.0 && c.is_finite() => c,
        Some(c) => return Err(Error::config("increment_c", format!("must be positive, got {c}"))),
        None => measured_increment_c(model.alpha)?,
    };
    let spectra = model.spec_c.algebraic().zip(model.spec_a.algebraic());

    let mut rows = Vec::with_capacity(hgrid.len());
    for &h in hgrid {
        let sums = per_realization(n_real, |j| {
            let (a, b) = sample_combined_pair(model, lmax, t, h, RngStream::new(seed, j))?;
            let d = b.add(&a.scaled(-1.0))?;
            Ok(d.tail_power(0))
        })?;
        let empirical = (sums.iter().sum::<f64>() / n_real as f64).sqrt();
        let (bound, flag) = match spectra {
            None => (None, FLAG_NOBOUND.to_string()),
            Some((sc, sa)) => (Some(increment_bound(t, h, model.tau, model.alpha, sc, sa, c)?), String::new()),
        };
        rows.push(CurveRow {
            x: h,
            empirical,
            bound,
            flag,
            case: None,
        });
    }
    let source = if increment_c.is_some() { "configured" } else { "measured" };
    Ok(ErrorCurve {
        abscissa: Abscissa::Increment,
        rows,
        meta: CurveMeta {
            experiment: "increments".into(),
            model: model.clone(),
            t,
            degree: lmax,
            n_real,
            seed,
            bound_note: format!("q(t)*sqrt(h) with {source} C = {c}"),
        },
    })
}

/// `map_t{time}` with the time in shortest exponent form, e.g. `map_t1e-4`.
pub fn snapshot_stem(t: f64) -> String {
    format!("map_t{t:e}")
}

/// Maps at each time from one initial draw and one set of noise normals
/// (realization 0 of `seed`): homogeneous only for t ≤ τ, combined after.
/// Writes `<stem>.<image_ext>`, `<stem>.json` and `<stem>.csv` into
/// `out_dir` when given.
#[allow(clippy::too_many_arguments)]
pub fn evolution_snapshots(
    model: &FractionalModel,
    lmax: usize,
    times: &[f64],
    grid: &GridSpec,
    seed: u64,
    out_dir: Option<&Path>,
    image: &ImageOptions,
    image_ext: &str,
) -> Result<(Vec<FieldMap>, Vec<PathBuf>)> {
    model.validate()?;
    grid.validate()?;
    if lmax < 1 {
        return Err(Error::config("L", "must be at least 1"));
    }
    if times.is_empty() || times.iter().any(|t| !(*t >= 0.0) || !t.is_finite()) {
        return Err(Error::config("times", "must be a non-empty list of times >= 0"));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::config("times", "must be strictly ascending"));
    }
    if let Some(dir) = out_dir {
        ensure_dir(dir)?;
    }
    let rng = RngStream::new(seed, 0);
    let init = sample_initial(&model.spec_c, lmax, rng);
    let mut maps = Vec::with_capacity(times.len());
    let mut written = Vec::new();
    for &t in times {
        let mut set = evolve_homogeneous(&init, t, model.alpha)?;
        if t > model.tau {
            set = set.add(&sample_inhomogeneous(&model.spec_a, lmax, t, model.tau, model.alpha, rng)?)?;
        }
        set.time = t;
        let map = synthesize(&set, grid)?;
        if let Some(dir) = out_dir {
            let stem = snapshot_stem(t);
            let img = dir.join(format!("{stem}.{image_ext}"));
            write_map_image(&map, &img, image)?;
            let csv = dir.join(format!("{stem}.csv"));
            write_map_csv(&map, &csv)?;
            written.extend([img, dir.join(format!("{stem}.json")), csv]);
        }
        maps.push(map);
    }
    Ok((maps, written))
}

/// Everything needed to repeat a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: serde_json::Value,
    pub seed: u64,
    pub threads: usize,
    pub outputs: Vec<String>,
    #[serde(default)]
    pub results: serde_json::Value,
}

/// Write `manifest.json` into `dir`. Output paths are stored relative to
/// `dir`.
pub fn write_manifest(dir: &Path, manifest: &Manifest) -> Result<PathBuf> {
    ensure_dir(dir)?;
    let mut m = manifest.clone();
    for o in m.outputs.iter_mut() {
        if let Ok(rel) = Path::new(o.as_str()).strip_prefix(dir) {
            *o = rel.to_string_lossy().into_owned();
        }
    }
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&m).expect("manifest serializes");
    write_atomically(&path, |w| w.write_all(text.as_bytes()))?;
    Ok(path)
}
