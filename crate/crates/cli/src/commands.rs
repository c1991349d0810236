use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use sfd_core::experiments::{
    fit_log_log_slope, increment_curve, snapshot_stem, truncation_error_curve, write_manifest, ErrorCurve, Manifest,
};
use sfd_core::io::{ensure_dir, write_atomically};
use sfd_core::selftest::{run_all, Scale};
use sfd_core::specfun::{ml_neg, MLParams};
use sfd_core::spectra::{
    bound_q_combined, holder_envelope, increment_bound, psi_h, psi_i, relaxation_time, AlgebraicSpectrum,
    BoundConstants, HOLDER_LMAX,
};
use sfd_core::stochastic::{
    algebraic_spectra, evolve_homogeneous, sample_inhomogeneous, sample_initial, sigma_bound_applies, sigma_squared,
    sigma_squared_bound, write_coefficients, FractionalModel, RngStream,
};
use sfd_core::{Error, Result};

use crate::config::RunConfig;

fn print_json(v: &Value) {
    println!("{}", serde_json::to_string_pretty(v).expect("json"));
}

fn finish(out: &Path, command: &str, cfg: Option<&RunConfig>, seed: u64, outputs: &[PathBuf], results: &Value) -> Result<()> {
    let manifest = Manifest {
        tool: "sphere-fracdiff".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: command.into(),
        config: cfg.map(RunConfig::to_json).unwrap_or(Value::Null),
        seed,
        threads: rayon::current_num_threads(),
        outputs: outputs.iter().map(|p| p.to_string_lossy().into_owned()).collect(),
        results: results.clone(),
    };
    write_manifest(out, &manifest)?;
    Ok(())
}

fn write_json(path: &Path, v: &Value) -> Result<()> {
    let text = serde_json::to_string_pretty(v).expect("json");
    write_atomically(path, |w| w.write_all(text.as_bytes()))
}

fn needs_algebraic(model: &FractionalModel) -> Result<(&AlgebraicSpectrum, &AlgebraicSpectrum)> {
    algebraic_spectra(model).ok_or_else(|| {
        Error::config(
            if model.spec_c.algebraic().is_none() { "c_table" } else { "a_table" },
            "bounds need the algebraic spectrum form",
        )
    })
}

pub fn ml(alpha: f64, beta: f64, xs: &[f64]) -> Result<u8> {
    let p = MLParams::new(alpha, beta)?;
    let mut vals = Vec::with_capacity(xs.len());
    for &x in xs {
        vals.push(json!({"alpha": alpha, "beta": beta, "x": x, "value": ml_neg(p, x)?}));
    }
    print_json(&if vals.len() == 1 { vals.remove(0) } else { Value::Array(vals) });
    Ok(0)
}

pub fn sigma(ell: usize, t: f64, alpha: f64) -> Result<u8> {
    let value = sigma_squared(ell, t, alpha)?;
    let applies = sigma_bound_applies(ell, t, alpha);
    let bound = if ell >= 1 && t > 0.0 {
        Some(sigma_squared_bound(ell, t, alpha)?)
    } else {
        None
    };
    print_json(&json!({
        "ell": ell, "t": t, "alpha": alpha, "value": value,
        "bound": bound, "bound_applies": applies,
    }));
    Ok(0)
}

pub fn bounds(cfg: &RunConfig, out: &Path, command: &str) -> Result<u8> {
    let model = cfg.model()?;
    let (c, a) = needs_algebraic(&model)?;
    let (alpha, tau) = (model.alpha, model.tau);
    let t = cfg.t.unwrap_or(10.0 * tau);
    let constants = BoundConstants::compute(alpha, c, a, cfg.increment_c)?;
    let truncation: Vec<Value> = cfg
        .l_grid
        .iter()
        .map(|&l| match bound_q_combined(l, t, tau, alpha, c, a) {
            Ok(q) => json!({"L": l, "case": q.case.label(), "value": q.value, "exponent": q.exponent,
                            "relaxation_time": relaxation_time(l, alpha)}),
            Err(e) => json!({"L": l, "error": e.to_string(), "relaxation_time": relaxation_time(l, alpha)}),
        })
        .collect();
    let q_t = if t > tau {
        Some(increment_bound(t, 1.0, tau, alpha, c, a, constants.increment_c)?)
    } else {
        None
    };
    let psi_i = if t > tau { Some(psi_i(alpha, t - tau)?) } else { None };
    let result = json!({
        "constants": constants,
        "alpha": alpha,
        "tau": tau,
        "t": t,
        "psi_h": psi_h(alpha, t)?,
        "psi_i": psi_i,
        "q_t": q_t,
        "beta_star": cfg.beta_star,
        "holder_K": holder_envelope(cfg.beta_star, t, tau, c, a, HOLDER_LMAX)?,
        "truncation": truncation,
    });
    ensure_dir(out)?;
    let path = out.join("bounds.json");
    write_json(&path, &result)?;
    finish(out, command, Some(cfg), cfg.seed, &[path], &result)?;
    print_json(&result);
    Ok(0)
}

pub fn simulate(cfg: &RunConfig, out: &Path, coefficients: Option<&str>, command: &str) -> Result<u8> {
    let model = cfg.model()?;
    let grid = cfg.grid()?;
    let opts = cfg.image_options()?;
    let (maps, mut outputs) = sfd_core::experiments::evolution_snapshots(
        &model,
        cfg.l,
        &cfg.times,
        &grid,
        cfg.seed,
        Some(out),
        &opts,
        &cfg.image_format,
    )?;
    if let Some(ext) = coefficients {
        let rng = RngStream::new(cfg.seed, 0);
        let init = sample_initial(&model.spec_c, cfg.l, rng);
        for &t in &cfg.times {
            let mut set = evolve_homogeneous(&init, t, model.alpha)?;
            if t > model.tau {
                set = set.add(&sample_inhomogeneous(&model.spec_a, cfg.l, t, model.tau, model.alpha, rng)?)?;
            }
            set.time = t;
            set.seed = cfg.seed;
            let path = out.join(format!("coeffs_t{t:e}.{ext}"));
            write_coefficients(&set, &path)?;
            outputs.push(path);
        }
    }
    let summary: Vec<Value> = maps
        .iter()
        .map(|m| {
            let (lo, hi) = m.range();
            json!({"time": m.time, "stem": snapshot_stem(m.time), "min": lo, "max": hi})
        })
        .collect();
    let result = json!({"maps": summary, "L": cfg.l, "n_lat": grid.n_lat, "n_lon": grid.n_lon});
    finish(out, command, Some(cfg), cfg.seed, &outputs, &result)?;
    print_json(&result);
    Ok(0)
}

fn write_curve(curve: &ErrorCurve, out: &Path, stem: &str) -> Result<Vec<PathBuf>> {
    ensure_dir(out)?;
    let csv = out.join(format!("{stem}.csv"));
    let js = out.join(format!("{stem}.json"));
    curve.write_csv(&csv)?;
    curve.write_json(&js)?;
    Ok(vec![csv, js])
}

fn fit_json(curve: &ErrorCurve, window: Option<(f64, f64)>) -> Value {
    let (rows, share) = curve.bound_coverage();
    let fit = match fit_log_log_slope(curve, window) {
        Ok(f) => json!(f),
        Err(e) => json!({"error": e.to_string()}),
    };
    json!({"fit": fit, "bound_rows": rows, "bound_coverage": share})
}

pub fn truncation(cfg: &RunConfig, out: &Path, command: &str) -> Result<u8> {
    let model = cfg.model()?;
    let t = cfg.t.unwrap_or(10.0 * model.tau);
    let curve = truncation_error_curve(&model, cfg.l_tilde, &cfg.l_grid, t, cfg.n_real, cfg.seed)?;
    let outputs = write_curve(&curve, out, &format!("trunc_{}", model.alpha))?;
    let mut result = fit_json(&curve, cfg.window);
    result["t"] = json!(t);
    if let Some((c, a)) = algebraic_spectra(&model) {
        let top = *cfg.l_grid.last().expect("validated grid");
        if let Ok(q) = bound_q_combined(top, t, model.tau, model.alpha, c, a) {
            result["theory_slope"] = json!(-q.exponent);
            result["theory_case"] = json!(q.case.label());
        }
    }
    finish(out, command, Some(cfg), cfg.seed, &outputs, &result)?;
    print_json(&result);
    Ok(0)
}

pub fn increments(cfg: &RunConfig, out: &Path, command: &str) -> Result<u8> {
    let model = cfg.model()?;
    let t = cfg.t.unwrap_or(model.tau + 1e-6);
    let curve = increment_curve(&model, cfg.l, t, &cfg.h_grid, cfg.n_real, cfg.seed, cfg.increment_c)?;
    let outputs = write_curve(&curve, out, &format!("incr_{}", model.alpha))?;
    let mut result = fit_json(&curve, cfg.window);
    result["t"] = json!(t);
    result["theory_slope"] = json!(0.5);
    result["bound_note"] = json!(curve.meta.bound_note);
    finish(out, command, Some(cfg), cfg.seed, &outputs, &result)?;
    print_json(&result);
    Ok(0)
}

pub fn selftest(quick: bool, seed: u64, out: &Path, command: &str) -> Result<u8> {
    let scale = if quick { Scale::Quick } else { Scale::Full };
    let report = run_all(scale, seed, Some(out), |c| {
        println!("{}", c.summary_line());
        for p in &c.parts {
            println!("    [{}] {}: {}", if p.passed { "ok" } else { "FAIL" }, p.label, p.detail);
        }
    })?;
    let results = json!({
        "scale": scale,
        "passed": report.passed(),
        "checks": report.checks.iter().map(|c| json!({"id": c.id, "title": c.title, "passed": c.passed})).collect::<Vec<_>>(),
    });
    finish(out, command, None, seed, &report.outputs, &results)?;
    Ok(if report.passed() { 0 } else { 1 })
}
