//! Browser bindings: Mittag-Leffler curves, σ² against its bound, and a
//! rendered sample map. The plain functions are usable from Rust; the
//! `#[wasm_bindgen]` wrappers convert errors into JS exceptions.

use sfd_core::specfun::ml_decay;
use sfd_core::stochastic::{sample_combined, sigma_bound_applies, sigma_squared, sigma_squared_bound, FractionalModel, RngStream};
use sfd_core::synthesis::{render_rgb, synthesize, Colormap, GridSpec, ImageOptions};
use wasm_bindgen::prelude::*;

/// E_α(-x) at `n` evenly spaced points of [0, x_max].
pub fn ml_curve(alpha: f64, x_max: f64, n: usize) -> Result<Vec<f64>, String> {
    if n < 2 || !(x_max > 0.0) {
        return Err("need n >= 2 and x_max > 0".into());
    }
    (0..n)
        .map(|i| ml_decay(alpha, x_max * i as f64 / (n - 1) as f64).map_err(|e| e.to_string()))
        .collect()
}

/// Pairs (σ²_{ℓ,t,α}, bound) for ℓ = 1..=ell_max, flattened. The bound is
/// NaN where its regime assumptions fail.
pub fn sigma_curve(ell_max: usize, t: f64, alpha: f64) -> Result<Vec<f64>, String> {
    let mut out = Vec::with_capacity(2 * ell_max);
    for ell in 1..=ell_max {
        out.push(sigma_squared(ell, t, alpha).map_err(|e| e.to_string())?);
        out.push(if sigma_bound_applies(ell, t, alpha) {
            sigma_squared_bound(ell, t, alpha).map_err(|e| e.to_string())?
        } else {
            f64::NAN
        });
    }
    Ok(out)
}

/// RGBA pixels (row-major, north up) of one sample of U_L(t) under the
/// reference spectra.
pub fn render_map(alpha: f64, t: f64, lmax: usize, seed: u64, n_lat: usize, n_lon: usize) -> Result<Vec<u8>, String> {
    let model = FractionalModel::reference(alpha).map_err(|e| e.to_string())?;
    let coeffs = sample_combined(&model, lmax, t, RngStream::new(seed, 0)).map_err(|e| e.to_string())?;
    let grid = GridSpec::equiangular(n_lat, n_lon).map_err(|e| e.to_string())?;
    let map = synthesize(&coeffs, &grid).map_err(|e| e.to_string())?;
    let opts = ImageOptions {
        colormap: Colormap::Viridis,
        range: None,
    };
    let (rgb, _, _) = render_rgb(&map, &opts);
    Ok(rgb.chunks(3).flat_map(|p| [p[0], p[1], p[2], 255]).collect())
}

fn js<T>(r: Result<T, String>) -> Result<T, JsError> {
    r.map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = mlCurve)]
pub fn ml_curve_js(alpha: f64, x_max: f64, n: usize) -> Result<Vec<f64>, JsError> {
    js(ml_curve(alpha, x_max, n))
}

#[wasm_bindgen(js_name = sigmaCurve)]
pub fn sigma_curve_js(ell_max: usize, t: f64, alpha: f64) -> Result<Vec<f64>, JsError> {
    js(sigma_curve(ell_max, t, alpha))
}

#[wasm_bindgen(js_name = renderMap)]
pub fn render_map_js(alpha: f64, t: f64, lmax: usize, seed: u32, n_lat: usize, n_lon: usize) -> Result<Vec<u8>, JsError> {
    js(render_map(alpha, t, lmax, seed as u64, n_lat, n_lon))
}
