//! Flat JSON run configuration. Every key is optional; command-line flags
//! are merged over the file before validation.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use sfd_core::spectra::{AlgebraicSpectrum, Spectrum};
use sfd_core::stochastic::FractionalModel;
use sfd_core::synthesis::{Colormap, GridSpec, ImageOptions, Latitudes};
use sfd_core::{Error, Result};

#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub alpha: f64,
    pub tau: f64,
    pub c_head: f64,
    pub c_coeff: f64,
    pub kappa1: f64,
    pub a_head: f64,
    pub a_coeff: f64,
    pub kappa2: f64,
    pub c_table: Option<Vec<f64>>,
    pub a_table: Option<Vec<f64>>,
    #[serde(rename = "L")]
    pub l: usize,
    #[serde(rename = "L_tilde")]
    pub l_tilde: usize,
    pub l_grid: Vec<usize>,
    pub n_real: usize,
    pub t: Option<f64>,
    pub times: Vec<f64>,
    pub h_grid: Vec<f64>,
    pub seed: u64,
    pub increment_c: Option<f64>,
    pub window: Option<(f64, f64)>,
    pub beta_star: f64,
    pub n_lat: usize,
    pub n_lon: usize,
    pub latitudes: Latitudes,
    pub colormap: String,
    pub image_format: String,
    pub range: Option<(f64, f64)>,
}

fn take<T: DeserializeOwned>(map: &mut Map<String, Value>, key: &str, default: T) -> Result<T> {
    match map.remove(key) {
        None | Some(Value::Null) => Ok(default),
        Some(v) => serde_json::from_value(v).map_err(|e| Error::config(key, e.to_string())),
    }
}

fn take_opt<T: DeserializeOwned>(map: &mut Map<String, Value>, key: &str) -> Result<Option<T>> {
    take(map, key, None)
}

/// Read a config file into a JSON object.
pub fn read_file(path: &Path) -> Result<Map<String, Value>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    match serde_json::from_str(&text) {
        Ok(Value::Object(m)) => Ok(m),
        Ok(_) => Err(Error::config("config", format!("{} must hold a JSON object", path.display()))),
        Err(e) => Err(Error::config("config", format!("{}: {e}", path.display()))),
    }
}

impl RunConfig {
    pub fn from_map(mut map: Map<String, Value>) -> Result<Self> {
        let m = &mut map;
        let cfg = RunConfig {
            alpha: take(m, "alpha", 0.5)?,
            tau: take(m, "tau", 1e-5)?,
            c_head: take(m, "c_head", 1.0)?,
            c_coeff: take(m, "c_coeff", 1.0)?,
            kappa1: take(m, "kappa1", 2.3)?,
            a_head: take(m, "a_head", 1e4)?,
            a_coeff: take(m, "a_coeff", 1e4)?,
            kappa2: take(m, "kappa2", 2.5)?,
            c_table: take_opt(m, "c_table")?,
            a_table: take_opt(m, "a_table")?,
            l: take(m, "L", 400)?,
            l_tilde: take(m, "L_tilde", 400)?,
            l_grid: take(m, "l_grid", vec![25, 50, 100, 150, 200, 300])?,
            n_real: take(m, "n_real", 50)?,
            t: take_opt(m, "t")?,
            times: take(m, "times", vec![0.0, 5e-6, 1e-5, 1e-4])?,
            h_grid: take(m, "h_grid", (1..=11).map(|k| k as f64 * 1e-6).collect())?,
            seed: take(m, "seed", 2024)?,
            increment_c: take_opt(m, "increment_c")?,
            window: take_opt(m, "window")?,
            beta_star: take(m, "beta_star", 0.1)?,
            n_lat: take(m, "n_lat", 512)?,
            n_lon: take(m, "n_lon", 1024)?,
            latitudes: take(m, "latitudes", Latitudes::Equiangular)?,
            colormap: take(m, "colormap", "viridis".to_string())?,
            image_format: take(m, "image_format", "ppm".to_string())?,
            range: take_opt(m, "range")?,
        };
        if let Some(key) = map.keys().next() {
            return Err(Error::config(key.clone(), "unknown key"));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        self.model()?;
        if self.l < 1 {
            return Err(Error::config("L", "must be at least 1"));
        }
        if let Some(t) = self.t {
            if !(t > 0.0) || !t.is_finite() {
                return Err(Error::config("t", format!("must be positive, got {t}")));
            }
        }
        if !(self.beta_star > 0.0 && self.beta_star <= 1.0) {
            return Err(Error::config("beta_star", "must lie in (0, 1]"));
        }
        if let Some((a, b)) = self.window {
            if !(a < b) {
                return Err(Error::config("window", "needs x_min < x_max"));
            }
        }
        if let Some((a, b)) = self.range {
            if !(a <= b) || !a.is_finite() || !b.is_finite() {
                return Err(Error::config("range", "needs finite vmin <= vmax"));
            }
        }
        self.image_options()?;
        self.grid()?;
        match self.image_format.as_str() {
            "ppm" | "png" => Ok(()),
            other => Err(Error::config("image_format", format!("unknown format `{other}` (ppm, png)"))),
        }
    }

    fn spectrum(table: &Option<Vec<f64>>, head: f64, coeff: f64, kappa: f64, keys: [&str; 4]) -> Result<Spectrum> {
        if let Some(v) = table {
            let s = Spectrum::Tabulated(v.clone());
            s.validate().map_err(|e| Error::config(keys[0], e.to_string()))?;
            return Ok(s);
        }
        for (v, key) in [(head, keys[1]), (coeff, keys[2])] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::config(key, format!("must be finite and >= 0, got {v}")));
            }
        }
        let s = AlgebraicSpectrum::new(head, coeff, kappa).map_err(|e| Error::config(keys[3], e.to_string()))?;
        Ok(s.into())
    }

    pub fn model(&self) -> Result<FractionalModel> {
        let c = Self::spectrum(&self.c_table, self.c_head, self.c_coeff, self.kappa1, ["c_table", "c_head", "c_coeff", "kappa1"])?;
        let a = Self::spectrum(&self.a_table, self.a_head, self.a_coeff, self.kappa2, ["a_table", "a_head", "a_coeff", "kappa2"])?;
        FractionalModel::new(self.alpha, self.tau, c, a)
    }

    pub fn grid(&self) -> Result<GridSpec> {
        let g = GridSpec {
            n_lat: self.n_lat,
            n_lon: self.n_lon,
            latitudes: self.latitudes,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn image_options(&self) -> Result<ImageOptions> {
        Ok(ImageOptions {
            colormap: self.colormap.parse::<Colormap>()?,
            range: self.range,
        })
    }

    pub fn to_json(&self) -> Value {
        serde_json::to_value(self).expect("config serializes")
    }
}
