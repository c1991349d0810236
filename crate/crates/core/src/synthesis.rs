//! Synthesis of real field maps from harmonic coefficients, and map output.

use std::f64::consts::PI;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::write_atomically;
use crate::quadrature::gauss_legendre;
use crate::specfun::{normalized_legendre_column, spherical_harmonic, SphPoint};
use crate::stochastic::CoefficientSet;

/// Placement of the latitude rings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Latitudes {
    /// θ_j = πj/(nLat-1), poles included.
    #[default]
    Equiangular,
    /// θ_j = arccos of the Gauss–Legendre nodes, north to south.
    GaussLegendre,
}

/// Latitude–longitude grid with longitudes φ_k = 2πk/nLon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n_lat: usize,
    pub n_lon: usize,
    #[serde(default)]
    pub latitudes: Latitudes,
}

impl GridSpec {
    pub fn equiangular(n_lat: usize, n_lon: usize) -> Result<Self> {
        let g = GridSpec {
            n_lat,
            n_lon,
            latitudes: Latitudes::Equiangular,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn gauss_legendre(n_lat: usize, n_lon: usize) -> Result<Self> {
        let g = GridSpec {
            n_lat,
            n_lon,
            latitudes: Latitudes::GaussLegendre,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        let min_lat = match self.latitudes {
            Latitudes::Equiangular => 2,
            Latitudes::GaussLegendre => 1,
        };
        if self.n_lat < min_lat {
            return Err(Error::config("n_lat", format!("must be at least {min_lat}, got {}", self.n_lat)));
        }
        if self.n_lon < 1 {
            return Err(Error::config("n_lon", "must be at least 1"));
        }
        Ok(())
    }

    pub fn colatitudes(&self) -> Vec<f64> {
        match self.latitudes {
            Latitudes::Equiangular => {
                let d = PI / (self.n_lat - 1) as f64;
                (0..self.n_lat).map(|j| j as f64 * d).collect()
            }
            Latitudes::GaussLegendre => {
                let (x, _) = gauss_legendre(self.n_lat);
                x.iter().rev().map(|x| x.clamp(-1.0, 1.0).acos()).collect()
            }
        }
    }

    pub fn longitude(&self, k: usize) -> f64 {
        2.0 * PI * k as f64 / self.n_lon as f64
    }

    /// Quadrature weights per ring for the probability measure μ on the
    /// sphere (Gauss–Legendre rings only).
    pub fn ring_weights(&self) -> Option<Vec<f64>> {
        match self.latitudes {
            Latitudes::Equiangular => None,
            Latitudes::GaussLegendre => {
                let (_, w) = gauss_legendre(self.n_lat);
                let n = self.n_lon as f64;
                Some(w.iter().rev().map(|w| 0.5 * w / n).collect())
            }
        }
    }
}

/// Field values on a grid, row-major by latitude.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldMap {
    pub grid: GridSpec,
    pub values: Vec<f64>,
    pub time: f64,
    pub lmax: usize,
    pub seed: u64,
}

impl FieldMap {
    pub fn get(&self, j: usize, k: usize) -> f64 {
        self.values[j * self.grid.n_lon + k]
    }

    pub fn ring(&self, j: usize) -> &[f64] {
        &self.values[j * self.grid.n_lon..(j + 1) * self.grid.n_lon]
    }

    /// (min, max) of the values.
    pub fn range(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)))
    }
}

/// Per-m complex ring coefficients F_m(θ) = Σ_ℓ V_{ℓ,m}N_{ℓ,m}(cos θ),
/// already carrying the factor 2 for m ≥ 1.
fn ring_coefficients(coeffs: &CoefficientSet, theta: f64, col: &mut [f64], out: &mut [Complex64]) {
    let lmax = coeffs.lmax();
    let (s, x) = theta.sin_cos();
    for m in 0..=lmax {
        normalized_legendre_column(m, lmax, x, s.abs(), col);
        let mut acc = Complex64::new(0.0, 0.0);
        for ell in m..=lmax {
            acc += coeffs.get(ell, m) * col[ell - m];
        }
        out[m] = if m == 0 { Complex64::new(acc.re, 0.0) } else { 2.0 * acc };
    }
}

enum RingTransform {
    Direct { twiddle: Vec<Complex64> },
    Fft(Arc<dyn Fft<f64>>),
}

impl RingTransform {
    fn new(n_lon: usize, lmax: usize) -> Self {
        if n_lon < 4 * lmax.max(1) {
            let twiddle = (0..n_lon)
                .map(|j| Complex64::from_polar(1.0, 2.0 * PI * j as f64 / n_lon as f64))
                .collect();
            RingTransform::Direct { twiddle }
        } else {
            RingTransform::Fft(FftPlanner::new().plan_fft_inverse(n_lon))
        }
    }

    /// g_k = Re Σ_m a_m e^{imφ_k}.
    fn apply(&self, a: &[Complex64], out: &mut [f64], buf: &mut Vec<Complex64>) {
        let n = out.len();
        match self {
            RingTransform::Direct { twiddle } => {
                for (k, o) in out.iter_mut().enumerate() {
                    let mut s = 0.0;
                    for (m, am) in a.iter().enumerate() {
                        let w = twiddle[(m * k) % n];
                        s += am.re * w.re - am.im * w.im;
                    }
                    *o = s;
                }
            }
            RingTransform::Fft(plan) => {
                buf.clear();
                buf.resize(n, Complex64::new(0.0, 0.0));
                for (m, am) in a.iter().enumerate() {
                    buf[m % n] += *am;
                }
                plan.process(buf);
                for (o, v) in out.iter_mut().zip(buf.iter()) {
                    *o = v.re;
                }
            }
        }
    }
}

/// f(θ_j, φ_k) = Σ_ℓ (V_{ℓ,0}Y_{ℓ,0} + 2Σ_{m≥1} Re(V_{ℓ,m}Y_{ℓ,m})), evaluated
/// ring by ring.
pub fn synthesize(coeffs: &CoefficientSet, grid: &GridSpec) -> Result<FieldMap> {
    grid.validate()?;
    let lmax = coeffs.lmax();
    let thetas = grid.colatitudes();
    let transform = RingTransform::new(grid.n_lon, lmax);
    let mut values = vec![0.0; grid.n_lat * grid.n_lon];

    let do_ring = |(theta, ring): (&f64, &mut [f64])| {
        let mut col = vec![0.0; lmax + 1];
        let mut a = vec![Complex64::new(0.0, 0.0); lmax + 1];
        let mut buf = Vec::new();
        ring_coefficients(coeffs, *theta, &mut col, &mut a);
        transform.apply(&a, ring, &mut buf);
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        thetas.par_iter().zip(values.par_chunks_mut(grid.n_lon)).for_each(do_ring);
    }
    #[cfg(not(feature = "parallel"))]
    thetas.iter().zip(values.chunks_mut(grid.n_lon)).for_each(do_ring);

    if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::accuracy(format!("synthesis produced a non-finite value {bad}")));
    }
    Ok(FieldMap {
        grid: *grid,
        values,
        time: coeffs.time,
        lmax,
        seed: coeffs.seed,
    })
}

/// Pointwise evaluation from the spherical harmonics directly; O(L²) per
/// point. Used as the reference for [`synthesize`].
pub fn synthesize_point(coeffs: &CoefficientSet, p: SphPoint) -> Result<f64> {
    let mut f = 0.0;
    for ell in 0..=coeffs.lmax() {
        f += coeffs.get(ell, 0).re * spherical_harmonic(ell, 0, p)?.re;
        for m in 1..=ell {
            f += 2.0 * (coeffs.get(ell, m) * spherical_harmonic(ell, m as i64, p)?).re;
        }
    }
    Ok(f)
}

/// Colour tables for [`write_map_image`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Colormap {
    /// Piecewise-linear through the nine RGB anchors in [`VIRIDIS`].
    #[default]
    Viridis,
    /// Black to white.
    Gray,
}

/// viridis sampled at u = 0, 1/8, ..., 1.
pub const VIRIDIS: [[u8; 3]; 9] = [
    [68, 1, 84],
    [71, 45, 123],
    [59, 82, 139],
    [44, 114, 142],
    [33, 145, 140],
    [40, 174, 128],
    [94, 201, 98],
    [173, 220, 48],
    [253, 231, 37],
];

impl Colormap {
    pub fn name(self) -> &'static str {
        match self {
            Colormap::Viridis => "viridis",
            Colormap::Gray => "gray",
        }
    }

    /// Colour of u ∈ [0, 1]; channels are interpolated in f64 and rounded.
    pub fn rgb(self, u: f64) -> [u8; 3] {
        let u = if u.is_nan() { 0.0 } else { u.clamp(0.0, 1.0) };
        match self {
            Colormap::Gray => {
                let g = (255.0 * u).round() as u8;
                [g, g, g]
            }
            Colormap::Viridis => {
                let x = u * 8.0;
                let i = (x.floor() as usize).min(7);
                let f = x - i as f64;
                let (a, b) = (VIRIDIS[i], VIRIDIS[i + 1]);
                std::array::from_fn(|c| (a[c] as f64 + f * (b[c] as f64 - a[c] as f64)).round() as u8)
            }
        }
    }
}

impl std::str::FromStr for Colormap {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "viridis" => Ok(Colormap::Viridis),
            "gray" | "grey" => Ok(Colormap::Gray),
            _ => Err(Error::config("colormap", format!("unknown colormap `{s}` (viridis, gray)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ImageOptions {
    pub colormap: Colormap,
    /// Value range mapped onto the colormap; the map's own range when unset.
    pub range: Option<(f64, f64)>,
}

/// Scaling recorded next to every image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageSidecar {
    pub time: f64,
    #[serde(rename = "L")]
    pub lmax: usize,
    pub seed: u64,
    pub vmin: f64,
    pub vmax: f64,
    pub colormap: String,
}

/// RGB bytes of the map in equirectangular layout (row j = ring j, north at
/// the top) and the range used. A degenerate range maps everything to u = 0.
pub fn render_rgb(map: &FieldMap, options: &ImageOptions) -> (Vec<u8>, f64, f64) {
    let (vmin, vmax) = options.range.unwrap_or_else(|| map.range());
    let span = vmax - vmin;
    let mut rgb = Vec::with_capacity(3 * map.values.len());
    for &v in &map.values {
        let u = if span > 0.0 { (v - vmin) / span } else { 0.0 };
        rgb.extend_from_slice(&options.colormap.rgb(u));
    }
    (rgb, vmin, vmax)
}

fn encode_ppm(w: &mut dyn Write, width: usize, height: usize, rgb: &[u8]) -> std::io::Result<()> {
    write!(w, "P6\n{width} {height}\n255\n")?;
    w.write_all(rgb)
}

#[cfg(feature = "png")]
fn encode_png(w: &mut dyn Write, width: usize, height: usize, rgb: &[u8]) -> std::io::Result<()> {
    let mut enc = png::Encoder::new(w, width as u32, height as u32);
    enc.set_color(png::ColorType::Rgb);
    enc.set_depth(png::BitDepth::Eight);
    let mut writer = enc.write_header().map_err(std::io::Error::other)?;
    writer.write_image_data(rgb).map_err(std::io::Error::other)?;
    writer.finish().map_err(std::io::Error::other)
}

/// Write the map as an image, PNG when `path` ends in `.png` (and the `png`
/// feature is on), binary PPM otherwise, plus `<stem>.json` holding the
/// scaling.
pub fn write_map_image(map: &FieldMap, path: &Path, options: &ImageOptions) -> Result<ImageSidecar> {
    let (rgb, vmin, vmax) = render_rgb(map, options);
    let (width, height) = (map.grid.n_lon, map.grid.n_lat);
    let is_png = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("png"));
    if is_png {
        #[cfg(feature = "png")]
        write_atomically(path, |w| encode_png(w, width, height, &rgb))?;
        #[cfg(not(feature = "png"))]
        return Err(Error::Input(format!(
            "{}: PNG output is not enabled in this build; use .ppm",
            path.display()
        )));
    } else {
        write_atomically(path, |w| encode_ppm(w, width, height, &rgb))?;
    }
    let sidecar = ImageSidecar {
        time: map.time,
        lmax: map.lmax,
        seed: map.seed,
        vmin,
        vmax,
        colormap: options.colormap.name().to_string(),
    };
    let json_path = path.with_extension("json");
    let text = serde_json::to_string_pretty(&sidecar).expect("sidecar serializes");
    write_atomically(&json_path, |w| w.write_all(text.as_bytes()))?;
    Ok(sidecar)
}

/// `theta,phi,value` rows, latitude-major, 17 significant digits.
pub fn write_map_csv(map: &FieldMap, path: &Path) -> Result<()> {
    let thetas = map.grid.colatitudes();
    write_atomically(path, |w| {
        w.write_all(b"theta,phi,value\n")?;
        for (j, theta) in thetas.iter().enumerate() {
            for k in 0..map.grid.n_lon {
                writeln!(w, "{:.16e},{:.16e},{:.16e}", theta, map.grid.longitude(k), map.get(j, k))?;
            }
        }
        Ok(())
    })
}

/// Rows of a map CSV as [theta, phi, value].
pub fn read_map_csv(path: &Path) -> Result<Vec<[f64; 3]>> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rows = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if i == 0 {
            if line.trim() != "theta,phi,value" {
                return Err(Error::Input(format!("{}: expected header `theta,phi,value`", path.display())));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let bad = || Error::Input(format!("{} line {}: malformed row `{line}`", path.display(), i + 1));
        let mut row = [0.0; 3];
        let mut fields = line.split(',');
        for slot in row.iter_mut() {
            *slot = fields.next().ok_or_else(bad)?.trim().parse().map_err(|_| bad())?;
        }
        if fields.next().is_some() {
            return Err(bad());
        }
        rows.push(row);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stochastic::RngStream;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_coeffs(lmax: usize, seed: u64) -> CoefficientSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut c = CoefficientSet::zeros(lmax);
        for ell in 0..=lmax {
            for m in 0..=ell {
                c.set(ell, m, Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
            }
        }
        c
    }

    fn max_abs(v: &[f64]) -> f64 {
        v.iter().fold(0.0f64, |a, &b| a.max(b.abs()))
    }

    #[test]
    fn constant_and_dipole() {
        let mut c = CoefficientSet::zeros(3);
        c.set(0, 0, Complex64::new(2.5, 0.0));
        let g = GridSpec::equiangular(5, 7).unwrap();
        let map = synthesize(&c, &g).unwrap();
        assert!(map.values.iter().all(|v| (v - 2.5).abs() < 1e-15));

        let mut c = CoefficientSet::zeros(3);
        c.set(1, 0, Complex64::new(1.0, 0.0));
        let map = synthesize(&c, &g).unwrap();
        for (j, th) in g.colatitudes().iter().enumerate() {
            for k in 0..7 {
                assert!((map.get(j, k) - 3f64.sqrt() * th.cos()).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn direct_and_fft_paths_agree_with_pointwise() {
        let c = random_coeffs(24, 1);
        for n_lon in [17usize, 96, 128] {
            let g = GridSpec::equiangular(13, n_lon).unwrap();
            let map = synthesize(&c, &g).unwrap();
            let scale = max_abs(&map.values);
            for (j, th) in g.colatitudes().iter().enumerate() {
                for k in (0..n_lon).step_by(5) {
                    let p = SphPoint::new(*th, g.longitude(k)).unwrap();
                    let want = synthesize_point(&c, p).unwrap();
                    assert!((map.get(j, k) - want).abs() <= 1e-12 * scale, "n_lon={n_lon} ({j},{k})");
                }
            }
        }
    }

    #[test]
    fn linearity() {
        let (a, b) = (random_coeffs(16, 2), random_coeffs(16, 3));
        let g = GridSpec::equiangular(9, 40).unwrap();
        let lhs = synthesize(&a.scaled(-1.7).add(&b).unwrap(), &g).unwrap();
        let fa = synthesize(&a, &g).unwrap();
        let fb = synthesize(&b, &g).unwrap();
        let scale = max_abs(&lhs.values);
        for i in 0..lhs.values.len() {
            assert!((lhs.values[i] - (-1.7 * fa.values[i] + fb.values[i])).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn pure_order_is_confined_to_its_wavenumber() {
        let (lmax, n_lon) = (12usize, 32usize);
        let g = GridSpec::equiangular(8, n_lon).unwrap();
        for (ell, m) in [(5usize, 3usize), (12, 12), (7, 0)] {
            let mut c = CoefficientSet::zeros(lmax);
            c.set(ell, m, Complex64::new(0.6, -0.8));
            let map = synthesize(&c, &g).unwrap();
            for j in 1..7 {
                let ring = map.ring(j);
                let mut total = 0.0;
                let mut off = 0.0;
                for q in 0..=n_lon / 2 {
                    let s: Complex64 = ring
                        .iter()
                        .enumerate()
                        .map(|(k, v)| v * Complex64::from_polar(1.0, -2.0 * PI * (q * k) as f64 / n_lon as f64))
                        .sum();
                    total += s.norm_sqr();
                    if q != m {
                        off += s.norm_sqr();
                    }
                }
                assert!(off <= 1e-18 * total.max(1e-300), "({ell},{m}) ring {j}: leakage {}", off / total);
            }
        }
    }

    #[test]
    fn parseval_on_gauss_legendre_rings() {
        let c = random_coeffs(20, 4);
        let g = GridSpec::gauss_legendre(21, 41).unwrap();
        let map = synthesize(&c, &g).unwrap();
        let w = g.ring_weights().unwrap();
        let quad: f64 = (0..g.n_lat).map(|j| w[j] * map.ring(j).iter().map(|v| v * v).sum::<f64>()).sum();
        let want: f64 = (0..=20).map(|l| c.degree_power(l)).sum();
        assert!(((quad - want) / want).abs() < 1e-12, "{quad} vs {want}");
    }

    #[test]
    fn documented_pixels_of_a_two_by_two_map() {
        let map = FieldMap {
            grid: GridSpec::equiangular(2, 2).unwrap(),
            values: vec![0.0, 1.0, 0.5, 0.25],
            time: 0.0,
            lmax: 0,
            seed: 0,
        };
        let opts = ImageOptions {
            colormap: Colormap::Viridis,
            range: Some((0.0, 1.0)),
        };
        let (rgb, _, _) = render_rgb(&map, &opts);
        assert_eq!(rgb, [68, 1, 84, 253, 231, 37, 33, 145, 140, 59, 82, 139]);
        let gray = render_rgb(&map, &ImageOptions { colormap: Colormap::Gray, ..opts }).0;
        assert_eq!(gray, [0, 0, 0, 255, 255, 255, 128, 128, 128, 64, 64, 64]);
    }

    #[test]
    fn constant_map_is_one_colour() {
        let mut c = CoefficientSet::zeros(2);
        c.set(0, 0, Complex64::new(1.0, 0.0));
        let map = synthesize(&c, &GridSpec::equiangular(4, 6).unwrap()).unwrap();
        let (rgb, _, _) = render_rgb(&map, &ImageOptions::default());
        assert!(rgb.chunks(3).all(|p| p == &rgb[..3]));
    }

    #[test]
    fn image_files_and_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let set = crate::stochastic::sample_initial(
            &crate::spectra::AlgebraicSpectrum::new(1.0, 1.0, 2.3).unwrap().into(),
            8,
            RngStream::new(3, 0),
        );
        let map = synthesize(&set, &GridSpec::equiangular(6, 12).unwrap()).unwrap();
        let path = dir.path().join("m.ppm");
        let side = write_map_image(&map, &path, &ImageOptions::default()).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert!(bytes.starts_with(b"P6\n12 6\n255\n"));
        assert_eq!(bytes.len(), b"P6\n12 6\n255\n".len() + 3 * 72);
        let json: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("m.json")).unwrap()).unwrap();
        for key in ["time", "L", "seed", "vmin", "vmax", "colormap"] {
            assert!(json.get(key).is_some(), "missing {key}");
        }
        assert_eq!(json["vmin"].as_f64().unwrap(), side.vmin);
        #[cfg(feature = "png")]
        {
            let p = dir.path().join("m.png");
            write_map_image(&map, &p, &ImageOptions::default()).unwrap();
            assert!(std::fs::read(&p).unwrap().starts_with(b"\x89PNG"));
        }
    }

    #[test]
    fn unwritable_path_leaves_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let map = FieldMap {
            grid: GridSpec::equiangular(2, 1).unwrap(),
            values: vec![0.0, 0.0],
            time: 0.0,
            lmax: 0,
            seed: 0,
        };
        let path = dir.path().join("missing").join("m.ppm");
        let err = write_map_image(&map, &path, &ImageOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
        assert!(err.to_string().contains("m.ppm"));
        assert!(!path.exists());
        assert!(std::fs::read_dir(dir.path()).unwrap().count() == 0);
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let map = FieldMap {
            grid: GridSpec::equiangular(2, 1).unwrap(),
            values: vec![0.0, 0.0],
            time: 0.0,
            lmax: 0,
            seed: 0,
        };
        let p = dir.path().join("z.csv");
        write_map_csv(&map, &p).unwrap();
        let rows = read_map_csv(&p).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows.iter().all(|r| r[2] == 0.0));

        let c = random_coeffs(10, 5);
        let g = GridSpec::equiangular(7, 9).unwrap();
        let map = synthesize(&c, &g).unwrap();
        write_map_csv(&map, &p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(!text.contains(';'));
        let rows = read_map_csv(&p).unwrap();
        let thetas = g.colatitudes();
        for (i, r) in rows.iter().enumerate() {
            let (j, k) = (i / 9, i % 9);
            assert_eq!(r[0], thetas[j]);
            assert_eq!(r[1], g.longitude(k));
            assert_eq!(r[2], map.get(j, k));
        }
    }
}
