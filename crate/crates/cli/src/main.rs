mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Map, Value};

const AFTER_HELP: &str = "\
Times (t, tau, times, h) are in the model's dimensionless time units; angles in radians.
Exit codes: 0 success, 1 self-test check failed, 2 usage/config/domain error, 3 accuracy error, 4 I/O error.
SPHERE_FRACDIFF_THREADS caps the number of worker threads.";

/// Time-fractional stochastic diffusion on the unit sphere.
#[derive(Parser, Debug)]
#[command(name = "sphere-fracdiff", version, after_help = AFTER_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evaluate the Mittag-Leffler function E_{alpha,beta}(-x) for x >= 0.
    Ml {
        /// Order alpha in (0, 1] (dimensionless).
        #[arg(long)]
        alpha: f64,
        /// Second parameter beta > 0 (dimensionless).
        #[arg(long, default_value_t = 1.0)]
        beta: f64,
        /// Arguments x >= 0 (dimensionless); repeat or separate with commas.
        #[arg(long, required = true, num_args = 1.., value_delimiter = ',')]
        x: Vec<f64>,
    },
    /// Evaluate sigma^2_{l,t,alpha} = int_0^t E_alpha(-lambda_l r^alpha)^2 dr and its bound.
    Sigma {
        /// Degree l >= 0.
        #[arg(long)]
        ell: usize,
        /// Time t >= 0 (time units).
        #[arg(long)]
        t: f64,
        /// Order alpha in (0, 1].
        #[arg(long)]
        alpha: f64,
    },
    /// Bound constants, truncation bounds over l_grid, q(t) and the Hoelder constant, as JSON.
    Bounds(RunArgs),
    /// Synthesize maps of one sample path at each of `times`.
    Simulate {
        #[command(flatten)]
        run: RunArgs,
        /// Also write the harmonic coefficients at each time (csv or bin).
        #[arg(long, value_parser = ["csv", "bin"])]
        coefficients: Option<String>,
    },
    /// Monte Carlo truncation error Q_{L,L_tilde}(t) over l_grid with its bound and slope.
    Truncation(RunArgs),
    /// Monte Carlo increment norm J_{h,L}(t) over h_grid with its bound and slope.
    Increments(RunArgs),
    /// Run the numbered verification checks; exits 1 when any check fails.
    Selftest {
        /// Reduced sizes for a fast smoke run.
        #[arg(long)]
        quick: bool,
        /// Random seed.
        #[arg(long, default_value_t = 2024)]
        seed: u64,
        /// Output directory.
        #[arg(long, default_value = "sfd-out")]
        out: PathBuf,
    },
}

/// Config file plus per-key overrides. Flags win over the file.
#[derive(Args, Debug, Default)]
struct RunArgs {
    /// JSON config file with a flat object of the keys below.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "sfd-out")]
    out: PathBuf,
    /// Fractional order alpha in (0, 1].
    #[arg(long)]
    alpha: Option<f64>,
    /// Noise onset time tau > 0 (time units).
    #[arg(long)]
    tau: Option<f64>,
    /// Initial spectrum C_0.
    #[arg(long)]
    c_head: Option<f64>,
    /// Initial spectrum coefficient: C_l = c_coeff * l^-kappa1.
    #[arg(long)]
    c_coeff: Option<f64>,
    /// Initial spectrum decay exponent (> 2).
    #[arg(long)]
    kappa1: Option<f64>,
    /// Noise spectrum A_0.
    #[arg(long)]
    a_head: Option<f64>,
    /// Noise spectrum coefficient: A_l = a_coeff * l^-kappa2.
    #[arg(long)]
    a_coeff: Option<f64>,
    /// Noise spectrum decay exponent (> 2).
    #[arg(long)]
    kappa2: Option<f64>,
    /// Truncation degree for maps and increments.
    #[arg(long = "L")]
    l: Option<usize>,
    /// Reference degree of the truncation experiment.
    #[arg(long = "L-tilde")]
    l_tilde: Option<usize>,
    /// Truncation degrees, comma separated, ascending, below L_tilde.
    #[arg(long, value_delimiter = ',')]
    l_grid: Option<Vec<usize>>,
    /// Monte Carlo realizations (>= 2).
    #[arg(long)]
    n_real: Option<usize>,
    /// Evaluation time t > 0 (time units).
    #[arg(long)]
    t: Option<f64>,
    /// Snapshot times, comma separated, ascending (time units).
    #[arg(long, value_delimiter = ',')]
    times: Option<Vec<f64>>,
    /// Time steps h, comma separated, ascending (time units).
    #[arg(long, value_delimiter = ',')]
    h_grid: Option<Vec<f64>>,
    /// Random seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Constant C of the increment bound (measured when absent).
    #[arg(long)]
    increment_c: Option<f64>,
    /// Slope-fit window as x_min,x_max (degrees or time units).
    #[arg(long, value_delimiter = ',', num_args = 2)]
    window: Option<Vec<f64>>,
    /// Hoelder exponent beta* in (0, 1].
    #[arg(long)]
    beta_star: Option<f64>,
    /// Map rings (latitudes).
    #[arg(long)]
    n_lat: Option<usize>,
    /// Map points per ring (longitudes).
    #[arg(long)]
    n_lon: Option<usize>,
    /// Ring placement: equiangular or gauss-legendre.
    #[arg(long)]
    latitudes: Option<String>,
    /// Colormap: viridis or gray.
    #[arg(long)]
    colormap: Option<String>,
    /// Image format: ppm or png.
    #[arg(long)]
    image_format: Option<String>,
    /// Colour scale as vmin,vmax (field units).
    #[arg(long, value_delimiter = ',', num_args = 2)]
    range: Option<Vec<f64>>,
}

impl RunArgs {
    fn overrides(&self) -> Map<String, Value> {
        let mut m = Map::new();
        let mut put = |k: &str, v: Option<Value>| {
            if let Some(v) = v {
                m.insert(k.to_string(), v);
            }
        };
        put("alpha", self.alpha.map(|v| json!(v)));
        put("tau", self.tau.map(|v| json!(v)));
        put("c_head", self.c_head.map(|v| json!(v)));
        put("c_coeff", self.c_coeff.map(|v| json!(v)));
        put("kappa1", self.kappa1.map(|v| json!(v)));
        put("a_head", self.a_head.map(|v| json!(v)));
        put("a_coeff", self.a_coeff.map(|v| json!(v)));
        put("kappa2", self.kappa2.map(|v| json!(v)));
        put("L", self.l.map(|v| json!(v)));
        put("L_tilde", self.l_tilde.map(|v| json!(v)));
        put("l_grid", self.l_grid.as_ref().map(|v| json!(v)));
        put("n_real", self.n_real.map(|v| json!(v)));
        put("t", self.t.map(|v| json!(v)));
        put("times", self.times.as_ref().map(|v| json!(v)));
        put("h_grid", self.h_grid.as_ref().map(|v| json!(v)));
        put("seed", self.seed.map(|v| json!(v)));
        put("increment_c", self.increment_c.map(|v| json!(v)));
        put("window", self.window.as_ref().map(|v| json!(v)));
        put("beta_star", self.beta_star.map(|v| json!(v)));
        put("n_lat", self.n_lat.map(|v| json!(v)));
        put("n_lon", self.n_lon.map(|v| json!(v)));
        put("latitudes", self.latitudes.as_ref().map(|v| json!(v)));
        put("colormap", self.colormap.as_ref().map(|v| json!(v)));
        put("image_format", self.image_format.as_ref().map(|v| json!(v)));
        put("range", self.range.as_ref().map(|v| json!(v)));
        m
    }

    fn resolve(&self) -> sfd_core::Result<config::RunConfig> {
        let mut map = match &self.config {
            Some(p) => config::read_file(p)?,
            None => Map::new(),
        };
        map.extend(self.overrides());
        config::RunConfig::from_map(map)
    }
}

fn init_threads() -> sfd_core::Result<()> {
    let Ok(raw) = std::env::var("SPHERE_FRACDIFF_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n >= 1)
        .ok_or_else(|| sfd_core::Error::config("SPHERE_FRACDIFF_THREADS", format!("must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| sfd_core::Error::config("SPHERE_FRACDIFF_THREADS", e.to_string()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let command_line = std::env::args().collect::<Vec<_>>().join(" ");
    let result = init_threads().and_then(|()| match cli.command {
        Command::Ml { alpha, beta, x } => commands::ml(alpha, beta, &x),
        Command::Sigma { ell, t, alpha } => commands::sigma(ell, t, alpha),
        Command::Bounds(run) => commands::bounds(&run.resolve()?, &run.out, &command_line),
        Command::Simulate { run, coefficients } => {
            commands::simulate(&run.resolve()?, &run.out, coefficients.as_deref(), &command_line)
        }
        Command::Truncation(run) => commands::truncation(&run.resolve()?, &run.out, &command_line),
        Command::Increments(run) => commands::increments(&run.resolve()?, &run.out, &command_line),
        Command::Selftest { quick, seed, out } => commands::selftest(quick, seed, &out, &command_line),
    });
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("sphere-fracdiff: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
