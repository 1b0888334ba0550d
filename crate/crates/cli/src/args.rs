use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "cvqkd",
    version,
    about = "Multi-mode CV-QKD key rates with non-Gaussian operations"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate the key rate at fixed gain and transmissivities.
    Point(PointArgs),
    /// Optimize the key rate at every loss in a range.
    Sweep(RunArgs),
    /// Optimize the key rate at a single loss.
    Optimize(OptimizeArgs),
    /// Check the closed-form operation model against the Fock-space oracle.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioArg {
    Single,
    Exp,
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// TOML file with defaults for any of these options.
    #[arg(long, env = "CVQKD_CONFIG")]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum, env = "CVQKD_SCENARIO")]
    pub scenario: Option<ScenarioArg>,
    /// Exponential decay constant of the supermode spectrum.
    #[arg(long, env = "CVQKD_DECAY")]
    pub decay: Option<f64>,
    #[arg(long, env = "CVQKD_KMAX")]
    pub kmax: Option<usize>,
    /// Number of leading supermodes that receive the operation.
    #[arg(long, env = "CVQKD_KSEL")]
    pub ksel: Option<usize>,
    /// none, 1ps, 1pa, 1pc or 0pc.
    #[arg(long, env = "CVQKD_OP")]
    pub op: Option<String>,
    #[arg(long, overrides_with = "no_memory")]
    pub memory: bool,
    #[arg(long, overrides_with = "memory")]
    pub no_memory: bool,
    #[arg(long, overrides_with = "no_clamp")]
    pub clamp: bool,
    #[arg(long, overrides_with = "clamp")]
    pub no_clamp: bool,
    /// Loss in dB: a single value or A:B:STEP.
    #[arg(long, env = "CVQKD_LOSS_DB")]
    pub loss_db: Option<String>,
    /// Excess noise referred to the channel input.
    #[arg(long, env = "CVQKD_EPS")]
    pub eps: Option<f64>,
    /// Detector electronic-noise variance.
    #[arg(long, env = "CVQKD_NU")]
    pub nu: Option<f64>,
    #[arg(long, env = "CVQKD_ETA_D")]
    pub eta_d: Option<f64>,
    #[arg(long, env = "CVQKD_ETA_R")]
    pub eta_r: Option<f64>,
    /// Fiber attenuation used for the distance column, dB/km.
    #[arg(long, env = "CVQKD_ATTENUATION")]
    pub attenuation: Option<f64>,
    /// Upper gain bound; defaults to 2.5 over the leading coefficient.
    #[arg(long, env = "CVQKD_GAIN_MAX")]
    pub gain_max: Option<f64>,
    #[arg(long, env = "CVQKD_T_MIN")]
    pub t_min: Option<f64>,
    #[arg(long, env = "CVQKD_T_MAX")]
    pub t_max: Option<f64>,
    /// Grid points per optimization axis.
    #[arg(long, env = "CVQKD_GRID_POINTS")]
    pub grid_points: Option<usize>,
    #[arg(long, env = "CVQKD_REL_TOL")]
    pub rel_tol: Option<f64>,
    #[arg(long, env = "CVQKD_OUT")]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, env = "CVQKD_FORMAT")]
    pub format: Option<Format>,
    /// Worker threads; 0 uses every core.
    #[arg(long, env = "CVQKD_WORKERS")]
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct PointArgs {
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long, env = "CVQKD_GAIN")]
    pub gain: Option<f64>,
    /// Transmissivity per operated mode; one value is applied to all.
    #[arg(long = "t", value_delimiter = ',', env = "CVQKD_T")]
    pub t: Vec<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct OptimizeArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Include every evaluated point in JSON output.
    #[arg(long)]
    pub trace: bool,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    /// Override every tolerance at once.
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub cm_tol: Option<f64>,
    #[arg(long)]
    pub prob_tol: Option<f64>,
    #[arg(long)]
    pub mi_tol: Option<f64>,
    /// Random draws for the mutual-information check.
    #[arg(long)]
    pub draws: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Write the report as JSON to this path.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, hide = true)]
    pub inject_fault: Option<String>,
}
