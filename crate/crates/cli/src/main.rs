//! `spnn`: train, forecast and score smooth pinball quantile networks.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Exit status of a run that completed but failed a check.
pub const EXIT_CHECK_FAILED: u8 = 1;
/// Exit status of usage, configuration and data errors.
pub const EXIT_ERROR: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "spnn", version, about = "Non-crossing multiple quantile regression for wind power")]
pub struct Cli {
    /// JSON run configuration; flags override its keys.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Seed for weight initialisation and data synthesis.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,

    /// Model kind: spnn1, spnn2, linear_qr, persistence, climatology or uniform.
    #[arg(long, global = true, value_name = "NAME")]
    pub model: Option<String>,

    /// Quantile levels: gefcom, intervals or a comma list such as 0.1,0.5,0.9.
    #[arg(long, global = true, value_name = "GRID")]
    pub levels: Option<String>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit one model per zone and monthly window.
    Train(TrainArgs),
    /// Produce forecast CSVs from model files, or from a baseline fitted on the fly.
    Forecast(ForecastArgs),
    /// Score forecast CSVs against observed power.
    Evaluate(EvaluateArgs),
    /// Compare analytic gradients with central finite differences.
    Gradcheck(GradcheckArgs),
    /// Write synthetic data sets.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Zone CSV files; the file stem names the zone.
    #[arg(long = "data", num_args = 1.., value_name = "CSV")]
    pub data: Vec<PathBuf>,

    /// Year whose months are forecast.
    #[arg(long)]
    pub eval_year: Option<i32>,

    /// Restrict to these test months (YYYY-MM, comma separated).
    #[arg(long, value_delimiter = ',')]
    pub months: Vec<String>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,

    #[arg(long)]
    pub epochs: Option<usize>,

    #[arg(long)]
    pub max_steps: Option<usize>,

    #[arg(long)]
    pub batch_size: Option<usize>,

    #[arg(long)]
    pub learning_rate: Option<f64>,

    #[arg(long)]
    pub alpha: Option<f64>,

    /// Crossing-penalty weight.
    #[arg(long)]
    pub penalty_c: Option<f64>,

    #[arg(long, value_enum)]
    pub activation: Option<ActivationArg>,
}

#[derive(Debug, Args)]
pub struct ForecastArgs {
    #[command(flatten)]
    pub data: DataArgs,

    /// Model files or directories of `*.model.json`.
    #[arg(long = "models", num_args = 1.., value_name = "PATH")]
    pub models: Vec<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Zone CSV files holding the observed power.
    #[arg(long = "data", num_args = 1.., value_name = "CSV")]
    pub data: Vec<PathBuf>,

    /// Forecast CSVs or directories of `*.forecast.csv`.
    #[arg(long = "forecasts", required = true, num_args = 1.., value_name = "PATH")]
    pub forecasts: Vec<PathBuf>,

    /// Model whose quantile score is the skill-score reference.
    #[arg(long, default_value = "linear_qr")]
    pub reference: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ActivationArg {
    Tanh,
    Relu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ActivationChoice {
    Tanh,
    Relu,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DepthChoice {
    #[value(name = "1")]
    One,
    #[value(name = "2")]
    Two,
    Both,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 100)]
    pub instances: usize,

    #[arg(long, value_enum, default_value_t = ActivationChoice::Both)]
    pub activation: ActivationChoice,

    /// Number of hidden layers.
    #[arg(long, value_enum, default_value_t = DepthChoice::Both)]
    pub depth: DepthChoice,

    /// Central-difference step.
    #[arg(long, default_value_t = spnn::optimizer::GRADCHECK_STEP)]
    pub step: f64,

    /// Tolerance for tanh networks; relu uses ten times this.
    #[arg(long, default_value_t = 1e-5)]
    pub tolerance: f64,

    /// Corrupt the analytic gradient (negative control).
    #[arg(long, hide = true)]
    pub corrupt: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SynthKind {
    /// `x ~ U(0.1, 1)`, `y = x + 0.2 x eps`: train.csv and test.csv.
    Hetero,
    /// Hourly zone CSVs in GEFCom layout.
    Zone,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, value_enum, default_value_t = SynthKind::Hetero)]
    pub kind: SynthKind,

    #[arg(long, default_value_t = 5000)]
    pub n_train: usize,

    #[arg(long, default_value_t = 2000)]
    pub n_test: usize,

    #[arg(long, default_value_t = 2012)]
    pub start_year: i32,

    #[arg(long, default_value_t = 2)]
    pub years: u32,

    #[arg(long, default_value_t = 1)]
    pub zones: usize,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_ERROR) } else { ExitCode::SUCCESS };
        }
    };
    match commands::run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
