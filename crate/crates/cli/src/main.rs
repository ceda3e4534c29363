use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod bench;
mod config;
mod output;
mod plan;
mod tune;
mod verify;

use config::{PlanSource, ProblemKind};

/// Bad flags, config or fixtures. Exits with status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// A statistical or acceptance check did not pass. Exits with status 1.
#[derive(Debug)]
pub struct CheckFailed(pub String);

impl std::fmt::Display for CheckFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "check failed: {}", self.0)
    }
}

impl std::error::Error for CheckFailed {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// Maps library validation errors to usage errors.
pub fn invalid_input(e: zorms::Error) -> anyhow::Error {
    match e {
        zorms::Error::InvalidArgument(_)
        | zorms::Error::DimensionMismatch { .. }
        | zorms::Error::NonFinite(_) => usage(e.to_string()),
        other => other.into(),
    }
}

#[derive(Parser)]
#[command(
    name = "zorms",
    version,
    about = "Zeroth-order random matrix search: planning, verification and MPC tuning"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
#[allow(clippy::large_enum_variant)]
enum Command {
    /// Print a bound-driven plan as JSON, or a bound comparison sweep as CSV.
    Plan(PlanArgs),
    /// Run a statistical verifier suite; exit 1 if any check fails.
    Verify {
        #[command(subcommand)]
        which: VerifyCommand,
    },
    /// Same as `verify moments`.
    VerifyMoments(verify::MomentsArgs),
    /// Run the optimizer on the configured problem and write artifacts.
    Tune(TuneArgs),
    /// Equal-budget comparison against uniform random search (CSV).
    Bench(BenchArgs),
}

#[derive(Subcommand)]
enum VerifyCommand {
    /// Ensemble norm moments against their closed forms.
    Moments(verify::MomentsArgs),
    /// Oracle mean against the gradient of a linear cost.
    Oracle(verify::OracleArgs),
    /// Smoothed cost against the smoothing-gap bound.
    SmoothingGap(verify::GapArgs),
    /// Oracle second moment against its bound.
    SecondMoment(verify::SecondMomentArgs),
    /// Projection non-expansiveness, idempotence and nearest-point checks.
    Projection(verify::ProjectionArgs),
}

#[derive(Args, Clone, Debug, Default)]
pub struct CommonArgs {
    /// JSON run configuration; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Base seed.
    #[arg(long, env = "ZORMS_SEED")]
    pub seed: Option<u64>,
}

#[derive(Args, Debug)]
pub struct PlanArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, value_enum)]
    pub source: Option<PlanSource>,
    #[arg(long)]
    pub l0: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub r_bar: Option<f64>,
    /// Matrix dimension (sum of block dimensions).
    #[arg(long)]
    pub n: Option<usize>,
    /// Executed iteration count override.
    #[arg(long)]
    pub iterations: Option<u64>,
    /// Emit CSV `n,N_ours,N_baseline,ratio` for n = 1..=SWEEP instead.
    #[arg(long, value_name = "SWEEP")]
    pub sweep: Option<usize>,
    /// Write to this file instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub force: bool,
}

#[derive(Args, Debug)]
pub struct TuneArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, value_enum)]
    pub problem: Option<ProblemKind>,
    /// Output directory (must not exist or be empty unless --force).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub force: bool,
    /// Only evaluate and report the baseline.
    #[arg(long)]
    pub baseline_only: bool,
    /// Number of seeds, starting at the base seed.
    #[arg(long)]
    pub runs: Option<u64>,
    #[arg(long)]
    pub iterations: Option<u64>,
    #[arg(long, value_enum)]
    pub source: Option<PlanSource>,
    #[arg(long)]
    pub mu: Option<f64>,
    /// Step constant of `h_k = c / sqrt(k + 1)` (manual plans).
    #[arg(long)]
    pub step_c: Option<f64>,
    #[arg(long)]
    pub l0: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub r_bar: Option<f64>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub problem_seed: Option<u64>,
    #[arg(long)]
    pub plant: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub task: Option<PathBuf>,
    #[arg(long)]
    pub constraints: Option<PathBuf>,
    #[arg(long)]
    pub weights: Option<PathBuf>,
    #[arg(long)]
    pub horizon: Option<usize>,
    /// Recompute P from the Riccati equation at every evaluation.
    #[arg(long)]
    pub dare_terminal: Option<bool>,
    /// Blocks to tune, e.g. `q,r`.
    #[arg(long, value_delimiter = ',')]
    pub tune: Option<Vec<String>>,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Cost evaluations per run and method.
    #[arg(long)]
    pub budget: Option<u64>,
    /// Number of seeds, starting at the base seed.
    #[arg(long)]
    pub runs: Option<u64>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub problem_seed: Option<u64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Random-search box half-width.
    #[arg(long)]
    pub radius: Option<f64>,
    /// Use `h_k = c / sqrt(k + 1)` for ZO-RMS instead of the planned step.
    #[arg(long)]
    pub step_c: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub force: bool,
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Plan(a) => plan::run(a),
        Command::Verify { which } => match which {
            VerifyCommand::Moments(a) => verify::moments(a),
            VerifyCommand::Oracle(a) => verify::oracle(a),
            VerifyCommand::SmoothingGap(a) => verify::smoothing_gap(a),
            VerifyCommand::SecondMoment(a) => verify::second_moment(a),
            VerifyCommand::Projection(a) => verify::projection(a),
        },
        Command::VerifyMoments(a) => verify::moments(a),
        Command::Tune(a) => tune::run(a),
        Command::Bench(a) => bench::run(a),
    }
}

/// 2 for usage or config errors, 1 for failed checks and runtime errors.
fn exit_code(e: &anyhow::Error) -> u8 {
    if e.downcast_ref::<UsageError>().is_some() {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&usage("bad flag")), 2);
        assert_eq!(exit_code(&CheckFailed("m2 exact".into()).into()), 1);
        assert_eq!(
            exit_code(&anyhow::Error::from(zorms::Error::QpInfeasible)),
            1
        );
        assert_eq!(
            exit_code(&invalid_input(zorms::Error::InvalidArgument("x".into()))),
            2
        );
        assert_eq!(
            CheckFailed("m2 exact".into()).to_string(),
            "check failed: m2 exact"
        );
    }
}
