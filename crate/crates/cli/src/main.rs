//! `eqpart` command-line front end.
//!
//! Exit codes: 0 on success, 2 for unreadable input or bad arguments, 3 when
//! the data violate an estimator precondition. Every failure prints a single
//! line on stderr of the form `<kind>-error: <reason>`.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use commands::{CliError, Exit};

#[derive(Debug, Parser)]
#[command(name = "eqpart", version, about = "Entropy estimation with rotated equiprobable partitions")]
struct Cli {
    /// Suppress warnings on stderr.
    #[arg(long, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Estimate the differential entropy of a CSV sample.
    Estimate(EstimateArgs),
    /// Score all estimators against random bivariate Gaussians.
    Benchmark(BenchmarkArgs),
    /// Write the equiprobable partition of a CSV sample as JSON.
    DumpPartition(DumpArgs),
}

#[derive(Debug, Args)]
struct InputArgs {
    /// CSV file with one sample per row, or `-` for stdin.
    #[arg(long, short)]
    input: PathBuf,

    /// Skip the first row.
    #[arg(long)]
    has_header: bool,

    /// Clip each coordinate to mean +/- K standard deviations first.
    #[arg(long, value_name = "K")]
    winsorise: Option<f64>,
}

#[derive(Debug, Args)]
struct TreeArgs {
    /// Recursion depth s; the tree has 2^(s*d) bins.
    #[arg(long, short, default_value_t = 2)]
    depth: usize,

    /// Bisection order of the dimensions, e.g. `1,0`.
    #[arg(long, value_delimiter = ',')]
    cycle_order: Option<Vec<usize>>,

    /// Multi-start points for the rotation search.
    #[arg(long, default_value_t = 16)]
    starts: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Naive,
    Marginal,
    Equiprobable,
    Rotated,
}

#[derive(Debug, Args)]
struct EstimateArgs {
    #[command(flatten)]
    input: InputArgs,

    #[arg(long, short, value_enum, default_value_t = MethodArg::Rotated)]
    method: MethodArg,

    #[command(flatten)]
    tree: TreeArgs,

    /// Grid resolution k for naive and marginal; defaults to 2^depth.
    #[arg(long, short = 'k')]
    bins_per_dim: Option<usize>,

    /// Average tree estimates over the cyclic bisection orders.
    #[arg(long)]
    ensemble: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
struct BenchmarkArgs {
    /// Samples per trial.
    #[arg(long, short)]
    n: usize,

    /// Total bin count B, shared by every method (4, 16, 64, ...).
    #[arg(long, short)]
    bins: usize,

    #[arg(long, short, default_value_t = 200)]
    trials: usize,

    #[arg(long, short)]
    seed: u64,

    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,

    /// Write here instead of stdout.
    #[arg(long, short)]
    output: Option<PathBuf>,

    /// Bootstrap resamples for the confidence bound.
    #[arg(long, default_value_t = 10_000)]
    resamples: usize,
}

#[derive(Debug, Args)]
struct DumpArgs {
    #[command(flatten)]
    input: InputArgs,

    #[command(flatten)]
    tree: TreeArgs,

    /// Partition the optimally rotated sample instead of the raw one.
    #[arg(long)]
    rotate: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            let rendered = e.to_string();
            let first = rendered.lines().next().unwrap_or("invalid arguments");
            let reason = first.strip_prefix("error: ").unwrap_or(first);
            return CliError::new(Exit::Usage, reason).report();
        }
    };

    if !cli.quiet {
        let _ = stderrlog::new()
            .verbosity(1)
            .color(stderrlog::ColorChoice::Never)
            .init();
    }

    let result = match cli.command {
        Command::Estimate(a) => commands::estimate(&a),
        Command::Benchmark(a) => commands::benchmark(&a),
        Command::DumpPartition(a) => commands::dump_partition(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => e.report(),
    }
}
