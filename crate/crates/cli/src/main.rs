//! `skewrank` command-line tool.
//!
//! Exit codes: 0 on success, 1 on runtime failure, 2 on usage errors.

mod artifact;
mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use skewrank::Regime;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(String),
}

impl From<skewrank::Error> for CliError {
    fn from(e: skewrank::Error) -> Self {
        match e {
            skewrank::Error::InvalidConfig(_) => CliError::Usage(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "skewrank", version, about = "Intransitive pairwise-comparison models")]
struct Cli {
    /// Worker threads; defaults to the number of cores. Results do not depend
    /// on this.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Monte-Carlo comparison of the proposed estimator and Bradley-Terry.
    Simulate(SimulateArgs),
    /// Fit the proposed model to a match-record file.
    Fit(FitArgs),
    /// Choose C_n on a train/validation split.
    Tune(TuneArgs),
    /// Run the split, tune, refit and test protocol for both models.
    Evaluate(EvaluateArgs),
    /// Print the fitted probability that WINNER beats LOSER.
    Predict(PredictArgs),
    /// Share of player triplets violating stochastic transitivity.
    Audit(AuditArgs),
}

#[derive(Debug, Clone, Args)]
struct SolverArgs {
    /// Stationarity tolerance of the solver.
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
    #[arg(long, default_value_t = 5000)]
    max_iter: usize,
}

#[derive(Debug, Clone, Args)]
struct TripletArgs {
    /// Sample this many triplets instead of the default.
    #[arg(long, conflicts_with = "exhaustive")]
    sample_triplets: Option<usize>,
    /// Count every triplet, however many players there are.
    #[arg(long)]
    exhaustive: bool,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// sparse, less_sparse or dense.
    #[arg(long)]
    regime: Regime,
    #[arg(long)]
    n: usize,
    /// Half-rank of the true logit matrix.
    #[arg(long, default_value_t = 2)]
    k: usize,
    /// Maximum comparisons per pair.
    #[arg(long, default_value_t = 5)]
    trials: u32,
    #[arg(long, default_value_t = 50)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Nuclear-norm constant; defaults to 2k.
    #[arg(long)]
    cn: Option<f64>,
    #[command(flatten)]
    solver: SolverArgs,
    /// Per-replication CSV; standard output if omitted.
    #[arg(long)]
    output: Option<PathBuf>,
    /// JSON summary; defaults to the CSV path with a `.json` extension.
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("budget").required(true).args(["cn", "tau"])))]
struct FitArgs {
    /// Match records, `winner,loser[,date]` per line.
    #[arg(long)]
    input: PathBuf,
    /// Budget as `τ = C_n · n`.
    #[arg(long)]
    cn: Option<f64>,
    /// Nuclear-norm budget τ.
    #[arg(long)]
    tau: Option<f64>,
    #[command(flatten)]
    solver: SolverArgs,
    /// Model JSON; standard output if omitted.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TuneArgs {
    #[arg(long)]
    input: PathBuf,
    /// Seed of the train/validation/test split.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    solver: SolverArgs,
    /// Report JSON; standard output if omitted.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Per-grid validation scores as CSV.
    #[arg(long)]
    grid_csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Skip tuning and use this C_n.
    #[arg(long)]
    cn: Option<f64>,
    #[command(flatten)]
    solver: SolverArgs,
    #[command(flatten)]
    triplets: TripletArgs,
    /// Report JSON; standard output if omitted.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    grid_csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PredictArgs {
    /// Model JSON written by `fit`.
    #[arg(long)]
    model: PathBuf,
    winner: String,
    loser: String,
}

#[derive(Debug, Args)]
struct AuditArgs {
    #[arg(long)]
    model: PathBuf,
    /// Seed for triplet sampling.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    triplets: TripletArgs,
    #[arg(long)]
    output: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(threads) = cli.threads {
        if threads == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    match cli.command {
        Command::Simulate(args) => commands::simulate(args),
        Command::Fit(args) => commands::fit(args),
        Command::Tune(args) => commands::tune(args),
        Command::Evaluate(args) => commands::evaluate(args),
        Command::Predict(args) => commands::predict(args),
        Command::Audit(args) => commands::audit(args),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
