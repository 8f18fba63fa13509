use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use skewrank::pipeline::{
    build_matrix, build_matrix_against, intransitivity_rate, read_records_path, run_real_data, split, tune_cn,
    GridScore, GridSpec, Intransitivity, MatchRecord, PipelineConfig, RealDataReport, TripletMode, TripletPolicy,
    TuneResult,
};
use skewrank::simulate::MethodSummary;
use skewrank::{run_experiment, SimConfig, SolverConfig};

use crate::artifact::{Diagnostics, FitSettings, ModelArtifact, FORMAT, FORMAT_VERSION};
use crate::{AuditArgs, CliError, EvaluateArgs, FitArgs, PredictArgs, SimulateArgs, TripletArgs, TuneArgs};

const VERSION: &str = env!("CARGO_PKG_VERSION");

fn io_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(format!("{}: {e}", path.display()))
}

/// Opens `path`, or standard output when it is `None`.
fn sink(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| io_error(p, e))?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn write_json<T: Serialize>(path: Option<&Path>, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Runtime(e.to_string()))?;
    text.push('\n');
    let mut out = sink(path)?;
    out.write_all(text.as_bytes())
        .and_then(|()| out.flush())
        .map_err(|e| CliError::Runtime(e.to_string()))
}

fn load_records(path: &Path) -> Result<Vec<MatchRecord>, CliError> {
    read_records_path(path).map_err(|e| io_error(path, e))
}

fn solver_config(tau: f64, args: &crate::SolverArgs) -> Result<SolverConfig, CliError> {
    let config = SolverConfig {
        tol: args.tol,
        max_iter: args.max_iter,
        ..SolverConfig::new(tau)
    };
    config.validate()?;
    Ok(config)
}

#[derive(Serialize)]
struct SimulateSummary<'a> {
    version: &'static str,
    config: &'a SimConfig,
    effective_cn: f64,
    proposed: &'a MethodSummary,
    bt: &'a MethodSummary,
}

pub fn simulate(args: SimulateArgs) -> Result<(), CliError> {
    let config = SimConfig {
        n: args.n,
        k: args.k,
        max_trials: args.trials,
        regime: args.regime,
        replications: args.reps,
        seed: args.seed,
        cn: args.cn,
        tol: args.solver.tol,
        max_iter: args.solver.max_iter,
    };
    config.validate()?;
    solver_config(config.effective_cn() * config.n as f64, &args.solver)?;
    let report = run_experiment(&config)?;

    let mut out = sink(args.output.as_deref())?;
    report.write_csv(&mut out)?;
    drop(out);

    let summary_path = args
        .summary
        .or_else(|| args.output.as_ref().map(|p| p.with_extension("json")));
    if let Some(path) = summary_path {
        write_json(
            Some(&path),
            &SimulateSummary {
                version: VERSION,
                config: &report.config,
                effective_cn: config.effective_cn(),
                proposed: &report.proposed,
                bt: &report.bt,
            },
        )?;
    }
    Ok(())
}

pub fn fit(args: FitArgs) -> Result<(), CliError> {
    let records = load_records(&args.input)?;
    let matrix = build_matrix(&records)?;
    let n = matrix.n();
    let tau = match (args.tau, args.cn) {
        (Some(tau), _) => tau,
        (None, Some(cn)) => cn * n as f64,
        (None, None) => unreachable!("clap requires --cn or --tau"),
    };
    let config = solver_config(tau, &args.solver)?;
    let result = skewrank::fit(&matrix.data, &config)?;
    if !result.converged {
        eprintln!(
            "warning: solver stopped with status {:?} after {} iterations (residual {:e})",
            result.status, result.iterations, result.final_residual
        );
    }
    let diagnostics = Diagnostics {
        status: result.status,
        converged: result.converged,
        iterations: result.iterations,
        final_residual: result.final_residual,
        log_likelihood: result.log_likelihood(&matrix.data)?,
        function_evals: result.function_evals,
        projections: result.projections,
        records_used: matrix.records_used,
        pairs_observed_fraction: matrix.data.observed_pair_fraction(),
    };
    let artifact = ModelArtifact {
        format: FORMAT.into(),
        format_version: FORMAT_VERSION,
        version: VERSION.into(),
        n,
        labels: matrix.labels,
        m: result.m_hat,
        tau,
        cn: args.tau.is_none().then_some(args.cn).flatten(),
        config: FitSettings {
            input: args.input.display().to_string(),
            tol: config.tol,
            max_iter: config.max_iter,
        },
        diagnostics,
    };
    write_json(args.output.as_deref(), &artifact)
}

#[derive(Serialize)]
struct TuneRecords {
    total: usize,
    train: usize,
    validation: usize,
    test: usize,
    train_used: usize,
    validation_used: usize,
}

#[derive(Serialize)]
struct TuneReport<'a> {
    version: &'static str,
    input: String,
    seed: u64,
    grid: GridSpec,
    tol: f64,
    max_iter: usize,
    records: TuneRecords,
    train_players: usize,
    chosen_cn: f64,
    scores: &'a [GridScore],
}

fn write_grid_csv(path: Option<&PathBuf>, tuning: &TuneResult) -> Result<(), CliError> {
    if let Some(path) = path {
        let file = File::create(path).map_err(|e| io_error(path, e))?;
        tuning.write_csv(BufWriter::new(file))?;
    }
    Ok(())
}

pub fn tune(args: TuneArgs) -> Result<(), CliError> {
    let template = solver_config(0.0, &args.solver)?;
    let records = load_records(&args.input)?;
    let parts = split(&records, args.seed)?;
    let train = build_matrix(&parts.train)?;
    let validation = build_matrix_against(&parts.validation, &train.labels)?;
    let grid = GridSpec::default();
    let tuning = tune_cn(&train.data, &validation.data, &grid.values(), &template)?;
    write_grid_csv(args.grid_csv.as_ref(), &tuning)?;
    write_json(
        args.output.as_deref(),
        &TuneReport {
            version: VERSION,
            input: args.input.display().to_string(),
            seed: args.seed,
            grid,
            tol: template.tol,
            max_iter: template.max_iter,
            records: TuneRecords {
                total: records.len(),
                train: parts.train.len(),
                validation: parts.validation.len(),
                test: parts.test.len(),
                train_used: train.records_used,
                validation_used: validation.records_used,
            },
            train_players: train.n(),
            chosen_cn: tuning.chosen_cn,
            scores: &tuning.scores,
        },
    )
}

fn triplet_policy(args: &TripletArgs) -> Result<TripletPolicy, CliError> {
    Ok(match (args.exhaustive, args.sample_triplets) {
        (true, _) => TripletPolicy::All,
        (false, Some(0)) => return Err(CliError::Usage("--sample-triplets must be positive".into())),
        (false, Some(size)) => TripletPolicy::Sample { size },
        (false, None) => TripletPolicy::Auto,
    })
}

#[derive(Serialize)]
struct EvaluateReport<'a> {
    version: &'static str,
    input: String,
    #[serde(flatten)]
    report: &'a RealDataReport,
}

pub fn evaluate(args: EvaluateArgs) -> Result<(), CliError> {
    let config = PipelineConfig {
        seed: args.seed,
        cn: args.cn,
        tol: args.solver.tol,
        max_iter: args.solver.max_iter,
        triplets: triplet_policy(&args.triplets)?,
        ..PipelineConfig::default()
    };
    config.validate()?;
    let records = load_records(&args.input)?;
    let report = run_real_data(&records, &config)?;
    if let Some(tuning) = &report.tuning {
        write_grid_csv(args.grid_csv.as_ref(), tuning)?;
    }
    write_json(
        args.output.as_deref(),
        &EvaluateReport {
            version: VERSION,
            input: args.input.display().to_string(),
            report: &report,
        },
    )
}

pub fn predict(args: PredictArgs) -> Result<(), CliError> {
    let model = ModelArtifact::load(&args.model)?;
    let p = model.predict(&args.winner, &args.loser)?;
    println!("{p}");
    Ok(())
}

#[derive(Serialize)]
struct AuditReport {
    version: &'static str,
    model: String,
    n: usize,
    mode: TripletMode,
    #[serde(flatten)]
    result: Intransitivity,
}

pub fn audit(args: AuditArgs) -> Result<(), CliError> {
    let model = ModelArtifact::load(&args.model)?;
    let mode = triplet_policy(&args.triplets)?.mode(model.n, args.seed);
    let result = intransitivity_rate(&model.prob_matrix()?, mode)?;
    write_json(
        args.output.as_deref(),
        &AuditReport {
            version: VERSION,
            model: args.model.display().to_string(),
            n: model.n,
            mode,
            result,
        },
    )
}
