//! Real-data workflow: split match records, filter players, tune `C_n`,
//! refit on train + validation and score both models on the test records.

mod matrix;
mod metrics;
mod records;
mod tune;

pub use matrix::{build_matrix, build_matrix_against, PlayerMatrix};
pub use metrics::{
    evaluate, intransitivity_rate, triplet_violated, Intransitivity, TestMetrics, TripletMode, DEFAULT_TRIPLET_SAMPLE,
    EXHAUSTIVE_LIMIT,
};
pub use records::{expand_records, read_records, read_records_path, split, write_records, MatchRecord, Split};
pub use tune::{tune_cn, GridScore, GridSpec, TuneResult};

use serde::{Deserialize, Serialize};

use crate::bt::{fit_bt, BtConfig};
use crate::data::SkewParam;
use crate::error::{Error, Result};
use crate::model::{prob_matrix, ProbMatrix};
use crate::simulate::Method;
use crate::solver::{fit, SolverConfig};

/// How many triplets the audit looks at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum TripletPolicy {
    /// Exhaustive up to [`EXHAUSTIVE_LIMIT`] players, sampled beyond.
    Auto,
    All,
    Sample {
        size: usize,
    },
}

impl TripletPolicy {
    pub fn mode(self, n: usize, seed: u64) -> TripletMode {
        match self {
            TripletPolicy::Auto => TripletMode::default_for(n, seed),
            TripletPolicy::All => TripletMode::All,
            TripletPolicy::Sample { size } => TripletMode::Sample { size, seed },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub seed: u64,
    pub grid: GridSpec,
    /// Use this `C_n` instead of tuning.
    pub cn: Option<f64>,
    pub tol: f64,
    pub max_iter: usize,
    pub bt: BtConfig,
    pub triplets: TripletPolicy,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            grid: GridSpec::default(),
            cn: None,
            tol: 1e-4,
            max_iter: 5000,
            bt: BtConfig::default(),
            triplets: TripletPolicy::Auto,
        }
    }
}

impl PipelineConfig {
    pub fn solver(&self, tau: f64) -> SolverConfig {
        SolverConfig {
            tol: self.tol,
            max_iter: self.max_iter,
            ..SolverConfig::new(tau)
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        if let Some(cn) = self.cn {
            if !(cn >= 0.0 && cn.is_finite()) {
                return Err(Error::InvalidConfig(format!("invalid C_n {cn}")));
            }
        }
        self.solver(0.0).validate()
    }
}

/// Test-set metrics for one fitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: Method,
    pub test_log_likelihood: f64,
    pub test_accuracy: f64,
    pub test_comparisons: u64,
    pub intransitivity: Intransitivity,
    /// `None` for Bradley-Terry.
    pub chosen_cn: Option<f64>,
    pub tau: Option<f64>,
    pub players_used: usize,
    /// Share of player pairs with at least one fitting comparison.
    pub pairs_observed_fraction: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordCounts {
    pub total: usize,
    pub train: usize,
    pub validation: usize,
    pub test: usize,
    pub train_used: usize,
    pub validation_used: usize,
    pub combined_used: usize,
    pub test_used: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealDataReport {
    pub config: PipelineConfig,
    pub records: RecordCounts,
    pub train_players: usize,
    /// `None` when `C_n` was given.
    pub tuning: Option<TuneResult>,
    pub chosen_cn: f64,
    pub proposed: EvalReport,
    pub bt: EvalReport,
}

/// Probabilities from both models fitted on one matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedPair {
    pub proposed: ProbMatrix,
    pub proposed_iterations: usize,
    pub proposed_converged: bool,
    pub bt: ProbMatrix,
    pub bt_iterations: usize,
}

/// Fits the proposed model at `τ = C_n · n` and Bradley-Terry on `matrix`.
pub fn fit_both(matrix: &PlayerMatrix, cn: f64, config: &PipelineConfig) -> Result<FittedPair> {
    let n = matrix.n();
    let result = fit(&matrix.data, &config.solver(cn * n as f64))?;
    let bt = fit_bt(&matrix.data, &config.bt)?;
    Ok(FittedPair {
        proposed: prob_matrix(&SkewParam::new(n, result.m_hat)?),
        proposed_iterations: result.iterations,
        proposed_converged: result.converged,
        bt: bt.params.prob_matrix(),
        bt_iterations: bt.iterations,
    })
}

/// The full protocol: split, filter and tune on train/validation, refit both
/// models on the combined records with `τ = C_n · n_combined`, and score them
/// on the test records among the combined players.
pub fn run_real_data(records: &[MatchRecord], config: &PipelineConfig) -> Result<RealDataReport> {
    config.validate()?;
    let parts = split(records, config.seed)?;

    let train = build_matrix(&parts.train)?;
    let validation = build_matrix_against(&parts.validation, &train.labels)?;
    let tuning = match config.cn {
        Some(_) => None,
        None => Some(tune_cn(
            &train.data,
            &validation.data,
            &config.grid.values(),
            &config.solver(0.0),
        )?),
    };
    let chosen_cn = match (&tuning, config.cn) {
        (Some(t), _) => t.chosen_cn,
        (None, Some(cn)) => cn,
        (None, None) => unreachable!("tuning runs whenever C_n is not given"),
    };

    let combined_records: Vec<MatchRecord> = parts.train.iter().chain(&parts.validation).cloned().collect();
    let combined = build_matrix(&combined_records)?;
    let test = build_matrix_against(&parts.test, &combined.labels)?;
    let fitted = fit_both(&combined, chosen_cn, config)?;

    let n = combined.n();
    let observed = combined.data.observed_pair_fraction();
    let mode = config.triplets.mode(n, config.seed);
    let report = |method, probs: &ProbMatrix, cn: Option<f64>, iterations, converged| -> Result<EvalReport> {
        let metrics = evaluate(probs, &test.data)?;
        Ok(EvalReport {
            method,
            test_log_likelihood: metrics.log_likelihood,
            test_accuracy: metrics.accuracy,
            test_comparisons: metrics.comparisons,
            intransitivity: intransitivity_rate(probs, mode)?,
            chosen_cn: cn,
            tau: cn.map(|c| c * n as f64),
            players_used: n,
            pairs_observed_fraction: observed,
            iterations,
            converged,
        })
    };
    let proposed = report(
        Method::Proposed,
        &fitted.proposed,
        Some(chosen_cn),
        fitted.proposed_iterations,
        fitted.proposed_converged,
    )?;
    let bt = report(Method::Bt, &fitted.bt, None, fitted.bt_iterations, true)?;

    Ok(RealDataReport {
        config: config.clone(),
        records: RecordCounts {
            total: records.len(),
            train: parts.train.len(),
            validation: parts.validation.len(),
            test: parts.test.len(),
            train_used: train.records_used,
            validation_used: validation.records_used,
            combined_used: combined.records_used,
            test_used: test.records_used,
        },
        train_players: train.n(),
        tuning,
        chosen_cn,
        proposed,
        bt,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::{gen_counts, gen_truth};

    fn synthetic(n: usize, seed: u64) -> Vec<MatchRecord> {
        let truth = gen_truth(n, 1, seed).unwrap();
        let data = gen_counts(&truth.pi, &vec![1.0; crate::data::num_pairs(n)], 3, seed + 1).unwrap();
        expand_records(&data)
    }

    #[test]
    fn protocol_runs_end_to_end() {
        let records = synthetic(12, 5);
        let config = PipelineConfig {
            grid: GridSpec {
                points: 4,
                ..GridSpec::default()
            },
            ..PipelineConfig::default()
        };
        let report = run_real_data(&records, &config).unwrap();
        let tuning = report.tuning.as_ref().unwrap();
        assert!(config.grid.values().contains(&report.chosen_cn));
        assert_eq!(tuning.scores.len(), 4);
        assert_eq!(report.records.total, records.len());
        assert!((0.0..=1.0).contains(&report.proposed.test_accuracy));
        assert_eq!(report.bt.intransitivity.violated, 0);
        assert_eq!(report, run_real_data(&records, &config).unwrap());
    }

    #[test]
    fn fixed_constant_skips_tuning() {
        let records = synthetic(10, 8);
        let config = PipelineConfig {
            cn: Some(2.98),
            ..PipelineConfig::default()
        };
        let report = run_real_data(&records, &config).unwrap();
        assert!(report.tuning.is_none());
        assert_eq!(report.chosen_cn, 2.98);
        assert_eq!(report.proposed.tau, Some(2.98 * report.proposed.players_used as f64));
    }
}
