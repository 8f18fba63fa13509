//! Choosing `C_n` by validation log-likelihood.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::ComparisonData;
use crate::error::{Error, Result};
use crate::model::log_likelihood;
use crate::solver::{fit, SolverConfig};

/// `points` values of `C_n` evenly spaced in `log10` over
/// `[log10_min, log10_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub points: usize,
    pub log10_min: f64,
    pub log10_max: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            points: 20,
            log10_min: -1.0,
            log10_max: 1.0,
        }
    }
}

impl GridSpec {
    pub fn values(&self) -> Vec<f64> {
        match self.points {
            0 => Vec::new(),
            1 => vec![10f64.powf(self.log10_min)],
            p => (0..p)
                .map(|k| {
                    let t = k as f64 / (p - 1) as f64;
                    10f64.powf(self.log10_min + t * (self.log10_max - self.log10_min))
                })
                .collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.points == 0
            || !self.log10_min.is_finite()
            || !self.log10_max.is_finite()
            || self.log10_min > self.log10_max
        {
            return Err(Error::InvalidConfig(format!("invalid C_n grid {self:?}")));
        }
        Ok(())
    }
}

/// Validation score of one grid point. `validation_log_likelihood` is `None`
/// when the fit failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridScore {
    pub cn: f64,
    pub tau: f64,
    pub validation_log_likelihood: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    pub chosen_cn: f64,
    pub scores: Vec<GridScore>,
}

impl TuneResult {
    /// Per-grid scores as CSV with columns `cn,tau,validation_log_likelihood,iterations,converged`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        let io = |e: csv::Error| Error::Io(e.into());
        out.write_record(["cn", "tau", "validation_log_likelihood", "iterations", "converged"])
            .map_err(io)?;
        for s in &self.scores {
            out.write_record([
                s.cn.to_string(),
                s.tau.to_string(),
                s.validation_log_likelihood.map_or_else(String::new, |v| v.to_string()),
                s.iterations.to_string(),
                s.converged.to_string(),
            ])
            .map_err(io)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Fits the train counts at `τ = C_n · n` for every grid value and scores the
/// validation counts, which must be indexed over the same players. The best
/// score wins; ties go to the smaller `C_n`.
pub fn tune_cn(
    train: &ComparisonData,
    validation: &ComparisonData,
    grid: &[f64],
    template: &SolverConfig,
) -> Result<TuneResult> {
    if train.n() != validation.n() {
        return Err(Error::DimensionMismatch {
            expected: train.n(),
            found: validation.n(),
        });
    }
    if train.total_comparisons() == 0 || validation.total_comparisons() == 0 {
        return Err(Error::InvalidData(
            "training and validation sets must both be non-empty".into(),
        ));
    }
    if grid.is_empty() {
        return Err(Error::InvalidConfig("empty C_n grid".into()));
    }
    let n = train.n();
    let outcomes: Vec<Result<GridScore>> = grid
        .par_iter()
        .map(|&cn| {
            let config = SolverConfig {
                tau: cn * n as f64,
                ..template.clone()
            };
            let result = fit(train, &config)?;
            Ok(GridScore {
                cn,
                tau: config.tau,
                validation_log_likelihood: Some(log_likelihood(validation, &result.m_hat)?),
                iterations: result.iterations,
                converged: result.converged,
                error: None,
            })
        })
        .collect();

    let mut scores = Vec::with_capacity(grid.len());
    let mut first_error = None;
    for (&cn, outcome) in grid.iter().zip(outcomes) {
        match outcome {
            Ok(score) => scores.push(score),
            Err(e) => {
                scores.push(GridScore {
                    cn,
                    tau: cn * n as f64,
                    validation_log_likelihood: None,
                    iterations: 0,
                    converged: false,
                    error: Some(e.to_string()),
                });
                first_error.get_or_insert(e);
            }
        }
    }

    let mut best: Option<(f64, f64)> = None;
    for s in &scores {
        if let Some(ll) = s.validation_log_likelihood {
            let better = match best {
                None => true,
                Some((best_cn, best_ll)) => ll > best_ll || (ll == best_ll && s.cn < best_cn),
            };
            if better {
                best = Some((s.cn, ll));
            }
        }
    }
    match best {
        Some((chosen_cn, _)) => Ok(TuneResult { chosen_cn, scores }),
        None => Err(first_error.unwrap_or_else(|| Error::InvalidData("no grid point produced a score".into()))),
    }
}
