//! On-disk model format.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use skewrank::data::num_pairs;
use skewrank::{link, prob_matrix, FitStatus, ProbMatrix, SkewParam};

use crate::CliError;

pub const FORMAT: &str = "skewrank-model";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub status: FitStatus,
    pub converged: bool,
    pub iterations: usize,
    pub final_residual: f64,
    pub log_likelihood: f64,
    pub function_evals: usize,
    pub projections: usize,
    pub records_used: usize,
    pub pairs_observed_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSettings {
    pub input: String,
    pub tol: f64,
    pub max_iter: usize,
}

/// A fitted logit vector with its player table. `m` lists `m_ij` for
/// `i < j` in row-major order over `labels`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub format: String,
    pub format_version: u32,
    pub version: String,
    pub n: usize,
    pub labels: Vec<String>,
    pub m: Vec<f64>,
    pub tau: f64,
    pub cn: Option<f64>,
    pub config: FitSettings,
    pub diagnostics: Diagnostics,
}

impl ModelArtifact {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
        let model: ModelArtifact = serde_json::from_str(&text)
            .map_err(|e| CliError::Runtime(format!("{}: not a model file: {e}", path.display())))?;
        model.check()?;
        Ok(model)
    }

    fn check(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Runtime(format!("invalid model file: {msg}")));
        if self.format != FORMAT {
            return bad(format!("format `{}`", self.format));
        }
        if self.format_version != FORMAT_VERSION {
            return bad(format!("unsupported format version {}", self.format_version));
        }
        if self.labels.len() != self.n || self.m.len() != num_pairs(self.n) {
            return bad(format!(
                "{} labels and {} logits for n = {}",
                self.labels.len(),
                self.m.len(),
                self.n
            ));
        }
        if self.m.iter().any(|x| !x.is_finite()) {
            return bad("non-finite logit".into());
        }
        Ok(())
    }

    fn param(&self) -> Result<SkewParam, CliError> {
        Ok(SkewParam::new(self.n, self.m.clone())?)
    }

    pub fn prob_matrix(&self) -> Result<ProbMatrix, CliError> {
        Ok(prob_matrix(&self.param()?))
    }

    /// `π̂` that `winner` beats `loser`.
    pub fn predict(&self, winner: &str, loser: &str) -> Result<f64, CliError> {
        if winner == loser {
            return Err(CliError::Usage(format!("cannot compare `{winner}` with itself")));
        }
        let index: HashMap<&str, usize> = self.labels.iter().enumerate().map(|(k, l)| (l.as_str(), k)).collect();
        let lookup = |label: &str| {
            index
                .get(label)
                .copied()
                .ok_or_else(|| CliError::Runtime(format!("unknown player `{label}` (model knows {} players)", self.n)))
        };
        let (i, j) = (lookup(winner)?, lookup(loser)?);
        Ok(link(self.param()?.get(i, j)))
    }
}
