//! Approximate low-rank models for pairwise comparisons without stochastic
//! transitivity.
//!
//! Win probabilities are `π_ij = g(m_ij)` for a skew-symmetric logit matrix
//! `M` constrained to a nuclear-norm ball, fitted by maximum likelihood with a
//! nonmonotone spectral projected gradient method. A Bradley–Terry fit is
//! provided as the transitive baseline, together with a Monte-Carlo harness
//! and a train/validation/test pipeline for match records.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bt;
pub mod data;
pub mod error;
pub mod model;
pub mod pipeline;
pub mod simulate;
pub mod solver;
pub mod spectral;

pub use bt::{fit_bt, predict_bt, BtConfig, BtFit, BtParams};
pub use data::{pair_index, unvectorize, vectorize, ComparisonData, SkewParam};
pub use error::{Error, Result};
pub use model::{gradient, link, log_likelihood, prob_matrix, ProbMatrix};
pub use pipeline::{run_real_data, EvalReport, MatchRecord, PipelineConfig, RealDataReport};
pub use simulate::{run_experiment, Regime, SimConfig, SimReport};
pub use solver::{fit, FitResult, FitStatus, SolverConfig};
pub use spectral::{nuclear_norm, project, svd_skew, SpectralForm};
