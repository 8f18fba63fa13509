//! Nuclear-norm constrained maximum likelihood by nonmonotone spectral
//! projected gradient.
//!
//! The solver minimizes `F(m) = -f(m)` over `{m : ‖V⁻¹(m)‖_* ≤ τ}` starting
//! from `m = 0` with spectral step `γ = 1`. Each iteration first searches
//! along the segment `m + α d` with `d = P_τ(m − γ∇F(m)) − m` (one projection)
//! and, if that fails, along the projected arc `P_τ(m − αγ∇F(m))` (one
//! projection per trial). Both searches accept a point once it satisfies a
//! nonmonotone Armijo condition against the worst of the last few accepted
//! objective values.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::data::ComparisonData;
use crate::error::{Error, Result};
use crate::model::{gradient_unchecked, log_likelihood_unchecked};
use crate::spectral::project_vec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Nuclear-norm budget `τ = C_n · n`.
    pub tau: f64,
    pub max_iter: usize,
    /// Threshold on `‖P_τ(m − ∇F(m)) − m‖_∞`.
    pub tol: f64,
    pub nonmonotone_window: usize,
    pub armijo_c: f64,
    pub backtrack_factor: f64,
    pub gamma_min: f64,
    pub gamma_max: f64,
    pub max_backtracks: usize,
}

impl SolverConfig {
    pub fn new(tau: f64) -> Self {
        Self {
            tau,
            max_iter: 5000,
            tol: 1e-4,
            nonmonotone_window: 10,
            armijo_c: 1e-4,
            backtrack_factor: 0.5,
            gamma_min: 1e-10,
            gamma_max: 1e10,
            max_backtracks: 30,
        }
    }

    /// Budget `τ = C_n · n` for `n` players.
    pub fn from_cn(cn: f64, n: usize) -> Self {
        Self::new(cn * n as f64)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if !(self.tau >= 0.0 && self.tau.is_finite()) {
            return bad("tau must be finite and non-negative");
        }
        if !(self.armijo_c > 0.0 && self.armijo_c < 1.0) {
            return bad("armijo_c must lie in (0, 1)");
        }
        if !(self.backtrack_factor > 0.0 && self.backtrack_factor < 1.0) {
            return bad("backtrack_factor must lie in (0, 1)");
        }
        if !(self.gamma_min > 0.0 && self.gamma_min <= self.gamma_max && self.gamma_max.is_finite()) {
            return bad("need 0 < gamma_min <= gamma_max < inf");
        }
        if !(self.tol >= 0.0) {
            return bad("tol must be non-negative");
        }
        if self.nonmonotone_window == 0 {
            return bad("nonmonotone_window must be at least 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitStatus {
    Converged,
    MaxIterations,
    LineSearchFailed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub n: usize,
    pub m_hat: Vec<f64>,
    /// `−f` at the starting point followed by one value per accepted iterate.
    pub objective_trace: Vec<f64>,
    pub converged: bool,
    pub status: FitStatus,
    pub iterations: usize,
    pub final_residual: f64,
    pub function_evals: usize,
    pub projections: usize,
}

impl FitResult {
    /// Log-likelihood `f(m̂)`.
    pub fn log_likelihood(&self, data: &ComparisonData) -> Result<f64> {
        crate::model::log_likelihood(data, &self.m_hat)
    }
}

/// Which trajectory produced the accepted point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchPhase {
    Linear,
    Curvilinear,
}

/// Current point handed to [`line_search`]. `objective` and `gradient` are
/// `F = −f` and `∇F` at `m`; `reference` is the largest `F` among the most
/// recent accepted iterates.
#[derive(Debug, Clone, Copy)]
pub struct SearchState<'a> {
    pub m: &'a [f64],
    pub objective: f64,
    pub gradient: &'a [f64],
    pub gamma: f64,
    pub reference: f64,
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub m: Vec<f64>,
    pub objective: f64,
    pub alpha: f64,
    pub phase: SearchPhase,
    /// `true` when the linear direction was identically zero.
    pub stationary: bool,
    pub function_evals: usize,
    pub projections: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

fn neg_objective(data: &ComparisonData, m: &[f64]) -> f64 {
    -log_likelihood_unchecked(data, m)
}

fn neg_gradient(data: &ComparisonData, m: &[f64]) -> Vec<f64> {
    let mut g = gradient_unchecked(data, m);
    g.iter_mut().for_each(|x| *x = -*x);
    g
}

fn step(m: &[f64], g: &[f64], scale: f64) -> Vec<f64> {
    m.iter().zip(g).map(|(x, gx)| x - scale * gx).collect()
}

/// One spectral projected line search from a feasible point.
pub fn line_search(state: SearchState<'_>, data: &ComparisonData, config: &SolverConfig) -> Result<SearchOutcome> {
    let n = data.n();
    let SearchState {
        m,
        gradient: g,
        gamma,
        reference,
        ..
    } = state;
    let c = config.armijo_c;
    let beta = config.backtrack_factor;
    let mut evals = 0;

    let target = project_vec(&step(m, g, gamma), n, config.tau)?;
    let mut projections = 1;
    let d: Vec<f64> = target.iter().zip(m).map(|(t, x)| t - x).collect();
    if d.iter().all(|&x| x == 0.0) {
        return Ok(SearchOutcome {
            m: m.to_vec(),
            objective: state.objective,
            alpha: 1.0,
            phase: SearchPhase::Linear,
            stationary: true,
            function_evals: 0,
            projections,
        });
    }

    let gtd = dot(g, &d);
    let mut alpha = 1.0;
    for trial in 0..=config.max_backtracks {
        let x: Vec<f64> = if trial == 0 {
            target.clone()
        } else {
            m.iter().zip(&d).map(|(xi, di)| xi + alpha * di).collect()
        };
        let value = neg_objective(data, &x);
        evals += 1;
        if value.is_finite() && value <= reference + c * alpha * gtd {
            return Ok(SearchOutcome {
                m: x,
                objective: value,
                alpha,
                phase: SearchPhase::Linear,
                stationary: false,
                function_evals: evals,
                projections,
            });
        }
        alpha *= beta;
    }

    let mut alpha = 1.0;
    for _ in 0..=config.max_backtracks {
        let x = project_vec(&step(m, g, alpha * gamma), n, config.tau)?;
        projections += 1;
        let value = neg_objective(data, &x);
        evals += 1;
        let descent: f64 = g.iter().zip(x.iter().zip(m)).map(|(gi, (xi, mi))| gi * (xi - mi)).sum();
        if value.is_finite() && value <= reference + c * descent {
            return Ok(SearchOutcome {
                m: x,
                objective: value,
                alpha,
                phase: SearchPhase::Curvilinear,
                stationary: false,
                function_evals: evals,
                projections,
            });
        }
        alpha *= beta;
    }
    Err(Error::LineSearchFailed {
        backtracks: config.max_backtracks,
    })
}

/// Barzilai–Borwein step `⟨s,s⟩/⟨s,y⟩`, clamped to `[gamma_min, gamma_max]`;
/// `gamma_max` when the curvature `⟨s,y⟩` is not positive.
pub fn bb_step(s: &[f64], y: &[f64], config: &SolverConfig) -> f64 {
    let sty = dot(s, y);
    if !(sty > 0.0) {
        return config.gamma_max;
    }
    (dot(s, s) / sty).clamp(config.gamma_min, config.gamma_max)
}

/// Unit-step projected-gradient residual `‖P_τ(m − ∇F(m)) − m‖_∞`.
pub fn residual(m: &[f64], data: &ComparisonData, config: &SolverConfig) -> Result<f64> {
    if m.len() != data.trials_upper().len() {
        return Err(Error::DimensionMismatch {
            expected: data.trials_upper().len(),
            found: m.len(),
        });
    }
    residual_with_gradient(m, &neg_gradient(data, m), data.n(), config.tau)
}

fn residual_with_gradient(m: &[f64], g: &[f64], n: usize, tau: f64) -> Result<f64> {
    let p = project_vec(&step(m, g, 1.0), n, tau)?;
    Ok(inf_norm(p.iter().zip(m).map(|(a, b)| a - b)))
}

/// Snapshot passed to the observer of [`fit_with_observer`] after each
/// accepted iterate.
#[derive(Debug, Clone, Copy)]
pub struct IterationInfo<'a> {
    pub iteration: usize,
    pub m: &'a [f64],
    pub objective: f64,
    pub residual: f64,
    pub gamma: f64,
    pub phase: SearchPhase,
    pub alpha: f64,
}

/// Maximizes the log-likelihood subject to `‖M‖_* ≤ τ`, `M ∈ Skew_n`.
pub fn fit(data: &ComparisonData, config: &SolverConfig) -> Result<FitResult> {
    fit_with_observer(data, config, |_| {})
}

pub fn fit_with_observer<F>(data: &ComparisonData, config: &SolverConfig, mut observer: F) -> Result<FitResult>
where
    F: FnMut(&IterationInfo<'_>),
{
    config.validate()?;
    let n = data.n();
    let dim = data.trials_upper().len();

    let mut m = vec![0.0; dim];
    let mut objective = neg_objective(data, &m);
    let mut grad = neg_gradient(data, &m);
    if !objective.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite { iteration: 0 });
    }
    let mut gamma = 1.0f64.clamp(config.gamma_min, config.gamma_max);
    let mut trace = vec![objective];
    let mut history: VecDeque<f64> = VecDeque::with_capacity(config.nonmonotone_window);
    history.push_back(objective);
    let mut best = (objective, m.clone());
    let mut function_evals = 1;
    let mut projections = 0;
    let mut residual = f64::INFINITY;
    let mut status = FitStatus::MaxIterations;
    let mut iterations = 0;

    while iterations < config.max_iter {
        let reference = history.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let state = SearchState {
            m: &m,
            objective,
            gradient: &grad,
            gamma,
            reference,
        };
        let outcome = match line_search(state, data, config) {
            Ok(outcome) => outcome,
            Err(Error::LineSearchFailed { .. }) => {
                status = FitStatus::LineSearchFailed;
                break;
            }
            Err(e) => return Err(e),
        };
        iterations += 1;
        function_evals += outcome.function_evals;
        projections += outcome.projections;

        let new_grad = neg_gradient(data, &outcome.m);
        function_evals += 1;
        if !outcome.objective.is_finite() || new_grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite { iteration: iterations });
        }
        let s: Vec<f64> = outcome.m.iter().zip(&m).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = new_grad.iter().zip(&grad).map(|(a, b)| a - b).collect();
        gamma = bb_step(&s, &y, config);

        m = outcome.m;
        grad = new_grad;
        objective = outcome.objective;
        trace.push(objective);
        if history.len() == config.nonmonotone_window {
            history.pop_front();
        }
        history.push_back(objective);
        if objective < best.0 {
            best = (objective, m.clone());
        }

        // A zero projected step for any γ > 0 is the optimality condition.
        residual = if outcome.stationary {
            0.0
        } else {
            projections += 1;
            residual_with_gradient(&m, &grad, n, config.tau)?
        };
        observer(&IterationInfo {
            iteration: iterations,
            m: &m,
            objective,
            residual,
            gamma,
            phase: outcome.phase,
            alpha: outcome.alpha,
        });
        if residual <= config.tol {
            status = FitStatus::Converged;
            break;
        }
    }

    let converged = status == FitStatus::Converged;
    if !converged && best.0 < objective {
        m = best.1;
        projections += 1;
        residual = residual_with_gradient(&m, &neg_gradient(data, &m), n, config.tau)?;
    }
    Ok(FitResult {
        n,
        m_hat: m,
        objective_trace: trace,
        converged,
        status,
        iterations,
        final_residual: residual,
        function_evals,
        projections,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{num_pairs, unvectorize};
    use crate::spectral::nuclear_norm;

    fn config(tau: f64) -> SolverConfig {
        SolverConfig::new(tau)
    }

    #[test]
    fn single_pair_recovers_binomial_logit() {
        let data = ComparisonData::new(2, vec![4], vec![3]).unwrap();
        let fit = fit(&data, &config(10.0)).unwrap();
        assert!(fit.converged);
        assert!((fit.m_hat[0] - 3f64.ln()).abs() < 1e-3, "{:?}", fit.m_hat);
    }

    #[test]
    fn balanced_data_stays_at_zero() {
        let data = ComparisonData::new(4, vec![2, 4, 6, 2, 8, 10], vec![1, 2, 3, 1, 4, 5]).unwrap();
        for tau in [0.0, 0.5, 100.0] {
            let fit = fit(&data, &config(tau)).unwrap();
            assert!(fit.converged);
            assert!(fit.iterations <= 2);
            assert!(fit.m_hat.iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn bb_step_examples() {
        let cfg = config(1.0);
        assert_eq!(bb_step(&[1.0, -2.0], &[1.0, -2.0], &cfg), 1.0);
        assert_eq!(bb_step(&[1.0, 0.0], &[-1.0, 0.0], &cfg), cfg.gamma_max);
        assert_eq!(bb_step(&[0.0, 0.0], &[0.0, 0.0], &cfg), cfg.gamma_max);
        assert_eq!(bb_step(&[2.0, 0.0], &[1.0, 0.0], &cfg), 2.0);
        assert_eq!(bb_step(&[1.0], &[1e-12], &cfg), cfg.gamma_max);
        assert_eq!(bb_step(&[1.0], &[1e12], &cfg), cfg.gamma_min);
    }

    #[test]
    fn residual_single_pair_at_zero() {
        // ∇f(0) = 3 − 4·½ = 1; the unit step lands on m = 1, whose 2×2 matrix
        // has nuclear norm 2, so the projection clips it to τ/2 when τ < 2.
        let data = ComparisonData::new(2, vec![4], vec![3]).unwrap();
        assert!((residual(&[0.0], &data, &config(10.0)).unwrap() - 1.0).abs() < 1e-12);
        assert!((residual(&[0.0], &data, &config(1.0)).unwrap() - 0.5).abs() < 1e-12);
        let stationary = ComparisonData::new(2, vec![4], vec![2]).unwrap();
        assert_eq!(residual(&[0.0], &stationary, &config(10.0)).unwrap(), 0.0);
    }

    #[test]
    fn stationary_point_yields_zero_direction() {
        let data = ComparisonData::new(3, vec![2, 2, 2], vec![1, 1, 1]).unwrap();
        let m = vec![0.0; 3];
        let g = neg_gradient(&data, &m);
        let f = neg_objective(&data, &m);
        let state = SearchState {
            m: &m,
            objective: f,
            gradient: &g,
            gamma: 1.0,
            reference: f,
        };
        let out = line_search(state, &data, &config(1.0)).unwrap();
        assert!(out.stationary);
        assert_eq!(out.function_evals, 0);
    }

    #[test]
    fn full_step_accepted_with_one_evaluation() {
        let data = ComparisonData::new(3, vec![5, 5, 5], vec![3, 1, 4]).unwrap();
        let m = vec![0.0; 3];
        let g = neg_gradient(&data, &m);
        let f = neg_objective(&data, &m);
        let state = SearchState {
            m: &m,
            objective: f,
            gradient: &g,
            gamma: 0.1,
            reference: f,
        };
        let out = line_search(state, &data, &config(100.0)).unwrap();
        assert_eq!(out.alpha, 1.0);
        assert_eq!(out.phase, SearchPhase::Linear);
        assert_eq!(out.function_evals, 1);
        assert_eq!(out.projections, 1);
        assert!(out.objective < f);
    }

    #[test]
    fn rejects_invalid_config() {
        let data = ComparisonData::new(2, vec![1], vec![1]).unwrap();
        let mut cfg = config(1.0);
        cfg.armijo_c = 1.0;
        assert!(matches!(fit(&data, &cfg), Err(Error::InvalidConfig(_))));
        let mut cfg = config(-1.0);
        assert!(fit(&data, &cfg).is_err());
        cfg.tau = 1.0;
        cfg.gamma_min = 10.0;
        cfg.gamma_max = 1.0;
        assert!(fit(&data, &cfg).is_err());
    }

    #[test]
    fn iterates_are_feasible_and_trace_is_deterministic() {
        let n = 6;
        let trials: Vec<u32> = (0..num_pairs(n)).map(|k| (k % 4 + 1) as u32).collect();
        let wins: Vec<u32> = trials
            .iter()
            .enumerate()
            .map(|(k, &t)| if k % 3 == 0 { t } else { t / 2 })
            .collect();
        let data = ComparisonData::new(n, trials, wins).unwrap();
        let cfg = config(3.0);
        let mut worst = 0.0f64;
        let a = fit_with_observer(&data, &cfg, |info| {
            let norm = nuclear_norm(&unvectorize(info.m, n).unwrap()).unwrap();
            worst = worst.max(norm);
        })
        .unwrap();
        assert!(a.converged);
        assert!(worst <= 3.0 * (1.0 + 1e-6), "{worst}");
        let b = fit(&data, &cfg).unwrap();
        assert_eq!(a, b);
    }
}
