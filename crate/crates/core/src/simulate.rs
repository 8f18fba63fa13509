//! Monte-Carlo harness: low-rank skew-symmetric ground truth, sparsity
//! regimes, binomial sampling and the Frobenius loss on win probabilities.
//!
//! Randomness is reproducible per replication. Each `(seed, replication,
//! stream)` triple is mixed into an independent ChaCha8 seed by
//! [`derive_seed`]; streams 0, 1 and 2 drive the truth, the comparison rates
//! and the counts of one replication.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bt::{fit_bt, BtConfig};
use crate::data::{num_pairs, vectorize, ComparisonData, SkewParam};
use crate::error::{Error, Result};
use crate::model::{prob_matrix, ProbMatrix};
use crate::solver::{fit, SolverConfig};

const TRUTH_STREAM: u64 = 0;
const RATE_STREAM: u64 = 1;
const COUNT_STREAM: u64 = 2;

/// Independent 64-bit seed for a replication substream (SplitMix64 finalizer
/// applied to the combined inputs).
pub fn derive_seed(seed: u64, replication: u64, stream: u64) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    mix(mix(mix(seed) ^ replication) ^ stream.wrapping_mul(0xD6E8_FEB8_6659_FD93))
}

pub(crate) fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Sparsity regime of the comparison rates `p_ij ~ U[p_n, 4 p_n]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// `p_n = log(n) / n`
    Sparse,
    /// `p_n = n^{-1/2}`
    LessSparse,
    /// `p_n = 1/4`
    Dense,
}

impl Regime {
    pub const ALL: [Regime; 3] = [Regime::Sparse, Regime::LessSparse, Regime::Dense];

    /// `(p_n, q_n)` with `q_n = 4 p_n`.
    pub fn rate_bounds(self, n: usize) -> Result<(f64, f64)> {
        if self == Regime::Sparse && n < 10 {
            return Err(Error::InvalidConfig(format!("sparse regime needs n >= 10, got {n}")));
        }
        let nf = n as f64;
        let p = match self {
            Regime::Sparse => nf.ln() / nf,
            Regime::LessSparse => nf.powf(-0.5),
            Regime::Dense => 0.25,
        };
        let q = 4.0 * p;
        if !(p > 0.0 && q <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "{self} regime gives rates [{p}, {q}] outside [0, 1] for n = {n}"
            )));
        }
        Ok((p, q))
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::Sparse => "sparse",
            Regime::LessSparse => "less_sparse",
            Regime::Dense => "dense",
        })
    }
}

impl FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sparse" => Ok(Regime::Sparse),
            "less_sparse" | "less-sparse" => Ok(Regime::LessSparse),
            "dense" => Ok(Regime::Dense),
            other => Err(Error::InvalidConfig(format!("unknown regime `{other}`"))),
        }
    }
}

/// Ground truth `M* = ΘJΘᵀ` and `Π* = g(M*)`.
#[derive(Debug, Clone)]
pub struct Truth {
    pub m: DMatrix<f64>,
    pub pi: ProbMatrix,
}

/// `M* = ΘJΘᵀ` where `Θ` is the orthonormal QR factor of an `n × 2k`
/// standard normal matrix (signs fixed so that `R` has a non-negative
/// diagonal) and `J` holds `k` blocks `[[0, n], [−n, 0]]`. `‖M*‖_* = 2kn`.
pub fn gen_truth(n: usize, k: usize, seed: u64) -> Result<Truth> {
    if 2 * k > n {
        return Err(Error::InvalidConfig(format!("need 2k <= n, got k = {k}, n = {n}")));
    }
    let r = 2 * k;
    let scale = n as f64;
    let mut theta = None;
    for attempt in 0..16u64 {
        let mut rng = rng_for(derive_seed(seed, attempt, TRUTH_STREAM));
        let z = DMatrix::from_fn(n, r, |_, _| rng.sample::<f64, _>(StandardNormal));
        let qr = z.qr();
        let rmat = qr.r();
        let diag_ok = (0..r).all(|i| rmat[(i, i)].abs() > 1e-10 * scale.sqrt());
        if diag_ok {
            let mut q = qr.q();
            for (i, mut col) in q.column_iter_mut().enumerate() {
                if rmat[(i, i)] < 0.0 {
                    col.neg_mut();
                }
            }
            theta = Some(q);
            break;
        }
    }
    let theta = theta.ok_or_else(|| Error::InvalidData("random factor repeatedly rank deficient".into()))?;
    let mut j = DMatrix::zeros(r, r);
    for b in 0..k {
        j[(2 * b, 2 * b + 1)] = scale;
        j[(2 * b + 1, 2 * b)] = -scale;
    }
    let m = &theta * j * theta.transpose();
    let m = (&m - m.transpose()) * 0.5;
    let pi = prob_matrix(&SkewParam::new(n, vectorize(&m)?)?);
    Ok(Truth { m, pi })
}

/// Comparison rates `p_ij = p_ji ~ U[p_n, q_n]` over the upper triangle.
pub fn gen_rates(n: usize, regime: Regime, seed: u64) -> Result<Vec<f64>> {
    let (p, q) = regime.rate_bounds(n)?;
    let mut rng = rng_for(seed);
    Ok((0..num_pairs(n)).map(|_| rng.random_range(p..=q)).collect())
}

/// `n_ij ~ Binomial(T, p_ij)` then `y_ij ~ Binomial(n_ij, π*_ij)`.
pub fn gen_counts(pi: &ProbMatrix, rates: &[f64], max_trials: u32, seed: u64) -> Result<ComparisonData> {
    let n = pi.n();
    if rates.len() != num_pairs(n) {
        return Err(Error::DimensionMismatch {
            expected: num_pairs(n),
            found: rates.len(),
        });
    }
    let mut rng = rng_for(seed);
    let mut trials = Vec::with_capacity(rates.len());
    let mut wins = Vec::with_capacity(rates.len());
    for (&rate, &p) in rates.iter().zip(pi.upper()) {
        let t = binomial(u64::from(max_trials), rate, &mut rng)?;
        let w = binomial(t, p, &mut rng)?;
        trials.push(t as u32);
        wins.push(w as u32);
    }
    ComparisonData::new(n, trials, wins)
}

fn binomial(trials: u64, p: f64, rng: &mut ChaCha8Rng) -> Result<u64> {
    Ok(Binomial::new(trials, p)
        .map_err(|e| Error::InvalidData(format!("binomial({trials}, {p}): {e}")))?
        .sample(rng))
}

/// `(n² − n)⁻¹ ‖Π̂ − Π*‖_F²` over both triangles.
pub fn loss(pi_hat: &ProbMatrix, pi_star: &ProbMatrix) -> Result<f64> {
    let n = pi_star.n();
    if pi_hat.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: pi_hat.n(),
        });
    }
    if n < 2 {
        return Ok(0.0);
    }
    let sum: f64 = pi_hat
        .upper()
        .iter()
        .zip(pi_star.upper())
        .map(|(a, b)| 2.0 * (a - b) * (a - b))
        .sum();
    Ok(sum / (n * n - n) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n: usize,
    /// Half-rank: `rank(M*) = 2k`.
    pub k: usize,
    /// Maximum comparisons per pair.
    pub max_trials: u32,
    pub regime: Regime,
    pub replications: usize,
    pub seed: u64,
    /// Nuclear-norm constant `C_n`; `None` means `2k`.
    pub cn: Option<f64>,
    pub tol: f64,
    pub max_iter: usize,
}

impl SimConfig {
    pub fn new(n: usize, k: usize, regime: Regime) -> Self {
        Self {
            n,
            k,
            max_trials: 5,
            regime,
            replications: 50,
            seed: 0,
            cn: None,
            tol: 1e-4,
            max_iter: 5000,
        }
    }

    pub fn effective_cn(&self) -> f64 {
        self.cn.unwrap_or(2.0 * self.k as f64)
    }

    pub fn validate(&self) -> Result<()> {
        if 2 * self.k > self.n {
            return Err(Error::InvalidConfig(format!(
                "need 2k <= n, got k = {}, n = {}",
                self.k, self.n
            )));
        }
        if self.max_trials == 0 {
            return Err(Error::InvalidConfig("max_trials must be at least 1".into()));
        }
        if self.replications == 0 {
            return Err(Error::InvalidConfig("replications must be at least 1".into()));
        }
        if let Some(cn) = self.cn {
            if !(cn >= 0.0 && cn.is_finite()) {
                return Err(Error::InvalidConfig(format!("invalid C_n {cn}")));
            }
        }
        self.regime.rate_bounds(self.n)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Proposed,
    Bt,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Proposed => "proposed",
            Method::Bt => "bt",
        })
    }
}

/// Outcome of one method on one replication. `loss` is `None` when fitting
/// failed; the message is kept in `error`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRecord {
    pub replication: usize,
    pub method: Method,
    pub loss: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub mean_loss: Option<f64>,
    /// Standard error of the mean; needs at least two successes.
    pub std_error: Option<f64>,
    pub successes: usize,
    pub failures: usize,
}

impl MethodSummary {
    fn from_losses(losses: &[f64], failures: usize) -> Self {
        let count = losses.len();
        let mean = (count > 0).then(|| losses.iter().sum::<f64>() / count as f64);
        let std_error = mean.filter(|_| count > 1).map(|mean| {
            let var = losses.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (count - 1) as f64;
            (var / count as f64).sqrt()
        });
        Self {
            mean_loss: mean,
            std_error,
            successes: count,
            failures,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub config: SimConfig,
    pub records: Vec<ReplicationRecord>,
    pub proposed: MethodSummary,
    pub bt: MethodSummary,
}

impl SimReport {
    pub fn summary(&self, method: Method) -> &MethodSummary {
        match method {
            Method::Proposed => &self.proposed,
            Method::Bt => &self.bt,
        }
    }

    pub fn losses(&self, method: Method) -> Vec<f64> {
        self.records
            .iter()
            .filter(|r| r.method == method)
            .filter_map(|r| r.loss)
            .collect()
    }

    /// Per-replication rows: `regime,n,k,replication,method,loss,iterations,converged`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
        out.write_record([
            "regime",
            "n",
            "k",
            "replication",
            "method",
            "loss",
            "iterations",
            "converged",
        ])
        .map_err(io)?;
        for r in &self.records {
            out.write_record([
                self.config.regime.to_string(),
                self.config.n.to_string(),
                self.config.k.to_string(),
                r.replication.to_string(),
                r.method.to_string(),
                r.loss.map(|l| l.to_string()).unwrap_or_default(),
                r.iterations.to_string(),
                r.converged.to_string(),
            ])
            .map_err(io)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// One replication: fresh truth, rates and counts, then both fits.
pub fn run_replication(config: &SimConfig, replication: usize) -> Result<[ReplicationRecord; 2]> {
    let rep = replication as u64;
    let truth = gen_truth(config.n, config.k, derive_seed(config.seed, rep, TRUTH_STREAM))?;
    let rates = gen_rates(config.n, config.regime, derive_seed(config.seed, rep, RATE_STREAM))?;
    let data = gen_counts(
        &truth.pi,
        &rates,
        config.max_trials,
        derive_seed(config.seed, rep, COUNT_STREAM),
    )?;

    let mut solver = SolverConfig::from_cn(config.effective_cn(), config.n);
    solver.tol = config.tol;
    solver.max_iter = config.max_iter;
    let proposed = match fit(&data, &solver) {
        Ok(result) => {
            let pi_hat = prob_matrix(&SkewParam::new(config.n, result.m_hat)?);
            ReplicationRecord {
                replication,
                method: Method::Proposed,
                loss: Some(loss(&pi_hat, &truth.pi)?),
                iterations: result.iterations,
                converged: result.converged,
                error: None,
            }
        }
        Err(e) => failed(replication, Method::Proposed, e),
    };
    let bt = match fit_bt(&data, &BtConfig::default()) {
        Ok(result) => ReplicationRecord {
            replication,
            method: Method::Bt,
            loss: Some(loss(&result.params.prob_matrix(), &truth.pi)?),
            iterations: result.iterations,
            converged: true,
            error: None,
        },
        Err(e) => failed(replication, Method::Bt, e),
    };
    Ok([proposed, bt])
}

fn failed(replication: usize, method: Method, e: Error) -> ReplicationRecord {
    ReplicationRecord {
        replication,
        method,
        loss: None,
        iterations: 0,
        converged: false,
        error: Some(e.to_string()),
    }
}

/// Runs all replications (in parallel on the current rayon pool) and
/// aggregates them in replication order.
pub fn run_experiment(config: &SimConfig) -> Result<SimReport> {
    config.validate()?;
    let per_rep: Vec<[ReplicationRecord; 2]> = (0..config.replications)
        .into_par_iter()
        .map(|rep| run_replication(config, rep))
        .collect::<Result<_>>()?;
    let records: Vec<ReplicationRecord> = per_rep.into_iter().flatten().collect();
    let summarize = |method| {
        let losses: Vec<f64> = records
            .iter()
            .filter(|r| r.method == method)
            .filter_map(|r| r.loss)
            .collect();
        let failures = records
            .iter()
            .filter(|r| r.method == method && r.loss.is_none())
            .count();
        MethodSummary::from_losses(&losses, failures)
    };
    Ok(SimReport {
        config: config.clone(),
        proposed: summarize(Method::Proposed),
        bt: summarize(Method::Bt),
        records,
    })
}
