//! Test-set scores and triplet intransitivity counts.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::ComparisonData;
use crate::error::{Error, Result};
use crate::model::ProbMatrix;
use crate::simulate::{derive_seed, rng_for};

const TRIPLET_STREAM: u64 = 11;
const SAMPLE_CHUNK: usize = 1 << 16;

/// Above this many players the default audit samples triplets.
pub const EXHAUSTIVE_LIMIT: usize = 500;
pub const DEFAULT_TRIPLET_SAMPLE: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestMetrics {
    pub log_likelihood: f64,
    pub accuracy: f64,
    pub comparisons: u64,
}

fn xlogy(x: u32, y: f64) -> f64 {
    if x == 0 {
        0.0
    } else {
        f64::from(x) * y.ln()
    }
}

/// Test log-likelihood `Σ_{i<j} y_ij log π_ij + y_ji log(1 − π_ij)` and
/// accuracy `[Σ_{i<j} y_ij 1(π_ij ≥ ½) + y_ji 1(π_ji > ½)] / Σ y_ij`.
pub fn evaluate(probs: &ProbMatrix, test: &ComparisonData) -> Result<TestMetrics> {
    if probs.n() != test.n() {
        return Err(Error::DimensionMismatch {
            expected: probs.n(),
            found: test.n(),
        });
    }
    let comparisons = test.total_comparisons();
    if comparisons == 0 {
        return Err(Error::InvalidData("test set is empty after filtering".into()));
    }
    let mut log_likelihood = 0.0;
    let mut correct = 0u64;
    for ((i, j, t, y_ij), &p) in test.iter_pairs().zip(probs.upper()) {
        let y_ji = t - y_ij;
        let q = probs.get(j, i);
        log_likelihood += xlogy(y_ij, p) + xlogy(y_ji, q);
        if p >= 0.5 {
            correct += u64::from(y_ij);
        }
        if q > 0.5 {
            correct += u64::from(y_ji);
        }
    }
    Ok(TestMetrics {
        log_likelihood,
        accuracy: correct as f64 / comparisons as f64,
        comparisons,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum TripletMode {
    All,
    Sample { size: usize, seed: u64 },
}

impl TripletMode {
    /// Exhaustive up to [`EXHAUSTIVE_LIMIT`] players, otherwise a
    /// [`DEFAULT_TRIPLET_SAMPLE`]-triplet sample.
    pub fn default_for(n: usize, seed: u64) -> Self {
        if n > EXHAUSTIVE_LIMIT {
            TripletMode::Sample {
                size: DEFAULT_TRIPLET_SAMPLE,
                seed,
            }
        } else {
            TripletMode::All
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intransitivity {
    pub rate: f64,
    pub violated: u64,
    /// Triplets examined.
    pub triplets: u64,
    pub exhaustive: bool,
}

/// Whether some ordering `(i, j, k)` of the triplet has `π_ik ≥ π_ij` and
/// `π_jk < ½`.
pub fn triplet_violated(probs: &ProbMatrix, a: usize, b: usize, c: usize) -> bool {
    [(a, b, c), (a, c, b), (b, a, c), (b, c, a), (c, a, b), (c, b, a)]
        .into_iter()
        .any(|(i, j, k)| probs.get(i, k) >= probs.get(i, j) && probs.get(j, k) < 0.5)
}

pub fn intransitivity_rate(probs: &ProbMatrix, mode: TripletMode) -> Result<Intransitivity> {
    let n = probs.n();
    if n < 3 {
        return Err(Error::InvalidData(format!(
            "need at least 3 players for triplets, got {n}"
        )));
    }
    let (violated, triplets, exhaustive) = match mode {
        TripletMode::All => {
            let violated: u64 = (0..n)
                .into_par_iter()
                .map(|a| {
                    let mut count = 0u64;
                    for b in a + 1..n {
                        for c in b + 1..n {
                            count += u64::from(triplet_violated(probs, a, b, c));
                        }
                    }
                    count
                })
                .sum();
            let n = n as u64;
            (violated, n * (n - 1) * (n - 2) / 6, true)
        }
        TripletMode::Sample { size, seed } => {
            if size == 0 {
                return Err(Error::InvalidConfig("triplet sample size must be positive".into()));
            }
            let chunks = size.div_ceil(SAMPLE_CHUNK);
            let violated: u64 = (0..chunks)
                .into_par_iter()
                .map(|chunk| {
                    let mut rng = rng_for(derive_seed(seed, chunk as u64, TRIPLET_STREAM));
                    let draws = SAMPLE_CHUNK.min(size - chunk * SAMPLE_CHUNK);
                    let mut count = 0u64;
                    for _ in 0..draws {
                        let a = rng.random_range(0..n);
                        let b = loop {
                            let b = rng.random_range(0..n);
                            if b != a {
                                break b;
                            }
                        };
                        let c = loop {
                            let c = rng.random_range(0..n);
                            if c != a && c != b {
                                break c;
                            }
                        };
                        count += u64::from(triplet_violated(probs, a, b, c));
                    }
                    count
                })
                .sum();
            (violated, size as u64, false)
        }
    };
    Ok(Intransitivity {
        rate: violated as f64 / triplets as f64,
        violated,
        triplets,
        exhaustive,
    })
}
