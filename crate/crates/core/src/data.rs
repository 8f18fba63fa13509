//! Comparison counts and the vectorization of skew-symmetric matrices.
//!
//! Every per-pair quantity in this crate is stored over the strict upper
//! triangle in row-major order: `(0,1), (0,2), …, (0,n-1), (1,2), …`.
//! Player indices are zero-based.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute entrywise tolerance used when checking `M = -Mᵀ`.
pub const SKEW_TOLERANCE: f64 = 1e-10;

/// Number of unordered pairs among `n` players.
#[inline]
pub fn num_pairs(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// Position of the pair `(i, j)`, `i < j`, in the canonical order.
pub fn pair_index(i: usize, j: usize, n: usize) -> Result<usize> {
    if i >= j || j >= n {
        return Err(Error::InvalidPair { i, j, n });
    }
    Ok(pair_index_unchecked(i, j, n))
}

#[inline]
pub(crate) fn pair_index_unchecked(i: usize, j: usize, n: usize) -> usize {
    debug_assert!(i < j && j < n);
    i * n - i * (i + 1) / 2 + (j - i - 1)
}

/// Iterator over all pairs `(i, j)`, `i < j`, in canonical order.
pub fn pairs(n: usize) -> impl Iterator<Item = (usize, usize)> + Clone {
    (0..n).flat_map(move |i| (i + 1..n).map(move |j| (i, j)))
}

/// Largest entrywise deviation `|M_ij + M_ji|` including the diagonal.
pub fn skew_deviation(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] + m[(j, i)]).abs());
        }
    }
    worst
}

pub(crate) fn check_skew(m: &DMatrix<f64>) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            found: m.ncols(),
        });
    }
    let deviation = skew_deviation(m);
    // NaN entries also fail here.
    if !(deviation <= SKEW_TOLERANCE) {
        return Err(Error::NotSkewSymmetric { deviation });
    }
    Ok(())
}

/// Upper-triangle vector of a skew-symmetric matrix.
pub fn vectorize(m: &DMatrix<f64>) -> Result<Vec<f64>> {
    check_skew(m)?;
    let n = m.nrows();
    Ok(pairs(n).map(|(i, j)| m[(i, j)]).collect())
}

/// Skew-symmetric matrix whose upper triangle is `v`; the lower triangle is
/// written as the exact negation.
pub fn unvectorize(v: &[f64], n: usize) -> Result<DMatrix<f64>> {
    if v.len() != num_pairs(n) {
        return Err(Error::DimensionMismatch {
            expected: num_pairs(n),
            found: v.len(),
        });
    }
    let mut m = DMatrix::zeros(n, n);
    for ((i, j), &x) in pairs(n).zip(v) {
        m[(i, j)] = x;
        m[(j, i)] = -x;
    }
    Ok(m)
}

/// A logit matrix `M ∈ Skew_n` held as its upper-triangle vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkewParam {
    n: usize,
    m: Vec<f64>,
}

impl SkewParam {
    pub fn new(n: usize, m: Vec<f64>) -> Result<Self> {
        if m.len() != num_pairs(n) {
            return Err(Error::DimensionMismatch {
                expected: num_pairs(n),
                found: m.len(),
            });
        }
        Ok(Self { n, m })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            m: vec![0.0; num_pairs(n)],
        }
    }

    pub fn from_matrix(m: &DMatrix<f64>) -> Result<Self> {
        Ok(Self {
            n: m.nrows(),
            m: vectorize(m)?,
        })
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        unvectorize(&self.m, self.n).expect("length checked at construction")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.m
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.m
    }

    /// Logit `m_ij` for any `i != j`, using `m_ji = -m_ij`.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        match i.cmp(&j) {
            std::cmp::Ordering::Less => self.m[pair_index_unchecked(i, j, self.n)],
            std::cmp::Ordering::Greater => -self.m[pair_index_unchecked(j, i, self.n)],
            std::cmp::Ordering::Equal => 0.0,
        }
    }
}

/// Trial and win counts for every unordered pair of `n` players.
///
/// Only the upper triangle is stored: `trials[k] = n_ij` and `wins[k] = y_ij`
/// for the `k`-th pair `(i, j)` with `i < j`. The lower triangle is implied by
/// `n_ji = n_ij` and `y_ji = n_ij - y_ij`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComparisonData {
    n: usize,
    trials: Vec<u32>,
    wins: Vec<u32>,
    labels: Option<Vec<String>>,
}

impl ComparisonData {
    pub fn new(n: usize, trials: Vec<u32>, wins: Vec<u32>) -> Result<Self> {
        let expected = num_pairs(n);
        for len in [trials.len(), wins.len()] {
            if len != expected {
                return Err(Error::DimensionMismatch { expected, found: len });
            }
        }
        if n == 0 {
            return Err(Error::InvalidData("no players".into()));
        }
        if let Some(k) = trials.iter().zip(&wins).position(|(t, w)| w > t) {
            return Err(Error::InvalidData(format!(
                "pair {k} has more wins ({}) than trials ({})",
                wins[k], trials[k]
            )));
        }
        Ok(Self {
            n,
            trials,
            wins,
            labels: None,
        })
    }

    /// All-zero counts for `n` players.
    pub fn empty(n: usize) -> Result<Self> {
        Self::new(n, vec![0; num_pairs(n)], vec![0; num_pairs(n)])
    }

    /// Aggregates `(winner, loser)` outcomes. The result does not depend on
    /// the order of the outcomes.
    pub fn from_outcomes<I>(n: usize, outcomes: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut data = Self::empty(n)?;
        for (winner, loser) in outcomes {
            data.record(winner, loser)?;
        }
        Ok(data)
    }

    fn record(&mut self, winner: usize, loser: usize) -> Result<()> {
        let (i, j) = if winner < loser {
            (winner, loser)
        } else {
            (loser, winner)
        };
        let k = pair_index(i, j, self.n)?;
        self.trials[k] += 1;
        if winner == i {
            self.wins[k] += 1;
        }
        Ok(())
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: labels.len(),
            });
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn trials_upper(&self) -> &[u32] {
        &self.trials
    }

    pub fn wins_upper(&self) -> &[u32] {
        &self.wins
    }

    /// `n_ij` for `i != j`.
    pub fn trials(&self, i: usize, j: usize) -> u32 {
        match i.cmp(&j) {
            std::cmp::Ordering::Less => self.trials[pair_index_unchecked(i, j, self.n)],
            std::cmp::Ordering::Greater => self.trials[pair_index_unchecked(j, i, self.n)],
            std::cmp::Ordering::Equal => 0,
        }
    }

    /// `y_ij`, the number of times `i` beat `j`, for `i != j`.
    pub fn wins(&self, i: usize, j: usize) -> u32 {
        match i.cmp(&j) {
            std::cmp::Ordering::Less => self.wins[pair_index_unchecked(i, j, self.n)],
            std::cmp::Ordering::Greater => {
                let k = pair_index_unchecked(j, i, self.n);
                self.trials[k] - self.wins[k]
            }
            std::cmp::Ordering::Equal => 0,
        }
    }

    /// `(i, j, n_ij, y_ij)` over the upper triangle in canonical order.
    pub fn iter_pairs(&self) -> impl Iterator<Item = (usize, usize, u32, u32)> + '_ {
        pairs(self.n)
            .zip(self.trials.iter().zip(&self.wins))
            .map(|((i, j), (&t, &w))| (i, j, t, w))
    }

    pub fn total_comparisons(&self) -> u64 {
        self.trials.iter().map(|&t| u64::from(t)).sum()
    }

    /// Fraction of unordered pairs with at least one comparison.
    pub fn observed_pair_fraction(&self) -> f64 {
        if self.trials.is_empty() {
            return 0.0;
        }
        self.trials.iter().filter(|&&t| t > 0).count() as f64 / self.trials.len() as f64
    }

    /// Total wins and losses of each player.
    pub fn win_loss_totals(&self) -> Vec<(u64, u64)> {
        let mut totals = vec![(0u64, 0u64); self.n];
        for (i, j, t, w) in self.iter_pairs() {
            let (w, l) = (u64::from(w), u64::from(t - w));
            totals[i].0 += w;
            totals[i].1 += l;
            totals[j].0 += l;
            totals[j].1 += w;
        }
        totals
    }
}
