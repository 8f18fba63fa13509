//! Logistic link, win-probability matrices and the binomial log-likelihood.

use serde::{Deserialize, Serialize};

use crate::data::{pair_index_unchecked, ComparisonData, SkewParam};
use crate::error::{Error, Result};

/// Logistic link `g(x) = 1 / (1 + e^{-x})`.
#[inline]
pub fn link(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log g(x)` without overflow for large `|x|`.
#[inline]
pub fn log_link(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

/// Win probabilities `π_ij` for `i < j`; `π_ji = 1 − π_ij` is implied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbMatrix {
    n: usize,
    pi: Vec<f64>,
}

impl ProbMatrix {
    pub fn new(n: usize, pi: Vec<f64>) -> Result<Self> {
        let expected = crate::data::num_pairs(n);
        if pi.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: pi.len(),
            });
        }
        if let Some(p) = pi.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::InvalidData(format!("probability {p} outside [0, 1]")));
        }
        Ok(Self { n, pi })
    }

    /// Builds `π_ij = f(i, j)` over the upper triangle.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        Self::new(n, crate::data::pairs(n).map(|(i, j)| f(i, j)).collect())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn upper(&self) -> &[f64] {
        &self.pi
    }

    /// Probability that `i` beats `j`; 0.5 on the diagonal.
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        match i.cmp(&j) {
            std::cmp::Ordering::Less => self.pi[pair_index_unchecked(i, j, self.n)],
            std::cmp::Ordering::Greater => 1.0 - self.pi[pair_index_unchecked(j, i, self.n)],
            std::cmp::Ordering::Equal => 0.5,
        }
    }

    /// Same probabilities with players reordered: entry `(a, b)` of the
    /// result is entry `(perm[a], perm[b])` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: perm.len(),
            });
        }
        Self::from_fn(self.n, |a, b| self.get(perm[a], perm[b]))
    }
}

/// `Π = g(M)` entrywise.
pub fn prob_matrix(m: &SkewParam) -> ProbMatrix {
    ProbMatrix {
        n: m.n(),
        pi: m.as_slice().iter().map(|&x| link(x)).collect(),
    }
}

fn check_lengths(data: &ComparisonData, m: &[f64]) -> Result<()> {
    let expected = data.trials_upper().len();
    if m.len() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            found: m.len(),
        });
    }
    Ok(())
}

/// Binomial log-likelihood `Σ_{i<j} y_ij log g(m_ij) + (n_ij − y_ij) log(1 − g(m_ij))`.
///
/// Pairs without trials contribute nothing.
pub fn log_likelihood(data: &ComparisonData, m: &[f64]) -> Result<f64> {
    check_lengths(data, m)?;
    Ok(log_likelihood_unchecked(data, m))
}

pub(crate) fn log_likelihood_unchecked(data: &ComparisonData, m: &[f64]) -> f64 {
    data.trials_upper()
        .iter()
        .zip(data.wins_upper())
        .zip(m)
        .filter(|((&t, _), _)| t > 0)
        .map(|((&t, &w), &x)| {
            let wins = f64::from(w);
            let losses = f64::from(t - w);
            let mut term = 0.0;
            if w > 0 {
                term += wins * log_link(x);
            }
            if t > w {
                term += losses * log_link(-x);
            }
            term
        })
        .sum()
}

/// Gradient of [`log_likelihood`]: `∂f/∂m_ij = y_ij − n_ij g(m_ij)`.
pub fn gradient(data: &ComparisonData, m: &[f64]) -> Result<Vec<f64>> {
    check_lengths(data, m)?;
    Ok(gradient_unchecked(data, m))
}

pub(crate) fn gradient_unchecked(data: &ComparisonData, m: &[f64]) -> Vec<f64> {
    data.trials_upper()
        .iter()
        .zip(data.wins_upper())
        .zip(m)
        .map(|((&t, &w), &x)| {
            if t == 0 {
                0.0
            } else {
                f64::from(w) - f64::from(t) * link(x)
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn example_data() -> ComparisonData {
        ComparisonData::new(3, vec![5, 5, 5], vec![3, 1, 4]).unwrap()
    }

    #[test]
    fn link_values() {
        assert_eq!(link(0.0), 0.5);
        assert!((link(1.0) - 0.7310585786300049).abs() < 1e-12);
        for x in [0.3, 2.0, 35.0, 700.0] {
            assert!((link(x) + link(-x) - 1.0).abs() < 1e-15);
        }
        assert!(link(-700.0) > 0.0);
        assert!((log_link(-700.0) + 700.0).abs() < 1e-12);
        assert!(log_link(700.0) <= 0.0);
        assert!((log_link(0.7) - link(0.7).ln()).abs() < 1e-15);
    }

    #[test]
    fn prob_matrix_values() {
        let zero = prob_matrix(&SkewParam::zeros(4));
        assert!(zero.upper().iter().all(|&p| p == 0.5));
        let p = prob_matrix(&SkewParam::new(2, vec![2.0]).unwrap());
        assert!((p.get(0, 1) - 0.8807970779778823).abs() < 1e-12);
        assert!((p.get(0, 1) + p.get(1, 0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn prob_matrix_of_negated_logits_is_transpose_complement() {
        let m = SkewParam::new(3, vec![0.4, -2.0, 1.3]).unwrap();
        let neg = SkewParam::new(3, m.as_slice().iter().map(|x| -x).collect()).unwrap();
        let (p, q) = (prob_matrix(&m), prob_matrix(&neg));
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    assert!((q.get(i, j) - p.get(j, i)).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn log_likelihood_examples() {
        let single = ComparisonData::new(2, vec![2], vec![1]).unwrap();
        let ll = log_likelihood(&single, &[0.0]).unwrap();
        assert!((ll - 2.0 * 0.5f64.ln()).abs() < 1e-12);

        // Term-by-term oracle: 3·log g(0.2) + 2·log g(-0.2) + 1·log g(-0.5)
        // + 4·log g(0.5) + 4·log g(1.0) + 1·log g(-1.0).
        let oracle = 3.0 * link(0.2).ln()
            + 2.0 * (1.0 - link(0.2)).ln()
            + 1.0 * link(-0.5).ln()
            + 4.0 * (1.0 - link(-0.5)).ln()
            + 4.0 * link(1.0).ln()
            + 1.0 * (1.0 - link(1.0)).ln();
        let ll = log_likelihood(&example_data(), &[0.2, -0.5, 1.0]).unwrap();
        assert!((ll - oracle).abs() < 1e-12);
        assert!((ll - -8.827_387_705_399_607).abs() < 1e-12, "{ll}");

        assert!(log_likelihood(&example_data(), &[0.0]).is_err());
    }

    #[test]
    fn log_likelihood_at_zero_is_half_log_times_trials() {
        let data = ComparisonData::new(3, vec![4, 0, 7], vec![1, 0, 7]).unwrap();
        let ll = log_likelihood(&data, &[0.0; 3]).unwrap();
        assert!((ll - 0.5f64.ln() * 11.0).abs() <= 1e-14 * ll.abs());
    }

    #[test]
    fn all_wins_likelihood_increases_towards_zero() {
        let data = ComparisonData::new(3, vec![2, 3, 1], vec![2, 3, 1]).unwrap();
        let mut prev = f64::NEG_INFINITY;
        for s in [0.0, 1.0, 5.0, 20.0, 100.0] {
            let ll = log_likelihood(&data, &[s; 3]).unwrap();
            assert!(ll > prev || (ll == 0.0 && prev == 0.0));
            assert!(ll <= 0.0);
            prev = ll;
        }
        assert!(prev > -1e-40);
    }

    #[test]
    fn gradient_examples() {
        let balanced = ComparisonData::new(3, vec![2, 4, 6], vec![1, 2, 3]).unwrap();
        assert_eq!(gradient(&balanced, &[0.0; 3]).unwrap(), vec![0.0; 3]);
        let single = ComparisonData::new(2, vec![1], vec![1]).unwrap();
        assert_eq!(gradient(&single, &[0.0]).unwrap(), vec![0.5]);
    }

    proptest! {
        #[test]
        fn gradient_matches_central_differences(
            counts in proptest::collection::vec((0u32..20, 0.0f64..1.0), 21),
            m in proptest::collection::vec(-3.0f64..3.0, 21),
        ) {
            let trials: Vec<u32> = counts.iter().map(|c| c.0).collect();
            let wins: Vec<u32> = counts.iter().map(|&(t, f)| (f * t as f64).round() as u32).collect();
            let data = ComparisonData::new(7, trials, wins).unwrap();
            let g = gradient(&data, &m).unwrap();
            let h = 1e-5;
            for k in 0..m.len() {
                let mut plus = m.clone();
                let mut minus = m.clone();
                plus[k] += h;
                minus[k] -= h;
                let fd = (log_likelihood(&data, &plus).unwrap() - log_likelihood(&data, &minus).unwrap()) / (2.0 * h);
                prop_assert!((fd - g[k]).abs() <= 1e-6 * g[k].abs().max(1.0));
            }
        }

        #[test]
        fn log_likelihood_is_concave_along_segments(
            counts in proptest::collection::vec((0u32..20, 0.0f64..1.0), 10),
            a in proptest::collection::vec(-3.0f64..3.0, 10),
            b in proptest::collection::vec(-3.0f64..3.0, 10),
        ) {
            let trials: Vec<u32> = counts.iter().map(|c| c.0).collect();
            let wins: Vec<u32> = counts.iter().map(|&(t, f)| (f * t as f64).round() as u32).collect();
            let data = ComparisonData::new(5, trials, wins).unwrap();
            let at = |s: f64| {
                let p: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + s * (y - x)).collect();
                log_likelihood(&data, &p).unwrap()
            };
            for s in [0.1, 0.3, 0.5, 0.7, 0.9] {
                let d = 0.05;
                prop_assert!(at(s + d) - 2.0 * at(s) + at(s - d) <= 1e-8);
            }
        }
    }
}
