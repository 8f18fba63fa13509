//! Spectral kernel for skew-symmetric matrices.
//!
//! The singular values of a real skew-symmetric matrix come in equal pairs
//! (plus one zero when `n` is odd). Projection onto the nuclear-norm ball is
//! singular-value soft-thresholding, and the thresholded matrix stays
//! skew-symmetric because thresholding acts blockwise on the real canonical
//! form `Q diag([0 σ; -σ 0], …) Qᵀ`.
//!
//! SVDs run single-threaded so that results are bit-reproducible.

use faer::diag::Diag;
use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::svd::{self, ComputeSvdVectors};
use faer::{Mat, Par};
use nalgebra::DMatrix;

use crate::data::{check_skew, unvectorize, vectorize};
use crate::error::{Error, Result};

/// `M = U diag(σ) Vᵀ` with paired, descending singular values.
#[derive(Debug, Clone)]
pub struct SpectralForm {
    pub u: DMatrix<f64>,
    pub sigma: Vec<f64>,
    pub v: DMatrix<f64>,
}

impl SpectralForm {
    /// One representative per singular-value pair: `σ_1, σ_3, …`.
    pub fn paired_values(&self) -> Vec<f64> {
        self.sigma
            .iter()
            .step_by(2)
            .take(self.sigma.len() / 2)
            .copied()
            .collect()
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        scaled_outer(&self.u, &self.v, &self.sigma)
    }
}

fn to_faer(m: &DMatrix<f64>) -> Mat<f64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

type Factors = (Mat<f64>, Mat<f64>);

fn dense_svd(m: &DMatrix<f64>, vectors: bool) -> Result<(Vec<f64>, Option<Factors>)> {
    let (rows, cols) = m.shape();
    let k = rows.min(cols);
    if k == 0 {
        return Ok((
            Vec::new(),
            vectors.then(|| (Mat::zeros(rows, rows), Mat::zeros(cols, cols))),
        ));
    }
    let mode = if vectors {
        ComputeSvdVectors::Full
    } else {
        ComputeSvdVectors::No
    };
    let a = to_faer(m);
    let mut s = Diag::<f64>::zeros(k);
    let mut factors = vectors.then(|| (Mat::<f64>::zeros(rows, rows), Mat::<f64>::zeros(cols, cols)));
    let mut buf = MemBuffer::new(svd::svd_scratch::<f64>(
        rows,
        cols,
        mode,
        mode,
        Par::Seq,
        Default::default(),
    ));
    let (u, v) = match factors.as_mut() {
        Some((u, v)) => (Some(u.as_mut()), Some(v.as_mut())),
        None => (None, None),
    };
    svd::svd(
        a.as_ref(),
        s.as_mut(),
        u,
        v,
        Par::Seq,
        MemStack::new(&mut buf),
        Default::default(),
    )
    .map_err(|_| Error::SvdFailure)?;
    let sigma: Vec<f64> = s.column_vector().iter().copied().collect();
    if sigma.iter().any(|x| !x.is_finite()) {
        return Err(Error::SvdFailure);
    }
    Ok((sigma, factors))
}

/// Replaces each adjacent pair of singular values by its mean; the trailing
/// value for odd `n` is exactly zero.
fn enforce_pairs(sigma: &mut [f64]) {
    let n = sigma.len();
    for p in 0..n / 2 {
        let mean = 0.5 * (sigma[2 * p] + sigma[2 * p + 1]);
        sigma[2 * p] = mean;
        sigma[2 * p + 1] = mean;
    }
    if n % 2 == 1 {
        sigma[n - 1] = 0.0;
    }
}

/// SVD of a skew-symmetric matrix with the pairing structure enforced.
pub fn svd_skew(m: &DMatrix<f64>) -> Result<SpectralForm> {
    check_skew(m)?;
    let n = m.nrows();
    let (mut sigma, factors) = dense_svd(m, true)?;
    enforce_pairs(&mut sigma);
    let (u, v) = factors.expect("vectors requested");
    Ok(SpectralForm {
        u: DMatrix::from_fn(n, n, |i, j| u[(i, j)]),
        sigma,
        v: DMatrix::from_fn(n, n, |i, j| v[(i, j)]),
    })
}

/// Sum of singular values of any square matrix.
pub fn nuclear_norm(m: &DMatrix<f64>) -> Result<f64> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            found: m.ncols(),
        });
    }
    let (sigma, _) = dense_svd(m, false)?;
    Ok(sigma.iter().sum())
}

/// Smallest `λ ≥ 0` with `Σ_i 2·max(σ_i − λ, 0) ≤ τ`, by exact water-filling
/// over the paired values `σ_1 ≥ σ_2 ≥ … ≥ 0`.
pub fn soft_threshold_level(sigma_half: &[f64], tau: f64) -> f64 {
    debug_assert!(tau >= 0.0);
    let total: f64 = sigma_half.iter().sum();
    if 2.0 * total <= tau {
        return 0.0;
    }
    let mut sorted = sigma_half.to_vec();
    sorted.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut partial = 0.0;
    for (a, &s) in sorted.iter().enumerate() {
        partial += s;
        let count = (a + 1) as f64;
        let lambda = (2.0 * partial - tau) / (2.0 * count);
        let next = sorted.get(a + 1).copied().unwrap_or(0.0);
        if lambda >= next {
            return lambda.clamp(0.0, s);
        }
    }
    // Unreachable for finite input: the last candidate always satisfies
    // `lambda >= 0` once `2Σσ > τ`.
    0.0
}

fn scaled_outer(u: &DMatrix<f64>, v: &DMatrix<f64>, weights: &[f64]) -> DMatrix<f64> {
    let active = weights.iter().take_while(|&&w| w > 0.0).count();
    let n = u.nrows();
    if active == 0 {
        return DMatrix::zeros(n, v.nrows());
    }
    let mut us = u.columns(0, active).into_owned();
    for (mut col, &w) in us.column_iter_mut().zip(weights) {
        col *= w;
    }
    us * v.columns(0, active).transpose()
}

/// Euclidean projection of a skew-symmetric matrix onto
/// `{X ∈ Skew_n : ‖X‖_* ≤ τ}`.
pub fn project(m: &DMatrix<f64>, tau: f64) -> Result<DMatrix<f64>> {
    if !(tau >= 0.0) || !tau.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "nuclear-norm budget must be finite and non-negative, got {tau}"
        )));
    }
    check_skew(m)?;
    let n = m.nrows();
    if tau == 0.0 {
        return Ok(DMatrix::zeros(n, n));
    }
    let form = svd_skew(m)?;
    let lambda = soft_threshold_level(&form.paired_values(), tau);
    if lambda == 0.0 {
        return Ok(m.clone());
    }
    let shrunk: Vec<f64> = form.sigma.iter().map(|&s| (s - lambda).max(0.0)).collect();
    let p = scaled_outer(&form.u, &form.v, &shrunk);
    Ok((&p - p.transpose()) * 0.5)
}

/// [`project`] in upper-triangle coordinates.
pub fn project_vec(m: &[f64], n: usize, tau: f64) -> Result<Vec<f64>> {
    let matrix = unvectorize(m, n)?;
    vectorize(&project(&matrix, tau)?)
}
