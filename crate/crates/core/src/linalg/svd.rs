//! Singular value decomposition via one-sided Jacobi rotations, plus the
//! truncated spaces built from it.
//!
//! The matrices factored here are cluster term-document matrices: a few
//! hundred rows by a few dozen columns at most. One-sided Jacobi is simple,
//! numerically robust at that scale, and needs no external solver.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::matrix::DenseMatrix;
use crate::linalg::sparse::SparseVec;

/// Singular values below `RANK_CUTOFF_FACTOR * sigma_max` are treated as
/// zero when deciding the numerical rank.
pub const RANK_CUTOFF_FACTOR: f64 = 1e-12;

/// Full factorization `A = U * diag(sigma) * V^T` keeping exactly the
/// numerical-rank triplets.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SvdFactors {
    u: DenseMatrix,
    sigma: Vec<f64>,
    v: DenseMatrix,
}

impl SvdFactors {
    /// Left singular vectors, one column per retained singular value.
    pub fn u(&self) -> &DenseMatrix {
        &self.u
    }

    /// Singular values in non-increasing order, all strictly positive.
    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    /// Right singular vectors, one column per retained singular value.
    pub fn v(&self) -> &DenseMatrix {
        &self.v
    }

    /// Numerical rank of the factored matrix.
    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    /// Rebuilds `U_k * diag(sigma_k) * V_k^T`; `k = 0` gives the zero matrix.
    pub fn reconstruct(&self, k: usize) -> Result<DenseMatrix> {
        if k > self.rank() {
            return Err(Error::Parameter(format!(
                "cannot reconstruct with k={k}, rank is {}",
                self.rank()
            )));
        }
        let mut out = DenseMatrix::zeros(self.u.rows(), self.v.rows())?;
        for j in 0..k {
            let s = self.sigma[j];
            for r in 0..self.u.rows() {
                let us = self.u.get(r, j) * s;
                if us == 0.0 {
                    continue;
                }
                for c in 0..self.v.rows() {
                    out.set(r, c, out.get(r, c) + us * self.v.get(c, j));
                }
            }
        }
        Ok(out)
    }
}

/// Rank-k concept space retained after truncation: the first k left
/// singular vectors and their singular values. `k = 0` is legal and means
/// the space retains nothing; projections through it are zero.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LsiSpace {
    rows: usize,
    u_k: Option<DenseMatrix>,
    sigma_k: Vec<f64>,
}

impl LsiSpace {
    /// Row dimension of the space (the vocabulary size it was built over).
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Retained dimensionality.
    pub fn k(&self) -> usize {
        self.sigma_k.len()
    }

    /// Retained singular values, non-increasing.
    pub fn sigma_k(&self) -> &[f64] {
        &self.sigma_k
    }

    /// Retained left singular vectors; `None` exactly when `k = 0`.
    pub fn u_k(&self) -> Option<&DenseMatrix> {
        self.u_k.as_ref()
    }

    /// A space over `rows` rows that retains nothing: every projection is
    /// the zero vector. Stands in for clusters whose term set is empty.
    pub fn degenerate(rows: usize) -> LsiSpace {
        LsiSpace { rows, u_k: None, sigma_k: Vec::new() }
    }

    /// Projects `d` onto the retained space: `u_k * (u_k^T * d)`.
    ///
    /// `d` is sparse over the space's row dimension. The output keeps every
    /// row whose projected value is not exactly zero. Projection is
    /// idempotent up to roundoff.
    pub fn project(&self, d: &SparseVec) -> Result<SparseVec> {
        if let Some((idx, _)) = d.iter().last() {
            if idx as usize >= self.rows {
                return Err(Error::Dimension(format!(
                    "vector index {idx} outside space of {} rows",
                    self.rows
                )));
            }
        }
        let u = match &self.u_k {
            None => return Ok(SparseVec::empty()),
            Some(u) => u,
        };
        let k = self.k();
        let mut y = vec![0.0; k];
        for (idx, w) in d.iter() {
            for (j, yj) in y.iter_mut().enumerate() {
                *yj += u.get(idx as usize, j) * w;
            }
        }
        let mut out = Vec::new();
        for r in 0..self.rows {
            let mut value = 0.0;
            for (j, yj) in y.iter().enumerate() {
                value += u.get(r, j) * yj;
            }
            if value != 0.0 {
                out.push((r as u32, value));
            }
        }
        SparseVec::new(out)
    }

    /// Entry (r, c) of the projector `B = u_k * u_k^T`.
    pub fn projector_entry(&self, r: usize, c: usize) -> f64 {
        match &self.u_k {
            None => 0.0,
            Some(u) => (0..self.k()).map(|j| u.get(r, j) * u.get(c, j)).sum(),
        }
    }

    /// Column `c` of the projector `B = u_k * u_k^T` as a dense vector.
    pub fn projector_column(&self, c: usize) -> Vec<f64> {
        match &self.u_k {
            None => vec![0.0; self.rows],
            Some(u) => {
                let k = self.k();
                let mut out = vec![0.0; self.rows];
                for j in 0..k {
                    let ucj = u.get(c, j);
                    if ucj == 0.0 {
                        continue;
                    }
                    for (r, o) in out.iter_mut().enumerate() {
                        *o += u.get(r, j) * ucj;
                    }
                }
                out
            }
        }
    }
}

/// Factors `a` as `U * diag(sigma) * V^T` with one-sided Jacobi rotations.
///
/// Exactly the numerical-rank triplets are kept, so both `U` and `V` have
/// orthonormal columns. A matrix of all zeros has rank 0 and is rejected
/// with a dimension error; callers build matrices from their nonzero rows,
/// so this does not arise in the indexing pipeline.
pub fn svd(a: &DenseMatrix) -> Result<SvdFactors> {
    let transposed = a.cols() > a.rows();
    let work = if transposed { a.transpose() } else { a.clone() };
    let n = work.cols();

    // Rotate pairs of columns of `w` until all are mutually orthogonal,
    // accumulating the rotations in `v`. Then A = (w normalized) * sigma * v^T.
    let mut w: Vec<Vec<f64>> = (0..n).map(|c| work.column(c)).collect();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|c| (0..n).map(|r| if r == c { 1.0 } else { 0.0 }).collect())
        .collect();

    const MAX_SWEEPS: usize = 60;
    const ORTHO_TOL: f64 = 1e-14;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n.saturating_sub(1) {
            for q in (p + 1)..n {
                let alpha = dot(&w[p], &w[p]);
                let beta = dot(&w[q], &w[q]);
                let gamma = dot(&w[p], &w[q]);
                if gamma == 0.0 || gamma.abs() <= ORTHO_TOL * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_pair(&mut w, p, q, c, s);
                rotate_pair(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let norms: Vec<f64> = w.iter().map(|col| dot(col, col).sqrt()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].partial_cmp(&norms[i]).unwrap().then(i.cmp(&j)));

    let sigma_max = norms[order[0]];
    if sigma_max == 0.0 {
        return Err(Error::Dimension(
            "zero matrix has numerical rank 0, nothing to factor".into(),
        ));
    }
    let cutoff = RANK_CUTOFF_FACTOR * sigma_max;
    let rank = order.iter().take_while(|&&j| norms[j] >= cutoff).count();

    let m = work.rows();
    let mut u_mat = DenseMatrix::zeros(m, rank)?;
    let mut v_mat = DenseMatrix::zeros(n, rank)?;
    let mut sigma = Vec::with_capacity(rank);
    for (col, &j) in order[..rank].iter().enumerate() {
        sigma.push(norms[j]);
        for r in 0..m {
            u_mat.set(r, col, w[j][r] / norms[j]);
        }
        for r in 0..n {
            v_mat.set(r, col, v[j][r]);
        }
    }

    Ok(if transposed {
        SvdFactors { u: v_mat, sigma, v: u_mat }
    } else {
        SvdFactors { u: u_mat, sigma, v: v_mat }
    })
}

/// Keeps the singular triplets with `sigma >= epsilon`. Values exactly at
/// the threshold stay in. `epsilon = 0` retains the full numerical rank;
/// an epsilon above `sigma_1` leaves a degenerate k = 0 space.
pub fn truncate_by_threshold(factors: &SvdFactors, epsilon: f64) -> Result<LsiSpace> {
    if !(epsilon >= 0.0) {
        return Err(Error::Parameter(format!(
            "truncation threshold must be >= 0, got {epsilon}"
        )));
    }
    let k = factors.sigma.iter().take_while(|&&s| s >= epsilon).count();
    Ok(slice_space(factors, k))
}

/// Keeps exactly the leading `k` triplets, `1 <= k <= rank`.
pub fn truncate_by_rank(factors: &SvdFactors, k: usize) -> Result<LsiSpace> {
    if k == 0 || k > factors.rank() {
        return Err(Error::Parameter(format!(
            "rank truncation k={k} outside 1..={}",
            factors.rank()
        )));
    }
    Ok(slice_space(factors, k))
}

fn slice_space(factors: &SvdFactors, k: usize) -> LsiSpace {
    let rows = factors.u.rows();
    if k == 0 {
        return LsiSpace { rows, u_k: None, sigma_k: Vec::new() };
    }
    let mut u_k = DenseMatrix::zeros(rows, k).expect("factor matrix is non-empty");
    for r in 0..rows {
        for c in 0..k {
            u_k.set(r, c, factors.u.get(r, c));
        }
    }
    LsiSpace {
        rows,
        u_k: Some(u_k),
        sigma_k: factors.sigma[..k].to_vec(),
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn rotate_pair(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    for i in 0..cols[p].len() {
        let wp = cols[p][i];
        let wq = cols[q][i];
        cols[p][i] = c * wp - s * wq;
        cols[q][i] = s * wp + c * wq;
    }
}
