//! Dense symmetric-matrix kernels.
//!
//! Dimensions here are tiny (the ambient dimension of the bandit), so every
//! spectral query goes through a full symmetric eigendecomposition. A
//! [`Spectrum`] can be computed once and reused for several queries.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::tol;

/// A real symmetric `d x d` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    inner: DMatrix<f64>,
}

impl SymMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            inner: DMatrix::zeros(dim, dim),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            inner: DMatrix::identity(dim, dim),
        }
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        Self {
            inner: DMatrix::from_diagonal(&DVector::from_column_slice(diag)),
        }
    }

    /// Builds a matrix from row-major entries, checking finiteness and symmetry.
    pub fn from_row_major(dim: usize, entries: &[f64]) -> Result<Self> {
        if dim == 0 {
            return Err(Error::input("matrix dimension must be positive"));
        }
        if entries.len() != dim * dim {
            return Err(Error::input(format!(
                "expected {} entries for a {dim}x{dim} matrix, got {}",
                dim * dim,
                entries.len()
            )));
        }
        let inner = DMatrix::from_row_slice(dim, dim, entries);
        Self::from_matrix(inner)
    }

    pub fn from_matrix(inner: DMatrix<f64>) -> Result<Self> {
        if !inner.is_square() {
            return Err(Error::input("matrix is not square"));
        }
        if inner.iter().any(|x| !x.is_finite()) {
            return Err(Error::input("matrix has non-finite entries"));
        }
        let n = inner.nrows();
        for i in 0..n {
            for j in (i + 1)..n {
                if (inner[(i, j)] - inner[(j, i)]).abs() > tol::SYMMETRY {
                    return Err(Error::input(format!(
                        "matrix is not symmetric at ({i},{j})"
                    )));
                }
            }
        }
        Ok(Self { inner })
    }

    pub fn dim(&self) -> usize {
        self.inner.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.inner[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.inner
    }

    pub fn trace(&self) -> f64 {
        self.inner.trace()
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        (&self.inner * DVector::from_column_slice(v))
            .iter()
            .copied()
            .collect()
    }

    /// `self + weight * a a^T`, in place.
    pub fn add_outer(&mut self, a: &[f64], weight: f64) {
        let d = self.dim();
        debug_assert_eq!(a.len(), d);
        for (i, &ai) in a.iter().enumerate() {
            for (j, &aj) in a.iter().enumerate() {
                self.inner[(i, j)] += weight * ai * aj;
            }
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            inner: &self.inner * factor,
        }
    }

    pub fn spectrum(&self) -> Result<Spectrum> {
        if self.inner.iter().any(|x| !x.is_finite()) {
            return Err(Error::input("matrix has non-finite entries"));
        }
        Ok(Spectrum::of(&self.inner))
    }
}

/// Eigendecomposition of a symmetric matrix with eigenvalues in ascending order.
#[derive(Debug, Clone)]
pub struct Spectrum {
    values: Vec<f64>,
    /// Column `i` is the eigenvector of `values[i]`.
    vectors: DMatrix<f64>,
}

impl Spectrum {
    fn of(m: &DMatrix<f64>) -> Self {
        let n = m.nrows();
        let eig = SymmetricEigen::new(m.clone());
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
        Self { values, vectors }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    /// True when the matrix is numerically positive definite.
    pub fn is_invertible(&self) -> bool {
        let max = self.max();
        max > 0.0 && self.min() > tol::INVERTIBLE_REL * max
    }

    /// Minimal eigenvalue with rank-deficient spectra clamped to exactly zero.
    pub fn min_clamped(&self) -> f64 {
        let max = self.max().abs();
        let lo = self.min();
        if lo.abs() <= tol::PINV_REL_CUTOFF * max || max == 0.0 {
            0.0
        } else {
            lo
        }
    }

    /// Pseudo-inverse applied to `v`, dropping eigenvalues below the relative cutoff.
    pub fn solve_pinv(&self, v: &[f64]) -> Vec<f64> {
        let n = self.values.len();
        let cutoff = tol::PINV_REL_CUTOFF * self.max().abs();
        let mut out = vec![0.0; n];
        for (k, &lambda) in self.values.iter().enumerate() {
            if lambda <= cutoff || lambda <= 0.0 {
                continue;
            }
            let u = self.vectors.column(k);
            let coef = u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>() / lambda;
            for (o, ui) in out.iter_mut().zip(u.iter()) {
                *o += coef * ui;
            }
        }
        out
    }

    /// Dense inverse; only meaningful when [`is_invertible`](Self::is_invertible).
    pub fn inverse(&self) -> DMatrix<f64> {
        let n = self.values.len();
        let mut inv = DMatrix::zeros(n, n);
        for (k, &lambda) in self.values.iter().enumerate() {
            let u = self.vectors.column(k);
            inv += (u * u.transpose()) / lambda;
        }
        inv
    }

    /// `sum_i log(1 + lambda_i / scale)`.
    pub fn logdet_shifted(&self, scale: f64) -> f64 {
        self.values
            .iter()
            .map(|&l| (l.max(0.0) / scale).ln_1p())
            .sum()
    }
}

pub fn min_eigenvalue(m: &SymMatrix) -> Result<f64> {
    Ok(m.spectrum()?.min_clamped())
}

/// Least-norm minimizer of `|m x - v|` for a PSD matrix `m`.
pub fn solve_psd(m: &SymMatrix, v: &[f64]) -> Result<Vec<f64>> {
    if v.len() != m.dim() {
        return Err(Error::input(format!(
            "vector length {} does not match matrix dimension {}",
            v.len(),
            m.dim()
        )));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::input("vector has non-finite entries"));
    }
    Ok(m.spectrum()?.solve_pinv(v))
}

/// `log det(m / scale + I)`.
pub fn logdet_shifted(m: &SymMatrix, scale: f64) -> Result<f64> {
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::input(format!("scale must be positive, got {scale}")));
    }
    Ok(m.spectrum()?.logdet_shifted(scale))
}

pub fn rank_one_update(m: &SymMatrix, a: &[f64]) -> Result<SymMatrix> {
    if a.len() != m.dim() {
        return Err(Error::input(format!(
            "vector length {} does not match matrix dimension {}",
            a.len(),
            m.dim()
        )));
    }
    let mut out = m.clone();
    out.add_outer(a, 1.0);
    Ok(out)
}

/// `x^T m x` for a dense matrix.
pub(crate) fn quad_form(m: &DMatrix<f64>, x: &[f64]) -> f64 {
    let n = x.len();
    let mut acc = 0.0;
    for i in 0..n {
        let mut row = 0.0;
        for j in 0..n {
            row += m[(i, j)] * x[j];
        }
        acc += x[i] * row;
    }
    acc
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
