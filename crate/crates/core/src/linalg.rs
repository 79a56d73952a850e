//! Dense linear algebra used by the classifiers.
//!
//! Matrices are stored row-major in [`Matrix`]; the heavy kernels (matrix
//! products, Cholesky, symmetric eigendecomposition, SVD) are delegated to
//! `faer`, which runs sequentially here so results never depend on the
//! thread count.

use std::ops::{Index, IndexMut};

use faer::linalg::solvers::{DenseSolveCore, Solve};
use faer::{MatRef, Side};
use serde::{Deserialize, Serialize};

use crate::error::{EemError, Result};

/// Relative eigenvalue cutoff used by [`sym_inv_sqrt`].
pub const DEFAULT_EIG_TOL: f64 = 1e-10;

/// Dense row-major matrix of `f64`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(EemError::invalid(format!(
                "buffer of length {} cannot hold a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    /// Builds a matrix from equally long rows. An empty slice yields a 0x0
    /// matrix.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(EemError::DimensionMismatch {
                    expected: cols,
                    got: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        (0..self.rows).map(move |i| self.row(i))
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    /// New matrix made of the given rows, in order.
    pub fn select_rows(&self, indices: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Matrix {
            rows: indices.len(),
            cols: self.cols,
            data,
        }
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, rhs: &Matrix) -> Result<Matrix> {
        if self.cols != rhs.rows {
            return Err(EemError::DimensionMismatch {
                expected: self.cols,
                got: rhs.rows,
            });
        }
        Ok(from_faer((self.view() * rhs.view()).as_ref()))
    }

    /// `self * v` with a fixed left-to-right summation order per row.
    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if self.cols != v.len() {
            return Err(EemError::DimensionMismatch {
                expected: self.cols,
                got: v.len(),
            });
        }
        Ok(self.rows().map(|r| dot(r, v)).collect())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub(crate) fn view(&self) -> MatRef<'_, f64> {
        MatRef::from_row_major_slice(&self.data, self.rows, self.cols)
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

pub(crate) fn from_faer(m: MatRef<'_, f64>) -> Matrix {
    Matrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

/// Symmetric square matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SymMatrix(Matrix);

impl SymMatrix {
    /// Wraps `m` after checking that it is square and symmetric within
    /// `1e-9` relative to its largest entry.
    pub fn new(m: Matrix) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(EemError::DimensionMismatch {
                expected: m.nrows(),
                got: m.ncols(),
            });
        }
        let tol = 1e-9 * m.max_abs().max(f64::MIN_POSITIVE);
        for i in 0..m.nrows() {
            for j in 0..i {
                if (m[(i, j)] - m[(j, i)]).abs() > tol {
                    return Err(EemError::invalid("matrix is not symmetric"));
                }
            }
        }
        Ok(SymMatrix(m))
    }

    /// Symmetrizes `m` by averaging it with its transpose.
    pub fn symmetrize(mut m: Matrix) -> Self {
        assert_eq!(m.nrows(), m.ncols(), "symmetrize needs a square matrix");
        let n = m.nrows();
        for i in 0..n {
            for j in 0..i {
                let v = 0.5 * (m[(i, j)] + m[(j, i)]);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        SymMatrix(m)
    }

    pub fn identity(n: usize) -> Self {
        SymMatrix(Matrix::identity(n))
    }

    pub fn diagonal(values: &[f64]) -> Self {
        let mut m = Matrix::zeros(values.len(), values.len());
        for (i, v) in values.iter().enumerate() {
            m[(i, i)] = *v;
        }
        SymMatrix(m)
    }

    pub fn order(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }

    pub fn trace(&self) -> f64 {
        (0..self.order()).map(|i| self.0[(i, i)]).sum()
    }

    /// `vᵀ A v`.
    pub fn quad_form(&self, v: &[f64]) -> f64 {
        self.0.rows().zip(v).map(|(r, vi)| vi * dot(r, v)).sum()
    }

    /// Entrywise sum `self + other`.
    pub fn add(&self, other: &SymMatrix) -> Result<SymMatrix> {
        if self.order() != other.order() {
            return Err(EemError::DimensionMismatch {
                expected: self.order(),
                got: other.order(),
            });
        }
        let data = self
            .0
            .as_slice()
            .iter()
            .zip(other.0.as_slice())
            .map(|(a, b)| a + b)
            .collect();
        Ok(SymMatrix(Matrix::from_vec(self.order(), self.order(), data)?))
    }

    /// `self + lambda * I`.
    pub fn add_ridge(&self, lambda: f64) -> SymMatrix {
        let mut m = self.0.clone();
        for i in 0..self.order() {
            m[(i, i)] += lambda;
        }
        SymMatrix(m)
    }

    pub fn scaled(&self, c: f64) -> SymMatrix {
        let data = self.0.as_slice().iter().map(|v| c * v).collect();
        SymMatrix(Matrix::from_vec(self.order(), self.order(), data).expect("same shape"))
    }
}

impl Index<(usize, usize)> for SymMatrix {
    type Output = f64;

    fn index(&self, idx: (usize, usize)) -> &f64 {
        &self.0[idx]
    }
}

/// Divisor convention for sample covariances.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CovDivisor {
    /// `1/N`, the maximum-likelihood estimate.
    #[default]
    Samples,
    /// `1/(N-1)`; falls back to `1/N` for a single sample.
    SamplesMinusOne,
}

impl CovDivisor {
    fn factor(self, n: usize) -> f64 {
        match self {
            CovDivisor::SamplesMinusOne if n > 1 => 1.0 / (n - 1) as f64,
            _ => 1.0 / n as f64,
        }
    }
}

/// Column means of `h`.
pub fn column_means(h: &Matrix) -> Vec<f64> {
    let mut mean = vec![0.0; h.ncols()];
    for r in h.rows() {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v;
        }
    }
    let n = h.nrows().max(1) as f64;
    mean.iter_mut().for_each(|m| *m /= n);
    mean
}

fn centered(h: &Matrix, mean: &[f64]) -> Matrix {
    let mut c = h.clone();
    for i in 0..c.nrows() {
        for (v, m) in c.row_mut(i).iter_mut().zip(mean) {
            *v -= m;
        }
    }
    c
}

fn gram_of_columns(c: &Matrix, scale: f64) -> SymMatrix {
    let v = c.view();
    let g = v.transpose() * v;
    let h = c.ncols();
    let mut out = Matrix::zeros(h, h);
    for i in 0..h {
        for j in 0..=i {
            let x = scale * g[(i, j)];
            out[(i, j)] = x;
            out[(j, i)] = x;
        }
    }
    SymMatrix(out)
}

/// Empirical covariance `(1/N) Σ (hᵢ - m)(hᵢ - m)ᵀ` and mean of the rows of
/// `h`.
pub fn empirical_covariance(h: &Matrix) -> Result<(SymMatrix, Vec<f64>)> {
    empirical_covariance_with(h, CovDivisor::Samples)
}

pub fn empirical_covariance_with(h: &Matrix, divisor: CovDivisor) -> Result<(SymMatrix, Vec<f64>)> {
    if h.nrows() == 0 {
        return Err(EemError::invalid("covariance of an empty sample"));
    }
    let mean = column_means(h);
    let c = centered(h, &mean);
    Ok((gram_of_columns(&c, divisor.factor(h.nrows())), mean))
}

/// Ledoit-Wolf shrunk covariance `(1-ε) S + ε tr(S)/h I`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShrunkCovariance {
    pub matrix: SymMatrix,
    /// Shrinkage intensity in `[0, 1]`.
    pub epsilon: f64,
    /// Trace of the unshrunk empirical covariance.
    pub trace: f64,
    /// Set when the sample has no spread at all (`tr(S) = 0`); the matrix is
    /// then zero.
    pub degenerate: bool,
}

/// Ledoit-Wolf (2004) shrinkage towards the scaled identity.
pub fn ledoit_wolf(h: &Matrix) -> Result<ShrunkCovariance> {
    Ok(ledoit_wolf_with(h, CovDivisor::Samples)?.0)
}

/// As [`ledoit_wolf`], also returning the row mean. The shrinkage intensity
/// is always estimated with the `1/N` convention of the original estimator;
/// `divisor` only rescales the resulting matrix.
pub fn ledoit_wolf_with(h: &Matrix, divisor: CovDivisor) -> Result<(ShrunkCovariance, Vec<f64>)> {
    let n = h.nrows();
    if n == 0 {
        return Err(EemError::invalid("covariance of an empty sample"));
    }
    let p = h.ncols();
    let mean = column_means(h);
    let c = centered(h, &mean);
    let s = gram_of_columns(&c, 1.0 / n as f64);

    let trace = s.trace();
    let mean_sq = norm_sq(&mean);
    // identical rows leave rounding residue after centering
    if p == 0 || trace <= 1e-24 * (1.0 + mean_sq) {
        let cov = ShrunkCovariance {
            matrix: SymMatrix(Matrix::zeros(p, p)),
            epsilon: 1.0,
            trace: 0.0,
            degenerate: true,
        };
        return Ok((cov, mean));
    }

    let pf = p as f64;
    let nf = n as f64;
    let mu = trace / pf;
    let s_frob_sq = norm_sq(s.as_matrix().as_slice());

    // d² = ||S - μI||² with the normalised norm ||A||² = tr(AAᵀ)/p
    let d2 = ((s_frob_sq - 2.0 * mu * trace + pf * mu * mu) / pf).max(0.0);

    // b̄² = (1/n²) Σ_k ||x_k x_kᵀ - S||² = (Σ_k ||x_k||⁴ / n - ||S||²_F) / (p n)
    let fourth: f64 = c.rows().map(|r| norm_sq(r).powi(2)).sum();
    let b_bar2 = ((fourth / nf - s_frob_sq) / (pf * nf)).max(0.0);
    let b2 = b_bar2.min(d2);
    let epsilon = if d2 > 0.0 { (b2 / d2).clamp(0.0, 1.0) } else { 0.0 };

    let rescale = divisor.factor(n) * nf;
    let mut m = s.into_matrix();
    for i in 0..p {
        for j in 0..p {
            let target = if i == j { mu } else { 0.0 };
            m[(i, j)] = rescale * ((1.0 - epsilon) * m[(i, j)] + epsilon * target);
        }
    }
    let cov = ShrunkCovariance {
        matrix: SymMatrix(m),
        epsilon,
        trace: rescale * trace,
        degenerate: false,
    };
    Ok((cov, mean))
}

/// Cholesky factor of a positive definite matrix, rejecting matrices whose
/// smallest pivot is below `order * 1e-12` of the largest diagonal entry.
fn cholesky(a: &SymMatrix) -> Result<faer::linalg::solvers::Llt<f64>> {
    let n = a.order();
    if n == 0 {
        return Err(EemError::SingularCovariance);
    }
    let llt = a
        .as_matrix()
        .view()
        .llt(Side::Lower)
        .map_err(|_| EemError::SingularCovariance)?;
    let max_diag = (0..n).map(|i| a[(i, i)]).fold(0.0_f64, f64::max);
    let l = llt.L();
    let min_pivot = (0..n).map(|i| l[(i, i)] * l[(i, i)]).fold(f64::INFINITY, f64::min);
    if !(min_pivot > n as f64 * 1e-12 * max_diag) {
        return Err(EemError::SingularCovariance);
    }
    Ok(llt)
}

/// Solves `A x = b` for symmetric positive definite `A`.
pub fn sym_solve(a: &SymMatrix, b: &[f64]) -> Result<Vec<f64>> {
    if a.order() != b.len() {
        return Err(EemError::DimensionMismatch {
            expected: a.order(),
            got: b.len(),
        });
    }
    let llt = cholesky(a)?;
    let rhs = faer::Mat::from_fn(b.len(), 1, |i, _| b[i]);
    let x = llt.solve(&rhs);
    Ok((0..b.len()).map(|i| x[(i, 0)]).collect())
}

/// Inverse of a symmetric positive definite matrix.
pub fn sym_inverse(a: &SymMatrix) -> Result<SymMatrix> {
    let llt = cholesky(a)?;
    let inv = llt.inverse();
    Ok(SymMatrix::symmetrize(from_faer(inv.as_ref())))
}

/// Pseudo inverse square root `U Λ'^{-1/2} Uᵀ` of a symmetric PSD matrix,
/// dropping eigenvalues below `tol * λ_max`.
pub fn sym_inv_sqrt(a: &SymMatrix, tol: f64) -> Result<SymMatrix> {
    let n = a.order();
    if n == 0 {
        return Ok(SymMatrix(Matrix::zeros(0, 0)));
    }
    let evd = a
        .as_matrix()
        .view()
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| EemError::invalid(format!("eigendecomposition failed: {e:?}")))?;
    let u = evd.U();
    let s = evd.S();
    let lambda: Vec<f64> = (0..n).map(|i| s[i]).collect();
    let lambda_max = lambda.iter().cloned().fold(0.0_f64, f64::max);
    let cutoff = tol * lambda_max;
    let kept: Vec<(usize, f64)> = lambda
        .iter()
        .enumerate()
        .filter(|(_, &l)| lambda_max > 0.0 && l > cutoff)
        .map(|(k, &l)| (k, l.powf(-0.25)))
        .collect();

    // R = (U Λ^{-1/4}) (U Λ^{-1/4})ᵀ
    let mut uq = faer::Mat::<f64>::zeros(n, kept.len());
    for (c, &(k, w)) in kept.iter().enumerate() {
        for i in 0..n {
            uq[(i, c)] = u[(i, k)] * w;
        }
    }
    let r = &uq * uq.transpose();
    let mut out = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            out[(i, j)] = r[(i, j)];
            out[(j, i)] = r[(i, j)];
        }
    }
    Ok(SymMatrix(out))
}

/// Moore-Penrose pseudoinverse via thin SVD; singular values below
/// `tol * σ_max` are treated as zero.
pub fn pseudoinverse(a: &Matrix, tol: f64) -> Result<Matrix> {
    let (m, n) = (a.nrows(), a.ncols());
    if m == 0 || n == 0 || a.max_abs() == 0.0 {
        return Ok(Matrix::zeros(n, m));
    }
    let svd = a
        .view()
        .thin_svd()
        .map_err(|e| EemError::invalid(format!("svd failed: {e:?}")))?;
    let (u, s, v) = (svd.U(), svd.S(), svd.V());
    let k = m.min(n);
    let sigma_max = (0..k).map(|i| s[i]).fold(0.0_f64, f64::max);
    let inv: Vec<f64> = (0..k)
        .map(|i| if s[i] > tol * sigma_max { 1.0 / s[i] } else { 0.0 })
        .collect();
    // A† = V Σ⁻¹ Uᵀ
    let mut vs = faer::Mat::<f64>::zeros(n, k);
    for j in 0..k {
        for i in 0..n {
            vs[(i, j)] = v[(i, j)] * inv[j];
        }
    }
    let p = &vs * u.transpose();
    Ok(from_faer(p.as_ref()))
}

/// Default relative cutoff for [`pseudoinverse`]: `max(m, n) · machine ε`.
pub fn default_pinv_tol(rows: usize, cols: usize) -> f64 {
    rows.max(cols) as f64 * f64::EPSILON
}

/// Squared Mahalanobis norm `mᵀ A⁻¹ m`.
pub fn mahalanobis_sq(m: &[f64], a: &SymMatrix) -> Result<f64> {
    let x = sym_solve(a, m)?;
    Ok(dot(m, &x).max(0.0))
}
