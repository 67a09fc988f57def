//! Dense linear algebra used by the test.
//!
//! Matrices are stored column-major (the `nalgebra` layout), so `vec(A)` is
//! simply the storage slice of `A`. Everything here is a pure function of its
//! inputs.
//!
//! Index conventions (all zero-based):
//!
//! - `vec`: entry `(i, j)` of an `m x n` matrix sits at `j * m + i`.
//! - `vech`: the lower triangle stacked column by column, so `(i, j)` with
//!   `i >= j` sits at `j * m - j * (j - 1) / 2 + (i - j)`.
//! - `rearrange`: for a `kp x kp` matrix with `k x k` blocks `A_ij`, row
//!   `j * p + i` of the `p^2 x k^2` output is `vec(A_ij)'`, so that
//!   `rearrange(G1 ⊗ G2) = vec(G1) vec(G2)'`.

use std::ops::Deref;

use faer::{Mat, MatRef, Side};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};

/// Finite, non-empty, column-major dense matrix.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct DenseMatrix(DMatrix<f64>);

impl DenseMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() == 0 || m.ncols() == 0 {
            return Err(Error::Empty);
        }
        if m.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self(m))
    }

    pub fn from_row_slice(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Self::new(DMatrix::from_row_slice(rows, cols, data))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::ShapeMismatch("ragged rows".into()));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        Self::from_row_slice(rows.len(), cols, &flat)
    }

    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    /// Entries in row-major order.
    pub fn to_row_major(&self) -> Vec<Vec<f64>> {
        self.0
            .row_iter()
            .map(|r| r.iter().copied().collect())
            .collect()
    }
}

impl Deref for DenseMatrix {
    type Target = DMatrix<f64>;

    fn deref(&self) -> &DMatrix<f64> {
        &self.0
    }
}

impl TryFrom<DMatrix<f64>> for DenseMatrix {
    type Error = Error;

    fn try_from(m: DMatrix<f64>) -> Result<Self> {
        Self::new(m)
    }
}

/// Length of `vech` for an `m x m` matrix.
pub fn vech_len(m: usize) -> usize {
    m * (m + 1) / 2
}

/// Position of `(i, j)`, `i >= j`, inside `vech` of an `m x m` matrix.
pub fn vech_index(i: usize, j: usize, m: usize) -> usize {
    debug_assert!(i >= j && i < m);
    // Columns 0..j contribute m + (m-1) + ... + (m-j+1) entries.
    j * m - j * j.saturating_sub(1) / 2 + (i - j)
}

/// Largest `|a_ij - a_ji|`.
pub fn max_asymmetry(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows().min(a.ncols());
    let mut worst = 0.0f64;
    for j in 0..n {
        for i in (j + 1)..n {
            worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    worst
}

fn scale(a: &DMatrix<f64>) -> f64 {
    a.amax().max(1.0)
}

pub(crate) fn require_square(a: &DMatrix<f64>) -> Result<usize> {
    if a.nrows() != a.ncols() {
        return Err(Error::NonSquare {
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    Ok(a.nrows())
}

/// Checks symmetry to `tol` relative to `max(1, max|a|)`.
pub(crate) fn require_symmetric(a: &DMatrix<f64>, tol: f64) -> Result<usize> {
    let n = require_square(a)?;
    let asymmetry = max_asymmetry(a);
    if asymmetry > tol * scale(a) {
        return Err(Error::NotSymmetric { asymmetry });
    }
    Ok(n)
}

/// `(A + A') / 2`.
pub fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

/// Column-stacked vectorization.
pub fn vec(a: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_column_slice(a.as_slice())
}

/// Inverse of [`vec`] for an `rows x cols` matrix.
pub fn unvec(v: &[f64], rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_column_slice(rows, cols, v)
}

/// Half-vectorization of a symmetric matrix (lower triangle, column by column).
pub fn vech(a: &DMatrix<f64>) -> Result<DVector<f64>> {
    let m = require_symmetric(a, 1e-10)?;
    let mut out = Vec::with_capacity(vech_len(m));
    for j in 0..m {
        for i in j..m {
            out.push(a[(i, j)]);
        }
    }
    Ok(DVector::from_vec(out))
}

/// The `m^2 x m(m+1)/2` duplication matrix `D_m` with `D_m vech(A) = vec(A)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DuplicationMatrix {
    pub m: usize,
    pub matrix: DMatrix<f64>,
}

impl DuplicationMatrix {
    /// For each `vec` position, the `vech` position it copies. Every row of
    /// `D_m` has exactly one unit entry, at this column.
    pub fn row_map(m: usize) -> Vec<usize> {
        let mut map = vec![0; m * m];
        for j in 0..m {
            for i in 0..m {
                let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
                map[j * m + i] = vech_index(hi, lo, m);
            }
        }
        map
    }

    /// `(D_m' D_m)^{-1} D_m'`, which maps `vec(A)` to `vech(A)` for symmetric `A`.
    pub fn left_inverse(&self) -> DMatrix<f64> {
        let dtd = self.matrix.tr_mul(&self.matrix);
        let inv = DMatrix::from_diagonal(&dtd.diagonal().map(|d| 1.0 / d));
        inv * self.matrix.transpose()
    }
}

pub fn duplication_matrix(m: usize) -> DuplicationMatrix {
    let map = DuplicationMatrix::row_map(m);
    let mut d = DMatrix::zeros(m * m, vech_len(m));
    for (row, &col) in map.iter().enumerate() {
        d[(row, col)] = 1.0;
    }
    DuplicationMatrix { m, matrix: d }
}

/// Orthonormal complement of `D_m`: columns `(e_i ⊗ e_j - e_j ⊗ e_i) / sqrt 2`
/// for `i < j` in lexicographic order. For `m = 1` the result is `1 x 0`.
pub fn duplication_complement(m: usize) -> DMatrix<f64> {
    let cols = m * m.saturating_sub(1) / 2;
    let mut out = DMatrix::zeros(m * m, cols);
    let w = std::f64::consts::FRAC_1_SQRT_2;
    let mut c = 0;
    for i in 0..m {
        for j in (i + 1)..m {
            // e_i ⊗ e_j has its unit at i * m + j.
            out[(i * m + j, c)] = w;
            out[(j * m + i, c)] = -w;
            c += 1;
        }
    }
    out
}

/// Rearranges a `kp x kp` matrix of `k x k` blocks into the `p^2 x k^2`
/// matrix whose row `j * p + i` is `vec(A_ij)'`. The map only permutes
/// entries, so the Frobenius norm is preserved.
pub fn rearrange(a: &DMatrix<f64>, p: usize, k: usize) -> Result<DMatrix<f64>> {
    if p == 0 || k == 0 || a.nrows() != k * p || a.ncols() != k * p {
        return Err(Error::ShapeMismatch(format!(
            "cannot rearrange a {}x{} matrix with p={p}, k={k}",
            a.nrows(),
            a.ncols()
        )));
    }
    let mut out = DMatrix::zeros(p * p, k * k);
    for j in 0..p {
        for i in 0..p {
            let row = j * p + i;
            for b in 0..k {
                for c in 0..k {
                    out[(row, b * k + c)] = a[(i * k + c, j * k + b)];
                }
            }
        }
    }
    Ok(out)
}

/// Inverse of [`rearrange`].
pub fn unrearrange(r: &DMatrix<f64>, p: usize, k: usize) -> Result<DMatrix<f64>> {
    if r.nrows() != p * p || r.ncols() != k * k {
        return Err(Error::ShapeMismatch(format!(
            "cannot undo rearrangement of a {}x{} matrix with p={p}, k={k}",
            r.nrows(),
            r.ncols()
        )));
    }
    let mut out = DMatrix::zeros(k * p, k * p);
    for j in 0..p {
        for i in 0..p {
            for b in 0..k {
                for c in 0..k {
                    out[(i * k + c, j * k + b)] = r[(j * p + i, b * k + c)];
                }
            }
        }
    }
    Ok(out)
}

/// Full SVD `M = L diag(sigma) N'` with square orthonormal `L`, `N`, and the
/// block views used by the rank statistic:
///
/// ```text
/// L = [ l11 l12 ]   sigma = [ s1  0  ]   N = [ n11 n12 ]
///     [ l21 l22 ]           [ 0   S2 ]       [ n21 n22 ]
/// ```
///
/// The first singular pair is signed so that `l11 >= 0`.
#[derive(Debug, Clone)]
pub struct SvdPartition {
    pub l: DMatrix<f64>,
    /// Non-increasing, length `min(rows, cols)`.
    pub sigma: Vec<f64>,
    pub n: DMatrix<f64>,
}

impl SvdPartition {
    pub fn rows(&self) -> usize {
        self.l.nrows()
    }

    pub fn cols(&self) -> usize {
        self.n.nrows()
    }

    pub fn sigma1(&self) -> f64 {
        self.sigma.first().copied().unwrap_or(0.0)
    }

    pub fn l11(&self) -> f64 {
        self.l[(0, 0)]
    }

    pub fn l1(&self) -> DVector<f64> {
        self.l.column(0).into_owned()
    }

    pub fn n1(&self) -> DVector<f64> {
        self.n.column(0).into_owned()
    }

    pub fn l2(&self) -> DMatrix<f64> {
        self.l.columns(1, self.rows() - 1).into_owned()
    }

    pub fn n2(&self) -> DMatrix<f64> {
        self.n.columns(1, self.cols() - 1).into_owned()
    }

    pub fn l22(&self) -> DMatrix<f64> {
        let m = self.rows() - 1;
        self.l.view((1, 1), (m, m)).into_owned()
    }

    pub fn n22(&self) -> DMatrix<f64> {
        let m = self.cols() - 1;
        self.n.view((1, 1), (m, m)).into_owned()
    }

    /// The `(rows-1) x (cols-1)` block holding the trailing singular values.
    pub fn sigma2(&self) -> DMatrix<f64> {
        let mut s = DMatrix::zeros(self.rows() - 1, self.cols() - 1);
        for (i, &v) in self.sigma.iter().enumerate().skip(1) {
            s[(i - 1, i - 1)] = v;
        }
        s
    }

    /// `L diag(sigma) N'`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let mut s = DMatrix::zeros(self.rows(), self.cols());
        for (i, &v) in self.sigma.iter().enumerate() {
            s[(i, i)] = v;
        }
        &self.l * s * self.n.transpose()
    }
}

fn to_faer(m: &DMatrix<f64>) -> Mat<f64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

fn from_faer(m: MatRef<'_, f64>) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// Full SVD `m = U diag(s) V'` with square `U`, `V` and `s` non-increasing.
fn full_svd(m: &DMatrix<f64>) -> Result<(DMatrix<f64>, Vec<f64>, DMatrix<f64>)> {
    let svd = to_faer(m).svd().map_err(|_| Error::ConvergenceFailure)?;
    let s = svd.S().column_vector();
    let values = (0..s.nrows()).map(|i| s[i].max(0.0)).collect();
    Ok((from_faer(svd.U()), values, from_faer(svd.V())))
}

pub fn svd_partitioned(m: &DMatrix<f64>) -> Result<SvdPartition> {
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite);
    }
    if m.nrows() == 0 || m.ncols() == 0 {
        return Err(Error::Empty);
    }
    let (mut l, sigma, mut n) = full_svd(m)?;
    if l[(0, 0)] < 0.0 {
        l.column_mut(0).neg_mut();
        n.column_mut(0).neg_mut();
    }
    Ok(SvdPartition { l, sigma, n })
}

/// Rank rule for [`pseudo_inverse`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum RankPolicy {
    /// Keep exactly the `r` largest eigenvalues.
    FixedRank(usize),
    /// Keep eigenvalues above `rtol * max eigenvalue`.
    Tolerance(f64),
}

impl Default for RankPolicy {
    fn default() -> Self {
        RankPolicy::Tolerance(1e-10)
    }
}

/// Eigenvalues (non-increasing) and matching eigenvectors of a symmetric matrix.
pub(crate) fn sorted_eigen(s: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = to_faer(&symmetrize(s))
        .self_adjoint_eigen(Side::Lower)
        .expect("symmetric eigendecomposition of a finite matrix");
    let lambda = eig.S().column_vector();
    let u = eig.U();
    let mut order: Vec<usize> = (0..lambda.nrows()).collect();
    order.sort_by(|&a, &b| lambda[b].total_cmp(&lambda[a]));
    let values = order.iter().map(|&i| lambda[i]).collect();
    let vectors = DMatrix::from_fn(s.nrows(), order.len(), |r, c| u[(r, order[c])]);
    (values, vectors)
}

/// Moore-Penrose inverse of a symmetric positive semi-definite matrix via its
/// eigendecomposition. Retained eigenvalues that are not strictly positive are
/// dropped rather than inverted.
pub fn pseudo_inverse(s: &DMatrix<f64>, policy: RankPolicy) -> Result<DMatrix<f64>> {
    let dim = require_symmetric(s, 1e-8)?;
    if s.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite);
    }
    let (values, vectors) = sorted_eigen(s);
    let keep = match policy {
        RankPolicy::FixedRank(r) => {
            if r > dim {
                return Err(Error::RankExceedsDimension { rank: r, dim });
            }
            r
        }
        RankPolicy::Tolerance(rtol) => {
            let top = values.first().copied().unwrap_or(0.0);
            values.iter().take_while(|&&v| top > 0.0 && v > rtol * top).count()
        }
    };
    let mut out = DMatrix::zeros(dim, dim);
    for (c, &lambda) in values.iter().enumerate().take(keep) {
        if lambda <= 0.0 {
            continue;
        }
        let v = vectors.column(c);
        out += (v * v.transpose()) / lambda;
    }
    Ok(out)
}

/// Orthonormal basis of the complement of `v`, built from the Householder
/// reflector that maps `v` onto a multiple of `e_1`: the reflector is
/// symmetric and orthogonal with first column proportional to `v`, so its
/// remaining columns are returned. `v` is normalized first.
pub fn orth_complement(v: &DVector<f64>) -> Result<DMatrix<f64>> {
    let norm = v.norm();
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::ZeroVector);
    }
    let m = v.len();
    let u = v / norm;
    let sign = if u[0] >= 0.0 { 1.0 } else { -1.0 };
    let mut w = u.clone();
    w[0] += sign;
    let ww = w.dot(&w);
    let h = DMatrix::identity(m, m) - (&w * w.transpose()) * (2.0 / ww);
    Ok(h.columns(1, m - 1).into_owned())
}

/// Lower-triangular `C` with `C C' = S`.
pub fn cholesky_lower(s: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = require_symmetric(s, 1e-10)?;
    let mut c = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut d = s[(j, j)];
        for t in 0..j {
            d -= c[(j, t)] * c[(j, t)];
        }
        if d <= 0.0 || !d.is_finite() {
            return Err(Error::NotPositiveDefinite);
        }
        let djj = d.sqrt();
        c[(j, j)] = djj;
        for i in (j + 1)..n {
            let mut x = s[(i, j)];
            for t in 0..j {
                x -= c[(i, t)] * c[(j, t)];
            }
            c[(i, j)] = x / djj;
        }
    }
    Ok(c)
}

/// Orthogonal polar factor `(A A')^{-1/2} A` of a square matrix, computed
/// from its SVD `A = U S W'` as `U W'`. Fails when `A` is numerically
/// singular.
pub(crate) fn polar_factor(a: &DMatrix<f64>, block: &'static str) -> Result<DMatrix<f64>> {
    let (u, sigma, v) = full_svd(a)?;
    let smallest = sigma.iter().copied().fold(f64::INFINITY, f64::min);
    if !(smallest > 1e-12) {
        return Err(Error::BlockSingular(block));
    }
    Ok(u * v.transpose())
}

/// Symmetric square root of a symmetric PSD matrix.
pub fn sym_sqrt(s: &DMatrix<f64>) -> DMatrix<f64> {
    let (values, vectors) = sorted_eigen(s);
    let d = DVector::from_iterator(values.len(), values.iter().map(|v| v.max(0.0).sqrt()));
    &vectors * DMatrix::from_diagonal(&d) * vectors.transpose()
}
