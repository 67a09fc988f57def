use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{sorted_eigen, vech_index, vech_len, DuplicationMatrix};

use super::sample::MomentSet;

/// Sample covariance of the moments and the covariance estimators of its
/// unique elements.
#[derive(Debug, Clone)]
pub struct KpsEstimates {
    pub p: usize,
    pub k: usize,
    /// Number of independent units the averages run over.
    pub n: usize,
    /// `(1/n) Σ f_u f_u'`, `kp x kp`.
    pub r_hat: DMatrix<f64>,
    /// `(1/n) Σ vech(V V') vech(Z Z')'`, `p(p+1)/2 x k(k+1)/2`.
    pub r_star: DMatrix<f64>,
    /// Covariance estimate of `vec(rearrange(r_hat))`, `p²k² x p²k²`.
    pub v_hat: DMatrix<f64>,
    /// Covariance estimate of `vec(r_star)`.
    pub v_star: DMatrix<f64>,
    /// Centered per-unit contributions to `vec(r_star)`, one row per unit;
    /// `v_star = units' units / n`.
    pub units: DMatrix<f64>,
}

/// For every position of `vec(rearrange(R))`, the matching position of
/// `vec(R*)`. This is the row map of `D_k ⊗ D_p`.
pub(crate) fn unique_element_map(p: usize, k: usize) -> Vec<usize> {
    let dp = DuplicationMatrix::row_map(p);
    let dk = DuplicationMatrix::row_map(k);
    let ps = vech_len(p);
    let mut map = Vec::with_capacity(p * p * k * k);
    for &ck in &dk {
        for &rp in &dp {
            map.push(ck * ps + rp);
        }
    }
    map
}

/// Per-unit contribution to `vec(R*)`: entry `(vech(i,j), vech(a,b))` is
/// `(f_ia f_jb + f_ib f_ja) / 2`. For `f = V ⊗ Z` this is exactly
/// `V_i V_j Z_a Z_b`; for cluster sums it projects `f f'` onto matrices with
/// symmetric `k x k` blocks.
fn unit_row(f: &[f64], p: usize, k: usize, out: &mut [f64]) {
    let ps = vech_len(p);
    let at = |j: usize, a: usize| f[j * k + a];
    for b in 0..k {
        for a in b..k {
            let col = vech_index(a, b, k);
            for j in 0..p {
                for i in j..p {
                    let val = 0.5 * (at(i, a) * at(j, b) + at(i, b) * at(j, a));
                    out[col * ps + vech_index(i, j, p)] = val;
                }
            }
        }
    }
}

/// Computes `R̂`, `R̂*`, and the outer-product covariance estimators
///
/// ```text
/// V̂* = (1/n) Σ vec(r*_u) vec(r*_u)' - vec(R̂*) vec(R̂*)'
/// V̂  = (D_k ⊗ D_p) V̂* (D_k ⊗ D_p)'
/// ```
///
/// over the units of `moments`.
pub fn estimate(moments: &MomentSet) -> Result<KpsEstimates> {
    let (p, k) = (moments.p, moments.k);
    let n = moments.n_units();
    if n < 2 {
        return Err(Error::InvalidSample(format!(
            "at least two independent units are required, got {n}"
        )));
    }
    let nf = n as f64;
    let f = &moments.f;

    let r_hat = f.tr_mul(f) / nf;
    let scale = r_hat.amax();
    if scale == 0.0 {
        return Err(Error::DegenerateSample("moment covariance is zero".into()));
    }
    let (eigs, _) = sorted_eigen(&r_hat);
    let min_eig = eigs.last().copied().unwrap_or(0.0);
    if min_eig < -1e-10 * scale {
        return Err(Error::DegenerateSample(format!(
            "moment covariance has a negative eigenvalue ({min_eig:.3e})"
        )));
    }

    let ps = vech_len(p);
    let ks = vech_len(k);
    let d = ps * ks;
    let mut h = DMatrix::zeros(n, d);
    let mut row = vec![0.0; d];
    let mut frow = vec![0.0; k * p];
    for u in 0..n {
        for (c, x) in frow.iter_mut().enumerate() {
            *x = f[(u, c)];
        }
        unit_row(&frow, p, k, &mut row);
        for (c, &x) in row.iter().enumerate() {
            h[(u, c)] = x;
        }
    }
    let mean = h.row_mean();
    let r_star = DMatrix::from_column_slice(ps, ks, mean.as_slice());
    for mut row in h.row_iter_mut() {
        row -= &mean;
    }
    let v_star = h.tr_mul(&h) / nf;

    let map = unique_element_map(p, k);
    let m = map.len();
    let v_hat = DMatrix::from_fn(m, m, |x, y| v_star[(map[x], map[y])]);

    Ok(KpsEstimates {
        p,
        k,
        n,
        r_hat,
        r_star,
        v_hat,
        v_star,
        units: h,
    })
}

impl KpsEstimates {
    /// `(right ⊗ left)' V̂ (right ⊗ left)` for `left: p² x a`, `right: k² x b`,
    /// evaluated through `V̂*` using `(right ⊗ left)'(D_k ⊗ D_p)
    /// = (right' D_k) ⊗ (left' D_p)`.
    pub fn projected_covariance(&self, left: &DMatrix<f64>, right: &DMatrix<f64>) -> DMatrix<f64> {
        let bl = reduce_columns(left, self.p);
        let br = reduce_columns(right, self.k);
        self.unit_covariance(&br.kronecker(&bl))
    }

    /// `B V̂* B'`. Each unit is projected before the outer products are
    /// summed, which avoids cancelling the large components of `V̂*` along
    /// the leading Kronecker direction.
    pub fn unit_covariance(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let g = &self.units * b.transpose();
        let w = g.tr_mul(&g) / self.n as f64;
        (&w + w.transpose()) * 0.5
    }
}

/// `X' D_m` for `X` with `m²` rows: row `r` of `X` is added to column
/// `vech(r)` of the result.
pub(crate) fn reduce_columns(x: &DMatrix<f64>, m: usize) -> DMatrix<f64> {
    let map = DuplicationMatrix::row_map(m);
    let mut out = DMatrix::zeros(x.ncols(), vech_len(m));
    for (r, &c) in map.iter().enumerate() {
        for i in 0..x.ncols() {
            out[(i, c)] += x[(r, i)];
        }
    }
    out
}
