use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{
    orth_complement, pseudo_inverse, rearrange, require_symmetric, vec, vech_index, vech_len,
    DenseMatrix, RankPolicy,
};

use super::estimate::reduce_columns;
use super::stat::degrees_of_freedom;

/// Inputs of the local-alternative noncentrality: `R = G1 ⊗ G2 + A0 / sqrt(n)`
/// with `V_R*` the limiting covariance of `sqrt(n) vec(R̂*)`.
#[derive(Debug, Clone)]
pub struct NoncentralitySpec {
    g1: DenseMatrix,
    g2: DenseMatrix,
    a0_full: DenseMatrix,
    v_rstar: DenseMatrix,
}

impl NoncentralitySpec {
    pub fn new(
        g1: DenseMatrix,
        g2: DenseMatrix,
        a0_full: DenseMatrix,
        v_rstar: DenseMatrix,
    ) -> Result<Self> {
        let p = require_symmetric(&g1, 1e-10)?;
        let k = require_symmetric(&g2, 1e-10)?;
        if g1.clone().into_inner().cholesky().is_none()
            || g2.clone().into_inner().cholesky().is_none()
        {
            return Err(Error::NotPositiveDefinite);
        }
        if require_symmetric(&a0_full, 1e-10)? != k * p {
            return Err(Error::ShapeMismatch(format!(
                "A0 must be {0}x{0}",
                k * p
            )));
        }
        let d = vech_len(p) * vech_len(k);
        if require_symmetric(&v_rstar, 1e-8)? != d {
            return Err(Error::ShapeMismatch(format!("V_R* must be {d}x{d}")));
        }
        Ok(Self {
            g1,
            g2,
            a0_full,
            v_rstar,
        })
    }

    pub fn p(&self) -> usize {
        self.g1.nrows()
    }

    pub fn k(&self) -> usize {
        self.g2.nrows()
    }

    /// `a0 = vec(G1)⊥' rearrange(A0) vec(G2)⊥` with Householder complements.
    pub fn a0(&self) -> Result<DMatrix<f64>> {
        let (perp1, perp2) = self.complements()?;
        let ra = rearrange(&self.a0_full, self.p(), self.k())?;
        Ok(perp1.transpose() * ra * perp2)
    }

    fn complements(&self) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        Ok((orth_complement(&vec(&self.g1))?, orth_complement(&vec(&self.g2))?))
    }
}

/// Noncentrality of the limiting `χ²(df, δ)` law of KPST under local
/// alternatives:
///
/// ```text
/// δ = vec(a0)' [ J' (D_k ⊗ D_p) V_R* (D_k ⊗ D_p)' J ]⁻ vec(a0),
/// J = vec(G2)⊥ ⊗ vec(G1)⊥.
/// ```
///
/// The value does not depend on which orthonormal complements are used.
pub fn noncentrality(spec: &NoncentralitySpec) -> Result<f64> {
    let (p, k) = (spec.p(), spec.k());
    let (perp1, perp2) = spec.complements()?;
    let ra = rearrange(&spec.a0_full, p, k)?;
    let a0 = perp1.transpose() * ra * &perp2;
    let b = reduce_columns(&perp2, k).kronecker(&reduce_columns(&perp1, p));
    let w = &b * spec.v_rstar.as_matrix() * b.transpose();
    let w = (&w + w.transpose()) * 0.5;
    let inv = pseudo_inverse(&w, RankPolicy::FixedRank(degrees_of_freedom(p, k) as usize))?;
    let x = vec(&a0);
    Ok((x.transpose() * inv * x)[(0, 0)].max(0.0))
}

/// Population `E[vech(XX')]` and `E[vech(XX') vech(XX')']` for `X ~ N(0, S)`.
fn gaussian_vech_moments(s: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let m = s.nrows();
    let len = vech_len(m);
    let mut mean = DVector::zeros(len);
    let mut second = DMatrix::zeros(len, len);
    let mut pairs = Vec::with_capacity(len);
    for j in 0..m {
        for i in j..m {
            pairs.push((i, j));
        }
    }
    for (x, &(i, j)) in pairs.iter().enumerate() {
        debug_assert_eq!(vech_index(i, j, m), x);
        mean[x] = s[(i, j)];
        for (y, &(l, q)) in pairs.iter().enumerate() {
            // Isserlis: E[X_i X_j X_l X_q].
            second[(x, y)] = s[(i, j)] * s[(l, q)] + s[(i, l)] * s[(j, q)] + s[(i, q)] * s[(j, l)];
        }
    }
    (mean, second)
}

/// `V_R*` for a mixture of independent Gaussian designs: with weight `w_c`,
/// `V ~ N(0, Ω_c)` and independently `Z ~ N(0, Q_c)`. The single-component
/// case gives the usual homoskedastic design.
pub fn gaussian_v_rstar(components: &[(f64, DMatrix<f64>, DMatrix<f64>)]) -> Result<DMatrix<f64>> {
    let first = components
        .first()
        .ok_or_else(|| Error::InvalidArgument("no mixture components".into()))?;
    let (p, k) = (first.1.nrows(), first.2.nrows());
    let d = vech_len(p) * vech_len(k);
    let mut second = DMatrix::zeros(d, d);
    let mut mean = DVector::zeros(d);
    let total: f64 = components.iter().map(|c| c.0).sum();
    for (weight, omega, q) in components {
        if omega.nrows() != p || q.nrows() != k {
            return Err(Error::ShapeMismatch("mixture components differ in shape".into()));
        }
        let (ma, sa) = gaussian_vech_moments(omega);
        let (mc, sc) = gaussian_vech_moments(q);
        let w = weight / total;
        second += sc.kronecker(&sa) * w;
        mean += mc.kronecker(&ma) * w;
    }
    Ok(second - &mean * mean.transpose())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense(m: DMatrix<f64>) -> DenseMatrix {
        DenseMatrix::new(m).unwrap()
    }

    fn identity_design_spec(a0: DMatrix<f64>) -> NoncentralitySpec {
        let i2 = DMatrix::<f64>::identity(2, 2);
        let v = gaussian_v_rstar(&[(1.0, i2.clone(), i2.clone())]).unwrap();
        NoncentralitySpec::new(dense(i2.clone()), dense(i2), dense(a0), dense(v)).unwrap()
    }

    fn pattern() -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -1.0, -1.0, 1.0]))
    }

    #[test]
    fn zero_perturbation() {
        let spec = identity_design_spec(DMatrix::zeros(4, 4));
        assert_eq!(noncentrality(&spec).unwrap(), 0.0);
    }

    #[test]
    fn perturbation_inside_kps_span() {
        let g1 = DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 2.0]);
        let g2 = DMatrix::from_row_slice(2, 2, &[1.5, -0.4, -0.4, 1.0]);
        let v = gaussian_v_rstar(&[(1.0, g1.clone(), g2.clone())]).unwrap();
        let a0 = g1.kronecker(&g2) * 3.0;
        let spec = NoncentralitySpec::new(dense(g1), dense(g2), dense(a0), dense(v)).unwrap();
        assert!(noncentrality(&spec).unwrap() < 1e-20);
    }

    #[test]
    fn power_design_delta() {
        // The power design moves R by (sigma / (2 sqrt n)) diag(1,-1,-1,1),
        // i.e. A0 = (sigma / 2) diag(1,-1,-1,1), giving delta = sigma^2 / 4.
        for sigma in [0.5, 1.0, 2.0, 4.0] {
            let spec = identity_design_spec(pattern() * (sigma / 2.0));
            let delta = noncentrality(&spec).unwrap();
            assert!((delta - sigma * sigma / 4.0).abs() < 1e-12, "{delta}");
            // The same pattern at full scale carries four times the noncentrality.
            let spec = identity_design_spec(pattern() * sigma);
            let delta = noncentrality(&spec).unwrap();
            assert!((delta - sigma * sigma).abs() < 1e-12);
        }
    }

    #[test]
    fn weight_along_pattern_is_one_quarter() {
        // Variance of ((V1²-V2²)/sqrt2)((Z1²-Z2²)/sqrt2) under N(0, I) is 4.
        let spec = identity_design_spec(pattern());
        let a0 = spec.a0().unwrap();
        let norm2: f64 = a0.iter().map(|x| x * x).sum();
        assert!((norm2 - 4.0).abs() < 1e-12);
        assert!((noncentrality(&spec).unwrap() - norm2 / 4.0).abs() < 1e-12);
    }

    #[test]
    fn gaussian_moments_match_simulation() {
        use crate::dist::RngStream;
        let omega = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 2.0]);
        let q = DMatrix::from_row_slice(2, 2, &[1.5, 0.0, 0.0, 0.5]);
        let v = gaussian_v_rstar(&[(1.0, omega.clone(), q.clone())]).unwrap();
        let lo = omega.clone().cholesky().unwrap().l();
        let lq = q.clone().cholesky().unwrap().l();
        let mut rng = RngStream::new(5, 5);
        let n = 200_000;
        let d = 9;
        let mut acc = DMatrix::zeros(d, d);
        let mut mean = DVector::zeros(d);
        for _ in 0..n {
            let x = &lo * DVector::from_fn(2, |_, _| rng.next_normal());
            let z = &lq * DVector::from_fn(2, |_, _| rng.next_normal());
            let a = DVector::from_vec(vec![x[0] * x[0], x[1] * x[0], x[1] * x[1]]);
            let c = DVector::from_vec(vec![z[0] * z[0], z[1] * z[0], z[1] * z[1]]);
            let w = c.kronecker(&a);
            acc += &w * w.transpose();
            mean += w;
        }
        let mean = mean / n as f64;
        let emp = acc / n as f64 - &mean * mean.transpose();
        let rel = (emp - &v).amax() / v.amax();
        assert!(rel < 0.05, "relative deviation {rel}");
    }

    #[test]
    fn spec_validation() {
        let i2 = DMatrix::<f64>::identity(2, 2);
        let v = gaussian_v_rstar(&[(1.0, i2.clone(), i2.clone())]).unwrap();
        let bad = NoncentralitySpec::new(
            dense(i2.clone()),
            dense(i2.clone()),
            dense(DMatrix::zeros(3, 3)),
            dense(v.clone()),
        );
        assert!(matches!(bad, Err(Error::ShapeMismatch(_))));
        let not_pd = NoncentralitySpec::new(
            dense(-i2.clone()),
            dense(i2.clone()),
            dense(DMatrix::zeros(4, 4)),
            dense(v),
        );
        assert_eq!(not_pd.unwrap_err(), Error::NotPositiveDefinite);
    }
}
