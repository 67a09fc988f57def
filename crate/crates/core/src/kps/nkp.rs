use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{
    max_asymmetry, polar_factor, rearrange, require_symmetric, svd_partitioned, symmetrize, unvec,
    SvdPartition,
};

use super::Warning;

/// Relative singular-value gap below which the leading pair is treated as tied.
pub const NEAR_TIE_GAP: f64 = 1e-10;

/// Nearest Kronecker product `G1 ⊗ G2` to a sample covariance in Frobenius norm.
#[derive(Debug, Clone, Serialize)]
pub struct NkpFit {
    pub p: usize,
    pub k: usize,
    /// `p x p`, symmetric, `g1[(0, 0)] == 1`.
    pub g1: DMatrix<f64>,
    /// `k x k`, symmetric.
    pub g2: DMatrix<f64>,
    /// Frobenius distance to the nearest KPS matrix.
    pub ds: f64,
    #[serde(skip)]
    pub svd: SvdPartition,
    /// `σ1 - σ2 > 1e-10 σ1`.
    pub gap_ok: bool,
    /// Largest asymmetry of the reshaped singular vectors before symmetrizing.
    pub asymmetry: f64,
    pub warnings: Vec<Warning>,
}

impl NkpFit {
    pub fn singular_values(&self) -> &[f64] {
        &self.svd.sigma
    }

    /// `ds / ||rearrange(R̂)||_F`.
    pub fn relative_ds(&self) -> f64 {
        let total: f64 = self.svd.sigma.iter().map(|s| s * s).sum::<f64>().sqrt();
        if total == 0.0 {
            0.0
        } else {
            self.ds / total
        }
    }
}

/// Fits `G1 ⊗ G2` to `r_hat` through the SVD `L Σ N'` of its rearrangement:
/// `vec(G1) = L_1 / L_11`, `vec(G2) = L_11 σ_1 N_1`, and the distance is the
/// root sum of squares of the trailing singular values.
pub fn nearest_kps(r_hat: &DMatrix<f64>, p: usize, k: usize) -> Result<NkpFit> {
    require_symmetric(r_hat, 1e-8)?;
    let rearranged = rearrange(r_hat, p, k)?;
    let svd = svd_partitioned(&rearranged)?;
    let mut warnings = Vec::new();

    if r_hat.clone().cholesky().is_none() {
        warnings.push(Warning::CovarianceNotPositiveDefinite);
    }

    let l11 = svd.l11();
    if !(l11 > 1e-12) {
        return Err(Error::BlockSingular("L11"));
    }
    let sigma1 = svd.sigma1();
    let l1 = svd.l1() / l11;
    let n1 = svd.n1() * (l11 * sigma1);
    let g1_raw = unvec(l1.as_slice(), p, p);
    let g2_raw = unvec(n1.as_slice(), k, k);
    let asymmetry = max_asymmetry(&g1_raw).max(max_asymmetry(&g2_raw));
    let mut g1 = symmetrize(&g1_raw);
    g1[(0, 0)] = 1.0;
    let g2 = symmetrize(&g2_raw);

    let sigma2 = svd.sigma.get(1).copied().unwrap_or(0.0);
    let gap_ok = sigma1 - sigma2 > NEAR_TIE_GAP * sigma1;
    if !gap_ok {
        warnings.push(Warning::NearTie {
            sigma1,
            sigma2,
        });
    }
    if g1.clone().cholesky().is_none() {
        warnings.push(Warning::FactorNotPositiveDefinite("G1"));
    }
    if g2.clone().cholesky().is_none() {
        warnings.push(Warning::FactorNotPositiveDefinite("G2"));
    }

    let ds = svd.sigma.iter().skip(1).map(|s| s * s).sum::<f64>().sqrt();
    Ok(NkpFit {
        p,
        k,
        g1,
        g2,
        ds,
        svd,
        gap_ok,
        asymmetry,
        warnings,
    })
}

/// `Λ̂` and the complements `vec(Ĝ1)⊥`, `vec(Ĝ2)⊥` with
/// `rearrange(R̂) = vec(Ĝ1) vec(Ĝ2)' + vec(Ĝ1)⊥ Λ̂ vec(Ĝ2)⊥'`.
#[derive(Debug, Clone)]
pub struct LambdaDecomposition {
    /// `(rows-1) x (cols-1)`.
    pub lambda: DMatrix<f64>,
    /// `rows x (rows-1)`, orthonormal columns orthogonal to `vec(Ĝ1)`.
    pub g1_perp: DMatrix<f64>,
    /// `cols x (cols-1)`, orthonormal columns orthogonal to `vec(Ĝ2)`.
    pub g2_perp: DMatrix<f64>,
}

/// Builds the decomposition from any partitioned SVD.
///
/// `(L22 L22')^{-1/2} L22` is the orthogonal polar factor `P` of `L22`, so
/// `vec(G1)⊥ = L2 L22^{-1} (L22 L22')^{1/2} = L2 P'` and
/// `Λ = P Σ2 Q'` with `Q` the polar factor of `N22`.
pub(crate) fn decompose(svd: &SvdPartition) -> Result<LambdaDecomposition> {
    let pl = polar_factor(&svd.l22(), "L22")?;
    let pn = polar_factor(&svd.n22(), "N22")?;
    let lambda = &pl * svd.sigma2() * pn.transpose();
    let g1_perp = svd.l2() * pl.transpose();
    let g2_perp = svd.n2() * pn.transpose();
    Ok(LambdaDecomposition {
        lambda,
        g1_perp,
        g2_perp,
    })
}

pub fn lambda_hat(fit: &NkpFit) -> Result<LambdaDecomposition> {
    decompose(&fit.svd)
}
