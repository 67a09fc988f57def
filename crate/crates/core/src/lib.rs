//! Test of Kronecker product structure (KPS) for the covariance matrix of
//! moment vectors `f_i = V_i ⊗ Z_i`.
//!
//! The covariance `R` of the sample moments has KPS when `R = G1 ⊗ G2`. The
//! rearranged matrix `rearrange(R)` is then of rank one, so the test is a
//! rank test on the rearranged sample covariance: the KPST statistic is
//! asymptotically chi-square with `(p(p+1)/2 - 1)(k(k+1)/2 - 1)` degrees of
//! freedom under the null.
//!
//! Modules:
//!
//! - [`linalg`]: vec/vech, duplication matrices, the rearrangement operator,
//!   partitioned SVD, pseudo-inverse, complements, Cholesky.
//! - [`dist`]: chi-square distribution functions and seedable normal streams.
//! - [`kps`]: moments, estimators, the nearest-KPS fit, KPST and KPST*, and
//!   the local-power noncentrality.
//! - [`mc`]: Monte Carlo size and power experiments.

pub mod dist;
pub mod error;
pub mod kps;
pub mod linalg;
pub mod mc;

pub use error::{Error, Result};
pub use kps::{
    build_moments, estimate, kpst, kpst_star, lambda_hat, nearest_kps, noncentrality,
    KpsEstimates, KpsOptions, KpsResult, KpsSample, LambdaDecomposition, Method, MomentSet,
    NkpFit, NoncentralitySpec, Warning,
};
pub use linalg::{DenseMatrix, RankPolicy};
