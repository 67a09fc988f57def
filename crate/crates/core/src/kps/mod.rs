//! Moments, estimators, the nearest-KPS fit and the KPST / KPST* statistics.

mod estimate;
mod nkp;
mod power;
mod sample;
mod stat;

use serde::Serialize;

pub use estimate::{estimate, KpsEstimates};
pub use nkp::{lambda_hat, nearest_kps, LambdaDecomposition, NkpFit, NEAR_TIE_GAP};
pub use power::{gaussian_v_rstar, noncentrality, NoncentralitySpec};
pub use sample::{build_moments, KpsSample, MomentSet};
pub use stat::{
    degrees_of_freedom, kpst, kpst_from_estimates, kpst_pair, kpst_star, kpst_statistic,
    kpst_star_from_estimates, small_sample_threshold, unique_parameters, Formula, KpsOptions,
    KpsResult, Method,
};

/// Non-fatal diagnostics attached to fits and test results.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Warning {
    /// Fewer independent units than `(pk)^4`; the chi-square approximation
    /// tends to over-reject.
    SmallSample { n: usize, threshold: f64 },
    /// Leading singular values (nearly) tied, so the nearest KPS fit is not unique.
    NearTie { sigma1: f64, sigma2: f64 },
    /// The weight matrix has fewer than `df` numerically nonzero eigenvalues.
    RankDeficientWeight {
        retained: usize,
        smallest: f64,
        largest: f64,
    },
    /// The sample covariance of the moments is not positive definite.
    CovarianceNotPositiveDefinite,
    FactorNotPositiveDefinite(&'static str),
}

impl std::fmt::Display for Warning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Warning::SmallSample { n, threshold } => write!(
                f,
                "small sample: n = {n} < (pk)^4 = {threshold}; chi-square critical values may over-reject"
            ),
            Warning::NearTie { sigma1, sigma2 } => write!(
                f,
                "near tie between leading singular values ({sigma1:.6e} vs {sigma2:.6e}); the nearest KPS fit is not unique"
            ),
            Warning::RankDeficientWeight {
                retained,
                smallest,
                largest,
            } => write!(
                f,
                "weight matrix is rank deficient: eigenvalue {retained} is {smallest:.3e} (largest {largest:.3e})"
            ),
            Warning::CovarianceNotPositiveDefinite => {
                f.write_str("sample moment covariance is not positive definite")
            }
            Warning::FactorNotPositiveDefinite(which) => {
                write!(f, "estimated factor {which} is not positive definite")
            }
        }
    }
}
