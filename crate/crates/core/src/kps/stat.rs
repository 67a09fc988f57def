use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::dist::{chi2_sf, Chi2Spec};
use crate::error::{Error, Result};
use crate::linalg::{pseudo_inverse, sorted_eigen, svd_partitioned, vec, vech_len, RankPolicy};

use super::estimate::{estimate, KpsEstimates};
use super::nkp::{decompose, nearest_kps, NkpFit};
use super::sample::{build_moments, KpsSample};
use super::Warning;

/// Which statistic was computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Method {
    /// Rank statistic on the rearranged covariance `rearrange(R̂)`.
    #[serde(rename = "kpst")]
    Kpst,
    /// Rank statistic on the unique-element matrix `R̂*`.
    #[serde(rename = "kpst-star")]
    KpstStar,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Kpst => "kpst",
            Method::KpstStar => "kpst-star",
        })
    }
}

/// Algebraic route to the quadratic form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum Formula {
    /// `n vec(Λ̂)' (Ĵ' V̂ Ĵ)⁻ vec(Λ̂)`.
    #[default]
    Full,
    /// `n vec(Σ̂2)' [(N̂2 ⊗ L̂2)' V̂ (N̂2 ⊗ L̂2)]⁻ vec(Σ̂2)`.
    Simplified,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KpsOptions {
    /// Whiten `V̂` and `Z` before forming moments (invariance to nonsingular
    /// transformations).
    pub normalize: bool,
    pub formula: Formula,
    /// Rank rule for the weight matrix; `None` keeps exactly `df` eigenvalues.
    pub rank_policy: Option<RankPolicy>,
}

impl Default for KpsOptions {
    fn default() -> Self {
        Self {
            normalize: true,
            formula: Formula::Full,
            rank_policy: None,
        }
    }
}

impl KpsOptions {
    pub fn unnormalized() -> Self {
        Self {
            normalize: false,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct KpsResult {
    pub method: Method,
    pub statistic: f64,
    pub df: u32,
    pub p_value: f64,
    pub p: usize,
    pub k: usize,
    /// Observations before any cluster aggregation.
    pub n_obs: usize,
    /// Independent units: clusters when clustered, observations otherwise.
    pub n_effective: usize,
    pub clustered: bool,
    pub normalized: bool,
    pub nkp: NkpFit,
    pub warnings: Vec<Warning>,
}

impl KpsResult {
    /// Rejects KPS at level `alpha` when the statistic exceeds the
    /// `1 - alpha` chi-square quantile, i.e. when `p_value < alpha`.
    pub fn reject(&self, alpha: f64) -> bool {
        self.p_value < alpha
    }
}

/// `(p(p+1)/2 - 1)(k(k+1)/2 - 1)`.
pub fn degrees_of_freedom(p: usize, k: usize) -> u32 {
    ((vech_len(p) - 1) * (vech_len(k) - 1)) as u32
}

/// Number of unique elements of `R*`, `p(p+1)k(k+1)/4`.
pub fn unique_parameters(p: usize, k: usize) -> usize {
    vech_len(p) * vech_len(k)
}

/// Sample size below which the chi-square approximation is flagged.
pub fn small_sample_threshold(p: usize, k: usize) -> f64 {
    ((p * k) as f64).powi(4)
}

/// `n x' W⁻ x` with the rank rule applied to `W`, plus a warning when the
/// retained spectrum reaches numerical zero.
fn quadratic_form(
    x: &DVector<f64>,
    w: &DMatrix<f64>,
    n: usize,
    df: u32,
    policy: Option<RankPolicy>,
    warnings: &mut Vec<Warning>,
) -> Result<f64> {
    let policy = policy.unwrap_or(RankPolicy::FixedRank(df as usize));
    if let RankPolicy::FixedRank(r) = policy {
        let (values, _) = sorted_eigen(w);
        let top = values.first().copied().unwrap_or(0.0);
        if r > 0 && r <= values.len() && !(values[r - 1] > 1e-12 * top) {
            warnings.push(Warning::RankDeficientWeight {
                retained: r,
                smallest: values[r - 1],
                largest: top,
            });
        }
    }
    let inv = pseudo_inverse(w, policy)?;
    let q = (x.transpose() * inv * x)[(0, 0)];
    Ok((n as f64 * q).max(0.0))
}

fn check_dims(p: usize, k: usize) -> Result<()> {
    if p < 2 || k < 2 {
        return Err(Error::DimensionError { p, k });
    }
    Ok(())
}

/// KPST from precomputed estimates and fit.
pub fn kpst_from_estimates(
    est: &KpsEstimates,
    fit: &NkpFit,
    formula: Formula,
    policy: Option<RankPolicy>,
    warnings: &mut Vec<Warning>,
) -> Result<f64> {
    check_dims(est.p, est.k)?;
    let df = degrees_of_freedom(est.p, est.k);
    match formula {
        Formula::Full => {
            let dec = decompose(&fit.svd)?;
            let w = est.projected_covariance(&dec.g1_perp, &dec.g2_perp);
            quadratic_form(&vec(&dec.lambda), &w, est.n, df, policy, warnings)
        }
        Formula::Simplified => {
            let (l2, n2) = (fit.svd.l2(), fit.svd.n2());
            let w = est.projected_covariance(&l2, &n2);
            quadratic_form(&vec(&fit.svd.sigma2()), &w, est.n, df, policy, warnings)
        }
    }
}

/// KPST* from precomputed estimates: the same rank statistic applied to the
/// SVD of `R̂*` with weight built from `V̂*` directly.
pub fn kpst_star_from_estimates(
    est: &KpsEstimates,
    formula: Formula,
    policy: Option<RankPolicy>,
    warnings: &mut Vec<Warning>,
) -> Result<f64> {
    check_dims(est.p, est.k)?;
    let df = degrees_of_freedom(est.p, est.k);
    let svd = svd_partitioned(&est.r_star)?;
    let (x, left, right) = match formula {
        Formula::Full => {
            let dec = decompose(&svd)?;
            (vec(&dec.lambda), dec.g1_perp, dec.g2_perp)
        }
        Formula::Simplified => (vec(&svd.sigma2()), svd.l2(), svd.n2()),
    };
    let b = right.kronecker(&left);
    let w = est.unit_covariance(&b.transpose());
    quadratic_form(&x, &w, est.n, df, policy, warnings)
}

fn run(sample: &KpsSample, options: &KpsOptions, method: Method) -> Result<KpsResult> {
    let (p, k) = (sample.p(), sample.k());
    check_dims(p, k)?;
    let moments = build_moments(sample, options.normalize)?;
    let est = estimate(&moments)?;
    let fit = nearest_kps(&est.r_hat, p, k)?;
    let mut warnings = fit.warnings.clone();

    let statistic = match method {
        Method::Kpst => {
            kpst_from_estimates(&est, &fit, options.formula, options.rank_policy, &mut warnings)?
        }
        Method::KpstStar => {
            kpst_star_from_estimates(&est, options.formula, options.rank_policy, &mut warnings)?
        }
    };
    let df = degrees_of_freedom(p, k);
    let p_value = chi2_sf(statistic, Chi2Spec::central(df)?)?;

    let threshold = small_sample_threshold(p, k);
    if (est.n as f64) < threshold {
        warnings.push(Warning::SmallSample {
            n: est.n,
            threshold,
        });
    }

    Ok(KpsResult {
        method,
        statistic,
        df,
        p_value,
        p,
        k,
        n_obs: moments.n_obs,
        n_effective: est.n,
        clustered: moments.clustered,
        normalized: moments.normalized,
        nkp: fit,
        warnings,
    })
}

/// The KPS test statistic, asymptotically `χ²(df)` under the null.
pub fn kpst(sample: &KpsSample, options: &KpsOptions) -> Result<KpsResult> {
    run(sample, options, Method::Kpst)
}

/// The unique-element variant KPST*; same limit law, not invariant to
/// orthonormal transformations of the data.
pub fn kpst_star(sample: &KpsSample, options: &KpsOptions) -> Result<KpsResult> {
    run(sample, options, Method::KpstStar)
}

/// The KPST statistic alone, skipping p-value and diagnostics (used by the
/// Monte Carlo loops).
pub fn kpst_statistic(sample: &KpsSample, options: &KpsOptions) -> Result<f64> {
    let (p, k) = (sample.p(), sample.k());
    check_dims(p, k)?;
    let est = estimate(&build_moments(sample, options.normalize)?)?;
    let fit = nearest_kps(&est.r_hat, p, k)?;
    let mut sink = Vec::new();
    kpst_from_estimates(&est, &fit, options.formula, options.rank_policy, &mut sink)
}

/// Both statistics from one pass over the data (used by the power study).
pub fn kpst_pair(sample: &KpsSample, options: &KpsOptions) -> Result<(f64, f64)> {
    let (p, k) = (sample.p(), sample.k());
    check_dims(p, k)?;
    let est = estimate(&build_moments(sample, options.normalize)?)?;
    let fit = nearest_kps(&est.r_hat, p, k)?;
    let mut sink = Vec::new();
    let a = kpst_from_estimates(&est, &fit, options.formula, options.rank_policy, &mut sink)?;
    let b = kpst_star_from_estimates(&est, options.formula, options.rank_policy, &mut sink)?;
    Ok((a, b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::RngStream;

    fn gaussian_sample(n: usize, p: usize, k: usize, seed: u64) -> KpsSample {
        let mut rng = RngStream::new(seed, 0);
        let z = DMatrix::from_fn(n, k, |_, _| rng.next_normal());
        let v = DMatrix::from_fn(n, p, |_, _| rng.next_normal());
        KpsSample::from_matrices(v, z).unwrap()
    }

    #[test]
    fn df_examples() {
        assert_eq!(degrees_of_freedom(2, 2), 4);
        assert_eq!(degrees_of_freedom(3, 4), 45);
        assert_eq!(degrees_of_freedom(2, 5), 28);
        assert_eq!(degrees_of_freedom(3, 7), 135);
        assert_eq!(unique_parameters(2, 2), 9);
        assert_eq!(unique_parameters(3, 7), 168);
    }

    #[test]
    fn full_equals_simplified() {
        for (p, k, seed) in [(2, 2, 1), (2, 3, 2), (3, 2, 3), (3, 3, 4)] {
            let s = gaussian_sample(300, p, k, seed);
            let full = kpst(&s, &KpsOptions::default()).unwrap();
            let simple = kpst(
                &s,
                &KpsOptions {
                    formula: Formula::Simplified,
                    ..KpsOptions::default()
                },
            )
            .unwrap();
            let rel = (full.statistic - simple.statistic).abs() / full.statistic.abs().max(1e-300);
            assert!(rel < 1e-8, "p={p} k={k}: {} vs {}", full.statistic, simple.statistic);
        }
    }

    #[test]
    fn star_full_equals_alternative_form() {
        let s = gaussian_sample(300, 2, 3, 9);
        let a = kpst_star(&s, &KpsOptions::default()).unwrap();
        let b = kpst_star(
            &s,
            &KpsOptions {
                formula: Formula::Simplified,
                ..KpsOptions::default()
            },
        )
        .unwrap();
        assert!((a.statistic - b.statistic).abs() / a.statistic < 1e-8);
        assert_eq!(a.df, degrees_of_freedom(2, 3));
    }

    #[test]
    fn literal_weight_matches_fast_route() {
        let s = gaussian_sample(200, 2, 3, 5);
        let est = estimate(&build_moments(&s, true).unwrap()).unwrap();
        let fit = nearest_kps(&est.r_hat, 2, 3).unwrap();
        let dec = decompose(&fit.svd).unwrap();
        let j = dec.g2_perp.kronecker(&dec.g1_perp);
        let a = j.transpose() * &est.v_hat * &j;
        let b = est.projected_covariance(&dec.g1_perp, &dec.g2_perp);
        assert!((a - b).amax() < 1e-10);
    }

    #[test]
    fn result_fields() {
        let s = gaussian_sample(500, 2, 2, 11);
        let r = kpst(&s, &KpsOptions::default()).unwrap();
        assert_eq!(r.df, 4);
        assert_eq!(r.method, Method::Kpst);
        assert!(r.statistic.is_finite() && r.statistic >= 0.0);
        let sf = chi2_sf(r.statistic, Chi2Spec::central(4).unwrap()).unwrap();
        assert_eq!(r.p_value, sf);
        assert_eq!(r.n_effective, 500);
        assert!(!r.clustered);
        assert!(r.normalized);
        // 500 < 4^4 = 256 is false, so no small-sample warning.
        assert!(!r.warnings.iter().any(|w| matches!(w, Warning::SmallSample { .. })));
        let small = kpst(&gaussian_sample(100, 2, 2, 12), &KpsOptions::default()).unwrap();
        assert!(small.warnings.iter().any(|w| matches!(w, Warning::SmallSample { .. })));
    }

    #[test]
    fn tolerance_policy_matches_fixed_on_generic_data() {
        let s = gaussian_sample(400, 2, 2, 21);
        let fixed = kpst(&s, &KpsOptions::default()).unwrap();
        let tol = kpst(
            &s,
            &KpsOptions {
                rank_policy: Some(RankPolicy::Tolerance(1e-10)),
                ..KpsOptions::default()
            },
        )
        .unwrap();
        assert!((fixed.statistic - tol.statistic).abs() / fixed.statistic < 1e-8);
    }
}
