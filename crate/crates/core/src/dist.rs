//! Chi-square distribution functions and the seedable normal sampler.
//!
//! The central CDF is the regularized incomplete gamma function
//! `P(df/2, x/2)` (Cephes-style series / continued fraction from `statrs`).
//! The noncentral CDF is the Poisson mixture of central CDFs.
//!
//! Random streams are ChaCha12 keystreams: the 64-bit seed is expanded to a
//! 256-bit key by `SeedableRng::seed_from_u64` (PCG32 expansion) and the
//! stream id selects one of the 2^64 independent ChaCha streams under that
//! key. Normals come from the ziggurat sampler of `rand_distr::StandardNormal`.
//! Both steps are platform independent, so a `(seed, stream)` pair always
//! yields the same sequence.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use statrs::function::gamma::{checked_gamma_lr, checked_gamma_ur, ln_gamma};

use crate::error::{Error, Result};

/// Degrees of freedom and noncentrality of a chi-square law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Chi2Spec {
    df: u32,
    noncentrality: f64,
}

impl Chi2Spec {
    pub fn central(df: u32) -> Result<Self> {
        Self::noncentral(df, 0.0)
    }

    pub fn noncentral(df: u32, noncentrality: f64) -> Result<Self> {
        if df == 0 {
            return Err(Error::InvalidArgument("df must be at least 1".into()));
        }
        if !(noncentrality >= 0.0 && noncentrality.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "noncentrality must be finite and non-negative, got {noncentrality}"
            )));
        }
        Ok(Self { df, noncentrality })
    }

    pub fn df(&self) -> u32 {
        self.df
    }

    pub fn noncentrality(&self) -> f64 {
        self.noncentrality
    }
}

fn check_x(x: f64) -> Result<()> {
    if !(x >= 0.0 && x.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "x must be finite and non-negative, got {x}"
        )));
    }
    Ok(())
}

fn lower_gamma(a: f64, x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    checked_gamma_lr(a, x).expect("arguments validated")
}

fn upper_gamma(a: f64, x: f64) -> f64 {
    if x == 0.0 {
        return 1.0;
    }
    checked_gamma_ur(a, x).expect("arguments validated")
}

/// Central chi-square CDF. The noncentrality of `spec` is ignored.
pub fn chi2_cdf(x: f64, spec: Chi2Spec) -> Result<f64> {
    check_x(x)?;
    Ok(lower_gamma(spec.df as f64 / 2.0, x / 2.0))
}

/// Central chi-square upper tail `1 - CDF`, computed directly so that small
/// p-values keep their relative accuracy.
pub fn chi2_sf(x: f64, spec: Chi2Spec) -> Result<f64> {
    check_x(x)?;
    Ok(upper_gamma(spec.df as f64 / 2.0, x / 2.0))
}

fn chi2_density(x: f64, df: u32) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let a = df as f64 / 2.0;
    ((a - 1.0) * x.ln() - x / 2.0 - a * std::f64::consts::LN_2 - ln_gamma(a)).exp()
}

/// Quantile of the central chi-square law: a bracketing bisection on the CDF
/// followed by Newton polishing.
pub fn chi2_quantile(prob: f64, spec: Chi2Spec) -> Result<f64> {
    if !(prob > 0.0 && prob < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "probability must lie in (0, 1), got {prob}"
        )));
    }
    let cdf = |x: f64| lower_gamma(spec.df as f64 / 2.0, x / 2.0);
    let mut lo = 0.0;
    let mut hi = (spec.df as f64).max(1.0);
    while cdf(hi) < prob {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if cdf(mid) < prob {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..3 {
        let dens = chi2_density(x, spec.df);
        if dens <= 0.0 || !dens.is_finite() {
            break;
        }
        let next = x - (cdf(x) - prob) / dens;
        if !(next > lo && next < hi) {
            break;
        }
        x = next;
    }
    Ok(x)
}

/// Truncation bound on the neglected Poisson mass.
const MIXTURE_TAIL: f64 = 1e-13;

/// Noncentral chi-square CDF as a Poisson(δ/2) mixture of central CDFs with
/// `df + 2j` degrees of freedom. Terms are summed outward from the Poisson
/// mode until the neglected Poisson mass drops below `1e-13`; since every
/// central CDF lies in `[0, 1]` that mass bounds the truncation error.
pub fn noncentral_chi2_cdf(x: f64, spec: Chi2Spec) -> Result<f64> {
    check_x(x)?;
    let delta = spec.noncentrality;
    if delta == 0.0 {
        return chi2_cdf(x, spec);
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    let lambda = delta / 2.0;
    let a0 = spec.df as f64 / 2.0;
    let log_weight = |j: f64| -lambda + j * lambda.ln() - ln_gamma(j + 1.0);
    let mode = lambda.floor();

    // Past the mode the weights fall geometrically: beyond term j the
    // upward tail is at most w_j r / (1 - r) with r = lambda / (j + 1), and
    // below the mode the downward tail is at most w_j r / (1 - r) with
    // r = j / lambda.
    let mut total = 0.0;
    let mut j = mode;
    loop {
        let w = log_weight(j).exp();
        total += w * lower_gamma(a0 + j, x / 2.0);
        let r = lambda / (j + 1.0);
        if r < 1.0 && w * r / (1.0 - r) < MIXTURE_TAIL {
            break;
        }
        j += 1.0;
    }
    let mut j = mode - 1.0;
    while j >= 0.0 {
        let w = log_weight(j).exp();
        total += w * lower_gamma(a0 + j, x / 2.0);
        let r = j / lambda;
        if r < 1.0 && w * r / (1.0 - r) < MIXTURE_TAIL {
            break;
        }
        j -= 1.0;
    }
    Ok(total.clamp(0.0, 1.0))
}

/// Upper tail of the noncentral chi-square law.
pub fn noncentral_chi2_sf(x: f64, spec: Chi2Spec) -> Result<f64> {
    if spec.noncentrality == 0.0 {
        return chi2_sf(x, spec);
    }
    Ok(1.0 - noncentral_chi2_cdf(x, spec)?)
}

/// A deterministic source of standard normal draws identified by
/// `(seed, stream)`.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream: u64,
    rng: ChaCha12Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { seed, stream, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    pub fn next_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    pub fn fill_normal(&mut self, out: &mut [f64]) {
        for x in out {
            *x = self.next_normal();
        }
    }
}

/// `n` iid N(0, 1) draws from a fresh stream `(seed, stream)`.
pub fn standard_normal(seed: u64, stream: u64, n: usize) -> Vec<f64> {
    let mut s = RngStream::new(seed, stream);
    let mut out = vec![0.0; n];
    s.fill_normal(&mut out);
    out
}
