//! Monte Carlo size and power experiments.
//!
//! Every replication draws from its own stream `(seed, stream)`, so results
//! are bit-identical for a given seed regardless of how many threads run the
//! replications.

use std::io;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::dist::{chi2_quantile, noncentral_chi2_sf, Chi2Spec, RngStream};
use crate::error::{Error, Result};
use crate::kps::{
    degrees_of_freedom, kpst_pair, kpst_statistic, unique_parameters, KpsOptions, KpsSample,
};

/// Conditional variance of the null design.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DgpVariant {
    /// `V | Z ~ N(0, I_p)`.
    Homoskedastic,
    /// `V | Z ~ N(0, h(Z) I_p)` with `h(Z) = |Z|² / k`.
    ScalarHetero,
}

impl std::fmt::Display for DgpVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DgpVariant::Homoskedastic => "homoskedastic",
            DgpVariant::ScalarHetero => "scalar_hetero",
        })
    }
}

/// Draws `n` observations with `Z ~ N(0, I_k)` and `V | Z ~ N(0, h(Z) I_p)`.
/// Each row consumes `k` normals for `Z` followed by `p` for `V`.
pub fn dgp_null(
    p: usize,
    k: usize,
    n: usize,
    variant: DgpVariant,
    stream: &mut RngStream,
) -> Result<KpsSample> {
    let mut v = DMatrix::zeros(n, p);
    let mut z = DMatrix::zeros(n, k);
    let mut zrow = vec![0.0; k];
    let mut vrow = vec![0.0; p];
    for i in 0..n {
        stream.fill_normal(&mut zrow);
        stream.fill_normal(&mut vrow);
        let scale = match variant {
            DgpVariant::Homoskedastic => 1.0,
            DgpVariant::ScalarHetero => {
                (zrow.iter().map(|x| x * x).sum::<f64>() / k as f64).sqrt()
            }
        };
        for (j, &x) in zrow.iter().enumerate() {
            z[(i, j)] = x;
        }
        for (j, &x) in vrow.iter().enumerate() {
            v[(i, j)] = scale * x;
        }
    }
    KpsSample::from_matrices(v, z)
}

/// Variances `(b, c)` of the local-alternative design, with
/// `b + c = 2 + s` and `b c = 1 - s` for `s = sigma / sqrt(n)`.
pub fn local_variances(n: usize, sigma: f64) -> Result<(f64, f64)> {
    let bound = (n as f64).sqrt();
    if !(sigma >= 0.0 && sigma < bound) {
        return Err(Error::SigmaOutOfRange { sigma, bound });
    }
    let s = sigma / bound;
    let root = (s * (s + 8.0)).sqrt();
    Ok((0.5 * s - 0.5 * root + 1.0, 0.5 * s + 0.5 * root + 1.0))
}

/// Local alternative with `p = k = 2`: the first `n/2` rows have
/// `V ~ N(0, diag(b, 1))`, `Z ~ N(0, diag(1, c))`, the rest
/// `V ~ N(0, diag(1, b))`, `Z ~ N(0, diag(c, 1))`. At `sigma = 0` the draws
/// are bit-identical to the homoskedastic null design on the same stream.
pub fn dgp_local(n: usize, sigma: f64, stream: &mut RngStream) -> Result<KpsSample> {
    let (b, c) = local_variances(n, sigma)?;
    let (sb, sc) = (b.sqrt(), c.sqrt());
    let half = n / 2;
    let mut v = DMatrix::zeros(n, 2);
    let mut z = DMatrix::zeros(n, 2);
    let mut zrow = [0.0; 2];
    let mut vrow = [0.0; 2];
    for i in 0..n {
        stream.fill_normal(&mut zrow);
        stream.fill_normal(&mut vrow);
        let (vs, zs) = if i < half {
            ([sb, 1.0], [1.0, sc])
        } else {
            ([1.0, sb], [sc, 1.0])
        };
        for j in 0..2 {
            v[(i, j)] = vs[j] * vrow[j];
            z[(i, j)] = zs[j] * zrow[j];
        }
    }
    KpsSample::from_matrices(v, z)
}

/// How the sample size of a size experiment is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleSizeRule {
    /// `n = ceil((pk)^(16/3))`, as in the published table.
    Pow16Over3,
    /// `n = (pk)^4`.
    Pow4,
    Explicit(usize),
}

impl SampleSizeRule {
    pub fn resolve(&self, p: usize, k: usize) -> usize {
        let pk = (p * k) as f64;
        match *self {
            SampleSizeRule::Pow16Over3 => (pk.powf(16.0 / 3.0) - 1e-6).ceil() as usize,
            SampleSizeRule::Pow4 => pk.powi(4).round() as usize,
            SampleSizeRule::Explicit(n) => n,
        }
    }
}

fn check_levels(levels: &[f64]) -> Result<()> {
    if levels.is_empty() {
        return Err(Error::InvalidArgument("at least one level is required".into()));
    }
    if let Some(bad) = levels.iter().find(|a| !(**a > 0.0 && **a < 1.0)) {
        return Err(Error::InvalidArgument(format!("level {bad} is not in (0, 1)")));
    }
    Ok(())
}

fn check_reps(reps: usize) -> Result<()> {
    if reps == 0 {
        return Err(Error::InvalidArgument("reps must be at least 1".into()));
    }
    Ok(())
}

/// Null rejection frequencies of KPST for one `(p, k, n)` configuration.
#[derive(Debug, Clone)]
pub struct SizeExperiment {
    pub p: usize,
    pub k: usize,
    pub n: SampleSizeRule,
    pub dgp: DgpVariant,
    pub reps: usize,
    pub levels: Vec<f64>,
    pub seed: u64,
    pub options: KpsOptions,
}

impl SizeExperiment {
    pub fn new(p: usize, k: usize, n: SampleSizeRule, dgp: DgpVariant, reps: usize, seed: u64) -> Self {
        Self {
            p,
            k,
            n,
            dgp,
            reps,
            levels: vec![0.10, 0.05, 0.01],
            seed,
            options: KpsOptions::default(),
        }
    }

    pub fn sample_size(&self) -> usize {
        self.n.resolve(self.p, self.k)
    }

    fn validate(&self) -> Result<()> {
        if self.p < 2 || self.k < 2 {
            return Err(Error::DimensionError {
                p: self.p,
                k: self.k,
            });
        }
        check_reps(self.reps)?;
        check_levels(&self.levels)
    }
}

/// One line of a size table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SizeRow {
    pub p: usize,
    pub k: usize,
    pub n: usize,
    pub df: u32,
    pub m: usize,
    pub level: f64,
    pub nrp_pct: f64,
    pub mc_se_pct: f64,
    pub dgp: DgpVariant,
}

#[cfg(feature = "parallel")]
fn map_reps<T, F>(reps: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..reps).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_reps<T, F>(reps: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..reps).map(f).collect()
}

/// KPST statistics of `reps` null samples; replication `r` uses stream `r`.
pub fn null_statistics(exp: &SizeExperiment) -> Result<Vec<f64>> {
    exp.validate()?;
    let n = exp.sample_size();
    map_reps(exp.reps, |r| {
        let mut stream = RngStream::new(exp.seed, r as u64);
        let sample = dgp_null(exp.p, exp.k, n, exp.dgp, &mut stream)?;
        kpst_statistic(&sample, &exp.options)
    })
    .into_iter()
    .collect()
}

/// Rejection frequency at each level against `χ²(df)` critical values.
pub fn run_size(exp: &SizeExperiment) -> Result<Vec<SizeRow>> {
    let stats = null_statistics(exp)?;
    let df = degrees_of_freedom(exp.p, exp.k);
    let spec = Chi2Spec::central(df)?;
    let reps = exp.reps as f64;
    exp.levels
        .iter()
        .map(|&level| {
            let crit = chi2_quantile(1.0 - level, spec)?;
            let rejections = stats.iter().filter(|&&s| s > crit).count();
            Ok(SizeRow {
                p: exp.p,
                k: exp.k,
                n: exp.sample_size(),
                df,
                m: unique_parameters(exp.p, exp.k),
                level,
                nrp_pct: 100.0 * rejections as f64 / reps,
                mc_se_pct: 100.0 * (level * (1.0 - level) / reps).sqrt(),
                dgp: exp.dgp,
            })
        })
        .collect()
}

/// The `(p, k)` grid and sample-size rule of the published size tables:
/// table 1 uses `n = (pk)^(16/3)`, table 2 uses `n = (pk)^4`.
pub fn published_table_grid(table: u8) -> Result<Vec<(usize, usize, SampleSizeRule)>> {
    let (dims, rule): (&[(usize, usize)], _) = match table {
        1 => (
            &[(2, 2), (2, 3), (2, 4), (2, 5), (3, 2), (3, 3)],
            SampleSizeRule::Pow16Over3,
        ),
        2 => (
            &[
                (2, 2),
                (2, 3),
                (2, 4),
                (2, 5),
                (2, 6),
                (2, 7),
                (3, 2),
                (3, 3),
                (3, 4),
                (3, 5),
                (3, 6),
                (3, 7),
            ],
            SampleSizeRule::Pow4,
        ),
        other => {
            return Err(Error::InvalidArgument(format!(
                "table must be 1 or 2, got {other}"
            )))
        }
    };
    Ok(dims.iter().map(|&(p, k)| (p, k, rule)).collect())
}

/// All experiments of a published table: every grid row under both designs.
pub fn published_table_experiments(table: u8, reps: usize, seed: u64) -> Result<Vec<SizeExperiment>> {
    let grid = published_table_grid(table)?;
    let mut out = Vec::with_capacity(grid.len() * 2);
    for (p, k, rule) in grid {
        for dgp in [DgpVariant::Homoskedastic, DgpVariant::ScalarHetero] {
            out.push(SizeExperiment::new(p, k, rule, dgp, reps, seed));
        }
    }
    Ok(out)
}

/// Rejection frequencies along a grid of local alternatives.
#[derive(Debug, Clone)]
pub struct PowerExperiment {
    pub n: usize,
    pub sigma_grid: Vec<f64>,
    pub reps: usize,
    pub levels: Vec<f64>,
    pub seed: u64,
    /// Also compute KPST* on the same draws.
    pub include_star: bool,
    pub options: KpsOptions,
}

impl PowerExperiment {
    pub fn new(n: usize, sigma_grid: Vec<f64>, reps: usize, seed: u64) -> Self {
        Self {
            n,
            sigma_grid,
            reps,
            levels: vec![0.05],
            seed,
            include_star: false,
            options: KpsOptions::default(),
        }
    }

    fn validate(&self) -> Result<()> {
        check_reps(self.reps)?;
        check_levels(&self.levels)?;
        if self.sigma_grid.is_empty() {
            return Err(Error::InvalidArgument("sigma grid is empty".into()));
        }
        for &s in &self.sigma_grid {
            local_variances(self.n, s)?;
        }
        Ok(())
    }
}

/// One line of a power table. Powers are proportions in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerRow {
    pub sigma: f64,
    pub level: f64,
    pub power_kpst: f64,
    pub power_kpst_star: Option<f64>,
    /// `1 - F(χ²(df=4, δ = σ²/4))` at the `1 - level` quantile of `χ²(4)`.
    pub power_asymptotic: f64,
    /// Binomial standard error at the asymptotic power.
    pub mc_se: f64,
}

/// Limiting rejection probability of the 4-df test in the local design.
pub fn asymptotic_power(sigma: f64, level: f64) -> Result<f64> {
    let crit = chi2_quantile(1.0 - level, Chi2Spec::central(4)?)?;
    noncentral_chi2_sf(crit, Chi2Spec::noncentral(4, sigma * sigma / 4.0)?)
}

/// Replication `r` at grid point `i` uses stream `(i << 32) | r`.
pub fn run_power(exp: &PowerExperiment) -> Result<Vec<PowerRow>> {
    exp.validate()?;
    let spec = Chi2Spec::central(4)?;
    let crits = exp
        .levels
        .iter()
        .map(|&a| chi2_quantile(1.0 - a, spec))
        .collect::<Result<Vec<_>>>()?;
    let reps = exp.reps as f64;
    let mut rows = Vec::new();
    for (i, &sigma) in exp.sigma_grid.iter().enumerate() {
        let stats: Vec<(f64, f64)> = map_reps(exp.reps, |r| {
            let mut stream = RngStream::new(exp.seed, ((i as u64) << 32) | r as u64);
            let sample = dgp_local(exp.n, sigma, &mut stream)?;
            if exp.include_star {
                kpst_pair(&sample, &exp.options)
            } else {
                Ok((kpst_statistic(&sample, &exp.options)?, f64::NAN))
            }
        })
        .into_iter()
        .collect::<Result<_>>()?;
        for (&level, &crit) in exp.levels.iter().zip(&crits) {
            let rate = |pick: fn(&(f64, f64)) -> f64| {
                stats.iter().filter(|s| pick(s) > crit).count() as f64 / reps
            };
            let asymptotic = asymptotic_power(sigma, level)?;
            rows.push(PowerRow {
                sigma,
                level,
                power_kpst: rate(|s| s.0),
                power_kpst_star: exp.include_star.then(|| rate(|s| s.1)),
                power_asymptotic: asymptotic,
                mc_se: (asymptotic * (1.0 - asymptotic) / reps).sqrt(),
            });
        }
    }
    Ok(rows)
}

fn csv_error(e: csv::Error) -> Error {
    Error::Output(e.to_string())
}

fn write_rows<W: io::Write, T: Serialize>(rows: &[T], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row).map_err(csv_error)?;
    }
    w.flush().map_err(|e| Error::Output(e.to_string()))
}

/// Columns `p,k,n,df,m,level,nrp_pct,mc_se_pct,dgp`.
pub fn write_size_csv<W: io::Write>(rows: &[SizeRow], out: W) -> Result<()> {
    write_rows(rows, out)
}

/// Columns `sigma,level,power_kpst,power_kpst_star,power_asymptotic,mc_se`;
/// `power_kpst_star` is empty when KPST* was not run.
pub fn write_power_csv<W: io::Write>(rows: &[PowerRow], out: W) -> Result<()> {
    write_rows(rows, out)
}
