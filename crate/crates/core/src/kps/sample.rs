use std::collections::HashMap;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{cholesky_lower, sorted_eigen, symmetrize, DenseMatrix};

/// Residuals `V̂` (n x p) and regressors `Z` (n x k), row `i` holding
/// observation `i`, with optional cluster labels.
#[derive(Debug, Clone, PartialEq)]
pub struct KpsSample {
    vhat: DenseMatrix,
    z: DenseMatrix,
    clusters: Option<Vec<String>>,
}

impl KpsSample {
    pub fn new(vhat: DenseMatrix, z: DenseMatrix) -> Result<Self> {
        let (n, p) = vhat.shape();
        let k = z.ncols();
        if p < 2 || k < 2 {
            return Err(Error::DimensionError { p, k });
        }
        if z.nrows() != n {
            return Err(Error::InvalidSample(format!(
                "residuals have {n} rows but regressors have {}",
                z.nrows()
            )));
        }
        if n < 2 {
            return Err(Error::InvalidSample(format!(
                "at least two observations are required, got {n}"
            )));
        }
        Ok(Self {
            vhat,
            z,
            clusters: None,
        })
    }

    pub fn from_matrices(vhat: DMatrix<f64>, z: DMatrix<f64>) -> Result<Self> {
        Self::new(DenseMatrix::new(vhat)?, DenseMatrix::new(z)?)
    }

    /// Attaches one cluster label per observation.
    pub fn with_clusters<S: Into<String>>(mut self, labels: Vec<S>) -> Result<Self> {
        if labels.len() != self.n() {
            return Err(Error::InvalidSample(format!(
                "{} cluster labels for {} observations",
                labels.len(),
                self.n()
            )));
        }
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        let distinct = cluster_order(&labels).1;
        if distinct < 2 {
            return Err(Error::TooFewClusters(distinct));
        }
        self.clusters = Some(labels);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.vhat.nrows()
    }

    pub fn p(&self) -> usize {
        self.vhat.ncols()
    }

    pub fn k(&self) -> usize {
        self.z.ncols()
    }

    pub fn vhat(&self) -> &DenseMatrix {
        &self.vhat
    }

    pub fn z(&self) -> &DenseMatrix {
        &self.z
    }

    pub fn clusters(&self) -> Option<&[String]> {
        self.clusters.as_deref()
    }
}

/// Cluster index per observation (in order of first appearance) and the
/// number of distinct clusters.
fn cluster_order(labels: &[String]) -> (Vec<usize>, usize) {
    let mut ids: HashMap<&str, usize> = HashMap::new();
    let idx = labels
        .iter()
        .map(|l| {
            let next = ids.len();
            *ids.entry(l.as_str()).or_insert(next)
        })
        .collect();
    (idx, ids.len())
}

/// Moment vectors `f_u`, one row per independent unit: observations when the
/// sample is unclustered, clusters otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentSet {
    /// `n_units x kp`, row `u` is `f_u'` with `f = V ⊗ Z` ordering
    /// (entry `j * k + a` is `V_j Z_a`).
    pub f: DMatrix<f64>,
    pub p: usize,
    pub k: usize,
    pub normalized: bool,
    pub clustered: bool,
    /// Observation count before cluster aggregation.
    pub n_obs: usize,
}

impl MomentSet {
    pub fn n_units(&self) -> usize {
        self.f.nrows()
    }
}

/// `C` with `C C' = (X'X / n)^{-1}`.
fn whitening_factor(x: &DMatrix<f64>, what: &'static str) -> Result<DMatrix<f64>> {
    let n = x.nrows() as f64;
    let second = symmetrize(&(x.tr_mul(x) / n));
    let (eigs, _) = sorted_eigen(&second);
    let top = eigs.first().copied().unwrap_or(0.0);
    if !(eigs.last().copied().unwrap_or(0.0) > 1e-12 * top) {
        return Err(Error::SingularSecondMoment(what));
    }
    let chol = second
        .clone()
        .cholesky()
        .ok_or(Error::SingularSecondMoment(what))?;
    let inv = symmetrize(&chol.inverse());
    cholesky_lower(&inv).map_err(|_| Error::SingularSecondMoment(what))
}

/// Builds `f_i = V̂_i ⊗ Z_i`.
///
/// With `normalize`, `V̂` and `Z` are first whitened by the Cholesky factors
/// `C1`, `C2` of the inverses of their second-moment matrices
/// (`V̂_i -> C1' V̂_i`, `Z_i -> C2' Z_i`), which makes the statistic invariant
/// to nonsingular transformations of either. With cluster labels, the
/// per-observation moments are summed within each cluster afterwards.
pub fn build_moments(sample: &KpsSample, normalize: bool) -> Result<MomentSet> {
    let (n, p, k) = (sample.n(), sample.p(), sample.k());
    let mut v: DMatrix<f64> = sample.vhat().as_matrix().clone();
    let mut z: DMatrix<f64> = sample.z().as_matrix().clone();

    if v.iter().all(|&x| x == 0.0) {
        return Err(Error::DegenerateSample(
            "residuals are identically zero".into(),
        ));
    }
    if normalize {
        let c1 = whitening_factor(&v, "residuals")?;
        let c2 = whitening_factor(&z, "regressors")?;
        // Row i of V C1 is (C1' V_i)'.
        v = &v * c1;
        z = &z * c2;
    }

    let mut f = DMatrix::zeros(n, k * p);
    for i in 0..n {
        for j in 0..p {
            let vij = v[(i, j)];
            for a in 0..k {
                f[(i, j * k + a)] = vij * z[(i, a)];
            }
        }
    }

    let clustered = sample.clusters().is_some();
    if let Some(labels) = sample.clusters() {
        let (idx, count) = cluster_order(labels);
        if count < 2 {
            return Err(Error::TooFewClusters(count));
        }
        let mut agg = DMatrix::zeros(count, k * p);
        for (i, &c) in idx.iter().enumerate() {
            let mut row = agg.row_mut(c);
            row += f.row(i);
        }
        f = agg;
    }

    Ok(MomentSet {
        f,
        p,
        k,
        normalized: normalize,
        clustered,
        n_obs: n,
    })
}
