//! Partialling out controls and forming reduced-form residuals.

use kps_core::{Error as CoreError, KpsSample};
use nalgebra::DMatrix;

use crate::error::{CliError, Result};
use crate::ingest::Dataset;

/// Relative size of a QR pivot below which a design is rank deficient.
const RANK_TOL: f64 = 1e-10;

/// Residuals of `y` after least squares on `x`, computed as `y - Q Q'y`
/// from a thin QR of `x`.
fn annihilate(x: &DMatrix<f64>, y: &DMatrix<f64>, block: &'static str) -> Result<DMatrix<f64>> {
    if x.ncols() == 0 {
        return Ok(y.clone());
    }
    let qr = x.clone().qr();
    let r = qr.r();
    let scale = x.column_iter().map(|c| c.norm()).fold(0.0, f64::max);
    if scale == 0.0 || r.diagonal().iter().any(|d| d.abs() <= RANK_TOL * scale) {
        return Err(CliError::RankDeficientDesign { block });
    }
    let q = qr.q();
    Ok(y - &q * q.tr_mul(y))
}

/// Step one replaces `y` and `z` by their residuals on `w`; step two returns
/// the residuals of the partialled `y` on the partialled `z`, together with
/// the partialled `z`.
pub fn residualize_matrices(
    y: &DMatrix<f64>,
    z: &DMatrix<f64>,
    w: Option<&DMatrix<f64>>,
    constant: bool,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let n = y.nrows();
    let q = w.map_or(0, DMatrix::ncols);
    let mut controls = DMatrix::zeros(n, q + usize::from(constant));
    if let Some(w) = w {
        controls.columns_mut(0, q).copy_from(w);
    }
    if constant {
        controls.column_mut(q).fill(1.0);
    }
    let needed = z.ncols() + controls.ncols();
    if n <= needed {
        return Err(CliError::InsufficientObservations { n, needed });
    }

    let y_tilde = annihilate(&controls, y, "control (W)")?;
    let z_tilde = annihilate(&controls, z, "control (W)")?;
    // Also catches instruments that are collinear with the controls.
    let v_hat = annihilate(&z_tilde, &y_tilde, "instrument (Z)")?;

    let scale = y_tilde.norm();
    if scale == 0.0 || v_hat.norm() <= 1e-10 * scale {
        return Err(CliError::Core(CoreError::DegenerateSample(
            "reduced-form residuals are zero; the endogenous variables are fitted exactly".into(),
        )));
    }
    Ok((v_hat, z_tilde))
}

/// Builds the test sample from a dataset: reduced-form residuals, partialled
/// instruments and any cluster labels.
pub fn residualize(data: &Dataset, constant: bool) -> Result<KpsSample> {
    let (v_hat, z_tilde) = residualize_matrices(&data.y, &data.z, data.w.as_ref(), constant)?;
    let sample = KpsSample::from_matrices(v_hat, z_tilde)?;
    Ok(match &data.clusters {
        Some(labels) => sample.with_clusters(labels.clone())?,
        None => sample,
    })
}
