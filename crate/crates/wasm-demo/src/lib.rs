//! Browser bindings for the KPS test. Every export takes plain numbers and
//! returns a JSON string, so the page needs no generated type glue.

use kps_core::mc::{asymptotic_power, run_power, run_size, DgpVariant, PowerExperiment, SampleSizeRule, SizeExperiment};
use kps_core::{nearest_kps, Error};
use nalgebra::DMatrix;
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Upper bounds that keep a single call responsive on one browser thread.
pub const MAX_REPS: usize = 5_000;
pub const MAX_N: usize = 20_000;

type Result<T> = std::result::Result<T, Error>;

#[derive(Serialize)]
struct NkpView {
    ds: f64,
    relative_ds: f64,
    g1: Vec<Vec<f64>>,
    g2: Vec<Vec<f64>>,
    singular_values: Vec<f64>,
    warnings: Vec<String>,
}

#[derive(Serialize)]
struct PowerPoint {
    sigma: f64,
    simulated: Option<f64>,
    asymptotic: f64,
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("plain data serializes")
}

fn check_budget(n: usize, reps: usize) -> Result<()> {
    if n > MAX_N || reps > MAX_REPS {
        return Err(Error::InvalidArgument(format!(
            "the demo is limited to n <= {MAX_N} and reps <= {MAX_REPS}"
        )));
    }
    Ok(())
}

/// Nearest `G1 ⊗ G2` to a `pk x pk` matrix given in row-major order.
pub fn nearest_kps_json(entries: &[f64], p: usize, k: usize) -> Result<String> {
    let m = p * k;
    if entries.len() != m * m {
        return Err(Error::ShapeMismatch(format!(
            "expected {} entries for a {m}x{m} matrix, got {}",
            m * m,
            entries.len()
        )));
    }
    let fit = nearest_kps(&DMatrix::from_row_slice(m, m, entries), p, k)?;
    Ok(to_json(&NkpView {
        ds: fit.ds,
        relative_ds: fit.relative_ds(),
        g1: rows(&fit.g1),
        g2: rows(&fit.g2),
        singular_values: fit.singular_values().to_vec(),
        warnings: fit.warnings.iter().map(ToString::to_string).collect(),
    }))
}

/// Power of the 4-df test along `sigmas` in the local design. With
/// `reps == 0` only the limiting curve is returned.
pub fn power_curve_json(n: usize, sigmas: &[f64], level: f64, reps: usize, seed: u64) -> Result<String> {
    check_budget(n, reps)?;
    let asymptotic = sigmas
        .iter()
        .map(|&s| asymptotic_power(s, level))
        .collect::<Result<Vec<_>>>()?;
    let simulated = if reps == 0 {
        vec![None; sigmas.len()]
    } else {
        let mut exp = PowerExperiment::new(n, sigmas.to_vec(), reps, seed);
        exp.levels = vec![level];
        run_power(&exp)?.into_iter().map(|r| Some(r.power_kpst)).collect()
    };
    let points: Vec<PowerPoint> = sigmas
        .iter()
        .zip(asymptotic)
        .zip(simulated)
        .map(|((&sigma, asymptotic), simulated)| PowerPoint {
            sigma,
            simulated,
            asymptotic,
        })
        .collect();
    Ok(to_json(&points))
}

/// Null rejection frequencies (in percent) at the given levels.
pub fn size_simulation_json(
    p: usize,
    k: usize,
    n: usize,
    heteroskedastic: bool,
    levels: &[f64],
    reps: usize,
    seed: u64,
) -> Result<String> {
    check_budget(n, reps)?;
    let dgp = if heteroskedastic {
        DgpVariant::ScalarHetero
    } else {
        DgpVariant::Homoskedastic
    };
    let mut exp = SizeExperiment::new(p, k, SampleSizeRule::Explicit(n), dgp, reps, seed);
    exp.levels = levels.to_vec();
    Ok(to_json(&run_size(&exp)?))
}

fn js(e: Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen(js_name = nearestKps)]
pub fn nearest_kps_js(entries: &[f64], p: usize, k: usize) -> std::result::Result<String, JsError> {
    nearest_kps_json(entries, p, k).map_err(js)
}

#[wasm_bindgen(js_name = powerCurve)]
pub fn power_curve_js(
    n: usize,
    sigmas: &[f64],
    level: f64,
    reps: usize,
    seed: u32,
) -> std::result::Result<String, JsError> {
    power_curve_json(n, sigmas, level, reps, seed.into()).map_err(js)
}

#[wasm_bindgen(js_name = sizeSimulation)]
pub fn size_simulation_js(
    p: usize,
    k: usize,
    n: usize,
    heteroskedastic: bool,
    levels: &[f64],
    reps: usize,
    seed: u32,
) -> std::result::Result<String, JsError> {
    size_simulation_json(p, k, n, heteroskedastic, levels, reps, seed.into()).map_err(js)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    #[test]
    fn identity_has_zero_distance() {
        let mut id = vec![0.0; 16];
        for i in 0..4 {
            id[i * 5] = 1.0;
        }
        let v: Value = serde_json::from_str(&nearest_kps_json(&id, 2, 2).unwrap()).unwrap();
        assert!(v["ds"].as_f64().unwrap().abs() < 1e-12);
        assert_eq!(v["g1"][0][0].as_f64().unwrap(), 1.0);
        assert!((v["g2"][1][1].as_f64().unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn diagonal_distance() {
        let mut d = vec![0.0; 16];
        for (i, x) in [1.5, 0.5, 0.5, 1.5].into_iter().enumerate() {
            d[i * 5] = x;
        }
        let v: Value = serde_json::from_str(&nearest_kps_json(&d, 2, 2).unwrap()).unwrap();
        assert!((v["ds"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn wrong_length() {
        assert!(matches!(nearest_kps_json(&[1.0; 15], 2, 2), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn limiting_curve_only() {
        let v: Value = serde_json::from_str(&power_curve_json(200, &[0.0, 4.0], 0.05, 0, 1).unwrap()).unwrap();
        let pts = v.as_array().unwrap();
        assert!((pts[0]["asymptotic"].as_f64().unwrap() - 0.05).abs() < 1e-9);
        assert!(pts[1]["asymptotic"].as_f64().unwrap() > 0.2);
        assert!(pts[0]["simulated"].is_null());
    }

    #[test]
    fn simulated_curve_matches_library() {
        let v: Value = serde_json::from_str(&power_curve_json(200, &[0.0, 6.0], 0.05, 30, 9).unwrap()).unwrap();
        let exp = PowerExperiment::new(200, vec![0.0, 6.0], 30, 9);
        let rows = run_power(&exp).unwrap();
        for (pt, row) in v.as_array().unwrap().iter().zip(rows) {
            assert_eq!(pt["simulated"].as_f64().unwrap(), row.power_kpst);
        }
    }

    #[test]
    fn size_rows() {
        let v: Value =
            serde_json::from_str(&size_simulation_json(2, 3, 300, true, &[0.05, 0.10], 20, 4).unwrap()).unwrap();
        let rows = v.as_array().unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0]["df"].as_u64().unwrap(), 10);
        assert_eq!(rows[1]["dgp"].as_str().unwrap(), "scalar_hetero");
        assert!(matches!(
            size_simulation_json(1, 3, 300, false, &[0.05], 20, 4),
            Err(Error::DimensionError { .. })
        ));
        assert!(size_simulation_json(2, 2, 300, false, &[0.05], MAX_REPS + 1, 4).is_err());
    }
}
