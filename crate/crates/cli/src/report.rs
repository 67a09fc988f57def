//! Machine-readable test reports.

use std::fmt::Write as _;
use std::io;

use kps_core::{KpsResult, NkpFit};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

pub const SCHEMA: &str = "kps-report/1";

/// Flags that shaped a test run, echoed into the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptionsEcho {
    pub input: String,
    pub y: String,
    pub z: String,
    pub w: Option<String>,
    pub cluster: Option<String>,
    pub constant: bool,
    pub rank_policy: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub schema: String,
    pub method: String,
    pub n: usize,
    pub n_effective: usize,
    pub p: usize,
    pub k: usize,
    pub df: u32,
    pub statistic: f64,
    pub p_value: f64,
    pub ds: f64,
    pub reject: bool,
    pub level: f64,
    pub clustered: bool,
    pub normalized: bool,
    /// Row-major.
    pub g1: Vec<Vec<f64>>,
    pub g2: Vec<Vec<f64>>,
    pub singular_values: Vec<f64>,
    pub warnings: Vec<String>,
    pub input_sha256: String,
    pub version: String,
    pub rows_dropped: usize,
    pub options: OptionsEcho,
    pub timestamp: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

pub fn row_major(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

impl TestReport {
    pub fn new(
        result: &KpsResult,
        level: f64,
        input: &[u8],
        rows_dropped: usize,
        options: OptionsEcho,
    ) -> Self {
        Self {
            schema: SCHEMA.into(),
            method: result.method.to_string(),
            n: result.n_obs,
            n_effective: result.n_effective,
            p: result.p,
            k: result.k,
            df: result.df,
            statistic: result.statistic,
            p_value: result.p_value,
            ds: result.nkp.ds,
            reject: result.reject(level),
            level,
            clustered: result.clustered,
            normalized: result.normalized,
            g1: row_major(&result.nkp.g1),
            g2: row_major(&result.nkp.g2),
            singular_values: result.nkp.singular_values().to_vec(),
            warnings: result.warnings.iter().map(ToString::to_string).collect(),
            input_sha256: sha256_hex(input),
            version: env!("CARGO_PKG_VERSION").into(),
            rows_dropped,
            options,
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        }
    }

    pub fn write_json<W: io::Write>(&self, mut out: W) -> Result<()> {
        serde_json::to_writer_pretty(&mut out, self).map_err(|e| CliError::Output(e.to_string()))?;
        writeln!(out).map_err(|e| CliError::Output(e.to_string()))
    }

    /// One header line and one row of the scalar fields.
    pub fn write_csv<W: io::Write>(&self, out: W) -> Result<()> {
        #[derive(Serialize)]
        struct Row<'a> {
            schema: &'a str,
            method: &'a str,
            n: usize,
            n_effective: usize,
            p: usize,
            k: usize,
            df: u32,
            statistic: f64,
            p_value: f64,
            ds: f64,
            reject: bool,
            level: f64,
            clustered: bool,
            normalized: bool,
            input_sha256: &'a str,
            version: &'a str,
        }
        let mut w = csv::Writer::from_writer(out);
        w.serialize(Row {
            schema: &self.schema,
            method: &self.method,
            n: self.n,
            n_effective: self.n_effective,
            p: self.p,
            k: self.k,
            df: self.df,
            statistic: self.statistic,
            p_value: self.p_value,
            ds: self.ds,
            reject: self.reject,
            level: self.level,
            clustered: self.clustered,
            normalized: self.normalized,
            input_sha256: &self.input_sha256,
            version: &self.version,
        })
        .map_err(|e| CliError::Output(e.to_string()))?;
        w.flush().map_err(|e| CliError::Output(e.to_string()))
    }

    pub fn write_text<W: io::Write>(&self, mut out: W) -> Result<()> {
        let mut s = String::new();
        let method = if self.method == "kpst" { "KPST" } else { "KPST*" };
        let _ = writeln!(s, "{method} test of Kronecker product structure");
        let _ = writeln!(s, "  observations    {}", self.n);
        if self.clustered {
            let _ = writeln!(s, "  clusters        {}", self.n_effective);
        }
        if self.rows_dropped > 0 {
            let _ = writeln!(s, "  rows dropped    {}", self.rows_dropped);
        }
        let _ = writeln!(s, "  p, k            {}, {}", self.p, self.k);
        let _ = writeln!(s, "  statistic       {:.6}", self.statistic);
        let _ = writeln!(s, "  df              {}", self.df);
        let _ = writeln!(s, "  p-value         {:.6}", self.p_value);
        let _ = writeln!(s, "  DS              {:.6e}", self.ds);
        let verdict = if self.reject { "reject" } else { "fail to reject" };
        let _ = writeln!(s, "  decision        {verdict} at level {}", self.level);
        for w in &self.warnings {
            let _ = writeln!(s, "warning: {w}");
        }
        out.write_all(s.as_bytes()).map_err(|e| CliError::Output(e.to_string()))
    }
}

/// Nearest-KPS summary of a single matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NkpReport {
    pub p: usize,
    pub k: usize,
    pub ds: f64,
    pub relative_ds: f64,
    pub g1: Vec<Vec<f64>>,
    pub g2: Vec<Vec<f64>>,
    pub singular_values: Vec<f64>,
    pub warnings: Vec<String>,
}

impl NkpReport {
    pub fn new(fit: &NkpFit) -> Self {
        Self {
            p: fit.p,
            k: fit.k,
            ds: fit.ds,
            relative_ds: fit.relative_ds(),
            g1: row_major(&fit.g1),
            g2: row_major(&fit.g2),
            singular_values: fit.singular_values().to_vec(),
            warnings: fit.warnings.iter().map(ToString::to_string).collect(),
        }
    }

    pub fn write_json<W: io::Write>(&self, mut out: W) -> Result<()> {
        serde_json::to_writer_pretty(&mut out, self).map_err(|e| CliError::Output(e.to_string()))?;
        writeln!(out).map_err(|e| CliError::Output(e.to_string()))
    }

    pub fn write_text<W: io::Write>(&self, mut out: W) -> Result<()> {
        let mut s = String::new();
        let _ = writeln!(s, "nearest Kronecker product, p = {}, k = {}", self.p, self.k);
        let _ = writeln!(s, "  DS              {:.6e}", self.ds);
        let _ = writeln!(s, "  relative DS     {:.6e}", self.relative_ds);
        write_matrix(&mut s, "G1", &self.g1);
        write_matrix(&mut s, "G2", &self.g2);
        let leading: Vec<String> = self
            .singular_values
            .iter()
            .take(5)
            .map(|v| format!("{v:.6e}"))
            .collect();
        let _ = writeln!(s, "  singular values {}", leading.join(" "));
        for w in &self.warnings {
            let _ = writeln!(s, "warning: {w}");
        }
        out.write_all(s.as_bytes()).map_err(|e| CliError::Output(e.to_string()))
    }
}

fn write_matrix(s: &mut String, name: &str, rows: &[Vec<f64>]) {
    let _ = writeln!(s, "  {name}");
    for r in rows {
        let cells: Vec<String> = r.iter().map(|v| format!("{v:>12.6}")).collect();
        let _ = writeln!(s, "    {}", cells.join(" "));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_of_empty_input() {
        assert_eq!(
            sha256_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }

    #[test]
    fn row_major_order() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(row_major(&m), vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
    }
}
