//! CSV ingestion with listwise deletion.

use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{CliError, Result};

/// Designated columns of one block: header names or inclusive `first:last`
/// ranges of header positions, comma separated (`y1,y2` or `z1:z4,x`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnList {
    raw: String,
    items: Vec<ColumnItem>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum ColumnItem {
    Name(String),
    Range(String, String),
}

impl std::str::FromStr for ColumnList {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let mut items = Vec::new();
        for part in s.split(',') {
            let part = part.trim();
            if part.is_empty() {
                return Err(format!("empty column name in {s:?}"));
            }
            match part.split_once(':') {
                Some((a, b)) if !a.trim().is_empty() && !b.trim().is_empty() => {
                    items.push(ColumnItem::Range(a.trim().into(), b.trim().into()))
                }
                Some(_) => return Err(format!("malformed range {part:?}")),
                None => items.push(ColumnItem::Name(part.into())),
            }
        }
        Ok(ColumnList {
            raw: s.to_owned(),
            items,
        })
    }
}

impl std::fmt::Display for ColumnList {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.raw)
    }
}

impl ColumnList {
    fn resolve(&self, headers: &[String], flag: &str) -> Result<Vec<usize>> {
        let find = |name: &str| {
            headers.iter().position(|h| h == name).ok_or_else(|| {
                CliError::Schema(format!("column {name:?} given to --{flag} is not in the header"))
            })
        };
        let mut out = Vec::new();
        for item in &self.items {
            match item {
                ColumnItem::Name(n) => out.push(find(n)?),
                ColumnItem::Range(a, b) => {
                    let (i, j) = (find(a)?, find(b)?);
                    if i > j {
                        return Err(CliError::Schema(format!(
                            "range {a}:{b} given to --{flag} runs backwards"
                        )));
                    }
                    out.extend(i..=j);
                }
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Default)]
pub struct Schema {
    pub y: Option<ColumnList>,
    pub z: Option<ColumnList>,
    pub w: Option<ColumnList>,
    pub cluster: Option<String>,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    /// Endogenous variables, `n x p`.
    pub y: DMatrix<f64>,
    /// Instruments, `n x k`.
    pub z: DMatrix<f64>,
    /// Controls, `n x q`; a constant is added at residualization.
    pub w: Option<DMatrix<f64>>,
    pub clusters: Option<Vec<String>>,
    pub rows_read: usize,
    pub rows_dropped: usize,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.y.nrows()
    }
}

fn is_missing(cell: &str) -> bool {
    matches!(cell.trim(), "" | "NA" | "na" | "NaN" | "nan" | ".")
}

/// Reads a CSV file; see [`parse_csv`].
pub fn ingest(path: &Path, schema: &Schema) -> Result<Dataset> {
    let bytes = std::fs::read(path).map_err(|e| CliError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_csv(&bytes, schema)
}

/// Parses a headed CSV. Rows with a missing value (empty, `NA`, `NaN` or `.`)
/// in any designated column are dropped and counted; any other non-numeric
/// cell in a numeric column is an error.
pub fn parse_csv(bytes: &[u8], schema: &Schema) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| CliError::Parse(e.to_string()))?
        .iter()
        .map(str::to_owned)
        .collect();

    let y_list = schema
        .y
        .as_ref()
        .ok_or_else(|| CliError::Schema("--y is required".into()))?;
    let z_list = schema
        .z
        .as_ref()
        .ok_or_else(|| CliError::Schema("--z is required".into()))?;
    let y_cols = y_list.resolve(&headers, "y")?;
    let z_cols = z_list.resolve(&headers, "z")?;
    let w_cols = match &schema.w {
        Some(list) => list.resolve(&headers, "w")?,
        None => Vec::new(),
    };
    let cluster_col = match &schema.cluster {
        Some(name) => Some(headers.iter().position(|h| h == name).ok_or_else(|| {
            CliError::Schema(format!("cluster column {name:?} is not in the header"))
        })?),
        None => None,
    };

    let numeric: Vec<usize> = y_cols.iter().chain(&z_cols).chain(&w_cols).copied().collect();
    let mut values: Vec<Vec<f64>> = Vec::new();
    let mut labels = Vec::new();
    let mut rows_read = 0;
    let mut dropped = 0;
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::Parse(e.to_string()))?;
        rows_read += 1;
        let line = r + 2;
        let cell = |c: usize| record.get(c).unwrap_or("");
        if numeric.iter().any(|&c| is_missing(cell(c)))
            || cluster_col.is_some_and(|c| cell(c).trim().is_empty())
        {
            dropped += 1;
            continue;
        }
        let mut row = Vec::with_capacity(numeric.len());
        for &c in &numeric {
            let text = cell(c).trim();
            let x: f64 = text.parse().map_err(|_| {
                CliError::Parse(format!(
                    "line {line}, column {:?}: {text:?} is not a number",
                    headers[c]
                ))
            })?;
            if !x.is_finite() {
                return Err(CliError::Parse(format!(
                    "line {line}, column {:?}: value is not finite",
                    headers[c]
                )));
            }
            row.push(x);
        }
        values.push(row);
        if let Some(c) = cluster_col {
            labels.push(cell(c).to_owned());
        }
    }
    if values.is_empty() {
        return Err(CliError::EmptyAfterFiltering { dropped });
    }

    let n = values.len();
    let block = |offset: usize, width: usize| {
        DMatrix::from_fn(n, width, |i, j| values[i][offset + j])
    };
    let (p, k, q) = (y_cols.len(), z_cols.len(), w_cols.len());
    Ok(Dataset {
        y: block(0, p),
        z: block(p, k),
        w: (q > 0).then(|| block(p + k, q)),
        clusters: cluster_col.map(|_| labels),
        rows_read,
        rows_dropped: dropped,
    })
}

/// Reads a numeric matrix from CSV. A first line that does not parse as
/// numbers is taken as a header and skipped.
pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let bytes = std::fs::read(path).map_err(|e| CliError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(bytes.as_slice());
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::Parse(e.to_string()))?;
        let parsed: std::result::Result<Vec<f64>, _> =
            record.iter().map(|c| c.parse::<f64>()).collect();
        match parsed {
            Ok(row) => rows.push(row),
            Err(_) if r == 0 => continue,
            Err(_) => {
                return Err(CliError::Parse(format!("line {}: non-numeric cell", r + 1)))
            }
        }
    }
    let cols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || cols == 0 {
        return Err(CliError::Parse("matrix file is empty".into()));
    }
    if rows.iter().any(|r| r.len() != cols) {
        return Err(CliError::Parse("matrix rows have different lengths".into()));
    }
    Ok(DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}
