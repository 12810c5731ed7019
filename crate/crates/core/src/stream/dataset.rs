//! Loading an agent population from a CSV feature table.

use std::path::Path;

use nalgebra::DMatrix;
use rand::seq::index;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use super::{AgentPopulation, StreamRng};
use crate::error::{Error, Result};

const MISSING: &[&str] = &["", "NA", "N/A", "NaN", "nan", "null"];

fn default_clip() -> Option<(f64, f64)> {
    Some((0.01, 0.99))
}

fn default_true() -> bool {
    true
}

/// What to read from the table and how to build agents from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvSchema {
    pub label_column: String,
    pub modifiable_columns: Vec<String>,
    /// Feature columns in order; every non-label column when absent.
    #[serde(default)]
    pub feature_columns: Option<Vec<String>>,
    /// Keep this many rows, chosen uniformly with `seed`.
    #[serde(default)]
    pub subsample: Option<usize>,
    /// Per-column quantile clipping applied before standardization.
    #[serde(default = "default_clip")]
    pub clip_quantiles: Option<(f64, f64)>,
    #[serde(default = "default_true")]
    pub standardize: bool,
    pub alpha: f64,
    pub lambda: f64,
    pub n1: usize,
    #[serde(default)]
    pub seed: u64,
}

impl CsvSchema {
    pub fn new(label_column: &str, modifiable_columns: &[&str]) -> Self {
        CsvSchema {
            label_column: label_column.to_string(),
            modifiable_columns: modifiable_columns.iter().map(|s| s.to_string()).collect(),
            feature_columns: None,
            subsample: None,
            clip_quantiles: default_clip(),
            standardize: true,
            alpha: 0.005,
            lambda: 0.01,
            n1: 1,
            seed: 0,
        }
    }
}

fn column_index(header: &csv::StringRecord, name: &str) -> Result<usize> {
    header
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| Error::CsvCell {
            row: 1,
            column: name.to_string(),
            message: "column not found in header".into(),
        })
}

fn parse_cell(raw: &str, row: usize, column: &str) -> Result<f64> {
    let t = raw.trim();
    if MISSING.contains(&t) {
        return Ok(f64::NAN);
    }
    t.parse::<f64>().map_err(|_| Error::CsvCell {
        row,
        column: column.to_string(),
        message: format!("cannot parse '{t}' as a number"),
    })
}

/// Linear-interpolated quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<AgentPopulation> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path.as_ref())?;
    let header = reader.headers()?.clone();

    let label_idx = column_index(&header, &schema.label_column)?;
    let feature_names: Vec<String> = match &schema.feature_columns {
        Some(cols) => cols.clone(),
        None => header
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != label_idx)
            .map(|(_, h)| h.trim().to_string())
            .collect(),
    };
    let feature_idx: Vec<usize> = feature_names
        .iter()
        .map(|n| column_index(&header, n))
        .collect::<Result<_>>()?;
    for m in &schema.modifiable_columns {
        column_index(&header, m)?;
        if !feature_names.contains(m) {
            return Err(Error::CsvCell {
                row: 1,
                column: m.clone(),
                message: "modifiable column is not among the feature columns".into(),
            });
        }
    }
    let modifiable: Vec<bool> = feature_names
        .iter()
        .map(|n| schema.modifiable_columns.contains(n))
        .collect();

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut labels: Vec<f64> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        // header is line 1
        let line = i + 2;
        let label = parse_cell(
            record.get(label_idx).unwrap_or(""),
            line,
            &schema.label_column,
        )?;
        let mut row = Vec::with_capacity(feature_idx.len());
        for (&j, name) in feature_idx.iter().zip(&feature_names) {
            row.push(parse_cell(record.get(j).unwrap_or(""), line, name)?);
        }
        if !label.is_finite() || row.iter().any(|x| !x.is_finite()) {
            continue;
        }
        let y = match label {
            1.0 => 1.0,
            l if l == 0.0 || l == -1.0 => -1.0,
            other => {
                return Err(Error::CsvCell {
                    row: line,
                    column: schema.label_column.clone(),
                    message: format!("label {other} is not binary (expected 0/1 or -1/+1)"),
                })
            }
        };
        rows.push(row);
        labels.push(y);
    }
    if rows.is_empty() {
        return Err(Error::CsvCell {
            row: 0,
            column: schema.label_column.clone(),
            message: "no complete rows remain after dropping missing values".into(),
        });
    }

    let d = feature_idx.len();
    if let Some(k) = schema.subsample {
        if k == 0 {
            return Err(Error::Config("subsample size must be positive".into()));
        }
        if k < rows.len() {
            let mut rng = StreamRng::seed_from_u64(schema.seed);
            let mut keep = index::sample(&mut rng, rows.len(), k).into_vec();
            keep.sort_unstable();
            rows = keep.iter().map(|&i| rows[i].clone()).collect();
            labels = keep.iter().map(|&i| labels[i]).collect();
        }
    }

    let m = rows.len();
    let mut features = DMatrix::from_fn(m, d, |i, j| rows[i][j]);
    for j in 0..d {
        let mut col: Vec<f64> = features.column(j).iter().cloned().collect();
        if let Some((lo_q, hi_q)) = schema.clip_quantiles {
            let mut sorted = col.clone();
            sorted.sort_by(|a, b| a.total_cmp(b));
            let (lo, hi) = (quantile(&sorted, lo_q), quantile(&sorted, hi_q));
            for x in &mut col {
                *x = x.clamp(lo, hi);
            }
        }
        if schema.standardize {
            let mean = col.iter().sum::<f64>() / m as f64;
            let var = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / m as f64;
            let sd = if var > 0.0 { var.sqrt() } else { 1.0 };
            for x in &mut col {
                *x = (*x - mean) / sd;
            }
        }
        features.set_column(j, &nalgebra::DVector::from_vec(col));
    }

    AgentPopulation::new(
        features,
        labels,
        modifiable,
        schema.alpha,
        schema.lambda,
        schema.n1,
    )
}
