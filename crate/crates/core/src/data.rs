//! Dataset ingestion: CSV parsing against a declared schema, feature
//! selection, and scaling. Ground-truth labels are carried alongside the
//! features but only the evaluation stage reads them.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fingerprint::{Fingerprint, Hasher};

/// A column referenced by header name or zero-based position.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ColumnRef {
    Index(usize),
    Name(String),
}

impl ColumnRef {
    fn resolve(&self, header: &[String]) -> Result<usize> {
        match self {
            ColumnRef::Index(i) => {
                if *i < header.len() {
                    Ok(*i)
                } else {
                    Err(Error::Schema(format!(
                        "column index {i} out of range for {} columns",
                        header.len()
                    )))
                }
            }
            ColumnRef::Name(name) => header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::Schema(format!("column '{name}' not found"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvSchema {
    pub label_column: ColumnRef,
    /// Defaults to every non-label column, in file order.
    pub feature_columns: Option<Vec<ColumnRef>>,
    pub has_header: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Vec<Vec<f64>>,
    /// Class indices in first-appearance order, held out from clustering.
    pub labels: Vec<usize>,
    pub class_names: Vec<String>,
    pub feature_names: Vec<String>,
    pub fingerprint: Fingerprint,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.features.len()
    }

    pub fn d(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ScalingKind {
    /// Per-feature z-scores with the population standard deviation
    /// (divide by n); constant features map to 0.
    Standard,
    Minmax {
        lo: f64,
        hi: f64,
    },
    StandardThenMinmax {
        lo: f64,
        hi: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingSpec {
    pub kind: ScalingKind,
    pub means: Option<Vec<f64>>,
    pub stds: Option<Vec<f64>>,
    pub mins: Option<Vec<f64>>,
    pub maxs: Option<Vec<f64>>,
}

fn fingerprint_of(features: &[Vec<f64>], labels: &[usize]) -> Fingerprint {
    let mut hasher = Hasher::new();
    hasher.update_u64(features.len() as u64);
    hasher.update_u64(features.first().map_or(0, Vec::len) as u64);
    for row in features {
        for &v in row {
            hasher.update_f64(v);
        }
    }
    for &l in labels {
        hasher.update_u64(l as u64);
    }
    hasher.finish()
}

/// Parses a CSV file against the schema. Class names map to indices in
/// first-appearance order; the fingerprint covers the parsed numeric content.
pub fn load_csv(path: &Path, schema: &CsvSchema) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(io) if io.kind() == std::io::ErrorKind::NotFound => {
                Error::NotFound(path.to_path_buf())
            }
            _ => Error::Schema(format!("cannot open {}: {e}", path.display())),
        })?;

    let mut records = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let record =
            record.map_err(|e| Error::Schema(format!("malformed CSV record {idx}: {e}")))?;
        records.push(record);
    }
    if records.is_empty() {
        return Err(Error::Schema("CSV file is empty".to_string()));
    }

    let width = records[0].len();
    let header: Vec<String> = if schema.has_header {
        let h = records.remove(0);
        h.iter().map(str::to_string).collect()
    } else {
        (0..width).map(|i| format!("col{i}")).collect()
    };
    if records.len() < 2 {
        return Err(Error::Schema(format!(
            "need at least 2 data rows, got {}",
            records.len()
        )));
    }

    let label_idx = schema.label_column.resolve(&header)?;
    let feature_idx: Vec<usize> = match &schema.feature_columns {
        Some(cols) => cols
            .iter()
            .map(|c| c.resolve(&header))
            .collect::<Result<_>>()?,
        None => (0..header.len()).filter(|&i| i != label_idx).collect(),
    };
    if feature_idx.is_empty() {
        return Err(Error::Schema("feature selection is empty".to_string()));
    }

    let mut features = Vec::with_capacity(records.len());
    let mut labels = Vec::with_capacity(records.len());
    let mut class_names: Vec<String> = Vec::new();
    for (row_idx, record) in records.iter().enumerate() {
        let row_number = row_idx + if schema.has_header { 2 } else { 1 };
        if record.len() != header.len() {
            return Err(Error::Schema(format!(
                "row {row_number} has {} fields, expected {}",
                record.len(),
                header.len()
            )));
        }
        let mut row = Vec::with_capacity(feature_idx.len());
        for &col in &feature_idx {
            let cell = record.get(col).unwrap_or("");
            let value: f64 = cell.parse().map_err(|_| Error::Parse {
                row: row_number,
                column: header[col].clone(),
                message: format!("'{cell}' is not numeric"),
            })?;
            if !value.is_finite() {
                return Err(Error::Parse {
                    row: row_number,
                    column: header[col].clone(),
                    message: format!("non-finite value {value}"),
                });
            }
            row.push(value);
        }
        features.push(row);

        let class = record.get(label_idx).unwrap_or("").to_string();
        let class_idx = match class_names.iter().position(|c| *c == class) {
            Some(i) => i,
            None => {
                class_names.push(class);
                class_names.len() - 1
            }
        };
        labels.push(class_idx);
    }

    let fingerprint = fingerprint_of(&features, &labels);
    Ok(Dataset {
        features,
        labels,
        class_names,
        feature_names: feature_idx.iter().map(|&i| header[i].clone()).collect(),
        fingerprint,
    })
}

/// Column-slices the dataset; labels are untouched, the fingerprint changes.
pub fn select_features(dataset: &Dataset, columns: &[ColumnRef]) -> Result<Dataset> {
    if columns.is_empty() {
        return Err(Error::invalid(
            "feature selection must keep at least one column",
        ));
    }
    let indices: Vec<usize> = columns
        .iter()
        .map(|c| c.resolve(&dataset.feature_names))
        .collect::<Result<_>>()?;
    let features: Vec<Vec<f64>> = dataset
        .features
        .iter()
        .map(|row| indices.iter().map(|&i| row[i]).collect())
        .collect();
    let fingerprint = fingerprint_of(&features, &dataset.labels);
    Ok(Dataset {
        features,
        labels: dataset.labels.clone(),
        class_names: dataset.class_names.clone(),
        feature_names: indices
            .iter()
            .map(|&i| dataset.feature_names[i].clone())
            .collect(),
        fingerprint,
    })
}

fn standard_params(features: &[Vec<f64>], d: usize) -> (Vec<f64>, Vec<f64>) {
    let n = features.len() as f64;
    let mut means = vec![0.0; d];
    for row in features {
        for (m, v) in means.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in means.iter_mut() {
        *m /= n;
    }
    let mut vars = vec![0.0; d];
    for row in features {
        for ((var, v), m) in vars.iter_mut().zip(row).zip(&means) {
            *var += (v - m) * (v - m);
        }
    }
    let stds: Vec<f64> = vars.iter().map(|v| (v / n).sqrt()).collect();
    (means, stds)
}

fn apply_standard(features: &mut [Vec<f64>], means: &[f64], stds: &[f64]) {
    for row in features.iter_mut() {
        for ((v, m), s) in row.iter_mut().zip(means).zip(stds) {
            // constant features map to 0 (std treated as 1)
            *v = if *s > 0.0 { (*v - m) / s } else { 0.0 };
        }
    }
}

fn minmax_params(features: &[Vec<f64>], d: usize) -> (Vec<f64>, Vec<f64>) {
    let mut mins = vec![f64::INFINITY; d];
    let mut maxs = vec![f64::NEG_INFINITY; d];
    for row in features {
        for ((lo, hi), v) in mins.iter_mut().zip(maxs.iter_mut()).zip(row) {
            *lo = lo.min(*v);
            *hi = hi.max(*v);
        }
    }
    (mins, maxs)
}

fn apply_minmax(features: &mut [Vec<f64>], mins: &[f64], maxs: &[f64], lo: f64, hi: f64) {
    for row in features.iter_mut() {
        for ((v, mn), mx) in row.iter_mut().zip(mins).zip(maxs) {
            let span = mx - mn;
            *v = if span > 0.0 {
                lo + (*v - mn) * (hi - lo) / span
            } else {
                lo
            };
        }
    }
}

/// Fits the scaling on the dataset and returns the scaled copy plus the
/// fitted spec. Deterministic; the scaled copy carries a new fingerprint.
pub fn fit_scale(dataset: &Dataset, kind: ScalingKind) -> (Dataset, ScalingSpec) {
    let d = dataset.d();
    let mut features = dataset.features.clone();
    let spec = match kind {
        ScalingKind::Standard => {
            let (means, stds) = standard_params(&features, d);
            apply_standard(&mut features, &means, &stds);
            ScalingSpec {
                kind,
                means: Some(means),
                stds: Some(stds),
                mins: None,
                maxs: None,
            }
        }
        ScalingKind::Minmax { lo, hi } => {
            let (mins, maxs) = minmax_params(&features, d);
            apply_minmax(&mut features, &mins, &maxs, lo, hi);
            ScalingSpec {
                kind,
                means: None,
                stds: None,
                mins: Some(mins),
                maxs: Some(maxs),
            }
        }
        ScalingKind::StandardThenMinmax { lo, hi } => {
            let (means, stds) = standard_params(&features, d);
            apply_standard(&mut features, &means, &stds);
            let (mins, maxs) = minmax_params(&features, d);
            apply_minmax(&mut features, &mins, &maxs, lo, hi);
            ScalingSpec {
                kind,
                means: Some(means),
                stds: Some(stds),
                mins: Some(mins),
                maxs: Some(maxs),
            }
        }
    };
    let fingerprint = fingerprint_of(&features, &dataset.labels);
    (
        Dataset {
            features,
            labels: dataset.labels.clone(),
            class_names: dataset.class_names.clone(),
            feature_names: dataset.feature_names.clone(),
            fingerprint,
        },
        spec,
    )
}
