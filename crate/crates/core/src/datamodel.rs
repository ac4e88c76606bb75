//! Feature vectors, datasets and CSV ingestion.
//!
//! A [`Dataset`] stores its points row-major in one contiguous buffer. Every
//! component is checked to be finite at construction, so downstream code can
//! assume finite reals throughout.

use std::fmt::Write as _;
use std::fs::File;
use std::io::Write as _;
use std::ops::Deref;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// A finite, non-empty vector of reals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    pub fn new(components: Vec<f64>) -> Result<Self> {
        if components.is_empty() {
            return Err(invalid(
                "dim",
                "feature vector must have at least one component",
            ));
        }
        if let Some(index) = components.iter().position(|c| !c.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self(components))
    }

    pub fn zeros(dim: usize) -> Result<Self> {
        Self::new(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for FeatureVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for FeatureVector {
    type Error = Error;

    fn try_from(components: Vec<f64>) -> Result<Self> {
        Self::new(components)
    }
}

/// A collection of equal-dimension feature vectors with optional labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    values: Vec<f64>,
    dim: usize,
    labels: Option<Vec<usize>>,
}

impl Dataset {
    /// Builds a dataset from a row-major buffer of `values.len() / dim` points.
    pub fn from_flat(values: Vec<f64>, dim: usize, labels: Option<Vec<usize>>) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("dim", "must be at least 1"));
        }
        if !values.len().is_multiple_of(dim) {
            return Err(invalid(
                "values",
                format!(
                    "buffer length {} is not a multiple of dim {dim}",
                    values.len()
                ),
            ));
        }
        if let Some(index) = values.iter().position(|c| !c.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        let len = values.len() / dim;
        if let Some(labels) = &labels {
            if labels.len() != len {
                return Err(invalid(
                    "labels",
                    format!("{} labels for {len} points", labels.len()),
                ));
            }
        }
        Ok(Self {
            values,
            dim,
            labels,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], labels: Option<Vec<usize>>) -> Result<Self> {
        let dim = rows.first().map(Vec::len).unwrap_or(0);
        if dim == 0 {
            return Err(invalid("rows", "need at least one non-empty row"));
        }
        let mut values = Vec::with_capacity(rows.len() * dim);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::RaggedRow {
                    row: i + 1,
                    found: row.len(),
                    expected: dim,
                });
            }
            values.extend_from_slice(row);
        }
        Self::from_flat(values, dim, labels)
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.values.chunks_exact(self.dim)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    /// Copies the points whose indices are yielded by `indices`, in order.
    pub fn select(&self, indices: impl IntoIterator<Item = usize>) -> Dataset {
        let mut values = Vec::new();
        let mut labels = self.labels.as_ref().map(|_| Vec::new());
        for i in indices {
            values.extend_from_slice(self.point(i));
            if let (Some(out), Some(src)) = (labels.as_mut(), self.labels.as_ref()) {
                out.push(src[i]);
            }
        }
        Dataset {
            values,
            dim: self.dim,
            labels,
        }
    }

    /// Points carrying `label`, without labels attached.
    pub fn class_subset(&self, label: usize) -> Result<Dataset> {
        let labels = self.labels.as_ref().ok_or(Error::MissingLabels)?;
        let idx: Vec<usize> = (0..self.len()).filter(|&i| labels[i] == label).collect();
        let mut subset = self.select(idx);
        subset.labels = None;
        Ok(subset)
    }

    /// Fails unless the dataset holds at least `required` points.
    pub fn require_len(&self, required: usize) -> Result<()> {
        if self.len() < required {
            return Err(Error::Undersized {
                found: self.len(),
                required,
            });
        }
        Ok(())
    }
}

/// Parameters of the Gaussian mechanism.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MechanismParams {
    pub epsilon: f64,
    pub delta: f64,
    /// L2 bound applied before noise is added.
    pub clip: f64,
    pub sigma: f64,
}

impl MechanismParams {
    /// Parameters with `sigma` set to the calibration boundary for `(epsilon, delta, clip)`.
    pub fn calibrated(epsilon: f64, delta: f64, clip: f64) -> Result<Self> {
        let sigma = crate::mechanism::calibrate_sigma(epsilon, delta, clip)?;
        Ok(Self {
            epsilon,
            delta,
            clip,
            sigma,
        })
    }
}

impl Default for MechanismParams {
    /// Unit clip bound with sigma 1.5, as used for the noisy critic layer.
    fn default() -> Self {
        Self {
            epsilon: 1.0,
            delta: 1e-5,
            clip: 1.0,
            sigma: 1.5,
        }
    }
}

/// Reads a comma-separated file of numeric rows.
///
/// A first row that fails to parse is treated as a header when more rows
/// follow it. With `has_labels`, the last column holds a non-negative integer
/// class label. Row and column numbers in errors are 1-based.
pub fn load_csv(path: impl AsRef<Path>, has_labels: bool) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_csv(file, has_labels).map_err(|e| match e {
        Error::Io { source, .. } => Error::Io {
            path: path.to_path_buf(),
            source,
        },
        other => other,
    })
}

/// Like [`load_csv`] but from any reader.
pub fn read_csv(reader: impl std::io::Read, has_labels: bool) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let mut records = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse {
            row: i + 1,
            column: 0,
            message: e.to_string(),
        })?;
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        records.push((i + 1, rec));
    }

    let header_row = match records.first() {
        Some((_, first)) if records.len() > 1 => {
            first.iter().any(|cell| cell.parse::<f64>().is_err())
        }
        _ => false,
    };
    let body = if header_row {
        &records[1..]
    } else {
        &records[..]
    };
    if body.is_empty() {
        return Err(Error::Undersized {
            found: 0,
            required: 1,
        });
    }

    let expected = body[0].1.len();
    let mut values = Vec::new();
    let mut labels = has_labels.then(Vec::new);
    for (row, rec) in body {
        if rec.len() != expected {
            return Err(Error::RaggedRow {
                row: *row,
                found: rec.len(),
                expected,
            });
        }
        let (features, label) = parse_record(*row, rec, has_labels)?;
        values.extend(features);
        if let (Some(labels), Some(label)) = (labels.as_mut(), label) {
            labels.push(label);
        }
    }
    let dim = if has_labels { expected - 1 } else { expected };
    Dataset::from_flat(values, dim, labels)
}

fn parse_record(
    row: usize,
    rec: &csv::StringRecord,
    has_labels: bool,
) -> Result<(Vec<f64>, Option<usize>)> {
    let n_features = if has_labels {
        if rec.len() < 2 {
            return Err(Error::Parse {
                row,
                column: rec.len(),
                message: "labelled rows need at least one feature and a label".into(),
            });
        }
        rec.len() - 1
    } else {
        rec.len()
    };
    let mut features = Vec::with_capacity(n_features);
    for (col, cell) in rec.iter().take(n_features).enumerate() {
        let value: f64 = cell.parse().map_err(|_| Error::Parse {
            row,
            column: col + 1,
            message: format!("cannot parse {cell:?} as a number"),
        })?;
        if !value.is_finite() {
            return Err(Error::Parse {
                row,
                column: col + 1,
                message: format!("non-finite value {cell:?}"),
            });
        }
        features.push(value);
    }
    let label = if has_labels {
        let cell = &rec[n_features];
        let label: usize = cell.parse().map_err(|_| Error::Parse {
            row,
            column: n_features + 1,
            message: format!("cannot parse {cell:?} as a non-negative integer label"),
        })?;
        Some(label)
    } else {
        None
    };
    Ok((features, label))
}

/// Serialises a dataset in the format [`read_csv`] accepts, without a header.
/// Values are written in shortest round-trip form.
pub fn to_csv_string(data: &Dataset) -> String {
    let mut out = String::new();
    for (i, p) in data.points().enumerate() {
        for (j, v) in p.iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            write!(out, "{v:?}").unwrap();
        }
        if let Some(labels) = data.labels() {
            write!(out, ",{}", labels[i]).unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn write_csv(data: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut file = File::create(path).map_err(io_err)?;
    file.write_all(to_csv_string(data).as_bytes())
        .map_err(io_err)
}

/// Checks that two datasets can be compared: equal dimension and at least
/// two points each.
pub fn validate_pair(real: &Dataset, synthetic: &Dataset) -> Result<()> {
    if real.dim() != synthetic.dim() {
        return Err(Error::DimensionMismatch {
            left: real.dim(),
            right: synthetic.dim(),
        });
    }
    real.require_len(2)?;
    synthetic.require_len(2)
}
