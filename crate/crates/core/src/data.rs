//! Dataset loading, normalization and synthetic fixtures.
//!
//! Every loader returns a [`DataMatrix`] whose invariants have been checked:
//! all values finite, `n, d >= 1`, and labels (when present) remapped onto
//! the contiguous range `0..num_classes`.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense row-major `n x d` feature table with optional class labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataMatrix {
    pub n: usize,
    pub d: usize,
    pub values: Vec<f64>,
    pub labels: Option<Vec<usize>>,
    pub name: String,
}

impl DataMatrix {
    pub fn new(
        n: usize,
        d: usize,
        values: Vec<f64>,
        labels: Option<Vec<usize>>,
        name: impl Into<String>,
    ) -> Result<Self> {
        let data = DataMatrix {
            n,
            d,
            values,
            labels,
            name: name.into(),
        };
        data.validate()?;
        Ok(data)
    }

    /// Build from rows; every row must have the same length.
    pub fn from_rows(rows: &[Vec<f64>], labels: Option<Vec<usize>>, name: &str) -> Result<Self> {
        let n = rows.len();
        let d = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != d) {
            return Err(Error::InvalidData(format!(
                "row {bad} has {} values, expected {d}",
                rows[bad].len()
            )));
        }
        DataMatrix::new(n, d, rows.concat(), labels, name)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.d == 0 {
            return Err(Error::InvalidData(format!(
                "dataset must have n >= 1 and d >= 1 (got n={}, d={})",
                self.n, self.d
            )));
        }
        if self.values.len() != self.n * self.d {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a {}x{} matrix",
                self.values.len(),
                self.n,
                self.d
            )));
        }
        if let Some(idx) = self.values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidData(format!(
                "non-finite value at row {}, column {}",
                idx / self.d,
                idx % self.d
            )));
        }
        if let Some(labels) = &self.labels {
            if labels.len() != self.n {
                return Err(Error::DimensionMismatch(format!(
                    "{} labels for {} samples",
                    labels.len(),
                    self.n
                )));
            }
        }
        Ok(())
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.d)
    }

    pub fn num_classes(&self) -> Option<usize> {
        self.labels
            .as_ref()
            .map(|l| l.iter().copied().max().map_or(0, |m| m + 1))
    }
}

/// Maps arbitrary label values onto `0..k` preserving their numeric order.
fn remap_labels(raw: &[f64]) -> Vec<usize> {
    let mut distinct: Vec<f64> = raw.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    raw.iter()
        .map(|v| {
            distinct
                .binary_search_by(|probe| probe.total_cmp(v))
                .expect("label present in its own distinct set")
        })
        .collect()
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn dataset_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".to_string())
}

/// Load a comma-separated file. Row and column positions in errors are 1-based.
pub fn load_csv(path: &Path, has_label_column: bool, skip_header: bool) -> Result<DataMatrix> {
    let text = read_text(path)?;
    parse_csv(&text, has_label_column, skip_header, &dataset_name(path))
}

pub fn parse_csv(
    text: &str,
    has_label_column: bool,
    skip_header: bool,
    name: &str,
) -> Result<DataMatrix> {
    let mut width: Option<usize> = None;
    let mut values = Vec::new();
    let mut raw_labels = Vec::new();
    let mut n = 0usize;

    for (line_idx, line) in text.lines().enumerate() {
        let row = line_idx + 1;
        if skip_header && line_idx == 0 {
            continue;
        }
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        match width {
            None => width = Some(cells.len()),
            Some(w) if w != cells.len() => {
                return Err(Error::Parse {
                    row,
                    column: cells.len().min(w) + 1,
                    message: format!("expected {w} columns, found {}", cells.len()),
                })
            }
            _ => {}
        }
        for (col_idx, cell) in cells.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                row,
                column: col_idx + 1,
                message: format!("non-numeric cell {cell:?}"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row,
                    column: col_idx + 1,
                    message: format!("non-finite cell {cell:?}"),
                });
            }
            if has_label_column && col_idx + 1 == cells.len() {
                raw_labels.push(v);
            } else {
                values.push(v);
            }
        }
        n += 1;
    }

    let width = width.ok_or_else(|| Error::InvalidData("empty CSV input".into()))?;
    let d = if has_label_column { width - 1 } else { width };
    let labels = has_label_column.then(|| remap_labels(&raw_labels));
    DataMatrix::new(n, d, values, labels, name)
}

/// Load LIBSVM/SVMlight text (`label idx:val ...`, 1-based indices), densified.
pub fn load_libsvm(path: &Path) -> Result<DataMatrix> {
    let text = read_text(path)?;
    parse_libsvm(&text, &dataset_name(path))
}

pub fn parse_libsvm(text: &str, name: &str) -> Result<DataMatrix> {
    let mut sparse_rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut raw_labels = Vec::new();
    let mut d = 0usize;

    for (line_idx, line) in text.lines().enumerate() {
        let row = line_idx + 1;
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let label_tok = tokens.next().expect("non-empty line has a token");
        let label: f64 = label_tok.parse().map_err(|_| Error::Parse {
            row,
            column: 1,
            message: format!("non-numeric label {label_tok:?}"),
        })?;
        let mut entries = Vec::new();
        let mut last_index = 0usize;
        for (tok_idx, tok) in tokens.enumerate() {
            let column = tok_idx + 2;
            let malformed = || Error::Parse {
                row,
                column,
                message: format!("malformed index:value pair {tok:?}"),
            };
            let (idx, val) = tok.split_once(':').ok_or_else(malformed)?;
            let idx: usize = idx.parse().map_err(|_| malformed())?;
            let val: f64 = val.parse().map_err(|_| malformed())?;
            if idx == 0 {
                return Err(Error::Parse {
                    row,
                    column,
                    message: "feature indices are 1-based; found index 0".into(),
                });
            }
            if idx <= last_index {
                return Err(Error::Parse {
                    row,
                    column,
                    message: format!("index {idx} does not increase after {last_index}"),
                });
            }
            if !val.is_finite() {
                return Err(malformed());
            }
            last_index = idx;
            d = d.max(idx);
            entries.push((idx - 1, val));
        }
        sparse_rows.push(entries);
        raw_labels.push(label);
    }

    let n = sparse_rows.len();
    let mut values = vec![0.0; n * d];
    for (i, entries) in sparse_rows.iter().enumerate() {
        for &(j, v) in entries {
            values[i * d + j] = v;
        }
    }
    DataMatrix::new(n, d, values, Some(remap_labels(&raw_labels)), name)
}

const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

fn be_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::InvalidData("truncated IDX header".into()))
}

/// Parse an IDX label file (magic 0x00000801) into raw byte labels.
pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    let magic = be_u32(bytes, 0)?;
    if magic != IDX_LABELS_MAGIC {
        return Err(Error::InvalidData(format!(
            "IDX label magic mismatch: expected {IDX_LABELS_MAGIC:#010x}, found {magic:#010x}"
        )));
    }
    let count = be_u32(bytes, 4)? as usize;
    let body = bytes
        .get(8..8 + count)
        .ok_or_else(|| Error::InvalidData("truncated IDX label body".into()))?;
    Ok(body.to_vec())
}

pub fn parse_idx(images: &[u8], labels: &[u8], name: &str) -> Result<DataMatrix> {
    let magic = be_u32(images, 0)?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(Error::InvalidData(format!(
            "IDX image magic mismatch: expected {IDX_IMAGES_MAGIC:#010x}, found {magic:#010x}"
        )));
    }
    let n = be_u32(images, 4)? as usize;
    let rows = be_u32(images, 8)? as usize;
    let cols = be_u32(images, 12)? as usize;
    let d = rows * cols;
    let body = images
        .get(16..16 + n * d)
        .ok_or_else(|| Error::InvalidData("truncated IDX image body".into()))?;
    let raw_labels = parse_idx_labels(labels)?;
    if raw_labels.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{} labels for {n} images",
            raw_labels.len()
        )));
    }
    let values = body.iter().map(|&b| f64::from(b) / 255.0).collect();
    let raw: Vec<f64> = raw_labels.iter().map(|&b| f64::from(b)).collect();
    DataMatrix::new(n, d, values, Some(remap_labels(&raw)), name)
}

/// Load an IDX image/label pair (the MNIST distribution format).
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<DataMatrix> {
    let images = fs::read(images_path).map_err(|e| Error::io(images_path, e))?;
    let labels = fs::read(labels_path).map_err(|e| Error::io(labels_path, e))?;
    parse_idx(&images, &labels, &dataset_name(images_path))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalization {
    #[default]
    MinMax,
    ZScore,
    None,
}

impl std::str::FromStr for Normalization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "minmax" => Ok(Normalization::MinMax),
            "zscore" => Ok(Normalization::ZScore),
            "none" => Ok(Normalization::None),
            other => Err(Error::InvalidParameter(format!(
                "unknown normalization {other:?} (expected minmax|zscore|none)"
            ))),
        }
    }
}

/// Per-feature rescaling. Constant features map to 0 in both scaled modes.
pub fn normalize(data: &DataMatrix, mode: Normalization) -> DataMatrix {
    let mut out = data.clone();
    if mode == Normalization::None {
        return out;
    }
    let (n, d) = (data.n, data.d);
    for j in 0..d {
        let column = (0..n).map(|i| data.values[i * d + j]);
        let (a, b) = match mode {
            Normalization::MinMax => {
                let (lo, hi) = column.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                    (lo.min(v), hi.max(v))
                });
                (lo, hi - lo)
            }
            Normalization::ZScore => {
                let mean = column.clone().sum::<f64>() / n as f64;
                let var = column.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
                (mean, var.sqrt())
            }
            Normalization::None => unreachable!(),
        };
        for i in 0..n {
            let v = &mut out.values[i * d + j];
            *v = if b > 0.0 { (*v - a) / b } else { 0.0 };
        }
    }
    out
}

/// Synthetic isotropic Gaussian clusters.
///
/// Returns the dataset together with the generating centers (row-major
/// `k x d`). Centers are placed by rejection sampling so that every pair is at
/// least `separation` apart.
pub fn make_blobs_with_centers(
    k: usize,
    per_cluster: usize,
    d: usize,
    separation: f64,
    spread: f64,
    seed: u64,
) -> Result<(DataMatrix, Vec<f64>)> {
    if k == 0 || per_cluster == 0 || d == 0 {
        return Err(Error::InvalidParameter(
            "make_blobs needs k, per_cluster and d >= 1".into(),
        ));
    }
    if separation <= 0.0 || spread <= 0.0 {
        return Err(Error::InvalidParameter(
            "make_blobs needs separation > 0 and spread > 0".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // A box whose volume comfortably holds k separated balls; grows on failure.
    let mut half_width = separation * (k as f64).powf(1.0 / d as f64).max(1.0);
    let mut centers: Vec<f64> = Vec::with_capacity(k * d);
    let mut failures = 0usize;
    while centers.len() < k * d {
        let candidate: Vec<f64> = (0..d)
            .map(|_| rng.random_range(-half_width..=half_width))
            .collect();
        let far_enough = centers.chunks_exact(d).all(|c| {
            c.iter()
                .zip(&candidate)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                >= separation * separation
        });
        if far_enough {
            centers.extend(candidate);
        } else {
            failures += 1;
            if failures % 64 == 0 {
                half_width *= 1.5;
            }
        }
    }

    let mut values = Vec::with_capacity(k * per_cluster * d);
    let mut labels = Vec::with_capacity(k * per_cluster);
    for c in 0..k {
        for _ in 0..per_cluster {
            for j in 0..d {
                let z: f64 = rng.sample(StandardNormal);
                values.push(centers[c * d + j] + spread * z);
            }
            labels.push(c);
        }
    }
    let data = DataMatrix::new(k * per_cluster, d, values, Some(labels), "blobs")?;
    Ok((data, centers))
}

pub fn make_blobs(
    k: usize,
    per_cluster: usize,
    d: usize,
    separation: f64,
    spread: f64,
    seed: u64,
) -> Result<DataMatrix> {
    make_blobs_with_centers(k, per_cluster, d, separation, spread, seed).map(|(data, _)| data)
}

/// Distinct label counts, ordered by label.
pub fn label_histogram(labels: &[usize]) -> BTreeMap<usize, usize> {
    let mut hist = BTreeMap::new();
    for &l in labels {
        *hist.entry(l).or_insert(0) += 1;
    }
    hist
}
