//! Embedding matrices and their on-disk forms.
//!
//! EMB1 layout, little-endian throughout:
//!
//! | bytes | content |
//! |-------|---------|
//! | 4     | magic `45 4D 42 31` (`"EMB1"`) |
//! | 4     | rows, u32 |
//! | 4     | cols, u32 |
//! | 4·rows·cols | f32 values, row-major |
//!
//! A sidecar JSON manifest carries `{"classes", "labels", "source"}`.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{HalluError, Result};

pub const EMB1_MAGIC: [u8; 4] = [0x45, 0x4D, 0x42, 0x31];
const HEADER_LEN: usize = 12;

/// Sidecar manifest for an EMB1 file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub classes: Vec<String>,
    /// Class index per row.
    pub labels: Vec<usize>,
    #[serde(default)]
    pub source: serde_json::Value,
    /// Inputs the exporter could not read.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub skipped: Vec<String>,
}

/// `emb.bin` → `emb.manifest.json`.
pub fn manifest_path_for(path: &Path) -> PathBuf {
    path.with_extension("manifest.json")
}

/// Labeled rows of embedding vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub classes: Vec<String>,
    pub source: serde_json::Value,
}

impl EmbeddingMatrix {
    pub fn new(rows: Vec<Vec<f64>>, labels: Vec<usize>, classes: Vec<String>) -> Result<Self> {
        let m = Self { rows, labels, classes, source: serde_json::Value::Null };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows.len() != self.labels.len() {
            return Err(HalluError::input(format!(
                "{} rows but {} labels",
                self.rows.len(),
                self.labels.len()
            )));
        }
        let cols = self.cols();
        for (i, r) in self.rows.iter().enumerate() {
            if r.len() != cols {
                return Err(HalluError::input(format!("row {i} has {} columns, expected {cols}", r.len())));
            }
            if r.iter().any(|x| !x.is_finite()) {
                return Err(HalluError::input(format!("row {i} has a non-finite value")));
            }
        }
        if let Some(l) = self.labels.iter().find(|l| **l >= self.classes.len()) {
            return Err(HalluError::input(format!("label {l} outside the {} declared classes", self.classes.len())));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn cols(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    /// Rows of one class, in file order.
    pub fn class_rows(&self, class: usize) -> Vec<&[f64]> {
        self.rows
            .iter()
            .zip(&self.labels)
            .filter(|(_, l)| **l == class)
            .map(|(r, _)| r.as_slice())
            .collect()
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            classes: self.classes.clone(),
            source: self.source.clone(),
        }
    }

    pub fn manifest(&self) -> Manifest {
        Manifest {
            classes: self.classes.clone(),
            labels: self.labels.clone(),
            source: self.source.clone(),
            skipped: Vec::new(),
        }
    }

    /// Read an EMB1 file and its manifest (default: the sidecar next to it).
    pub fn load(path: &Path, manifest: Option<&Path>) -> Result<Self> {
        let (rows, _cols) = read_emb1(path)?;
        let mpath = manifest.map_or_else(|| manifest_path_for(path), Path::to_path_buf);
        let man: Manifest = crate::report::read_json(&mpath)?;
        if man.labels.len() != rows.len() {
            return Err(HalluError::input(format!(
                "manifest has {} labels for {} rows",
                man.labels.len(),
                rows.len()
            )));
        }
        let m = Self { rows, labels: man.labels, classes: man.classes, source: man.source };
        m.validate()?;
        Ok(m)
    }

    /// Write EMB1 plus the sidecar manifest.
    pub fn save(&self, path: &Path) -> Result<()> {
        write_emb1(path, &self.rows)?;
        crate::report::write_json(&manifest_path_for(path), &self.manifest())
    }

    /// CSV with a header row and the class label in the first column.
    /// Classes are indexed in order of first appearance.
    pub fn from_csv(path: &Path) -> Result<Self> {
        let mut reader = csv::Reader::from_path(path).map_err(|e| match e.kind() {
            csv::ErrorKind::Io(io) if io.kind() == std::io::ErrorKind::NotFound => {
                HalluError::MissingArtifact(path.display().to_string())
            }
            _ => HalluError::Csv(e),
        })?;
        let mut classes: Vec<String> = Vec::new();
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for (i, rec) in reader.records().enumerate() {
            let rec = rec?;
            let name = rec.get(0).ok_or_else(|| HalluError::input(format!("row {i} is empty")))?.trim();
            let label = match classes.iter().position(|c| c == name) {
                Some(l) => l,
                None => {
                    classes.push(name.to_string());
                    classes.len() - 1
                }
            };
            let row = rec
                .iter()
                .skip(1)
                .map(|s| s.trim().parse::<f64>().map_err(|_| HalluError::input(format!("row {i}: bad value {s:?}"))))
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
            labels.push(label);
        }
        let mut m = Self::new(rows, labels, classes)?;
        m.source = serde_json::json!({ "csv": path.display().to_string() });
        Ok(m)
    }

    /// Load by extension: `.csv` as CSV, anything else as EMB1.
    pub fn load_any(path: &Path, manifest: Option<&Path>) -> Result<Self> {
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
            Self::from_csv(path)
        } else {
            Self::load(path, manifest)
        }
    }
}

/// Encode rows as EMB1 bytes (values narrowed to f32).
pub fn encode_emb1(rows: &[Vec<f64>]) -> Result<Vec<u8>> {
    let cols = rows.first().map_or(0, Vec::len);
    let n_rows = u32::try_from(rows.len()).map_err(|_| HalluError::input("too many rows for EMB1"))?;
    let n_cols = u32::try_from(cols).map_err(|_| HalluError::input("too many columns for EMB1"))?;
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * rows.len() * cols);
    out.extend_from_slice(&EMB1_MAGIC);
    out.extend_from_slice(&n_rows.to_le_bytes());
    out.extend_from_slice(&n_cols.to_le_bytes());
    for (i, r) in rows.iter().enumerate() {
        if r.len() != cols {
            return Err(HalluError::input(format!("row {i} has {} columns, expected {cols}", r.len())));
        }
        for x in r {
            let v = *x as f32;
            if !v.is_finite() {
                return Err(HalluError::input(format!("row {i} has a value not representable as a finite f32")));
            }
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

/// Decode EMB1 bytes into `(rows, cols)`.
pub fn decode_emb1(bytes: &[u8]) -> Result<(Vec<Vec<f64>>, usize)> {
    if bytes.len() < HEADER_LEN || bytes[..4] != EMB1_MAGIC {
        return Err(HalluError::input("not an EMB1 file (bad magic or short header)"));
    }
    let n_rows = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes")) as usize;
    let n_cols = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
    let expected = n_rows
        .checked_mul(n_cols)
        .and_then(|n| n.checked_mul(4))
        .and_then(|n| n.checked_add(HEADER_LEN))
        .ok_or_else(|| HalluError::input("EMB1 dimensions overflow"))?;
    if bytes.len() != expected {
        return Err(HalluError::input(format!(
            "EMB1 payload is {} bytes, header implies {expected}",
            bytes.len()
        )));
    }
    let mut rows = Vec::with_capacity(n_rows);
    let mut values = bytes[HEADER_LEN..].chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")));
    for i in 0..n_rows {
        let row: Vec<f64> = values.by_ref().take(n_cols).map(f64::from).collect();
        if row.iter().any(|x| !x.is_finite()) {
            return Err(HalluError::input(format!("EMB1 row {i} has a non-finite value")));
        }
        rows.push(row);
    }
    Ok((rows, n_cols))
}

pub fn write_emb1(path: &Path, rows: &[Vec<f64>]) -> Result<()> {
    let bytes = encode_emb1(rows)?;
    let mut w = BufWriter::new(fs::File::create(path)?);
    w.write_all(&bytes)?;
    w.flush()?;
    Ok(())
}

pub fn read_emb1(path: &Path) -> Result<(Vec<Vec<f64>>, usize)> {
    let bytes = fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => HalluError::MissingArtifact(path.display().to_string()),
        _ => HalluError::Io(e),
    })?;
    decode_emb1(&bytes)
}
