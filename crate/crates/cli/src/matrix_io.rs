//! Text format for dense symmetric matrices: line 1 holds the order `n`,
//! followed by `n` rows of `n` whitespace-separated values. Hand-writable
//! for fixtures; symmetry is enforced on read (worst asymmetry above 1e-8
//! is an error, below it the triangles are averaged).

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use spca_core::covariance::CovarianceMatrix;
use spca_core::mat::SymMat;

use crate::{Error, Result};

const SYMMETRY_TOL: f64 = 1e-8;

pub fn write_matrix(path: impl AsRef<Path>, m: &SymMat) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::file(path, e.to_string()))?;
    let mut out = BufWriter::new(file);
    let n = m.order();
    writeln!(out, "{n}")?;
    for i in 0..n {
        let row: Vec<String> = (0..n).map(|j| format!("{}", m.get(i, j))).collect();
        writeln!(out, "{}", row.join(" "))?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a matrix file as a covariance with feature ids `1..=n`.
pub fn read_covariance(path: impl AsRef<Path>) -> Result<CovarianceMatrix> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::file(path, e.to_string()))?;
    let mut lines = BufReader::new(file).lines();

    let first = lines
        .next()
        .ok_or_else(|| Error::format(path, 1, "missing order line"))??;
    let n: usize = first
        .trim()
        .parse()
        .map_err(|_| Error::format(path, 1, format!("invalid order: {:?}", first.trim())))?;
    if n == 0 {
        return Err(Error::format(path, 1, "order must be positive"));
    }

    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n);
    for k in 0..n {
        let line_no = k as u64 + 2;
        let line = lines
            .next()
            .ok_or_else(|| Error::format(path, line_no, "missing matrix row"))??;
        let row: std::result::Result<Vec<f64>, _> = line
            .split_ascii_whitespace()
            .map(|tok| tok.parse::<f64>())
            .collect();
        let row =
            row.map_err(|_| Error::format(path, line_no, "invalid value in matrix row"))?;
        if row.len() != n {
            return Err(Error::format(
                path,
                line_no,
                format!("expected {n} values, found {}", row.len()),
            ));
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::format(path, line_no, "non-finite value"));
        }
        rows.push(row);
    }
    for extra in lines {
        let extra = extra?;
        if !extra.trim().is_empty() {
            return Err(Error::format(path, n as u64 + 2, "trailing content after matrix"));
        }
    }

    let asym = SymMat::max_asymmetry(&rows);
    if asym > SYMMETRY_TOL {
        return Err(Error::file(
            path,
            format!("matrix is not symmetric (worst asymmetry {asym:e})"),
        ));
    }
    let mat = SymMat::from_rows(&rows)?;
    Ok(CovarianceMatrix::synthetic(mat)?)
}

/// Sidecar metadata written next to generated matrices.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SynthMeta {
    pub model: String,
    pub n: usize,
    pub m: usize,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub support_fraction: Option<f64>,
    /// Planted support as 1-based feature ids; empty for models without one.
    pub true_support: Vec<u32>,
}

pub fn meta_path(matrix_path: &Path) -> std::path::PathBuf {
    let mut s = matrix_path.as_os_str().to_os_string();
    s.push(".meta.json");
    std::path::PathBuf::from(s)
}

pub fn write_meta(matrix_path: &Path, meta: &SynthMeta) -> Result<()> {
    let path = meta_path(matrix_path);
    let json = serde_json::to_string_pretty(meta).expect("meta serializes");
    std::fs::write(&path, json + "\n").map_err(|e| Error::file(&path, e.to_string()))?;
    Ok(())
}

pub fn read_meta(matrix_path: &Path) -> Result<SynthMeta> {
    let path = meta_path(matrix_path);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::file(&path, e.to_string()))?;
    serde_json::from_str(&text).map_err(|e| Error::file(&path, e.to_string()))
}
