//! Feature matrices with optional ground-truth flags, min-max normalization,
//! and the `f0,f1,…,label` CSV format.
//!
//! On disk and throughout the evaluation code, label 1 marks an outlier.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::synthgen::SynthSpec;

/// Where a dataset came from.
#[derive(Debug, Clone, PartialEq)]
pub enum Provenance {
    Synthetic(SynthSpec),
    File(PathBuf),
    InMemory,
}

/// Per-feature min/max captured at fit time so new data is mapped the same way.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl Normalizer {
    pub fn fit(x: &Matrix) -> Self {
        let mut min = vec![f64::INFINITY; x.cols()];
        let mut max = vec![f64::NEG_INFINITY; x.cols()];
        for r in 0..x.rows() {
            for (c, &v) in x.row(r).iter().enumerate() {
                min[c] = min[c].min(v);
                max[c] = max[c].max(v);
            }
        }
        Self { min, max }
    }

    pub fn identity(d: usize) -> Self {
        Self {
            min: vec![0.0; d],
            max: vec![1.0; d],
        }
    }

    pub fn dim(&self) -> usize {
        self.min.len()
    }

    /// `(v − min) / (max − min)`; constant columns map to 0.5.
    pub fn apply(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.dim() {
            return Err(Error::DimensionMismatch {
                context: "normalizer",
                expected: self.dim(),
                got: x.cols(),
            });
        }
        let mut out = x.clone();
        for r in 0..out.rows() {
            for (c, v) in out.row_mut(r).iter_mut().enumerate() {
                let span = self.max[c] - self.min[c];
                *v = if span > 0.0 { (*v - self.min[c]) / span } else { 0.5 };
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Matrix,
    /// 1 = outlier, 0 = normal.
    pub labels: Option<Vec<u8>>,
    pub provenance: Provenance,
    /// Mapping that was applied to the raw features.
    pub normalizer: Normalizer,
}

impl Dataset {
    /// Normalizes `raw` per column and wraps it.
    pub fn from_raw(raw: Matrix, labels: Option<Vec<u8>>, provenance: Provenance) -> Result<Self> {
        if let Some(l) = &labels {
            if l.len() != raw.rows() {
                return Err(Error::DimensionMismatch {
                    context: "labels",
                    expected: raw.rows(),
                    got: l.len(),
                });
            }
            if l.iter().any(|&v| v > 1) {
                return Err(Error::invalid("labels must be 0 or 1"));
            }
        }
        if !raw.is_finite() {
            return Err(Error::invalid("features must be finite"));
        }
        let normalizer = Normalizer::fit(&raw);
        let features = normalizer.apply(&raw)?;
        Ok(Self {
            features,
            labels,
            provenance,
            normalizer,
        })
    }

    pub fn n(&self) -> usize {
        self.features.rows()
    }

    pub fn d(&self) -> usize {
        self.features.cols()
    }

    pub fn outlier_count(&self) -> Option<usize> {
        self.labels.as_ref().map(|l| l.iter().filter(|&&v| v == 1).count())
    }

    /// Re-normalizes the already normalized features.
    pub fn renormalized(&self) -> Result<Self> {
        let normalizer = Normalizer::fit(&self.features);
        Ok(Self {
            features: normalizer.apply(&self.features)?,
            labels: self.labels.clone(),
            provenance: self.provenance.clone(),
            normalizer,
        })
    }

    /// Header `f0,…,f{d-1}[,label]`, reals with 17 significant digits.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        let header: Vec<String> = (0..self.d()).map(|c| format!("f{c}")).collect();
        out.push_str(&header.join(","));
        if self.labels.is_some() {
            out.push_str(",label");
        }
        out.push('\n');
        for r in 0..self.n() {
            for (c, v) in self.features.row(r).iter().enumerate() {
                if c > 0 {
                    out.push(',');
                }
                out.push_str(&fmt_real(*v));
            }
            if let Some(l) = &self.labels {
                let _ = write!(out, ",{}", l[r]);
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv_string())?;
        Ok(())
    }
}

/// 17 significant digits; parses back to the identical `f64`.
pub fn fmt_real(v: f64) -> String {
    format!("{v:.16e}")
}

/// Reads a whole file, naming the path in the error.
pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::invalid(format!("{}: {e}", path.display())))
}

/// Raw (unnormalized) table read from CSV.
#[derive(Debug, Clone)]
pub struct RawTable {
    pub features: Matrix,
    pub labels: Option<Vec<u8>>,
    pub feature_names: Option<Vec<String>>,
}

/// Reads a rectangular numeric CSV. A first line that does not parse as
/// numbers is taken as the header. `label_column` names the 0/1 outlier flag.
pub fn read_csv_raw(path: &Path, label_column: Option<&str>) -> Result<RawTable> {
    let text = read_text(path)?;
    parse_csv(&text, &path.display().to_string(), label_column)
}

pub(crate) fn parse_csv(text: &str, origin: &str, label_column: Option<&str>) -> Result<RawTable> {
    let parse_err = |line: usize, column: usize, message: String| Error::Parse {
        path: origin.to_string(),
        line,
        column,
        message,
    };
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty())
        .peekable();

    let mut header: Option<Vec<String>> = None;
    if let Some((_, first)) = lines.peek() {
        let cells: Vec<&str> = first.split(',').map(str::trim).collect();
        if cells.iter().any(|c| c.parse::<f64>().is_err()) {
            header = Some(cells.iter().map(|c| c.to_string()).collect());
            lines.next();
        }
    }

    let label_idx = match label_column {
        None => None,
        Some(name) => {
            let h = header
                .as_ref()
                .ok_or_else(|| parse_err(1, 0, format!("label column `{name}` requested but file has no header")))?;
            Some(
                h.iter()
                    .position(|c| c == name)
                    .ok_or_else(|| parse_err(1, 0, format!("missing label column `{name}`")))?,
            )
        }
    };

    let mut width = header.as_ref().map(Vec::len);
    let mut data = Vec::new();
    let mut labels = Vec::new();
    let mut rows = 0;
    for (line_no, line) in lines {
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        match width {
            Some(w) if w != cells.len() => {
                return Err(parse_err(
                    line_no,
                    cells.len(),
                    format!("expected {w} columns, found {}", cells.len()),
                ));
            }
            None => width = Some(cells.len()),
            _ => {}
        }
        for (c, cell) in cells.iter().enumerate() {
            let v: f64 = cell
                .parse()
                .map_err(|_| parse_err(line_no, c + 1, format!("non-numeric cell `{cell}`")))?;
            if !v.is_finite() {
                return Err(parse_err(line_no, c + 1, format!("non-finite cell `{cell}`")));
            }
            if Some(c) == label_idx {
                if v != 0.0 && v != 1.0 {
                    return Err(parse_err(
                        line_no,
                        c + 1,
                        format!("label must be 0 or 1, found `{cell}`"),
                    ));
                }
                labels.push(v as u8);
            } else {
                data.push(v);
            }
        }
        rows += 1;
    }
    let width = width.unwrap_or(0);
    let cols = width - usize::from(label_idx.is_some());
    if rows == 0 || cols == 0 {
        return Err(parse_err(1, 0, "no numeric data".into()));
    }
    let feature_names = header.map(|h| {
        h.into_iter()
            .enumerate()
            .filter(|(i, _)| Some(*i) != label_idx)
            .map(|(_, n)| n)
            .collect()
    });
    Ok(RawTable {
        features: Matrix::from_vec(rows, cols, data)?,
        labels: label_idx.map(|_| labels),
        feature_names,
    })
}

/// Loads and min-max normalizes a CSV dataset.
pub fn load_csv(path: &Path, label_column: Option<&str>) -> Result<Dataset> {
    let raw = read_csv_raw(path, label_column)?;
    Dataset::from_raw(raw.features, raw.labels, Provenance::File(path.to_path_buf()))
}
