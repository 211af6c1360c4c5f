//! Run configuration, detector dispatch, the JSON model file and the
//! telemetry / score CSV formats shared by the command-line tool.

use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baselines::{agpo_fit, knn_score, AgpoConfig};
use crate::dataset::{fmt_real, read_csv_raw, read_text, Dataset, Normalizer, Provenance, RawTable};
use crate::error::{Error, Result};
use crate::gaal::{mo_gaal_fit, so_gaal_fit, EpochRecord, GaalConfig};
use crate::matrix::Matrix;
use crate::nn::{DenseLayer, Mlp};

pub const TELEMETRY_HEADER: &str = "epoch,d_loss,g_loss,auc";
pub const SCORES_HEADER: &str = "row_index,score";
/// Column holding the 0/1 outlier flag when a CSV header names it.
pub const LABEL_COLUMN: &str = "label";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DetectorKind {
    MoGaal,
    SoGaal,
    Agpo,
    Knn,
}

impl DetectorKind {
    pub const ALL: [DetectorKind; 4] = [
        DetectorKind::MoGaal,
        DetectorKind::SoGaal,
        DetectorKind::Agpo,
        DetectorKind::Knn,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DetectorKind::MoGaal => "mo-gaal",
            DetectorKind::SoGaal => "so-gaal",
            DetectorKind::Agpo => "agpo",
            DetectorKind::Knn => "knn",
        }
    }
}

impl fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DetectorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DetectorKind::ALL
            .into_iter()
            .find(|d| d.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown detector `{s}`")))
    }
}

/// One detector with its hyperparameters. `knn_k` is required for `knn` and
/// `agpo_epochs` for `agpo`; the GAAL fields always carry defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorSpec {
    /// Display name in reports; defaults to the detector name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub detector: DetectorKind,
    #[serde(flatten)]
    pub gaal: GaalConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub knn_k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agpo_epochs: Option<usize>,
}

impl DetectorSpec {
    pub fn new(detector: DetectorKind) -> Self {
        Self {
            name: None,
            detector,
            gaal: GaalConfig::default(),
            knn_k: (detector == DetectorKind::Knn).then_some(5),
            agpo_epochs: (detector == DetectorKind::Agpo).then_some(AgpoConfig::default().epochs),
        }
    }

    pub fn label(&self) -> String {
        self.name.clone().unwrap_or_else(|| self.detector.to_string())
    }

    pub fn validate(&self) -> Result<()> {
        match self.detector {
            DetectorKind::Knn if self.knn_k.is_none() => Err(Error::invalid("detector knn needs `knn_k`")),
            DetectorKind::Agpo if self.agpo_epochs.is_none() => {
                Err(Error::invalid("detector agpo needs `agpo_epochs`"))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunPaths {
    pub dataset: Option<PathBuf>,
    pub scores: Option<PathBuf>,
    pub telemetry: Option<PathBuf>,
    pub model: Option<PathBuf>,
}

/// Contents of a `fit` config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(flatten)]
    pub spec: DetectorSpec,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub paths: RunPaths,
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

impl RunConfig {
    pub fn new(detector: DetectorKind) -> Self {
        Self {
            spec: DetectorSpec::new(detector),
            seeds: default_seeds(),
            paths: RunPaths::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&read_text(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::invalid("`seeds` must not be empty"));
        }
        self.spec.validate()
    }
}

/// Everything needed to score new rows: normalization plus the scoring network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub detector: DetectorKind,
    pub normalizer: Normalizer,
    /// Discriminator or AGPO classifier, input to output. Empty for kNN.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub layers: Vec<DenseLayer>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub knn_k: Option<usize>,
}

impl ModelFile {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: ModelFile = serde_json::from_str(text)?;
        match model.detector {
            DetectorKind::Knn if model.knn_k.is_none() => Err(Error::invalid("knn model file lacks `knn_k`")),
            DetectorKind::Knn => Ok(model),
            _ => {
                Mlp::new(model.layers.clone())?;
                Ok(model)
            }
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&read_text(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    /// Scores rows that are already normalized.
    pub fn score_normalized(&self, x: &Matrix) -> Result<Vec<f64>> {
        if x.cols() != self.normalizer.dim() {
            return Err(Error::DimensionMismatch {
                context: "model input width",
                expected: self.normalizer.dim(),
                got: x.cols(),
            });
        }
        match self.knn_k {
            Some(k) if self.detector == DetectorKind::Knn => knn_score(x, k),
            _ => {
                let net = Mlp::new(self.layers.clone())?;
                Ok(net.predict(x)?.into_vec().into_iter().map(|p| 1.0 - p).collect())
            }
        }
    }

    /// Applies the stored normalization, then scores.
    pub fn score_raw(&self, raw: &Matrix) -> Result<Vec<f64>> {
        self.score_normalized(&self.normalizer.apply(raw)?)
    }
}

/// Result of fitting one detector on one dataset with one seed.
#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub model: ModelFile,
    pub telemetry: Vec<EpochRecord>,
    /// Scores of the training rows.
    pub scores: Vec<f64>,
}

pub fn fit_detector(spec: &DetectorSpec, data: &Dataset, seed: u64) -> Result<FitOutcome> {
    spec.validate()?;
    let gaal_cfg = GaalConfig {
        seed,
        ..spec.gaal.clone()
    };
    let (layers, telemetry) = match spec.detector {
        DetectorKind::MoGaal => {
            let m = mo_gaal_fit(data, &gaal_cfg)?;
            (m.discriminator.layers().to_vec(), m.telemetry)
        }
        DetectorKind::SoGaal => {
            let m = so_gaal_fit(data, &gaal_cfg)?;
            (m.discriminator.layers().to_vec(), m.telemetry)
        }
        DetectorKind::Agpo => {
            let cfg = AgpoConfig {
                epochs: spec.agpo_epochs.unwrap_or_default(),
                lr: gaal_cfg.lr_d,
                m: gaal_cfg.m,
                seed,
                hidden: gaal_cfg.discriminator_hidden,
                swap_labels: false,
            };
            (agpo_fit(data, &cfg)?.classifier.layers().to_vec(), Vec::new())
        }
        DetectorKind::Knn => (Vec::new(), Vec::new()),
    };
    let model = ModelFile {
        detector: spec.detector,
        normalizer: data.normalizer.clone(),
        layers,
        knn_k: if spec.detector == DetectorKind::Knn {
            spec.knn_k
        } else {
            None
        },
    };
    let scores = model.score_normalized(&data.features)?;
    Ok(FitOutcome {
        model,
        telemetry,
        scores,
    })
}

/// Reads a CSV, using the `label` column as ground truth when the header has one.
pub fn read_table(path: &Path, label_column: Option<&str>) -> Result<RawTable> {
    match label_column {
        Some(name) => read_csv_raw(path, Some(name)),
        None => {
            let text = read_text(path)?;
            let has_label = text
                .lines()
                .next()
                .is_some_and(|h| h.split(',').any(|c| c.trim() == LABEL_COLUMN));
            read_csv_raw(path, has_label.then_some(LABEL_COLUMN))
        }
    }
}

pub fn load_dataset(path: &Path, label_column: Option<&str>) -> Result<Dataset> {
    let t = read_table(path, label_column)?;
    Dataset::from_raw(t.features, t.labels, Provenance::File(path.to_path_buf()))
}

pub fn telemetry_csv(records: &[EpochRecord]) -> String {
    let mut out = format!("{TELEMETRY_HEADER}\n");
    let opt = |v: Option<f64>| v.map(fmt_real).unwrap_or_default();
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            r.epoch,
            fmt_real(r.d_loss),
            opt(r.g_loss),
            opt(r.auc)
        );
    }
    out
}

pub fn parse_telemetry_csv(text: &str) -> Result<Vec<EpochRecord>> {
    let rows = csv_body(text, TELEMETRY_HEADER)?;
    rows.iter()
        .map(|(line, cells)| {
            let opt = |i: usize| -> Result<Option<f64>> {
                if cells[i].is_empty() {
                    Ok(None)
                } else {
                    parse_cell(cells[i], *line, i).map(Some)
                }
            };
            Ok(EpochRecord {
                epoch: cells[0].parse().map_err(|_| cell_error(*line, 0, cells[0]))?,
                d_loss: parse_cell(cells[1], *line, 1)?,
                g_loss: opt(2)?,
                auc: opt(3)?,
            })
        })
        .collect()
}

pub fn scores_csv(scores: &[f64]) -> String {
    let mut out = format!("{SCORES_HEADER}\n");
    for (i, s) in scores.iter().enumerate() {
        let _ = writeln!(out, "{i},{}", fmt_real(*s));
    }
    out
}

pub fn parse_scores_csv(text: &str) -> Result<Vec<f64>> {
    let rows = csv_body(text, SCORES_HEADER)?;
    rows.iter()
        .enumerate()
        .map(|(i, (line, cells))| {
            if cells[0] != i.to_string() {
                return Err(cell_error(*line, 0, cells[0]));
            }
            parse_cell(cells[1], *line, 1)
        })
        .collect()
}

/// Splits a CSV with a fixed header into `(line number, cells)` rows.
pub(crate) fn csv_body<'a>(text: &'a str, header: &str) -> Result<Vec<(usize, Vec<&'a str>)>> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end_matches('\r')));
    match lines.next() {
        Some((_, h)) if h == header => {}
        other => {
            return Err(Error::Parse {
                path: "<csv>".into(),
                line: 1,
                column: 0,
                message: format!("expected header `{header}`, found `{}`", other.map_or("", |o| o.1)),
            })
        }
    }
    let width = header.split(',').count();
    lines
        .filter(|(_, l)| !l.is_empty())
        .map(|(n, l)| {
            let cells: Vec<&str> = l.split(',').collect();
            if cells.len() != width {
                return Err(Error::Parse {
                    path: "<csv>".into(),
                    line: n,
                    column: cells.len(),
                    message: format!("expected {width} columns"),
                });
            }
            Ok((n, cells))
        })
        .collect()
}

pub(crate) fn parse_cell(cell: &str, line: usize, column: usize) -> Result<f64> {
    cell.parse().map_err(|_| cell_error(line, column, cell))
}

fn cell_error(line: usize, column: usize, cell: &str) -> Error {
    Error::Parse {
        path: "<csv>".into(),
        line,
        column: column + 1,
        message: format!("unparsable cell `{cell}`"),
    }
}
