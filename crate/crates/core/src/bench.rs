//! Benchmark grids (datasets × detectors × seeds), the per-cell AUC report
//! and the rank-statistics block computed from it.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dataset::{fmt_real, read_text, Dataset};
use crate::detector::{csv_body, fit_detector, load_dataset, parse_cell, DetectorSpec};
use crate::error::{Error, Result};
use crate::stats::{friedman_statistic, nemenyi_cd, pairwise_significance, roc_auc, RankTable};
use crate::synthgen::{gen_synthetic, sweep_specs, SweepAxis, SynthSpec};

pub const REPORT_HEADER: &str = "dataset,algorithm,seed,auc,seconds";
/// Studentized-range constants for k = 12 at α = 0.10 and 0.05.
pub const DEFAULT_Q_ALPHA: [f64; 2] = [3.030, 3.268];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetSource {
    Path(PathBuf),
    Synth(SynthSpec),
    Sweep { axis: SweepAxis, base: SynthSpec },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchGrid {
    pub datasets: Vec<DatasetSource>,
    pub detectors: Vec<DetectorSpec>,
    pub seeds: Vec<u64>,
    #[serde(default = "default_q")]
    pub q_alpha: Vec<f64>,
    /// Friedman critical value printed next to the statistic, if given.
    #[serde(default)]
    pub chi2_critical: Option<f64>,
}

fn default_q() -> Vec<f64> {
    DEFAULT_Q_ALPHA.to_vec()
}

impl BenchGrid {
    pub fn load(path: &Path) -> Result<Self> {
        let grid: BenchGrid = serde_json::from_str(&read_text(path)?)?;
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if self.datasets.is_empty() || self.detectors.is_empty() || self.seeds.is_empty() {
            return Err(Error::invalid("grid needs datasets, detectors and seeds"));
        }
        let mut names: Vec<String> = self.detectors.iter().map(DetectorSpec::label).collect();
        names.sort();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid(
                "detector names must be unique; set `name` to tell them apart",
            ));
        }
        let mut seeds = self.seeds.clone();
        seeds.sort_unstable();
        if seeds.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("seeds must be unique"));
        }
        self.detectors.iter().try_for_each(DetectorSpec::validate)
    }
}

/// A dataset waiting to be materialized.
#[derive(Debug, Clone)]
pub enum DatasetJob {
    Path(PathBuf),
    Synth(SynthSpec),
}

impl DatasetJob {
    pub fn id(&self) -> String {
        match self {
            DatasetJob::Path(p) => p.display().to_string(),
            DatasetJob::Synth(s) => format!("{}-n{}-d{}-r{}-s{}", s.family, s.n, s.d, s.irrelevant_ratio, s.seed),
        }
    }

    pub fn load(&self) -> Result<Dataset> {
        match self {
            DatasetJob::Path(p) => load_dataset(p, None),
            DatasetJob::Synth(s) => gen_synthetic(s),
        }
    }
}

pub fn expand_datasets(sources: &[DatasetSource]) -> Vec<DatasetJob> {
    sources
        .iter()
        .flat_map(|s| match s {
            DatasetSource::Path(p) => vec![DatasetJob::Path(p.clone())],
            DatasetSource::Synth(spec) => vec![DatasetJob::Synth(spec.clone())],
            DatasetSource::Sweep { axis, base } => {
                sweep_specs(*axis, base).into_iter().map(DatasetJob::Synth).collect()
            }
        })
        .collect()
}

/// One `(dataset, algorithm, seed)` cell; `auc` is `None` when the cell failed.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub dataset: String,
    pub algorithm: String,
    pub seed: u64,
    pub auc: Option<f64>,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkReport {
    pub rows: Vec<ReportRow>,
}

impl BenchmarkReport {
    pub fn to_csv(&self) -> String {
        let mut out = format!("{REPORT_HEADER}\n");
        for r in &self.rows {
            let auc = r.auc.map(fmt_real).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{auc},{}",
                r.dataset,
                r.algorithm,
                r.seed,
                fmt_real(r.seconds)
            );
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        let rows = csv_body(text, REPORT_HEADER)?
            .into_iter()
            .map(|(line, c)| {
                let row = ReportRow {
                    dataset: c[0].to_string(),
                    algorithm: c[1].to_string(),
                    seed: c[2].parse().map_err(|_| Error::Parse {
                        path: "<report>".into(),
                        line,
                        column: 3,
                        message: format!("bad seed `{}`", c[2]),
                    })?,
                    auc: if c[3].is_empty() {
                        None
                    } else {
                        Some(parse_cell(c[3], line, 3)?)
                    },
                    seconds: parse_cell(c[4], line, 4)?,
                };
                if !seen.insert((row.dataset.clone(), row.algorithm.clone(), row.seed)) {
                    return Err(Error::invalid(format!(
                        "line {line}: duplicate (dataset, algorithm, seed) triple"
                    )));
                }
                Ok(row)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { rows })
    }

    /// Datasets and algorithms in first-appearance order, with the
    /// seed-averaged AUC per cell (missing when every seed failed).
    pub fn auc_matrix(&self) -> (Vec<String>, Vec<String>, Vec<Vec<Option<f64>>>) {
        let mut datasets: Vec<String> = Vec::new();
        let mut algorithms: Vec<String> = Vec::new();
        let mut sums: BTreeMap<(usize, usize), (f64, usize)> = BTreeMap::new();
        for r in &self.rows {
            let di = position_or_push(&mut datasets, &r.dataset);
            let ai = position_or_push(&mut algorithms, &r.algorithm);
            if let Some(a) = r.auc {
                let e = sums.entry((di, ai)).or_insert((0.0, 0));
                e.0 += a;
                e.1 += 1;
            }
        }
        let matrix = (0..datasets.len())
            .map(|di| {
                (0..algorithms.len())
                    .map(|ai| sums.get(&(di, ai)).map(|(s, c)| s / *c as f64))
                    .collect()
            })
            .collect();
        (datasets, algorithms, matrix)
    }
}

fn position_or_push(list: &mut Vec<String>, item: &str) -> usize {
    list.iter().position(|x| x == item).unwrap_or_else(|| {
        list.push(item.to_string());
        list.len() - 1
    })
}

/// Runs every cell. Failures become rows with a missing AUC and a warning
/// on `warn`; an error is returned only when every cell fails.
pub fn run_bench(grid: &BenchGrid, mut warn: impl FnMut(&str)) -> Result<BenchmarkReport> {
    grid.validate()?;
    let mut rows = Vec::new();
    for job in expand_datasets(&grid.datasets) {
        let id = job.id();
        let data = job.load();
        for spec in &grid.detectors {
            for &seed in &grid.seeds {
                let start = Instant::now();
                let auc = data.as_ref().map_err(|e| Error::invalid(e.to_string())).and_then(|ds| {
                    let labels = ds
                        .labels
                        .as_deref()
                        .ok_or_else(|| Error::invalid("dataset has no labels"))?;
                    roc_auc(&fit_detector(spec, ds, seed)?.scores, labels)
                });
                let seconds = start.elapsed().as_secs_f64();
                if let Err(e) = &auc {
                    warn(&format!("{id} / {} / seed {seed}: {e}", spec.label()));
                }
                rows.push(ReportRow {
                    dataset: id.clone(),
                    algorithm: spec.label(),
                    seed,
                    auc: auc.ok(),
                    seconds,
                });
            }
        }
    }
    if rows.iter().all(|r| r.auc.is_none()) {
        return Err(Error::invalid("every benchmark cell failed"));
    }
    Ok(BenchmarkReport { rows })
}

/// Rank statistics over an AUC matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct StatsBlock {
    pub algorithms: Vec<String>,
    pub datasets_total: usize,
    pub datasets_ranked: usize,
    pub avg_ranks: Vec<f64>,
    /// `(statistic, bracket)`; needs at least two ranked datasets.
    pub friedman: Option<(f64, f64)>,
    pub chi2_critical: Option<f64>,
    /// `(q_alpha, CD, pairwise flags)` per requested constant.
    pub nemenyi: Vec<(f64, f64, Vec<Vec<crate::stats::PairFlag>>)>,
}

impl StatsBlock {
    /// `None` when fewer than two algorithms are present.
    pub fn from_matrix(
        algorithms: Vec<String>,
        auc: Vec<Vec<Option<f64>>>,
        q_alpha: &[f64],
        chi2_critical: Option<f64>,
    ) -> Result<Option<Self>> {
        if algorithms.len() < 2 {
            return Ok(None);
        }
        let datasets_total = auc.len();
        let table = RankTable::new(auc)?;
        Self::from_ranks(
            algorithms,
            table.avg_ranks.clone(),
            table.complete_count(),
            datasets_total,
            q_alpha,
            chi2_critical,
        )
        .map(Some)
    }

    pub fn from_ranks(
        algorithms: Vec<String>,
        avg_ranks: Vec<f64>,
        datasets_ranked: usize,
        datasets_total: usize,
        q_alpha: &[f64],
        chi2_critical: Option<f64>,
    ) -> Result<Self> {
        let k = avg_ranks.len();
        if algorithms.len() != k {
            return Err(Error::DimensionMismatch {
                context: "algorithm names",
                expected: k,
                got: algorithms.len(),
            });
        }
        let friedman = (datasets_ranked >= 2)
            .then(|| friedman_statistic(&avg_ranks, datasets_ranked))
            .transpose()?
            .map(|f| (f.statistic, f.bracket));
        let nemenyi = q_alpha
            .iter()
            .map(|&q| {
                let cd = nemenyi_cd(k, datasets_ranked, q)?;
                Ok((q, cd, pairwise_significance(&avg_ranks, cd)?))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            algorithms,
            datasets_total,
            datasets_ranked,
            avg_ranks,
            friedman,
            chi2_critical,
            nemenyi,
        })
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "# datasets ranked: {} of {}",
            self.datasets_ranked, self.datasets_total
        );
        let _ = writeln!(out, "algorithm,avg_rank");
        for (a, r) in self.algorithms.iter().zip(&self.avg_ranks) {
            let _ = writeln!(out, "{a},{r:.4}");
        }
        if let Some((stat, bracket)) = self.friedman {
            let _ = writeln!(out, "friedman_statistic,{stat:.4}");
            let _ = writeln!(out, "friedman_bracket,{bracket:.4}");
            let _ = writeln!(
                out,
                "# note: the statistic is 12N/(k(k+1)) times the bracket sum(R_j^2) - k(k+1)^2/4; \
                 published tables sometimes quote the bracket alone, so both are listed"
            );
            if let Some(crit) = self.chi2_critical {
                let verdict = if stat > crit { "reject" } else { "retain" };
                let _ = writeln!(out, "friedman_critical,{crit:.4},{verdict}");
            }
        }
        for (q, cd, flags) in &self.nemenyi {
            let _ = writeln!(out, "nemenyi_cd,q={q},{cd:.4}");
            for (i, row) in flags.iter().enumerate() {
                for (j, f) in row.iter().enumerate().skip(i + 1) {
                    if f.significant {
                        let (better, worse) = if f.direction > 0 { (i, j) } else { (j, i) };
                        let _ = writeln!(
                            out,
                            "significant,q={q},{},{}",
                            self.algorithms[better], self.algorithms[worse]
                        );
                    }
                }
            }
        }
        out
    }
}

/// Stats block for a report; `None` with fewer than two algorithms.
pub fn report_stats(
    report: &BenchmarkReport,
    q_alpha: &[f64],
    chi2_critical: Option<f64>,
) -> Result<Option<StatsBlock>> {
    let (_, algorithms, matrix) = report.auc_matrix();
    StatsBlock::from_matrix(algorithms, matrix, q_alpha, chi2_critical)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(d: &str, a: &str, seed: u64, auc: Option<f64>) -> ReportRow {
        ReportRow {
            dataset: d.into(),
            algorithm: a.into(),
            seed,
            auc,
            seconds: 0.25,
        }
    }

    #[test]
    fn report_csv_round_trip() {
        let rep = BenchmarkReport {
            rows: vec![row("a", "knn", 0, Some(0.9)), row("a", "mo-gaal", 0, None)],
        };
        let text = rep.to_csv();
        assert!(text.contains("a,mo-gaal,0,,"));
        assert_eq!(BenchmarkReport::from_csv(&text).unwrap(), rep);
    }

    #[test]
    fn duplicate_triples_rejected() {
        let text = format!("{REPORT_HEADER}\na,knn,0,0.5,1\na,knn,0,0.6,1\n");
        assert!(BenchmarkReport::from_csv(&text).is_err());
    }

    #[test]
    fn matrix_averages_seeds_and_keeps_missing() {
        let rep = BenchmarkReport {
            rows: vec![
                row("a", "x", 0, Some(0.8)),
                row("a", "x", 1, Some(0.6)),
                row("a", "y", 0, None),
                row("b", "x", 0, Some(0.5)),
                row("b", "y", 0, Some(0.9)),
            ],
        };
        let (ds, algs, m) = rep.auc_matrix();
        assert_eq!(ds, vec!["a", "b"]);
        assert_eq!(algs, vec!["x", "y"]);
        assert!((m[0][0].unwrap() - 0.7).abs() < 1e-15);
        assert_eq!(m[0][1], None);
        let stats = report_stats(&rep, &[2.0], None).unwrap().unwrap();
        assert_eq!(stats.datasets_ranked, 1);
        assert_eq!(stats.avg_ranks, vec![2.0, 1.0]);
        assert!(stats.friedman.is_none());
    }

    #[test]
    fn single_algorithm_has_no_stats() {
        let rep = BenchmarkReport {
            rows: (0..3).map(|s| row("a", "x", s, Some(0.7))).collect(),
        };
        assert!(report_stats(&rep, &DEFAULT_Q_ALPHA, None).unwrap().is_none());
    }

    #[test]
    fn render_lists_both_friedman_values() {
        let names = (0..3).map(|i| format!("a{i}")).collect();
        let s = StatsBlock::from_ranks(names, vec![1.0, 2.0, 3.0], 10, 10, &[2.343], Some(5.99)).unwrap();
        let text = s.render();
        assert!(text.contains("friedman_statistic,20.0000"));
        assert!(text.contains("friedman_bracket,2.0000"));
        assert!(text.contains("friedman_critical,5.9900,reject"));
        assert!(text.contains("significant,q=2.343,a0,a2"));
        assert!(!text.contains("significant,q=2.343,a0,a1"));
    }
}
