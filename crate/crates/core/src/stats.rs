//! ROC AUC, cross-dataset average ranks, the Friedman statistic and the
//! Nemenyi critical difference.
//!
//! Scores follow the "higher is more anomalous" convention and labels use
//! 1 for outliers.

use crate::error::{Error, Result};

/// Rank-based (Mann–Whitney) ROC AUC. Tied scores get averaged ranks, which
/// gives each tied outlier/normal pair half credit; the result equals the
/// trapezoidal area under the ROC curve.
pub fn roc_auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            context: "roc_auc labels",
            expected: scores.len(),
            got: labels.len(),
        });
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::invalid("roc_auc: NaN score"));
    }
    let n_pos = labels.iter().filter(|&&l| l == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::invalid(format!(
            "roc_auc needs both classes, got {n_pos} outliers and {n_neg} normals"
        )));
    }
    let ranks = average_ranks_ascending(scores);
    let rank_sum: f64 = ranks.iter().zip(labels).filter(|(_, &l)| l == 1).map(|(r, _)| r).sum();
    let u = rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

/// 1-based ranks in ascending order of `values`, ties averaged.
fn average_ranks_ascending(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        // positions i..j (0-based) share ranks i+1..=j
        let avg = (i + 1 + j) as f64 / 2.0;
        for &idx in &order[i..j] {
            ranks[idx] = avg;
        }
        i = j;
    }
    ranks
}

/// Ranks within one row, 1 = highest AUC, ties averaged.
pub fn rank_row(aucs: &[f64]) -> Vec<f64> {
    let negated: Vec<f64> = aucs.iter().map(|v| -v).collect();
    average_ranks_ascending(&negated)
}

/// AUC matrix (datasets × algorithms) with missing cells.
#[derive(Debug, Clone, PartialEq)]
pub struct RankTable {
    pub auc: Vec<Vec<Option<f64>>>,
    /// Per complete row, in the same order as `complete_rows`.
    pub ranks: Vec<Vec<f64>>,
    pub complete_rows: Vec<usize>,
    pub avg_ranks: Vec<f64>,
}

impl RankTable {
    pub fn new(auc: Vec<Vec<Option<f64>>>) -> Result<Self> {
        let k = auc.first().map_or(0, Vec::len);
        if k == 0 {
            return Err(Error::invalid("rank table needs at least one algorithm"));
        }
        if auc.iter().any(|r| r.len() != k) {
            return Err(Error::invalid("rank table rows must have equal length"));
        }
        let mut ranks = Vec::new();
        let mut complete_rows = Vec::new();
        for (i, row) in auc.iter().enumerate() {
            let values: Option<Vec<f64>> = row.iter().map(|c| c.filter(|v| !v.is_nan())).collect();
            if let Some(values) = values {
                ranks.push(rank_row(&values));
                complete_rows.push(i);
            }
        }
        if ranks.is_empty() {
            return Err(Error::invalid("no dataset has results for every algorithm"));
        }
        let n = ranks.len() as f64;
        let avg_ranks = (0..k).map(|j| ranks.iter().map(|r| r[j]).sum::<f64>() / n).collect();
        Ok(Self {
            auc,
            ranks,
            complete_rows,
            avg_ranks,
        })
    }

    pub fn algorithms(&self) -> usize {
        self.avg_ranks.len()
    }

    /// Number of rows that entered the average ranks.
    pub fn complete_count(&self) -> usize {
        self.complete_rows.len()
    }
}

/// Average rank per algorithm over the complete rows of `auc`.
pub fn average_ranks(auc: &[Vec<Option<f64>>]) -> Result<Vec<f64>> {
    Ok(RankTable::new(auc.to_vec())?.avg_ranks)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Friedman {
    /// `12N / (k(k+1)) · bracket`
    pub statistic: f64,
    /// `Σ R_j² − k(k+1)²/4`
    pub bracket: f64,
}

pub fn friedman_statistic(avg_ranks: &[f64], n_datasets: usize) -> Result<Friedman> {
    let k = avg_ranks.len();
    if k < 2 || n_datasets < 2 {
        return Err(Error::invalid(format!(
            "Friedman statistic needs k ≥ 2 and N ≥ 2, got k = {k}, N = {n_datasets}"
        )));
    }
    let kf = k as f64;
    let sum_sq: f64 = avg_ranks.iter().map(|r| r * r).sum();
    let bracket = sum_sq - kf * (kf + 1.0).powi(2) / 4.0;
    let statistic = 12.0 * n_datasets as f64 / (kf * (kf + 1.0)) * bracket;
    Ok(Friedman { statistic, bracket })
}

/// `CD = q_α · sqrt(k(k+1) / (6N))`
pub fn nemenyi_cd(k: usize, n_datasets: usize, q_alpha: f64) -> Result<f64> {
    if k < 2 || n_datasets < 1 || q_alpha.is_nan() || q_alpha <= 0.0 {
        return Err(Error::invalid("Nemenyi CD needs k ≥ 2, N ≥ 1, q_alpha > 0"));
    }
    let kf = k as f64;
    Ok(q_alpha * (kf * (kf + 1.0) / (6.0 * n_datasets as f64)).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairFlag {
    pub significant: bool,
    /// +1 when the row algorithm has the better (lower) rank, −1 when worse.
    pub direction: i8,
}

/// Flag `(i, j)` is significant iff `|R_i − R_j| > cd`.
pub fn pairwise_significance(avg_ranks: &[f64], cd: f64) -> Result<Vec<Vec<PairFlag>>> {
    if cd.is_nan() || cd <= 0.0 {
        return Err(Error::invalid("critical difference must be positive"));
    }
    Ok(avg_ranks
        .iter()
        .map(|ri| {
            avg_ranks
                .iter()
                .map(|rj| {
                    let diff = rj - ri;
                    PairFlag {
                        significant: diff.abs() > cd,
                        direction: if diff > 0.0 {
                            1
                        } else if diff < 0.0 {
                            -1
                        } else {
                            0
                        },
                    }
                })
                .collect()
        })
        .collect())
}
