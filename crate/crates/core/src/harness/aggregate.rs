//! Summaries over result rows: means, standard errors, ranks and
//! best-equivalence flags.
//!
//! A block is the set of rows sharing the selected group keys. Within a block
//! quantifiers are ranked by mean error (ties share the mean rank), and a
//! quantifier is flagged best when a one-sided Welch t-test cannot reject
//! that its mean equals the block's best mean at level 0.05.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::harness::experiment::ResultRow;

pub const SIGNIFICANCE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupKey {
    Dataset,
    Shift,
    Classifier,
}

impl GroupKey {
    pub const ALL: [GroupKey; 3] = [GroupKey::Dataset, GroupKey::Shift, GroupKey::Classifier];

    fn of(self, row: &ResultRow) -> &str {
        match self {
            GroupKey::Dataset => &row.dataset,
            GroupKey::Shift => &row.shift,
            GroupKey::Classifier => &row.classifier,
        }
    }
}

impl std::str::FromStr for GroupKey {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "dataset" => Ok(GroupKey::Dataset),
            "shift" => Ok(GroupKey::Shift),
            "classifier" => Ok(GroupKey::Classifier),
            other => Err(Error::Parameter(format!("unknown group key {other:?}"))),
        }
    }
}

/// Mean and standard error of one metric over a group.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricStats {
    pub n: usize,
    pub mean: f64,
    /// Sample variance (n − 1 denominator), 0 for a single observation.
    pub variance: f64,
}

impl MetricStats {
    pub fn from_values(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let variance = if n > 1 {
            values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        Some(Self { n, mean, variance })
    }

    pub fn se(&self) -> f64 {
        (self.variance / self.n as f64).sqrt()
    }
}

/// One-sided Welch test of H1: mean(a) > mean(b). Returns the p-value.
pub fn welch_greater_p(a: &MetricStats, b: &MetricStats) -> f64 {
    let diff = a.mean - b.mean;
    let va = a.variance / a.n as f64;
    let vb = b.variance / b.n as f64;
    let s2 = va + vb;
    if s2 <= 0.0 || a.n < 2 || b.n < 2 {
        // Degenerate spread: decide on the means alone.
        return if diff > 0.0 { 0.0 } else { 1.0 };
    }
    let t = diff / s2.sqrt();
    let df = s2 * s2 / (va * va / (a.n - 1) as f64 + vb * vb / (b.n - 1) as f64);
    match StudentsT::new(0.0, 1.0, df) {
        Ok(dist) => 1.0 - dist.cdf(t),
        Err(_) => {
            if diff > 0.0 {
                0.0
            } else {
                1.0
            }
        }
    }
}

/// Ranks ascending, ties share the mean of the occupied positions.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = rank;
        }
        i = j + 1;
    }
    ranks
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    /// `group` for per-block rows, `average` for average-rank rows.
    pub kind: String,
    pub dataset: String,
    pub shift: String,
    pub classifier: String,
    pub quantifier: String,
    /// Scored rows in the group, or the number of blocks for `average` rows.
    pub n: usize,
    pub failed: usize,
    pub mean_ae: Option<f64>,
    pub se_ae: Option<f64>,
    pub mean_rae: Option<f64>,
    pub se_rae: Option<f64>,
    pub rank_ae: f64,
    pub rank_rae: f64,
    pub best_ae: Option<bool>,
    pub best_rae: Option<bool>,
}

struct Group {
    quantifier: String,
    ae: Vec<f64>,
    rae: Vec<f64>,
    failed: usize,
}

fn field(keys: &[GroupKey], key: GroupKey, block: &[String]) -> String {
    keys.iter()
        .position(|&k| k == key)
        .map(|i| block[i].clone())
        .unwrap_or_else(|| "*".to_string())
}

fn best_flags(stats: &[MetricStats]) -> Vec<bool> {
    let best = stats
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.mean.total_cmp(&b.1.mean).then(a.0.cmp(&b.0)))
        .map(|(i, _)| i);
    let Some(best) = best else { return Vec::new() };
    stats
        .iter()
        .map(|s| welch_greater_p(s, &stats[best]) >= SIGNIFICANCE)
        .collect()
}

/// Summarizes rows per (block, quantifier) and appends one average-rank row
/// per quantifier. Blocks and quantifiers keep their first-appearance order.
/// Groups without any scored row are skipped.
pub fn aggregate(rows: &[ResultRow], keys: &[GroupKey]) -> Result<Vec<SummaryRow>> {
    if rows.is_empty() {
        return Err(Error::Empty("no result rows to aggregate".into()));
    }
    let mut blocks: Vec<(Vec<String>, Vec<Group>)> = Vec::new();
    for row in rows {
        let block: Vec<String> = keys.iter().map(|k| k.of(row).to_string()).collect();
        let bi = match blocks.iter().position(|(b, _)| *b == block) {
            Some(i) => i,
            None => {
                blocks.push((block, Vec::new()));
                blocks.len() - 1
            }
        };
        let groups = &mut blocks[bi].1;
        let gi = match groups.iter().position(|g| g.quantifier == row.quantifier) {
            Some(i) => i,
            None => {
                groups.push(Group {
                    quantifier: row.quantifier.clone(),
                    ae: Vec::new(),
                    rae: Vec::new(),
                    failed: 0,
                });
                groups.len() - 1
            }
        };
        let g = &mut groups[gi];
        match (row.ae, row.rae) {
            (Some(a), Some(r)) if row.error.is_empty() => {
                g.ae.push(a);
                g.rae.push(r);
            }
            _ => g.failed += 1,
        }
    }

    let mut out = Vec::new();
    let mut quantifier_order: Vec<String> = Vec::new();
    let mut rank_sums: Vec<(f64, f64, usize)> = Vec::new();
    for (block, groups) in &blocks {
        let scored: Vec<(&Group, MetricStats, MetricStats)> = groups
            .iter()
            .filter_map(|g| Some((g, MetricStats::from_values(&g.ae)?, MetricStats::from_values(&g.rae)?)))
            .collect();
        if scored.is_empty() {
            continue;
        }
        let ae_stats: Vec<MetricStats> = scored.iter().map(|s| s.1).collect();
        let rae_stats: Vec<MetricStats> = scored.iter().map(|s| s.2).collect();
        let rank_ae = average_ranks(&ae_stats.iter().map(|s| s.mean).collect::<Vec<_>>());
        let rank_rae = average_ranks(&rae_stats.iter().map(|s| s.mean).collect::<Vec<_>>());
        let best_ae = best_flags(&ae_stats);
        let best_rae = best_flags(&rae_stats);
        for (i, (g, a, r)) in scored.iter().enumerate() {
            out.push(SummaryRow {
                kind: "group".into(),
                dataset: field(keys, GroupKey::Dataset, block),
                shift: field(keys, GroupKey::Shift, block),
                classifier: field(keys, GroupKey::Classifier, block),
                quantifier: g.quantifier.clone(),
                n: a.n,
                failed: g.failed,
                mean_ae: Some(a.mean),
                se_ae: Some(a.se()),
                mean_rae: Some(r.mean),
                se_rae: Some(r.se()),
                rank_ae: rank_ae[i],
                rank_rae: rank_rae[i],
                best_ae: Some(best_ae[i]),
                best_rae: Some(best_rae[i]),
            });
            let qi = match quantifier_order.iter().position(|q| *q == g.quantifier) {
                Some(i) => i,
                None => {
                    quantifier_order.push(g.quantifier.clone());
                    rank_sums.push((0.0, 0.0, 0));
                    quantifier_order.len() - 1
                }
            };
            rank_sums[qi].0 += rank_ae[i];
            rank_sums[qi].1 += rank_rae[i];
            rank_sums[qi].2 += 1;
        }
    }
    for (q, (sa, sr, count)) in quantifier_order.into_iter().zip(rank_sums) {
        out.push(SummaryRow {
            kind: "average".into(),
            dataset: "*".into(),
            shift: "*".into(),
            classifier: "*".into(),
            quantifier: q,
            n: count,
            failed: 0,
            mean_ae: None,
            se_ae: None,
            mean_rae: None,
            se_rae: None,
            rank_ae: sa / count as f64,
            rank_rae: sr / count as f64,
            best_ae: None,
            best_rae: None,
        });
    }
    Ok(out)
}

pub fn write_summary<W: Write>(writer: W, rows: &[SummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

pub fn write_summary_to(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_summary(file, rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(shift: &str, quantifier: &str, ae: f64) -> ResultRow {
        ResultRow {
            repetition: 0,
            dataset: "d".into(),
            shift: shift.into(),
            classifier: "ENQ".into(),
            quantifier: quantifier.into(),
            sample: 0,
            sample_size: 100,
            ae: Some(ae),
            rae: Some(2.0 * ae),
            flags: String::new(),
            error: String::new(),
        }
    }

    fn averages(summary: &[SummaryRow]) -> Vec<(String, f64)> {
        summary
            .iter()
            .filter(|r| r.kind == "average")
            .map(|r| (r.quantifier.clone(), r.rank_ae))
            .collect()
    }

    #[test]
    fn tied_ranks_share_mean() {
        assert_eq!(average_ranks(&[0.3, 0.1, 0.3, 0.2]), vec![3.5, 1.0, 3.5, 2.0]);
        assert_eq!(average_ranks(&[1.0, 1.0, 1.0]), vec![2.0, 2.0, 2.0]);
    }

    #[test]
    fn single_quantifier_ranks_first() {
        let rows = vec![row("PPS", "CC", 0.1), row("BFS", "CC", 0.3), row("BFS", "CC", 0.2)];
        let summary = aggregate(&rows, &GroupKey::ALL).unwrap();
        assert!(summary.iter().all(|r| r.rank_ae == 1.0));
        assert!(summary.iter().filter(|r| r.kind == "group").all(|r| r.best_ae == Some(true)));
    }

    #[test]
    fn two_blocks_average_ranks() {
        let rows = vec![
            row("PPS", "A", 0.1),
            row("PPS", "B", 0.2),
            row("BFS", "A", 0.1),
            row("BFS", "B", 0.2),
        ];
        let summary = aggregate(&rows, &GroupKey::ALL).unwrap();
        assert_eq!(averages(&summary), vec![("A".into(), 1.0), ("B".into(), 2.0)]);
    }

    #[test]
    fn identical_samples_both_best() {
        let mut rows = Vec::new();
        for x in [0.1, 0.2, 0.15, 0.3] {
            rows.push(row("PPS", "A", x));
            rows.push(row("PPS", "B", x));
        }
        let summary = aggregate(&rows, &GroupKey::ALL).unwrap();
        let groups: Vec<_> = summary.iter().filter(|r| r.kind == "group").collect();
        assert_eq!(groups.len(), 2);
        assert!(groups.iter().all(|r| r.best_ae == Some(true) && r.rank_ae == 1.5));
    }

    #[test]
    fn clearly_worse_is_not_best() {
        let mut rows = Vec::new();
        for x in [0.10, 0.11, 0.09, 0.10, 0.12] {
            rows.push(row("PPS", "A", x));
            rows.push(row("PPS", "B", x + 0.3));
        }
        let summary = aggregate(&rows, &GroupKey::ALL).unwrap();
        assert_eq!(summary[0].best_ae, Some(true));
        assert_eq!(summary[1].best_ae, Some(false));
        assert!((summary[0].se_ae.unwrap() - 0.005099019513592784).abs() < 1e-12);
    }

    #[test]
    fn welch_matches_reference() {
        // t = 1.5667, df = 6.9808
        let a = MetricStats::from_values(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        let b = MetricStats::from_values(&[2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let p = welch_greater_p(&b, &a);
        assert!((p - 0.08064292814465215).abs() < 1e-9, "p = {p}");
    }

    #[test]
    fn failed_rows_counted_and_empty_rejected() {
        let mut bad = row("PPS", "A", 0.0);
        bad.ae = None;
        bad.rae = None;
        bad.error = "boom".into();
        let summary = aggregate(&[row("PPS", "A", 0.1), bad.clone()], &GroupKey::ALL).unwrap();
        assert_eq!(summary[0].failed, 1);
        assert_eq!(summary[0].n, 1);
        // A group with only failures is skipped.
        let summary = aggregate(&[bad], &GroupKey::ALL).unwrap();
        assert!(summary.is_empty());
        assert!(aggregate(&[], &GroupKey::ALL).is_err());
    }
}
