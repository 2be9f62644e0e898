//! Baseline node classifiers and prediction files.
//!
//! Prediction files hold one row per vertex: either a single integer (hard
//! label) or `K` comma-separated probabilities. Rows whose sum is off by at
//! most `1e-6` are renormalized; larger deviations are rejected.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::PredictionSet;
use crate::graph::Graph;

const RENORMALIZE_TOL: f64 = 1e-6;
const EXACT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClassifierSpec {
    /// Majority label among labeled neighbors.
    Enq,
    LabelProp {
        #[serde(default = "default_iterations")]
        iterations: usize,
        #[serde(default = "default_damping")]
        damping: f64,
    },
    External {
        path: PathBuf,
    },
}

fn default_iterations() -> usize {
    20
}

fn default_damping() -> f64 {
    0.9
}

impl ClassifierSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            ClassifierSpec::LabelProp { damping, .. } if !(*damping > 0.0 && *damping < 1.0) => Err(
                Error::Parameter(format!("label propagation damping must lie in (0, 1), got {damping}")),
            ),
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> String {
        match self {
            ClassifierSpec::Enq => "ENQ".into(),
            ClassifierSpec::LabelProp { .. } => "LP".into(),
            ClassifierSpec::External { path } => path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "external".into()),
        }
    }

    /// Produces predictions for every vertex of `g` from the labeled `train` set.
    pub fn predict(&self, g: &Graph, train: &[(usize, usize)], k: usize) -> Result<PredictionSet> {
        self.validate()?;
        match self {
            ClassifierSpec::Enq => enq_predict(g, train, k),
            ClassifierSpec::LabelProp { iterations, damping } => label_prop_predict(g, train, k, *iterations, *damping),
            ClassifierSpec::External { path } => load_predictions(path, g.n(), k),
        }
    }
}

fn check_train(g: &Graph, train: &[(usize, usize)], k: usize) -> Result<()> {
    if train.is_empty() {
        return Err(Error::Empty("classifier training set".into()));
    }
    for &(v, y) in train {
        g.check_vertex(v)?;
        if y >= k {
            return Err(Error::Validation(format!("training label {y} out of range for {k} classes")));
        }
    }
    Ok(())
}

fn normalize(row: &mut [f64]) {
    let s: f64 = row.iter().sum();
    row.iter_mut().for_each(|x| *x /= s);
}

/// Neighborhood-majority classifier. Each vertex gets the label histogram of
/// its labeled neighbors; vertices without one fall back to the global
/// training histogram.
pub fn enq_predict(g: &Graph, train: &[(usize, usize)], k: usize) -> Result<PredictionSet> {
    check_train(g, train, k)?;
    let mut known: Vec<Option<usize>> = vec![None; g.n()];
    let mut global = vec![0.0; k];
    for &(v, y) in train {
        known[v] = Some(y);
        global[y] += 1.0;
    }
    normalize(&mut global);

    let mut soft = Vec::with_capacity(g.n() * k);
    let mut row = vec![0.0; k];
    for v in 0..g.n() {
        row.fill(0.0);
        for &u in g.neighbors(v) {
            if let Some(y) = known[u] {
                row[y] += 1.0;
            }
        }
        if row.iter().all(|&x| x == 0.0) {
            soft.extend_from_slice(&global);
        } else {
            normalize(&mut row);
            soft.extend_from_slice(&row);
        }
    }
    PredictionSet::from_soft(soft, k)
}

/// Damped label propagation with training vertices clamped to their labels.
pub fn label_prop_predict(
    g: &Graph,
    train: &[(usize, usize)],
    k: usize,
    iterations: usize,
    damping: f64,
) -> Result<PredictionSet> {
    check_train(g, train, k)?;
    if !(damping > 0.0 && damping < 1.0) {
        return Err(Error::Parameter(format!("damping must lie in (0, 1), got {damping}")));
    }
    let n = g.n();
    let mut init = vec![1.0 / k as f64; n * k];
    let mut clamped = vec![false; n];
    for &(v, y) in train {
        let row = &mut init[v * k..(v + 1) * k];
        row.fill(0.0);
        row[y] = 1.0;
        clamped[v] = true;
    }
    let mut cur = init.clone();
    let mut next = vec![0.0; n * k];
    for _ in 0..iterations {
        for v in 0..n {
            let out = &mut next[v * k..(v + 1) * k];
            if clamped[v] {
                out.copy_from_slice(&init[v * k..(v + 1) * k]);
                continue;
            }
            let nbrs = g.neighbors(v);
            out.fill(0.0);
            if nbrs.is_empty() {
                out.copy_from_slice(&cur[v * k..(v + 1) * k]);
            } else {
                for &u in nbrs {
                    for (o, x) in out.iter_mut().zip(&cur[u * k..(u + 1) * k]) {
                        *o += x;
                    }
                }
                let deg = nbrs.len() as f64;
                out.iter_mut().for_each(|o| *o /= deg);
            }
            for (o, i) in out.iter_mut().zip(&init[v * k..(v + 1) * k]) {
                *o = damping * *o + (1.0 - damping) * i;
            }
            normalize(out);
        }
        std::mem::swap(&mut cur, &mut next);
    }
    PredictionSet::from_soft(cur, k)
}

pub fn parse_predictions(text: &str, path: &Path, n: usize, k: usize) -> Result<PredictionSet> {
    let mut hard = Vec::new();
    let mut soft = Vec::new();
    let mut rows = 0;
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        rows += 1;
        let tokens: Vec<&str> = line.split(',').map(str::trim).collect();
        if tokens.len() == 1 && !tokens[0].contains(['.', 'e', 'E']) {
            if !soft.is_empty() {
                return Err(Error::parse(path, line_no, "hard label row in a soft prediction file"));
            }
            let label: usize = tokens[0]
                .parse()
                .map_err(|_| Error::parse(path, line_no, format!("invalid label {:?}", tokens[0])))?;
            if label >= k {
                return Err(Error::parse(path, line_no, format!("label {label} out of range for {k} classes")));
            }
            hard.push(label);
            continue;
        }
        if !hard.is_empty() {
            return Err(Error::parse(path, line_no, "soft row in a hard label file"));
        }
        if tokens.len() != k {
            return Err(Error::parse(path, line_no, format!("expected {k} columns, found {}", tokens.len())));
        }
        let mut row: Vec<f64> = tokens
            .iter()
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|_| Error::parse(path, line_no, format!("invalid probability {t:?}")))
            })
            .collect::<Result<_>>()?;
        if row.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::parse(path, line_no, "probabilities must be finite and non-negative"));
        }
        let s: f64 = row.iter().sum();
        if (s - 1.0).abs() > RENORMALIZE_TOL {
            return Err(Error::parse(path, line_no, format!("row sums to {s}, not 1")));
        }
        if (s - 1.0).abs() > EXACT_TOL {
            normalize(&mut row);
        }
        soft.extend(row);
    }
    if rows != n {
        return Err(Error::Validation(format!("prediction file has {rows} rows for {n} vertices")));
    }
    if soft.is_empty() {
        PredictionSet::from_hard(hard, k)
    } else {
        PredictionSet::from_soft(soft, k)
    }
}

pub fn load_predictions(path: &Path, n: usize, k: usize) -> Result<PredictionSet> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_predictions(&text, path, n, k)
}

/// Soft rows when available, hard labels otherwise.
pub fn format_predictions(preds: &PredictionSet) -> String {
    let mut out = String::new();
    for v in 0..preds.n() {
        match preds.soft_row(v) {
            Some(row) => {
                let cells: Vec<String> = row.iter().map(|x| x.to_string()).collect();
                let _ = writeln!(out, "{}", cells.join(","));
            }
            None => {
                let _ = writeln!(out, "{}", preds.hard(v));
            }
        }
    }
    out
}

pub fn save_predictions(path: &Path, preds: &PredictionSet) -> Result<()> {
    fs::write(path, format_predictions(preds)).map_err(|e| Error::io(path, e))
}
