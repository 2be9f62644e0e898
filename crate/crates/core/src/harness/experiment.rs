//! Experiment orchestration: split, classify, shift, quantify, score.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::harness::config::{ExperimentConfig, ShiftConfig};
use crate::harness::metrics::{ae, rae};
use crate::quantifiers::quantify_batch;
use crate::shift::{
    derive_seed, label_histogram, sample_bfs, sample_pps, sample_rw, uniform_split, PpsParams, ShiftSample,
    StructuralParams, WalkParams,
};

/// One scored (sample, quantifier) pair. Failed rows carry `error` and no scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub repetition: usize,
    pub dataset: String,
    pub shift: String,
    pub classifier: String,
    pub quantifier: String,
    pub sample: usize,
    pub sample_size: usize,
    pub ae: Option<f64>,
    pub rae: Option<f64>,
    pub flags: String,
    pub error: String,
}

fn generate_samples(shift: &ShiftConfig, g: &Graph, pool: &[usize], seed: u64) -> Result<Vec<ShiftSample>> {
    let k = g.num_classes();
    match *shift {
        ShiftConfig::Pps {
            num_dists,
            sample_size,
            zipf_exponent,
            ..
        } => {
            let labeled = g.labeled(pool)?;
            let params = PpsParams {
                num_dists: num_dists.unwrap_or(10 * k),
                sample_size,
                zipf_exponent,
            };
            sample_pps(&labeled, k, params, seed)
        }
        ShiftConfig::Bfs {
            seeds_per_label,
            sample_size,
            ..
        } => sample_bfs(
            g,
            pool,
            StructuralParams {
                seeds_per_label,
                sample_size,
            },
            seed,
        ),
        ShiftConfig::Rw {
            seeds_per_label,
            sample_size,
            walk_len,
            alpha,
            ..
        } => sample_rw(
            g,
            pool,
            StructuralParams {
                seeds_per_label,
                sample_size,
            },
            WalkParams { walk_len, alpha },
            seed,
        ),
    }
}

struct RowKey<'a> {
    repetition: usize,
    dataset: &'a str,
    shift: &'a str,
    classifier: &'a str,
}

impl RowKey<'_> {
    fn failed(&self, quantifier: &str, sample: usize, sample_size: usize, error: String) -> ResultRow {
        ResultRow {
            repetition: self.repetition,
            dataset: self.dataset.to_string(),
            shift: self.shift.to_string(),
            classifier: self.classifier.to_string(),
            quantifier: quantifier.to_string(),
            sample,
            sample_size,
            ae: None,
            rae: None,
            flags: String::new(),
            error,
        }
    }
}

/// Runs the full protocol and returns rows ordered by
/// (repetition, classifier, shift, sample, quantifier).
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    cfg.validate()?;
    let g = cfg.build_graph()?;
    if g.labels().is_none() {
        return Err(Error::Config("experiment graph must be labeled".into()));
    }
    let k = g.num_classes();
    let quantifier_names: Vec<String> = cfg.quantifiers.iter().map(|q| q.display_name()).collect();
    let mut rows = Vec::new();

    for rep in 0..cfg.repetitions {
        let rep_seed = derive_seed(cfg.seed, rep as u64);
        let split = uniform_split(&g, cfg.split.fractions, derive_seed(rep_seed, 0))?;
        let classifier_train = g.labeled(&split.classifier_train)?;
        let quantifier_train = g.labeled(&split.quantifier_train)?;

        // Samples depend only on the repetition and shift, never on the classifier.
        let shift_samples: Vec<(String, Result<Vec<ShiftSample>>)> = cfg
            .shifts
            .iter()
            .enumerate()
            .map(|(i, s)| (s.name(), generate_samples(s, &g, &split.test, derive_seed(rep_seed, 1 + i as u64))))
            .collect();

        for classifier in &cfg.classifiers {
            let classifier_name = classifier.name();
            let preds = classifier.predict(&g, &classifier_train, k);
            for (shift_name, samples) in &shift_samples {
                let key = RowKey {
                    repetition: rep,
                    dataset: &cfg.dataset,
                    shift: shift_name,
                    classifier: &classifier_name,
                };
                let (samples, preds) = match (samples, &preds) {
                    (Ok(s), Ok(p)) => (s, p),
                    (Err(e), _) | (_, Err(e)) => {
                        for name in &quantifier_names {
                            rows.push(key.failed(name, 0, 0, e.to_string()));
                        }
                        continue;
                    }
                };
                let vertex_lists: Vec<Vec<usize>> = samples.iter().map(|s| s.vertices.clone()).collect();
                let per_quantifier: Vec<Result<Vec<Result<_>>>> = cfg
                    .quantifiers
                    .iter()
                    .map(|q| quantify_batch(q, &g, &quantifier_train, &vertex_lists, preds))
                    .collect();
                for (j, sample) in samples.iter().enumerate() {
                    let truth = label_histogram(sample.vertices.iter().map(|&v| g.label(v).unwrap()), k);
                    debug_assert_eq!(truth, sample.true_prev);
                    let size = sample.vertices.len();
                    for (name, outcome) in quantifier_names.iter().zip(&per_quantifier) {
                        let estimate = match outcome {
                            Err(e) => Err(e),
                            Ok(batch) => batch[j].as_ref(),
                        };
                        let row = match estimate.map_err(|e| e.to_string()).and_then(|est| {
                            let a = ae(&truth, &est.q).map_err(|e| e.to_string())?;
                            let r = rae(&truth, &est.q, size.max(1)).map_err(|e| e.to_string())?;
                            Ok((a, r, est.diagnostics.flags()))
                        }) {
                            Ok((a, r, flags)) => ResultRow {
                                repetition: rep,
                                dataset: cfg.dataset.clone(),
                                shift: shift_name.clone(),
                                classifier: classifier_name.clone(),
                                quantifier: name.clone(),
                                sample: j,
                                sample_size: size,
                                ae: Some(a),
                                rae: Some(r),
                                flags: match (sample.exhausted, flags.is_empty()) {
                                    (true, true) => "exhausted".to_string(),
                                    (true, false) => format!("{flags};exhausted"),
                                    _ => flags,
                                },
                                error: String::new(),
                            },
                            Err(msg) => key.failed(name, j, size, msg),
                        };
                        rows.push(row);
                    }
                }
            }
        }
    }
    Ok(rows)
}

pub fn write_rows<W: Write>(writer: W, rows: &[ResultRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

pub fn write_rows_to(path: &Path, rows: &[ResultRow]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_rows(file, rows)
}

pub fn read_rows(path: &Path) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}
