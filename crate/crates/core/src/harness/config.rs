//! TOML experiment configuration.
//!
//! ```toml
//! dataset = "sbm-4"
//! seed = 7
//! repetitions = 2
//! output = "results.csv"
//! quantifiers = ["cc", "acc", "acc+sis"]
//!
//! [graph.sbm]
//! blocks = [100, 100, 100, 100]
//! p_in = 0.06
//! p_out = 0.004
//!
//! [split]
//! fractions = [0.05, 0.15, 0.8]
//!
//! [[classifiers]]
//! kind = "enq"
//!
//! [[shifts]]
//! kind = "rw"
//! ```
//!
//! Quantifiers may be written as method names or as full tables
//! (`{ base = "acc", kernel_q = { kind = "sp", gamma = 3.0 } }`). Relative
//! file paths are resolved against the directory of the config file.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::classifiers::ClassifierSpec;
use crate::error::{Error, Result};
use crate::graph::{load_graph, Graph};
use crate::quantifiers::QuantifierSpec;
use crate::shift::{
    derive_seed, generate_sbm, DEFAULT_SAMPLE_SIZE, DEFAULT_SEEDS_PER_LABEL, DEFAULT_WALK_ALPHA, DEFAULT_WALK_LEN,
    DEFAULT_ZIPF_EXPONENT,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SbmConfig {
    pub blocks: Vec<usize>,
    pub p_in: f64,
    pub p_out: f64,
    #[serde(default)]
    pub block_labels: Option<Vec<usize>>,
    /// Generator seed; derived from the experiment seed when absent.
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphConfig {
    #[serde(default)]
    pub edges: Option<PathBuf>,
    #[serde(default)]
    pub labels: Option<PathBuf>,
    #[serde(default)]
    pub features: Option<PathBuf>,
    #[serde(default)]
    pub sbm: Option<SbmConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitConfig {
    #[serde(default = "default_fractions")]
    pub fractions: [f64; 3],
}

fn default_fractions() -> [f64; 3] {
    [0.05, 0.15, 0.8]
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            fractions: default_fractions(),
        }
    }
}

fn default_sample_size() -> usize {
    DEFAULT_SAMPLE_SIZE
}
fn default_seeds_per_label() -> usize {
    DEFAULT_SEEDS_PER_LABEL
}
fn default_walk_len() -> usize {
    DEFAULT_WALK_LEN
}
fn default_walk_alpha() -> f64 {
    DEFAULT_WALK_ALPHA
}
fn default_zipf() -> f64 {
    DEFAULT_ZIPF_EXPONENT
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ShiftConfig {
    Pps {
        /// Defaults to `10·K`.
        #[serde(default)]
        num_dists: Option<usize>,
        #[serde(default = "default_sample_size")]
        sample_size: usize,
        #[serde(default = "default_zipf")]
        zipf_exponent: f64,
        #[serde(default)]
        name: Option<String>,
    },
    Bfs {
        #[serde(default = "default_seeds_per_label")]
        seeds_per_label: usize,
        #[serde(default = "default_sample_size")]
        sample_size: usize,
        #[serde(default)]
        name: Option<String>,
    },
    Rw {
        #[serde(default = "default_seeds_per_label")]
        seeds_per_label: usize,
        #[serde(default = "default_sample_size")]
        sample_size: usize,
        #[serde(default = "default_walk_len")]
        walk_len: usize,
        #[serde(default = "default_walk_alpha")]
        alpha: f64,
        #[serde(default)]
        name: Option<String>,
    },
}

impl ShiftConfig {
    pub fn name(&self) -> String {
        let (given, default) = match self {
            ShiftConfig::Pps { name, .. } => (name, "PPS"),
            ShiftConfig::Bfs { name, .. } => (name, "BFS"),
            ShiftConfig::Rw { name, .. } => (name, "RW"),
        };
        given.clone().unwrap_or_else(|| default.to_string())
    }
}

/// A quantifier given either by method name or as a full table.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
enum QuantifierEntry {
    Name(String),
    Spec(QuantifierSpec),
}

fn deserialize_quantifiers<'de, D>(de: D) -> std::result::Result<Vec<QuantifierSpec>, D::Error>
where
    D: serde::Deserializer<'de>,
{
    let entries = Vec::<QuantifierEntry>::deserialize(de)?;
    entries
        .into_iter()
        .map(|e| match e {
            QuantifierEntry::Name(s) => s.parse().map_err(serde::de::Error::custom),
            QuantifierEntry::Spec(s) => Ok(s),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_dataset")]
    pub dataset: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    #[serde(default)]
    pub output: Option<PathBuf>,
    pub graph: GraphConfig,
    #[serde(default)]
    pub split: SplitConfig,
    #[serde(default = "default_classifiers")]
    pub classifiers: Vec<ClassifierSpec>,
    #[serde(deserialize_with = "deserialize_quantifiers")]
    pub quantifiers: Vec<QuantifierSpec>,
    pub shifts: Vec<ShiftConfig>,
}

fn default_dataset() -> String {
    "graph".into()
}
fn default_repetitions() -> usize {
    1
}
fn default_classifiers() -> Vec<ClassifierSpec> {
    vec![ClassifierSpec::Enq]
}

fn resolve(base: &Path, p: &mut Option<PathBuf>) {
    if let Some(path) = p {
        if path.is_relative() {
            *path = base.join(&*path);
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        resolve(base, &mut cfg.graph.edges);
        resolve(base, &mut cfg.graph.labels);
        resolve(base, &mut cfg.graph.features);
        resolve(base, &mut cfg.output);
        for c in &mut cfg.classifiers {
            if let ClassifierSpec::External { path } = c {
                if path.is_relative() {
                    *path = base.join(&*path);
                }
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.quantifiers.is_empty() {
            return Err(Error::Config("at least one quantifier is required".into()));
        }
        if self.shifts.is_empty() {
            return Err(Error::Config("at least one shift is required".into()));
        }
        if self.classifiers.is_empty() {
            return Err(Error::Config("at least one classifier is required".into()));
        }
        if self.repetitions == 0 {
            return Err(Error::Config("repetitions must be >= 1".into()));
        }
        match (&self.graph.edges, &self.graph.sbm) {
            (Some(_), Some(_)) => return Err(Error::Config("graph: give either edges or sbm, not both".into())),
            (None, None) => return Err(Error::Config("graph: edges or sbm required".into())),
            (Some(_), None) if self.graph.labels.is_none() => {
                return Err(Error::Config("graph: labels file required".into()))
            }
            _ => {}
        }
        for q in &self.quantifiers {
            q.validate()?;
        }
        for c in &self.classifiers {
            c.validate()?;
        }
        Ok(())
    }

    pub fn build_graph(&self) -> Result<Graph> {
        match (&self.graph.edges, &self.graph.sbm) {
            (Some(edges), None) => load_graph(edges, self.graph.labels.as_deref(), self.graph.features.as_deref()),
            (None, Some(sbm)) => generate_sbm(
                &sbm.blocks,
                sbm.p_in,
                sbm.p_out,
                sbm.block_labels.as_deref(),
                sbm.seed.unwrap_or_else(|| derive_seed(self.seed, 0x5B5B)),
            ),
            _ => Err(Error::Config("graph: edges or sbm required".into())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::KernelSpec;

    const MINIMAL: &str = r#"
        quantifiers = ["pacc+sis", { base = "acc", kernel_q = { kind = "sp" } }]

        [graph.sbm]
        blocks = [10, 10]
        p_in = 0.5
        p_out = 0.05

        [[shifts]]
        kind = "pps"

        [[shifts]]
        kind = "rw"
        sample_size = 30
    "#;

    #[test]
    fn defaults_applied() {
        let cfg = ExperimentConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(cfg.repetitions, 1);
        assert_eq!(cfg.split.fractions, [0.05, 0.15, 0.8]);
        assert_eq!(cfg.classifiers, vec![ClassifierSpec::Enq]);
        assert_eq!(cfg.quantifiers[0].kernel_q, Some(KernelSpec::ppr_default()));
        assert_eq!(cfg.quantifiers[1].kernel_q, Some(KernelSpec::ShortestPath { gamma: 3.0 }));
        assert_eq!(
            cfg.shifts[1],
            ShiftConfig::Rw {
                seeds_per_label: 10,
                sample_size: 30,
                walk_len: 10,
                alpha: 0.1,
                name: None
            }
        );
        assert_eq!(cfg.build_graph().unwrap().n(), 20);
    }

    #[test]
    fn invalid_configs() {
        let no_shift = r#"
            quantifiers = ["cc"]
            shifts = []
            [graph.sbm]
            blocks = [10, 10]
            p_in = 0.5
            p_out = 0.05
        "#;
        assert!(matches!(ExperimentConfig::from_toml(no_shift), Err(Error::Config(_))));
        let bad_q = MINIMAL.replace("\"pacc+sis\"", "\"cc+sis\"");
        assert!(ExperimentConfig::from_toml(&bad_q).is_err());
        let zero_reps = format!("repetitions = 0\n{MINIMAL}");
        assert!(ExperimentConfig::from_toml(&zero_reps).is_err());
    }
}
