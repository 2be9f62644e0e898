//! Density weights and confusion / prevalence estimates for adjusted counting.
//!
//! A training vertex `v` is reweighted by `ρ(v) = q̂(v) / p̂(v)`, where both
//! densities are kernel density estimates: `q̂` over the test sample and `p̂`
//! over the training sample. The weighted confusion matrix is
//!
//! ```text
//! C[j][i] = Σ_{(v,y), y=i} ρ(v)·[h(v) = j] / Σ_{(v,y), y=i} ρ(v)
//! ```
//!
//! With uniform weights this is the ordinary confusion matrix estimate.
//!
//! The neighborhood-aware variant replaces the predicted label `h(v)` by the
//! pair `(h(v), majority of h over N(v))`, flattened to `j·K + k`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::kernels::{evaluate_kernel, propagate, KernelMatrix, KernelSpec, PprMode};

/// Default lower bound on `p̂` in [`density_ratio`].
pub const DEFAULT_DENSITY_FLOOR: f64 = 1e-12;

const SIMPLEX_TOL: f64 = 1e-9;

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in row.iter().enumerate().skip(1) {
        if x > row[best] {
            best = i;
        }
    }
    best
}

/// Per-vertex classifier output: hard labels always, soft rows optionally.
///
/// When only soft rows are supplied the hard labels are their argmax.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionSet {
    k: usize,
    hard: Vec<usize>,
    soft: Option<Vec<f64>>,
}

impl PredictionSet {
    pub fn from_hard(hard: Vec<usize>, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::Parameter("class count must be positive".into()));
        }
        if let Some(&bad) = hard.iter().find(|&&l| l >= k) {
            return Err(Error::Validation(format!("predicted label {bad} out of range for {k} classes")));
        }
        Ok(Self { k, hard, soft: None })
    }

    /// Soft rows in row-major order, `k` entries each.
    pub fn from_soft(soft: Vec<f64>, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::Parameter("class count must be positive".into()));
        }
        if !soft.len().is_multiple_of(k) {
            return Err(Error::Dimension {
                expected: k,
                got: soft.len() % k,
            });
        }
        for (v, row) in soft.chunks(k).enumerate() {
            if row.iter().any(|x| !x.is_finite() || *x < 0.0) {
                return Err(Error::Validation(format!("soft row {v} has negative or non-finite entries")));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > SIMPLEX_TOL {
                return Err(Error::Validation(format!("soft row {v} sums to {s}")));
            }
        }
        let hard = soft.chunks(k).map(argmax).collect();
        Ok(Self {
            k,
            hard,
            soft: Some(soft),
        })
    }

    /// Both channels; `hard` must equal the argmax of `soft`.
    pub fn new(hard: Vec<usize>, soft: Vec<f64>, k: usize) -> Result<Self> {
        let set = Self::from_soft(soft, k)?;
        if set.hard != hard {
            return Err(Error::Validation("hard labels disagree with argmax of soft rows".into()));
        }
        Ok(set)
    }

    pub fn n(&self) -> usize {
        self.hard.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn hard(&self, v: usize) -> usize {
        self.hard[v]
    }

    pub fn hard_labels(&self) -> &[usize] {
        &self.hard
    }

    pub fn has_soft(&self) -> bool {
        self.soft.is_some()
    }

    pub fn soft_row(&self, v: usize) -> Option<&[f64]> {
        self.soft.as_ref().map(|s| &s[v * self.k..(v + 1) * self.k])
    }

    pub(crate) fn check_covers(&self, vertices: &[usize]) -> Result<()> {
        match vertices.iter().find(|&&v| v >= self.n()) {
            Some(&v) => Err(Error::VertexOutOfRange { vertex: v, n: self.n() }),
            None => Ok(()),
        }
    }
}

/// Which classifier output is counted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictionMode {
    Hard,
    Soft,
}

/// Kernel density at every row vertex: the mean of its kernel row.
pub fn kde_density(km: &KernelMatrix) -> Result<Vec<f64>> {
    let m = km.cols.len();
    if m == 0 {
        return Err(Error::Empty("kernel density needs at least one sample vertex".into()));
    }
    Ok((0..km.rows.len())
        .map(|i| km.row(i).iter().sum::<f64>() / m as f64)
        .collect())
}

/// Kernel density at each query vertex with respect to `sample`.
///
/// Agrees with `kde_density(evaluate_kernel(spec, g, queries, sample))`, but
/// for the dense PPR kernel sums the walk distributions of all sample
/// vertices in a single propagation instead of materializing the matrix.
pub fn kernel_density(spec: &KernelSpec, g: &Graph, queries: &[usize], sample: &[usize]) -> Result<Vec<f64>> {
    if sample.is_empty() {
        return Err(Error::Empty("kernel density needs at least one sample vertex".into()));
    }
    match spec {
        KernelSpec::Constant => {
            for &v in queries.iter().chain(sample) {
                g.check_vertex(v)?;
            }
            Ok(vec![1.0; queries.len()])
        }
        KernelSpec::Ppr(p) if p.mode() == PprMode::Dense => {
            spec.validate()?;
            for &v in queries.iter().chain(sample) {
                g.check_vertex(v)?;
            }
            let mut counts = vec![0.0; g.n()];
            for &v in sample {
                counts[v] += 1.0;
            }
            let mass = propagate(g, p.alpha, p.steps, &counts);
            let m = sample.len() as f64;
            Ok(queries
                .iter()
                .map(|&v| p.lambda * mass[v] / m + (1.0 - p.lambda))
                .collect())
        }
        _ => kde_density(&evaluate_kernel(spec, g, queries, sample)?),
    }
}

/// Non-negative importance weights aligned with a training list.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityWeights(Vec<f64>);

impl DensityWeights {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::Validation("density weights must be finite and non-negative".into()));
        }
        Ok(Self(weights))
    }

    pub fn uniform(n: usize) -> Self {
        Self(vec![1.0; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.0.iter().map(|w| w * c).collect())
    }
}

/// `ρ[v] = q̂[v] / max(p̂[v], floor)`.
pub fn density_ratio(q_hat: &[f64], p_hat: &[f64], floor: f64) -> Result<DensityWeights> {
    if q_hat.len() != p_hat.len() {
        return Err(Error::Dimension {
            expected: q_hat.len(),
            got: p_hat.len(),
        });
    }
    if !(floor > 0.0) {
        return Err(Error::Parameter(format!("density floor must be > 0, got {floor}")));
    }
    DensityWeights::new(q_hat.iter().zip(p_hat).map(|(q, p)| q / p.max(floor)).collect())
}

/// Own predicted label and 1-hop neighbor majority per vertex.
///
/// Ties in the majority go to the lowest label; a vertex without neighbors
/// uses its own prediction.
pub fn nacc_features(g: &Graph, preds: &PredictionSet) -> Result<Vec<(usize, usize)>> {
    if preds.n() < g.n() {
        return Err(Error::Dimension {
            expected: g.n(),
            got: preds.n(),
        });
    }
    let k = preds.k();
    let mut counts = vec![0usize; k];
    Ok((0..g.n())
        .map(|v| {
            let own = preds.hard(v);
            let nbrs = g.neighbors(v);
            if nbrs.is_empty() {
                return (own, own);
            }
            counts.fill(0);
            for &u in nbrs {
                counts[preds.hard(u)] += 1;
            }
            let mut best = 0;
            for (c, &cnt) in counts.iter().enumerate().skip(1) {
                if cnt > counts[best] {
                    best = c;
                }
            }
            (own, best)
        })
        .collect())
}

/// Maps a vertex to a distribution over prediction outcomes.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Outcomes<'a> {
    Labels {
        preds: &'a PredictionSet,
        mode: PredictionMode,
    },
    Pairs {
        preds: &'a PredictionSet,
        features: &'a [(usize, usize)],
        mode: PredictionMode,
    },
}

impl<'a> Outcomes<'a> {
    pub(crate) fn new(
        preds: &'a PredictionSet,
        features: Option<&'a [(usize, usize)]>,
        mode: PredictionMode,
    ) -> Result<Self> {
        if mode == PredictionMode::Soft && !preds.has_soft() {
            return Err(Error::Config("soft predictions required but only hard labels available".into()));
        }
        Ok(match features {
            None => Outcomes::Labels { preds, mode },
            Some(features) => Outcomes::Pairs { preds, features, mode },
        })
    }

    pub(crate) fn len(&self) -> usize {
        match self {
            Outcomes::Labels { preds, .. } => preds.k(),
            Outcomes::Pairs { preds, .. } => preds.k() * preds.k(),
        }
    }

    fn mode(&self) -> PredictionMode {
        match self {
            Outcomes::Labels { mode, .. } | Outcomes::Pairs { mode, .. } => *mode,
        }
    }

    /// Adds `w` times the outcome distribution of `v` to `out`.
    fn accumulate(&self, v: usize, w: f64, out: &mut [f64]) {
        match *self {
            Outcomes::Labels { preds, mode } => match mode {
                PredictionMode::Hard => out[preds.hard(v)] += w,
                PredictionMode::Soft => {
                    for (o, p) in out.iter_mut().zip(preds.soft_row(v).unwrap()) {
                        *o += w * p;
                    }
                }
            },
            Outcomes::Pairs { preds, features, mode } => {
                let k = preds.k();
                let (own, nbr) = features[v];
                match mode {
                    PredictionMode::Hard => out[own * k + nbr] += w,
                    PredictionMode::Soft => {
                        for (j, p) in preds.soft_row(v).unwrap().iter().enumerate() {
                            out[j * k + nbr] += w * p;
                        }
                    }
                }
            }
        }
    }

    pub(crate) fn prevalence(&self, vertices: &[usize]) -> Result<Vec<f64>> {
        if vertices.is_empty() {
            return Err(Error::Empty("prevalence over an empty vertex list".into()));
        }
        let mut out = vec![0.0; self.len()];
        for &v in vertices {
            self.accumulate(v, 1.0, &mut out);
        }
        let n = vertices.len() as f64;
        for x in &mut out {
            *x /= n;
        }
        Ok(out)
    }

    pub(crate) fn confusion(&self, train: &[(usize, usize)], weights: &DensityWeights) -> Result<ConfusionEstimate> {
        if weights.len() != train.len() {
            return Err(Error::Dimension {
                expected: train.len(),
                got: weights.len(),
            });
        }
        let (preds, nacc) = match self {
            Outcomes::Labels { preds, .. } => (*preds, false),
            Outcomes::Pairs { preds, .. } => (*preds, true),
        };
        let k = preds.k();
        let m = self.len();
        // Column-major accumulation: column i is contiguous.
        let mut cols = vec![0.0; m * k];
        let mut totals = vec![0.0; k];
        let mut col = vec![0.0; m];
        for (&(v, y), &w) in train.iter().zip(weights.as_slice()) {
            if y >= k {
                return Err(Error::Validation(format!("training label {y} out of range for {k} classes")));
            }
            if v >= preds.n() {
                return Err(Error::VertexOutOfRange { vertex: v, n: preds.n() });
            }
            col.fill(0.0);
            self.accumulate(v, w, &mut col);
            for (c, x) in cols[y * m..(y + 1) * m].iter_mut().zip(&col) {
                *c += x;
            }
            totals[y] += w;
        }
        let mut matrix = vec![0.0; m * k];
        let mut zero_support = Vec::new();
        for i in 0..k {
            for j in 0..m {
                matrix[j * k + i] = if totals[i] > 0.0 {
                    cols[i * m + j] / totals[i]
                } else {
                    1.0 / m as f64
                };
            }
            if totals[i] <= 0.0 {
                zero_support.push(i);
            }
        }
        Ok(ConfusionEstimate {
            matrix,
            n_outcomes: m,
            k,
            mode: self.mode(),
            nacc,
            zero_support,
        })
    }
}

/// Column-stochastic `M × K` matrix of outcome probabilities given the true
/// class, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfusionEstimate {
    pub matrix: Vec<f64>,
    pub n_outcomes: usize,
    pub k: usize,
    pub mode: PredictionMode,
    pub nacc: bool,
    /// Classes whose total training weight was zero; their columns are uniform.
    pub zero_support: Vec<usize>,
}

impl ConfusionEstimate {
    pub fn get(&self, outcome: usize, class: usize) -> f64 {
        self.matrix[outcome * self.k + class]
    }

    pub fn column(&self, class: usize) -> Vec<f64> {
        (0..self.n_outcomes).map(|j| self.get(j, class)).collect()
    }
}

/// Classify-and-count prevalence: histogram of hard labels or mean soft row.
pub fn prevalence_vector(preds: &PredictionSet, vertices: &[usize], mode: PredictionMode) -> Result<Vec<f64>> {
    preds.check_covers(vertices)?;
    Outcomes::new(preds, None, mode)?.prevalence(vertices)
}

pub fn confusion_estimate(
    preds: &PredictionSet,
    train: &[(usize, usize)],
    weights: &DensityWeights,
    mode: PredictionMode,
) -> Result<ConfusionEstimate> {
    Outcomes::new(preds, None, mode)?.confusion(train, weights)
}

pub fn nacc_confusion_estimate(
    g: &Graph,
    preds: &PredictionSet,
    train: &[(usize, usize)],
    weights: &DensityWeights,
    mode: PredictionMode,
) -> Result<ConfusionEstimate> {
    let features = nacc_features(g, preds)?;
    Outcomes::new(preds, Some(&features), mode)?.confusion(train, weights)
}

/// Prevalence over `(own, neighbor majority)` pairs, indexed `own·K + nbr`.
pub fn nacc_prevalence(g: &Graph, preds: &PredictionSet, vertices: &[usize], mode: PredictionMode) -> Result<Vec<f64>> {
    for &v in vertices {
        g.check_vertex(v)?;
    }
    let features = nacc_features(g, preds)?;
    Outcomes::new(preds, Some(&features), mode)?.prevalence(vertices)
}
