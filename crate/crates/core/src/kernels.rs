//! Vertex kernels: personalized PageRank (dense and pruned sparse), its
//! interpolated form, shortest-path decay, constant and feature products.
//!
//! The PPR matrix is `Π = (αI + (1−α)Ā)^L` with the column-normalized
//! adjacency `Ā = A·D⁻¹`. Column `j` of `Π` is the distribution of an
//! `L`-step lazy walk started at `j`, so every column sums to one. Isolated
//! vertices get a self-absorbing unit column in `Ā`.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{bfs_from, Graph, UNREACHABLE};

pub const DEFAULT_ALPHA: f64 = 0.1;
pub const DEFAULT_STEPS: usize = 10;
pub const DEFAULT_LAMBDA: f64 = 0.9;
pub const DEFAULT_GAMMA: f64 = 3.0;

/// Parameters of the interpolated PPR kernel `λ·Π(v, v') + (1 − λ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PprParams {
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    /// Pruning threshold; `None` selects the dense computation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
}

fn default_alpha() -> f64 {
    DEFAULT_ALPHA
}
fn default_steps() -> usize {
    DEFAULT_STEPS
}
fn default_lambda() -> f64 {
    DEFAULT_LAMBDA
}
fn default_gamma() -> f64 {
    DEFAULT_GAMMA
}

impl Default for PprParams {
    fn default() -> Self {
        Self {
            alpha: DEFAULT_ALPHA,
            steps: DEFAULT_STEPS,
            lambda: DEFAULT_LAMBDA,
            delta: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PprMode {
    Dense,
    Sparse { delta: f64 },
}

impl PprParams {
    pub fn mode(&self) -> PprMode {
        match self.delta {
            None => PprMode::Dense,
            Some(delta) => PprMode::Sparse { delta },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelSpec {
    Constant,
    Ppr(PprParams),
    #[serde(rename = "sp")]
    ShortestPath {
        #[serde(default = "default_gamma")]
        gamma: f64,
    },
    Feature,
}

impl KernelSpec {
    pub fn ppr_default() -> Self {
        KernelSpec::Ppr(PprParams::default())
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Constant | KernelSpec::Feature => Ok(()),
            KernelSpec::Ppr(p) => {
                check_alpha(p.alpha)?;
                if !(0.0..=1.0).contains(&p.lambda) {
                    return Err(Error::Parameter(format!("lambda must lie in [0, 1], got {}", p.lambda)));
                }
                if let Some(delta) = p.delta {
                    if !(delta >= 0.0) {
                        return Err(Error::Parameter(format!("delta must be >= 0, got {delta}")));
                    }
                }
                Ok(())
            }
            KernelSpec::ShortestPath { gamma } => {
                if gamma > 0.0 && gamma.is_finite() {
                    Ok(())
                } else {
                    Err(Error::Parameter(format!("gamma must be > 0, got {gamma}")))
                }
            }
        }
    }

    /// Short name used in result tables.
    pub fn label(&self) -> String {
        match self {
            KernelSpec::Constant => "const".into(),
            KernelSpec::Ppr(p) => match p.delta {
                None => format!("ppr(a={},L={},l={})", p.alpha, p.steps, p.lambda),
                Some(d) => format!("ppr(a={},L={},l={},d={})", p.alpha, p.steps, p.lambda, d),
            },
            KernelSpec::ShortestPath { gamma } => format!("sp(g={gamma})"),
            KernelSpec::Feature => "feature".into(),
        }
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::Parameter(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

/// One step of the lazy walk: `y = αx + (1−α)Āx`.
fn lazy_walk_step(g: &Graph, alpha: f64, x: &[f64], y: &mut [f64]) {
    for (i, yi) in y.iter_mut().enumerate() {
        *yi = alpha * x[i];
    }
    for j in 0..g.n() {
        let xj = x[j];
        if xj == 0.0 {
            continue;
        }
        let nbrs = g.neighbors(j);
        if nbrs.is_empty() {
            y[j] += (1.0 - alpha) * xj;
        } else {
            let share = (1.0 - alpha) * xj / nbrs.len() as f64;
            for &i in nbrs {
                y[i] += share;
            }
        }
    }
}

/// `(αI + (1−α)Ā)^L · x` for a dense vector.
pub fn propagate(g: &Graph, alpha: f64, steps: usize, x: &[f64]) -> Vec<f64> {
    let mut cur = x.to_vec();
    let mut next = vec![0.0; x.len()];
    for _ in 0..steps {
        lazy_walk_step(g, alpha, &cur, &mut next);
        std::mem::swap(&mut cur, &mut next);
    }
    cur
}

/// Column `source` of `Π`.
pub fn ppr_column(g: &Graph, alpha: f64, steps: usize, source: usize) -> Vec<f64> {
    let mut e = vec![0.0; g.n()];
    e[source] = 1.0;
    propagate(g, alpha, steps, &e)
}

/// Full `Π` as a row-major `n × n` matrix.
pub fn ppr_matrix_dense(g: &Graph, alpha: f64, steps: usize) -> Result<Vec<f64>> {
    check_alpha(alpha)?;
    let n = g.n();
    let mut pi = vec![0.0; n * n];
    for j in 0..n {
        let col = ppr_column(g, alpha, steps, j);
        for (i, x) in col.into_iter().enumerate() {
            pi[i * n + j] = x;
        }
    }
    Ok(pi)
}

/// Column of `Π` computed sparsely, zeroing entries below `delta` after
/// every multiplication. Entries are sorted by row.
pub fn ppr_column_pruned(
    g: &Graph,
    alpha: f64,
    steps: usize,
    delta: f64,
    source: usize,
) -> Vec<(usize, f64)> {
    let mut cur = vec![(source, 1.0)];
    let mut acc = vec![0.0; g.n()];
    let mut touched: Vec<usize> = Vec::new();
    for _ in 0..steps {
        for &(j, xj) in &cur {
            let mut add = |i: usize, v: f64| {
                if acc[i] == 0.0 {
                    touched.push(i);
                }
                acc[i] += v;
            };
            add(j, alpha * xj);
            let nbrs = g.neighbors(j);
            if nbrs.is_empty() {
                add(j, (1.0 - alpha) * xj);
            } else {
                let share = (1.0 - alpha) * xj / nbrs.len() as f64;
                for &i in nbrs {
                    add(i, share);
                }
            }
        }
        touched.sort_unstable();
        touched.dedup();
        cur.clear();
        for &i in &touched {
            let v = acc[i];
            acc[i] = 0.0;
            if v >= delta && v != 0.0 {
                cur.push((i, v));
            }
        }
        touched.clear();
    }
    cur
}

/// Compressed sparse column matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n_rows: usize,
    col_offsets: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.col_offsets.len() - 1
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.col_offsets[j]..self.col_offsets[j + 1];
        self.row_idx[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let range = self.col_offsets[j]..self.col_offsets[j + 1];
        match self.row_idx[range.clone()].binary_search(&i) {
            Ok(pos) => self.values[range.start + pos],
            Err(_) => 0.0,
        }
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let n_cols = self.n_cols();
        let mut out = vec![0.0; self.n_rows * n_cols];
        for j in 0..n_cols {
            for (i, v) in self.column(j) {
                out[i * n_cols + j] = v;
            }
        }
        out
    }
}

pub fn ppr_matrix_sparse_pruned(
    g: &Graph,
    alpha: f64,
    steps: usize,
    delta: f64,
) -> Result<SparseMatrix> {
    check_alpha(alpha)?;
    if !(delta >= 0.0) {
        return Err(Error::Parameter(format!("delta must be >= 0, got {delta}")));
    }
    let mut col_offsets = vec![0];
    let mut row_idx = Vec::new();
    let mut values = Vec::new();
    for j in 0..g.n() {
        for (i, v) in ppr_column_pruned(g, alpha, steps, delta, j) {
            row_idx.push(i);
            values.push(v);
        }
        col_offsets.push(row_idx.len());
    }
    Ok(SparseMatrix {
        n_rows: g.n(),
        col_offsets,
        row_idx,
        values,
    })
}

/// Kernel values `k(rows[i], cols[j])`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
    pub values: Vec<f64>,
}

impl KernelMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols.len() + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let m = self.cols.len();
        &self.values[i * m..(i + 1) * m]
    }
}

fn distinct(vs: &[usize]) -> Vec<usize> {
    let mut out = vs.to_vec();
    out.sort_unstable();
    out.dedup();
    out
}

/// Column `col` of the interpolated kernel, indexed by row vertex.
fn ppr_kernel_column(g: &Graph, p: &PprParams, col: usize) -> Vec<f64> {
    let mut out = match p.mode() {
        PprMode::Dense => ppr_column(g, p.alpha, p.steps, col),
        PprMode::Sparse { delta } => {
            let mut dense = vec![0.0; g.n()];
            for (i, v) in ppr_column_pruned(g, p.alpha, p.steps, delta, col) {
                dense[i] = v;
            }
            dense
        }
    };
    for x in &mut out {
        *x = p.lambda * *x + (1.0 - p.lambda);
    }
    out
}

pub fn evaluate_kernel(spec: &KernelSpec, g: &Graph, rows: &[usize], cols: &[usize]) -> Result<KernelMatrix> {
    spec.validate()?;
    for &v in rows.iter().chain(cols) {
        g.check_vertex(v)?;
    }
    let m = cols.len();
    let mut values = vec![0.0; rows.len() * m];
    match spec {
        KernelSpec::Constant => values.fill(1.0),
        KernelSpec::Ppr(p) => {
            let columns: HashMap<usize, Vec<f64>> = distinct(cols)
                .into_iter()
                .map(|c| (c, ppr_kernel_column(g, p, c)))
                .collect();
            for (j, c) in cols.iter().enumerate() {
                let col = &columns[c];
                for (i, &r) in rows.iter().enumerate() {
                    values[i * m + j] = col[r];
                }
            }
        }
        KernelSpec::ShortestPath { gamma } => {
            let dists: HashMap<usize, Vec<usize>> = distinct(cols)
                .into_iter()
                .map(|c| Ok((c, bfs_from(g, c)?.dist)))
                .collect::<Result<_>>()?;
            for (j, c) in cols.iter().enumerate() {
                let dist = &dists[c];
                for (i, &r) in rows.iter().enumerate() {
                    values[i * m + j] = sp_kernel_value(*gamma, dist[r]);
                }
            }
        }
        KernelSpec::Feature => {
            if !g.has_features() {
                return Err(Error::Config("feature kernel requires vertex features".into()));
            }
            for (i, &r) in rows.iter().enumerate() {
                let xr = g.features(r).unwrap();
                for (j, &c) in cols.iter().enumerate() {
                    let xc = g.features(c).unwrap();
                    let dot: f64 = xr.iter().zip(xc).map(|(a, b)| a * b).sum();
                    values[i * m + j] = dot.max(0.0);
                }
            }
        }
    }
    Ok(KernelMatrix {
        rows: rows.to_vec(),
        cols: cols.to_vec(),
        values,
    })
}

/// `exp(−γ·d)`, zero for disconnected pairs.
pub fn sp_kernel_value(gamma: f64, hops: usize) -> f64 {
    if hops == UNREACHABLE {
        0.0
    } else {
        (-gamma * hops as f64).exp()
    }
}
