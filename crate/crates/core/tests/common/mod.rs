//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use graph_quant::graph::UNREACHABLE;
use graph_quant::Graph;
use rand::Rng;

/// All-pairs hop distances by Floyd–Warshall on the adjacency matrix.
pub fn floyd_warshall(g: &Graph) -> Vec<Vec<usize>> {
    let n = g.n();
    let mut d = vec![vec![UNREACHABLE; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = 0;
        for &j in g.neighbors(i) {
            row[j] = 1;
        }
    }
    for m in 0..n {
        for i in 0..n {
            if d[i][m] == UNREACHABLE {
                continue;
            }
            for j in 0..n {
                if d[m][j] != UNREACHABLE && d[i][m] + d[m][j] < d[i][j] {
                    d[i][j] = d[i][m] + d[m][j];
                }
            }
        }
    }
    d
}

/// `(αI + (1−α)A·D⁻¹)^L` by naive dense multiplication, row-major.
pub fn ppr_naive(g: &Graph, alpha: f64, steps: usize) -> Vec<f64> {
    let n = g.n();
    let mut m = vec![0.0; n * n];
    for j in 0..n {
        let nbrs = g.neighbors(j);
        if nbrs.is_empty() {
            m[j * n + j] = 1.0;
            continue;
        }
        m[j * n + j] += alpha;
        for &i in nbrs {
            m[i * n + j] += (1.0 - alpha) / nbrs.len() as f64;
        }
    }
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        out[i * n + i] = 1.0;
    }
    for _ in 0..steps {
        let mut next = vec![0.0; n * n];
        for i in 0..n {
            for k in 0..n {
                let a = m[i * n + k];
                if a == 0.0 {
                    continue;
                }
                for j in 0..n {
                    next[i * n + j] += a * out[k * n + j];
                }
            }
        }
        out = next;
    }
    out
}

/// `‖Cq − p‖²` for row-major `C` with `k` columns.
pub fn lsq_objective(c: &[f64], k: usize, p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .enumerate()
        .map(|(j, pj)| {
            let r: f64 = (0..k).map(|i| c[j * k + i] * q[i]).sum::<f64>() - pj;
            r * r
        })
        .sum()
}

/// Minimum of `‖Cq − p‖²` over the simplex grid with step `1/steps`, for K ≤ 3.
pub fn grid_search(c: &[f64], k: usize, p: &[f64], steps: usize) -> f64 {
    let m = p.len();
    // Expand to q'Gq − 2b'q + p'p so each grid point costs O(K²).
    let mut gram = vec![0.0; k * k];
    let mut b = vec![0.0; k];
    for j in 0..m {
        for a in 0..k {
            b[a] += c[j * k + a] * p[j];
            for bb in 0..k {
                gram[a * k + bb] += c[j * k + a] * c[j * k + bb];
            }
        }
    }
    let pp: f64 = p.iter().map(|x| x * x).sum();
    let eval = |q: &[f64]| {
        let mut v = pp;
        for a in 0..k {
            v -= 2.0 * b[a] * q[a];
            for bb in 0..k {
                v += q[a] * gram[a * k + bb] * q[bb];
            }
        }
        v
    };
    let h = 1.0 / steps as f64;
    let mut best = f64::INFINITY;
    match k {
        1 => best = eval(&[1.0]),
        2 => {
            for i in 0..=steps {
                let x = i as f64 * h;
                best = best.min(eval(&[x, 1.0 - x]));
            }
        }
        3 => {
            for i in 0..=steps {
                for j in 0..=(steps - i) {
                    let (x, y) = (i as f64 * h, j as f64 * h);
                    best = best.min(eval(&[x, y, (1.0 - x - y).max(0.0)]));
                }
            }
        }
        _ => panic!("grid search supports K <= 3"),
    }
    best
}

/// Erdős–Rényi edge list.
pub fn random_edges(n: usize, p: f64, rng: &mut impl Rng) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            if rng.random::<f64>() < p {
                edges.push((u, v));
            }
        }
    }
    edges
}

pub fn random_simplex(k: usize, rng: &mut impl Rng) -> Vec<f64> {
    let raw: Vec<f64> = (0..k).map(|_| -rng.random::<f64>().max(1e-300).ln()).collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / s).collect()
}

/// Draws an index from a discrete distribution.
pub fn draw(weights: &[f64], rng: &mut impl Rng) -> usize {
    let mut u = rng.random::<f64>() * weights.iter().sum::<f64>();
    for (i, w) in weights.iter().enumerate() {
        if u < *w {
            return i;
        }
        u -= w;
    }
    weights.len() - 1
}
