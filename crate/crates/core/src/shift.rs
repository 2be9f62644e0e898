//! Test-set samplers that induce prior probability shift (Zipf targets) or
//! structural covariate shift (BFS balls, teleporting random walks), the
//! train/test split protocol and a planted-partition graph generator.
//!
//! Every sampler is a pure function of its seed. Sample `i` of a run draws
//! from its own stream derived from `(seed, i)`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use log::warn;
use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::Graph;

pub const DEFAULT_SAMPLE_SIZE: usize = 100;
pub const DEFAULT_SEEDS_PER_LABEL: usize = 10;
pub const DEFAULT_WALK_LEN: usize = 10;
pub const DEFAULT_WALK_ALPHA: f64 = 0.1;
pub const DEFAULT_ZIPF_EXPONENT: f64 = 1.0;
/// Random-walk step budget per requested vertex.
pub const RW_STEP_BUDGET_FACTOR: usize = 1000;

pub(crate) fn rng_from(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// SplitMix64 finalizer; maps `(seed, stream)` to an independent seed.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Apportions `total` units proportionally to `weights` by largest remainder.
/// Remainder ties go to the lowest index.
pub fn largest_remainder(total: usize, weights: &[f64]) -> Result<Vec<usize>> {
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::Parameter("apportionment weights must be finite and non-negative".into()));
    }
    let sum: f64 = weights.iter().sum();
    if !(sum > 0.0) {
        return Err(Error::Parameter("apportionment weights sum to zero".into()));
    }
    let raw: Vec<f64> = weights.iter().map(|w| total as f64 * w / sum).collect();
    let mut counts: Vec<usize> = raw.iter().map(|r| r.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    let frac = |i: usize| raw[i] - raw[i].floor();
    order.sort_by(|&a, &b| frac(b).total_cmp(&frac(a)).then(a.cmp(&b)));
    for &i in order.iter().take(total.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    Ok(counts)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub sampler: String,
    pub seed: u64,
    pub requested: usize,
    pub start: Option<usize>,
    /// Target label distribution, for prior-shift samples.
    pub target: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShiftSample {
    pub vertices: Vec<usize>,
    pub true_prev: Vec<f64>,
    pub provenance: Provenance,
    /// The pool ran out before `requested` vertices were collected.
    pub exhausted: bool,
}

/// Label histogram of `vertices`, normalized.
pub fn label_histogram(labels: impl IntoIterator<Item = usize>, k: usize) -> Vec<f64> {
    let mut h = vec![0.0; k];
    let mut n = 0usize;
    for y in labels {
        h[y] += 1.0;
        n += 1;
    }
    if n > 0 {
        h.iter_mut().for_each(|x| *x /= n as f64);
    }
    h
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitSpec {
    pub classifier_train: Vec<usize>,
    pub quantifier_train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Uniformly random three-way partition of all vertices.
pub fn uniform_split(g: &Graph, fractions: [f64; 3], seed: u64) -> Result<SplitSpec> {
    let sum: f64 = fractions.iter().sum();
    if fractions.iter().any(|f| !(*f >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
        return Err(Error::Parameter(format!("split fractions {fractions:?} must be non-negative and sum to 1")));
    }
    let sizes = largest_remainder(g.n(), &fractions)?;
    let mut order: Vec<usize> = (0..g.n()).collect();
    order.shuffle(&mut rng_from(seed));
    let test = order.split_off(sizes[0] + sizes[1]);
    let quantifier_train = order.split_off(sizes[0]);
    Ok(SplitSpec {
        classifier_train: order,
        quantifier_train,
        test,
    })
}

/// Zipf mass function over ranks `1..=k`: `q_r ∝ r^(−s)`.
pub fn zipf_weights(k: usize, exponent: f64) -> Vec<f64> {
    let raw: Vec<f64> = (1..=k).map(|r| (r as f64).powf(-exponent)).collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / s).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PpsParams {
    pub num_dists: usize,
    pub sample_size: usize,
    pub zipf_exponent: f64,
}

impl PpsParams {
    /// `10·K` target distributions of 100 vertices, Zipf exponent 1.
    pub fn defaults_for(k: usize) -> Self {
        Self {
            num_dists: 10 * k,
            sample_size: DEFAULT_SAMPLE_SIZE,
            zipf_exponent: DEFAULT_ZIPF_EXPONENT,
        }
    }
}

/// Per-class counts for a target, capped by class availability. Deficits of
/// saturated classes move to the others in proportion to their target mass.
fn capped_counts(n: usize, target: &[f64], avail: &[usize]) -> Result<Vec<usize>> {
    let total_avail: usize = avail.iter().sum();
    let n = n.min(total_avail);
    let mut counts = largest_remainder(n, target)?;
    loop {
        let mut excess = 0;
        for (c, a) in counts.iter_mut().zip(avail) {
            if *c > *a {
                excess += *c - *a;
                *c = *a;
            }
        }
        if excess == 0 {
            return Ok(counts);
        }
        let open: Vec<usize> = (0..counts.len()).filter(|&i| counts[i] < avail[i]).collect();
        let mut weights: Vec<f64> = open.iter().map(|&i| target[i]).collect();
        if weights.iter().all(|&w| w == 0.0) {
            weights = open.iter().map(|&i| (avail[i] - counts[i]) as f64).collect();
        }
        for (&i, extra) in open.iter().zip(largest_remainder(excess, &weights)?) {
            counts[i] += extra;
        }
    }
}

/// Prior-shift samples: Zipf targets on a random label order, then per-class
/// draws without replacement from `pool`.
pub fn sample_pps(pool: &[(usize, usize)], k: usize, params: PpsParams, seed: u64) -> Result<Vec<ShiftSample>> {
    if pool.is_empty() {
        return Err(Error::Empty("sampling pool".into()));
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); k];
    for &(v, y) in pool {
        if y >= k {
            return Err(Error::Validation(format!("pool label {y} out of range for {k} classes")));
        }
        by_class[y].push(v);
    }
    let avail: Vec<usize> = by_class.iter().map(Vec::len).collect();
    let zipf = zipf_weights(k, params.zipf_exponent);
    let mut out = Vec::with_capacity(params.num_dists);
    for d in 0..params.num_dists {
        let sample_seed = derive_seed(seed, d as u64);
        let mut rng = rng_from(sample_seed);
        let mut perm: Vec<usize> = (0..k).collect();
        perm.shuffle(&mut rng);
        let mut target = vec![0.0; k];
        for (rank, &label) in perm.iter().enumerate() {
            target[label] = zipf[rank];
        }
        let counts = capped_counts(params.sample_size, &target, &avail)?;
        let mut vertices = Vec::with_capacity(params.sample_size);
        let mut realized = Vec::with_capacity(params.sample_size);
        for (c, &count) in counts.iter().enumerate() {
            for i in index::sample(&mut rng, avail[c], count) {
                vertices.push(by_class[c][i]);
                realized.push(c);
            }
        }
        out.push(ShiftSample {
            exhausted: vertices.len() < params.sample_size,
            true_prev: label_histogram(realized, k),
            vertices,
            provenance: Provenance {
                sampler: "pps".into(),
                seed: sample_seed,
                requested: params.sample_size,
                start: None,
                target: Some(target),
            },
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StructuralParams {
    pub seeds_per_label: usize,
    pub sample_size: usize,
}

impl Default for StructuralParams {
    fn default() -> Self {
        Self {
            seeds_per_label: DEFAULT_SEEDS_PER_LABEL,
            sample_size: DEFAULT_SAMPLE_SIZE,
        }
    }
}

fn graph_labels(g: &Graph) -> Result<&[usize]> {
    g.labels()
        .ok_or_else(|| Error::Config("structural samplers need a labeled graph".into()))
}

/// Start vertices for every label, `seeds_per_label` each, drawn from the
/// pool without replacement when possible.
fn choose_starts(g: &Graph, pool: &[usize], seeds_per_label: usize, seed: u64, sampler: &str) -> Result<Vec<usize>> {
    let labels = graph_labels(g)?;
    let k = g.num_classes();
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); k];
    for &v in pool {
        g.check_vertex(v)?;
        by_class[labels[v]].push(v);
    }
    let mut rng = rng_from(derive_seed(seed, u64::MAX));
    let mut starts = Vec::new();
    for (label, members) in by_class.iter().enumerate() {
        if members.is_empty() {
            warn!("{sampler} sampler: label {label} absent from the pool, skipped");
            continue;
        }
        if members.len() >= seeds_per_label {
            starts.extend(index::sample(&mut rng, members.len(), seeds_per_label).into_iter().map(|i| members[i]));
        } else {
            starts.extend((0..seeds_per_label).map(|_| members[rng.random_range(0..members.len())]));
        }
    }
    Ok(starts)
}

fn pool_mask(g: &Graph, pool: &[usize]) -> Vec<bool> {
    let mut mask = vec![false; g.n()];
    for &v in pool {
        mask[v] = true;
    }
    mask
}

/// First `n` pool vertices in BFS order from `start`; each depth level is
/// visited in a random order.
pub fn bfs_sample(g: &Graph, in_pool: &[bool], start: usize, n: usize, rng: &mut impl Rng) -> Vec<usize> {
    let mut visited = vec![false; g.n()];
    let mut collected = Vec::with_capacity(n);
    let mut frontier = vec![start];
    visited[start] = true;
    while !frontier.is_empty() && collected.len() < n {
        for &v in &frontier {
            if in_pool[v] {
                collected.push(v);
                if collected.len() == n {
                    return collected;
                }
            }
        }
        let mut next = Vec::new();
        for &u in &frontier {
            for &v in g.neighbors(u) {
                if !visited[v] {
                    visited[v] = true;
                    next.push(v);
                }
            }
        }
        next.shuffle(rng);
        frontier = next;
    }
    collected
}

fn structural_sample(g: &Graph, sampler: &str, sample_seed: u64, start: usize, n: usize, vertices: Vec<usize>) -> ShiftSample {
    let labels = g.labels().expect("checked by choose_starts");
    ShiftSample {
        exhausted: vertices.len() < n,
        true_prev: label_histogram(vertices.iter().map(|&v| labels[v]), g.num_classes()),
        vertices,
        provenance: Provenance {
            sampler: sampler.into(),
            seed: sample_seed,
            requested: n,
            start: Some(start),
            target: None,
        },
    }
}

pub fn sample_bfs(g: &Graph, pool: &[usize], params: StructuralParams, seed: u64) -> Result<Vec<ShiftSample>> {
    let starts = choose_starts(g, pool, params.seeds_per_label, seed, "bfs")?;
    let in_pool = pool_mask(g, pool);
    Ok(starts
        .into_iter()
        .enumerate()
        .map(|(i, start)| {
            let sample_seed = derive_seed(seed, i as u64);
            let vertices = bfs_sample(g, &in_pool, start, params.sample_size, &mut rng_from(sample_seed));
            structural_sample(g, "bfs", sample_seed, start, params.sample_size, vertices)
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WalkParams {
    pub walk_len: usize,
    /// Teleport-to-start probability per step.
    pub alpha: f64,
}

impl Default for WalkParams {
    fn default() -> Self {
        Self {
            walk_len: DEFAULT_WALK_LEN,
            alpha: DEFAULT_WALK_ALPHA,
        }
    }
}

/// Distinct pool vertices visited by repeated teleporting walks from `start`,
/// in order of first visit. Stops after `RW_STEP_BUDGET_FACTOR·n` steps.
pub fn rw_sample(g: &Graph, in_pool: &[bool], start: usize, n: usize, walk: WalkParams, rng: &mut impl Rng) -> Vec<usize> {
    let mut seen = vec![false; g.n()];
    let mut collected = Vec::with_capacity(n);
    let mut visit = |v: usize, collected: &mut Vec<usize>| {
        if in_pool[v] && !seen[v] {
            seen[v] = true;
            collected.push(v);
        }
    };
    visit(start, &mut collected);
    if g.degree(start) == 0 || walk.walk_len == 0 {
        return collected;
    }
    let budget = RW_STEP_BUDGET_FACTOR * n;
    let mut steps = 0;
    while collected.len() < n && steps < budget {
        let mut cur = start;
        for _ in 0..walk.walk_len {
            cur = if rng.random::<f64>() < walk.alpha {
                start
            } else {
                let nbrs = g.neighbors(cur);
                nbrs[rng.random_range(0..nbrs.len())]
            };
            steps += 1;
            visit(cur, &mut collected);
            if collected.len() >= n || steps >= budget {
                break;
            }
        }
    }
    collected
}

pub fn sample_rw(
    g: &Graph,
    pool: &[usize],
    params: StructuralParams,
    walk: WalkParams,
    seed: u64,
) -> Result<Vec<ShiftSample>> {
    if !(0.0..=1.0).contains(&walk.alpha) {
        return Err(Error::Parameter(format!("teleport probability must lie in [0, 1], got {}", walk.alpha)));
    }
    let starts = choose_starts(g, pool, params.seeds_per_label, seed, "rw")?;
    let in_pool = pool_mask(g, pool);
    Ok(starts
        .into_iter()
        .enumerate()
        .map(|(i, start)| {
            let sample_seed = derive_seed(seed, i as u64);
            let vertices = rw_sample(g, &in_pool, start, params.sample_size, walk, &mut rng_from(sample_seed));
            structural_sample(g, "rw", sample_seed, start, params.sample_size, vertices)
        })
        .collect())
}

/// Stochastic block model with a full block-to-block edge probability matrix.
/// Vertices are numbered block by block; vertex labels are `block_labels[b]`
/// (identity when `None`).
pub fn generate_sbm_matrix(
    blocks: &[usize],
    probs: &[Vec<f64>],
    block_labels: Option<&[usize]>,
    seed: u64,
) -> Result<Graph> {
    let b = blocks.len();
    if probs.len() != b || probs.iter().any(|row| row.len() != b) {
        return Err(Error::Dimension {
            expected: b,
            got: probs.len(),
        });
    }
    if probs.iter().flatten().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::Parameter("edge probabilities must lie in [0, 1]".into()));
    }
    let labels_of: Vec<usize> = match block_labels {
        Some(l) if l.len() != b => return Err(Error::Dimension { expected: b, got: l.len() }),
        Some(l) => l.to_vec(),
        None => (0..b).collect(),
    };
    let block_of: Vec<usize> = blocks.iter().enumerate().flat_map(|(i, &s)| std::iter::repeat_n(i, s)).collect();
    let n = block_of.len();
    let mut rng = rng_from(seed);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            let p = probs[block_of[u]][block_of[v]];
            if p > 0.0 && rng.random::<f64>() < p {
                edges.push((u, v));
            }
        }
    }
    let labels: Vec<usize> = block_of.iter().map(|&bl| labels_of[bl]).collect();
    let k = labels.iter().max().map_or(2, |&m| (m + 1).max(2));
    Graph::from_edges(n, &edges)?.with_labels(labels, Some(k))
}

/// Planted partition: `p_in` within blocks, `p_out` across.
pub fn generate_sbm(blocks: &[usize], p_in: f64, p_out: f64, block_labels: Option<&[usize]>, seed: u64) -> Result<Graph> {
    let b = blocks.len();
    let probs: Vec<Vec<f64>> = (0..b)
        .map(|i| (0..b).map(|j| if i == j { p_in } else { p_out }).collect())
        .collect();
    generate_sbm_matrix(blocks, &probs, block_labels, seed)
}

fn fmt_vec(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";")
}

/// One sample per file: a `#` header with provenance, then vertex ids.
pub fn format_sample(s: &ShiftSample) -> String {
    let p = &s.provenance;
    let mut out = format!(
        "# sampler={},seed={},n={},requested={},start={},exhausted={}",
        p.sampler,
        p.seed,
        s.vertices.len(),
        p.requested,
        p.start.map_or_else(|| "-".into(), |v| v.to_string()),
        s.exhausted
    );
    if let Some(t) = &p.target {
        let _ = write!(out, ",target={}", fmt_vec(t));
    }
    out.push('\n');
    for v in &s.vertices {
        let _ = writeln!(out, "{v}");
    }
    out
}

/// Writes `sample_NNNN.txt` files and a `manifest.csv` into `dir`.
pub fn write_samples(dir: &Path, samples: &[ShiftSample]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::with_capacity(samples.len());
    let manifest_path = dir.join("manifest.csv");
    let mut manifest = csv::Writer::from_path(&manifest_path)?;
    manifest.write_record(["file", "sampler", "seed", "n", "requested", "start", "exhausted", "true_prev"])?;
    for (i, s) in samples.iter().enumerate() {
        let name = format!("sample_{i:04}.txt");
        let path = dir.join(&name);
        fs::write(&path, format_sample(s)).map_err(|e| Error::io(&path, e))?;
        manifest.write_record([
            name,
            s.provenance.sampler.clone(),
            s.provenance.seed.to_string(),
            s.vertices.len().to_string(),
            s.provenance.requested.to_string(),
            s.provenance.start.map_or_else(String::new, |v| v.to_string()),
            s.exhausted.to_string(),
            fmt_vec(&s.true_prev),
        ])?;
        files.push(path);
    }
    manifest.flush().map_err(|e| Error::io(&manifest_path, e))?;
    Ok(files)
}
