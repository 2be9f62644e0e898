//! Undirected vertex-labeled graphs in compressed sparse row form.
//!
//! Vertices are dense `0..n` ids. The adjacency is kept symmetric, free of
//! self-loops and duplicate edges, with each neighbor list sorted ascending.
//!
//! # File formats
//!
//! * Edge file: one edge per line, two tokens separated by whitespace.
//!   Lines starting with `#` are comments. A leading `# n <count>` comment
//!   fixes the vertex count and makes tokens literal ids in `0..count`;
//!   without it, tokens are mapped to ids in order of first appearance.
//! * Labels file: one non-negative integer per line, line `i` labels vertex `i`.
//! * Features file: one comma-separated row of reals per vertex.

use std::collections::{HashMap, VecDeque};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Hop count marking a vertex that cannot be reached from the source.
pub const UNREACHABLE: usize = usize::MAX;

#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
    labels: Option<Vec<usize>>,
    num_classes: usize,
    features: Option<Vec<f64>>,
    feature_dim: usize,
}

impl Graph {
    /// Builds a graph on `n` vertices. Edges are symmetrized, self-loops are
    /// dropped and duplicates collapse to a single undirected edge.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut lists: Vec<Vec<usize>> = vec![Vec::new(); n];
        for &(u, v) in edges {
            for w in [u, v] {
                if w >= n {
                    return Err(Error::VertexOutOfRange { vertex: w, n });
                }
            }
            if u == v {
                continue;
            }
            lists[u].push(v);
            lists[v].push(u);
        }
        let mut offsets = Vec::with_capacity(n + 1);
        let mut neighbors = Vec::new();
        offsets.push(0);
        for mut list in lists {
            list.sort_unstable();
            list.dedup();
            neighbors.extend(list);
            offsets.push(neighbors.len());
        }
        Ok(Self {
            offsets,
            neighbors,
            labels: None,
            num_classes: 0,
            features: None,
            feature_dim: 0,
        })
    }

    /// Attaches labels; the class count is `max(label) + 1` unless a larger
    /// `num_classes` is given.
    pub fn with_labels(mut self, labels: Vec<usize>, num_classes: Option<usize>) -> Result<Self> {
        if labels.len() != self.n() {
            return Err(Error::Validation(format!(
                "{} labels given for {} vertices",
                labels.len(),
                self.n()
            )));
        }
        let observed = labels.iter().max().map_or(0, |&m| m + 1);
        let k = num_classes.unwrap_or(observed);
        if observed > k {
            return Err(Error::Validation(format!(
                "label {} out of range for {} classes",
                observed - 1,
                k
            )));
        }
        if k < 2 && !labels.is_empty() {
            return Err(Error::Validation(format!(
                "labeled graphs need at least 2 classes, found {k}"
            )));
        }
        self.labels = Some(labels);
        self.num_classes = k;
        Ok(self)
    }

    /// Attaches one `dim`-dimensional feature row per vertex (row-major).
    pub fn with_features(mut self, features: Vec<f64>, dim: usize) -> Result<Self> {
        if features.len() != self.n() * dim {
            return Err(Error::Validation(format!(
                "feature matrix has {} entries, expected {} x {}",
                features.len(),
                self.n(),
                dim
            )));
        }
        if features.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("features".into()));
        }
        self.features = Some(features);
        self.feature_dim = dim;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn num_edges(&self) -> usize {
        self.neighbors.len() / 2
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.neighbors[self.offsets[v]..self.offsets[v + 1]]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.offsets[v + 1] - self.offsets[v]
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.neighbors(u).binary_search(&v).is_ok()
    }

    /// Undirected edges `(u, v)` with `u < v`, in ascending order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n()).flat_map(move |u| {
            self.neighbors(u)
                .iter()
                .copied()
                .filter(move |&v| u < v)
                .map(move |v| (u, v))
        })
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn label(&self, v: usize) -> Option<usize> {
        self.labels.as_ref().map(|l| l[v])
    }

    /// Number of classes; zero for unlabeled graphs.
    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn features(&self, v: usize) -> Option<&[f64]> {
        let d = self.feature_dim;
        self.features.as_ref().map(|f| &f[v * d..(v + 1) * d])
    }

    pub fn has_features(&self) -> bool {
        self.features.is_some()
    }

    pub(crate) fn check_vertex(&self, v: usize) -> Result<()> {
        if v < self.n() {
            Ok(())
        } else {
            Err(Error::VertexOutOfRange { vertex: v, n: self.n() })
        }
    }

    /// Pairs each vertex with its ground-truth label.
    pub fn labeled(&self, vertices: &[usize]) -> Result<Vec<(usize, usize)>> {
        let labels = self
            .labels
            .as_ref()
            .ok_or_else(|| Error::Config("graph has no labels".into()))?;
        vertices
            .iter()
            .map(|&v| {
                self.check_vertex(v)?;
                Ok((v, labels[v]))
            })
            .collect()
    }
}

/// Hop distances from a single source.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistanceRow {
    pub source: usize,
    pub dist: Vec<usize>,
}

impl DistanceRow {
    pub fn is_reachable(&self, v: usize) -> bool {
        self.dist[v] != UNREACHABLE
    }
}

pub fn bfs_from(g: &Graph, source: usize) -> Result<DistanceRow> {
    g.check_vertex(source)?;
    let mut dist = vec![UNREACHABLE; g.n()];
    let mut queue = VecDeque::new();
    dist[source] = 0;
    queue.push_back(source);
    while let Some(u) = queue.pop_front() {
        let next = dist[u] + 1;
        for &v in g.neighbors(u) {
            if dist[v] == UNREACHABLE {
                dist[v] = next;
                queue.push_back(v);
            }
        }
    }
    Ok(DistanceRow { source, dist })
}

/// Exact unweighted distances from every source, in the order given.
pub fn bfs_distances(g: &Graph, sources: &[usize]) -> Result<Vec<DistanceRow>> {
    sources.iter().map(|&s| bfs_from(g, s)).collect()
}

/// Component id per vertex; ids are dense and assigned in order of the
/// smallest vertex of each component.
pub fn connected_components(g: &Graph) -> Vec<usize> {
    let mut comp = vec![UNREACHABLE; g.n()];
    let mut next_id = 0;
    let mut stack = Vec::new();
    for start in 0..g.n() {
        if comp[start] != UNREACHABLE {
            continue;
        }
        comp[start] = next_id;
        stack.push(start);
        while let Some(u) = stack.pop() {
            for &v in g.neighbors(u) {
                if comp[v] == UNREACHABLE {
                    comp[v] = next_id;
                    stack.push(v);
                }
            }
        }
        next_id += 1;
    }
    comp
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_count_header(line: &str) -> Option<std::result::Result<usize, String>> {
    let rest = line.strip_prefix('#')?.trim();
    let mut parts = rest.split_whitespace();
    if parts.next()? != "n" {
        return None;
    }
    let count = parts.next()?;
    Some(
        count
            .parse::<usize>()
            .map_err(|_| format!("invalid vertex count {count:?}")),
    )
}

/// Parses an edge list. See the module docs for the format.
pub fn parse_edges(text: &str, path: &Path) -> Result<(usize, Vec<(usize, usize)>)> {
    let mut fixed_n = None;
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(header) = parse_count_header(line) {
            fixed_n = Some(header.map_err(|m| Error::parse(path, i + 1, m))?);
        }
        break;
    }

    let mut ids: HashMap<String, usize> = HashMap::new();
    let mut edges = Vec::new();
    for (line_no, line) in content_lines(text) {
        let mut tokens = line.split_whitespace();
        let (Some(a), Some(b), None) = (tokens.next(), tokens.next(), tokens.next()) else {
            return Err(Error::parse(path, line_no, "expected exactly two vertex ids"));
        };
        let mut resolve = |tok: &str| -> Result<usize> {
            match fixed_n {
                Some(n) => {
                    let v: usize = tok
                        .parse()
                        .map_err(|_| Error::parse(path, line_no, format!("invalid vertex id {tok:?}")))?;
                    if v >= n {
                        return Err(Error::parse(
                            path,
                            line_no,
                            format!("vertex {v} exceeds declared count {n}"),
                        ));
                    }
                    Ok(v)
                }
                None => {
                    let next = ids.len();
                    Ok(*ids.entry(tok.to_string()).or_insert(next))
                }
            }
        };
        let u = resolve(a)?;
        let v = resolve(b)?;
        edges.push((u, v));
    }
    Ok((fixed_n.unwrap_or(ids.len()), edges))
}

pub fn parse_labels(text: &str, path: &Path) -> Result<Vec<usize>> {
    content_lines(text)
        .map(|(line_no, line)| {
            let value: i64 = line
                .parse()
                .map_err(|_| Error::parse(path, line_no, format!("invalid label {line:?}")))?;
            usize::try_from(value)
                .map_err(|_| Error::Validation(format!("label {value} on line {line_no} is out of range")))
        })
        .collect()
}

pub fn parse_features(text: &str, path: &Path) -> Result<(Vec<f64>, usize)> {
    let mut dim = None;
    let mut values = Vec::new();
    for (line_no, line) in content_lines(text) {
        let row: Vec<f64> = line
            .split(',')
            .map(|tok| {
                tok.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::parse(path, line_no, format!("invalid real {:?}", tok.trim())))
            })
            .collect::<Result<_>>()?;
        match dim {
            None => dim = Some(row.len()),
            Some(d) if d != row.len() => {
                return Err(Error::parse(
                    path,
                    line_no,
                    format!("row has {} columns, expected {d}", row.len()),
                ))
            }
            _ => {}
        }
        values.extend(row);
    }
    Ok((values, dim.unwrap_or(0)))
}

pub fn load_graph(
    edge_path: &Path,
    labels_path: Option<&Path>,
    features_path: Option<&Path>,
) -> Result<Graph> {
    let (n, edges) = parse_edges(&read_text(edge_path)?, edge_path)?;
    let mut g = Graph::from_edges(n, &edges)?;
    if let Some(path) = labels_path {
        let labels = parse_labels(&read_text(path)?, path)?;
        // A file that happens to use one label still describes a binary task.
        let k = labels.iter().max().map_or(2, |&m| (m + 1).max(2));
        g = g.with_labels(labels, Some(k))?;
    }
    if let Some(path) = features_path {
        let (values, dim) = parse_features(&read_text(path)?, path)?;
        if dim == 0 && g.n() > 0 {
            return Err(Error::Validation("features file is empty".into()));
        }
        if values.len() != g.n() * dim {
            return Err(Error::Validation(format!(
                "features file has {} rows for {} vertices",
                values.len() / dim.max(1),
                g.n()
            )));
        }
        g = g.with_features(values, dim)?;
    }
    Ok(g)
}

/// Serializes the edge list with a count header, so isolated vertices and
/// vertex ids survive a round trip.
pub fn format_edges(g: &Graph) -> String {
    let mut out = format!("# n {}\n", g.n());
    for (u, v) in g.edges() {
        let _ = writeln!(out, "{u}\t{v}");
    }
    out
}

pub fn save_graph(
    g: &Graph,
    edge_path: &Path,
    labels_path: Option<&Path>,
    features_path: Option<&Path>,
) -> Result<()> {
    fs::write(edge_path, format_edges(g)).map_err(|e| Error::io(edge_path, e))?;
    if let (Some(path), Some(labels)) = (labels_path, g.labels()) {
        let mut out = String::new();
        for l in labels {
            let _ = writeln!(out, "{l}");
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))?;
    }
    if let (Some(path), true) = (features_path, g.has_features()) {
        let mut out = String::new();
        for v in 0..g.n() {
            let row: Vec<String> = g.features(v).unwrap().iter().map(|x| x.to_string()).collect();
            let _ = writeln!(out, "{}", row.join(","));
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

/// Reads a vertex list: one id per line, `#` comments allowed.
pub fn load_vertex_list(path: &Path) -> Result<Vec<usize>> {
    let text = read_text(path)?;
    content_lines(&text)
        .map(|(line_no, line)| {
            line.parse()
                .map_err(|_| Error::parse(path, line_no, format!("invalid vertex id {line:?}")))
        })
        .collect()
}

pub fn save_vertex_list(path: &Path, vertices: &[usize]) -> Result<()> {
    let mut out = String::new();
    for v in vertices {
        let _ = writeln!(out, "{v}");
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}
