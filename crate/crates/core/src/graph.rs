//! Undirected simple graphs with dense node indexing.
//!
//! Nodes carry their original string label; internally every node is an
//! index in `0..N` so that per-node state (positions, velocities,
//! community ids) can live in flat arrays aligned with the graph.

use std::collections::{HashMap, VecDeque};
use std::fmt::Write as _;

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("line {line}: expected 2 node labels, found {found}")]
    MalformedLine { line: usize, found: usize },
    #[error("line {line}: label {label:?} starts with '#'")]
    CommentLabel { line: usize, label: String },
    #[error("no edges")]
    NoEdges,
    #[error("edge ({0}, {1}) references a node outside 0..{2}")]
    NodeOutOfRange(usize, usize, usize),
    #[error("duplicate node label {0:?}")]
    DuplicateLabel(String),
}

/// Counters collected while normalizing an edge list.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ParseReport {
    pub lines: usize,
    pub comments: usize,
    pub self_loops: usize,
    pub duplicate_edges: usize,
}

/// Undirected simple graph. Immutable once built.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    adjacency: Vec<Vec<usize>>,
    edges: Vec<(usize, usize)>,
    labels: Vec<String>,
}

impl Graph {
    /// Builds a graph over `labels.len()` nodes from an arbitrary edge list.
    /// Self-loops are dropped and parallel or reversed edges merged.
    pub fn from_edges<I>(labels: Vec<String>, edges: I) -> Result<Self, GraphError>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let n = labels.len();
        let mut seen = HashMap::with_capacity(n);
        for (i, label) in labels.iter().enumerate() {
            if seen.insert(label.as_str(), i).is_some() {
                return Err(GraphError::DuplicateLabel(label.clone()));
            }
        }
        let mut canon = Vec::new();
        for (u, v) in edges {
            if u >= n || v >= n {
                return Err(GraphError::NodeOutOfRange(u, v, n));
            }
            if u != v {
                canon.push((u.min(v), u.max(v)));
            }
        }
        Ok(Self::from_canonical(labels, canon))
    }

    /// `edges` must already be in range and loop-free with `u < v`.
    fn from_canonical(labels: Vec<String>, mut edges: Vec<(usize, usize)>) -> Self {
        edges.sort_unstable();
        edges.dedup();
        let mut adjacency = vec![Vec::new(); labels.len()];
        for &(u, v) in &edges {
            adjacency[u].push(v);
            adjacency[v].push(u);
        }
        for row in &mut adjacency {
            row.sort_unstable();
        }
        Self {
            adjacency,
            edges,
            labels,
        }
    }

    pub fn node_count(&self) -> usize {
        self.labels.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Sorted neighbor indices of `node`.
    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.adjacency[node]
    }

    pub fn degree(&self, node: usize) -> usize {
        self.adjacency[node].len()
    }

    /// Canonical edges `(u, v)` with `u < v`, sorted.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn label(&self, node: usize) -> &str {
        &self.labels[node]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Map from original label to dense index.
    pub fn index_of_labels(&self) -> HashMap<&str, usize> {
        self.labels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.as_str(), i))
            .collect()
    }

    /// Canonical edge-list text: one `label_u label_v` line per edge,
    /// `u < v` in index order.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        for &(u, v) in &self.edges {
            let _ = writeln!(out, "{} {}", self.labels[u], self.labels[v]);
        }
        out
    }

    /// Subgraph induced by `nodes`, reindexed densely in the given order.
    pub fn induced_subgraph(&self, nodes: &[usize]) -> Graph {
        let mut remap = vec![usize::MAX; self.node_count()];
        for (new, &old) in nodes.iter().enumerate() {
            remap[old] = new;
        }
        let labels = nodes.iter().map(|&i| self.labels[i].clone()).collect();
        let edges = self
            .edges
            .iter()
            .filter_map(|&(u, v)| {
                let (a, b) = (remap[u], remap[v]);
                (a != usize::MAX && b != usize::MAX).then(|| (a.min(b), a.max(b)))
            })
            .collect();
        Graph::from_canonical(labels, edges)
    }

    /// Connected components, each a sorted list of node indices. Components
    /// are ordered by their smallest node index.
    pub fn connected_components(&self) -> Vec<Vec<usize>> {
        let n = self.node_count();
        let mut seen = vec![false; n];
        let mut components = Vec::new();
        let mut queue = VecDeque::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            seen[start] = true;
            queue.push_back(start);
            let mut members = Vec::new();
            while let Some(u) = queue.pop_front() {
                members.push(u);
                for &w in &self.adjacency[u] {
                    if !seen[w] {
                        seen[w] = true;
                        queue.push_back(w);
                    }
                }
            }
            members.sort_unstable();
            components.push(members);
        }
        components
    }

    pub fn is_connected(&self) -> bool {
        self.node_count() <= 1 || self.connected_components().len() == 1
    }

    /// Induced subgraph of the largest connected component. Ties go to the
    /// component whose smallest original label sorts first.
    pub fn largest_connected_component(&self) -> Graph {
        let components = self.connected_components();
        let min_label = |c: &Vec<usize>| c.iter().map(|&i| self.labels[i].as_str()).min();
        let best = components
            .iter()
            .max_by(|a, b| {
                a.len()
                    .cmp(&b.len())
                    .then_with(|| min_label(b).cmp(&min_label(a)))
            })
            .cloned()
            .unwrap_or_default();
        self.induced_subgraph(&best)
    }
}

/// Parses whitespace-separated edge-list text. Node indices are assigned in
/// order of first appearance; lines whose first non-blank character is `#`
/// are comments. A self-loop line is dropped without introducing its node.
pub fn parse_edge_list<'a>(text: &'a str) -> Result<(Graph, ParseReport), GraphError> {
    let mut report = ParseReport::default();
    let mut index: HashMap<&'a str, usize> = HashMap::new();
    let mut labels: Vec<String> = Vec::new();
    let mut edges = Vec::new();

    for (lineno, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if trimmed.starts_with('#') {
            report.comments += 1;
            continue;
        }
        report.lines += 1;
        let mut tokens = trimmed.split_whitespace();
        let (a, b) = match (tokens.next(), tokens.next(), tokens.next()) {
            (Some(a), Some(b), None) => (a, b),
            _ => {
                return Err(GraphError::MalformedLine {
                    line: lineno + 1,
                    found: trimmed.split_whitespace().count(),
                })
            }
        };
        // Written back out first on a line, this label would read as a comment.
        if b.starts_with('#') {
            return Err(GraphError::CommentLabel {
                line: lineno + 1,
                label: b.to_owned(),
            });
        }
        if a == b {
            report.self_loops += 1;
            continue;
        }
        let mut intern = |label: &'a str| -> usize {
            *index.entry(label).or_insert_with(|| {
                labels.push(label.to_owned());
                labels.len() - 1
            })
        };
        let (u, v) = (intern(a), intern(b));
        edges.push((u.min(v), u.max(v)));
    }

    if edges.is_empty() {
        return Err(GraphError::NoEdges);
    }
    let raw = edges.len();
    let graph = Graph::from_canonical(labels, edges);
    report.duplicate_edges = raw - graph.edge_count();
    Ok((graph, report))
}
