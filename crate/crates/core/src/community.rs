//! Modularity-based community detection.
//!
//! Modularity of a partition is `Q = Σ_p (e_pp − a_p²)` where `e_pq` is the
//! fraction of edge endpoints (each undirected edge counted once in each
//! direction) joining community `p` to community `q`, and `a_p = Σ_q e_pq`.
//!
//! All bookkeeping is done on integer edge-endpoint counts. With `2M` the
//! number of edge endpoints, `e_pq = c_pq / 2M` and `a_p = d_p / 2M`, so the
//! merge gain `ΔQ = 2(e_pq − a_p a_q)` is proportional to the integer
//! `2M·c_pq − d_p·d_q`. Greedy ties are therefore exact and the running
//! modularity never drifts from a from-scratch evaluation.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap, HashMap};

use rayon::prelude::*;
use thiserror::Error;

use crate::graph::Graph;

/// Communities larger than this are re-optimized on their own by default.
pub const DEFAULT_SIZE_THRESHOLD: usize = 10_000;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CommunityError {
    #[error("partition covers {partition} nodes but the graph has {graph}")]
    SizeMismatch { partition: usize, graph: usize },
    #[error("community {0} does not exist or has been merged away")]
    DeadCommunity(usize),
    #[error("cannot merge community {0} with itself")]
    SameCommunity(usize),
}

/// Assignment of every node to exactly one community, with ids `0..C`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    assignment: Vec<usize>,
    sizes: Vec<usize>,
}

impl Partition {
    /// Relabels arbitrary community keys densely, in order of first
    /// appearance along the node index.
    pub fn from_assignment(raw: &[usize]) -> Self {
        let mut ids = HashMap::new();
        let mut sizes = Vec::new();
        let assignment = raw
            .iter()
            .map(|key| {
                let id = *ids.entry(*key).or_insert_with(|| {
                    sizes.push(0);
                    sizes.len() - 1
                });
                sizes[id] += 1;
                id
            })
            .collect();
        Self { assignment, sizes }
    }

    pub fn singletons(n: usize) -> Self {
        Self {
            assignment: (0..n).collect(),
            sizes: vec![1; n],
        }
    }

    pub fn whole(n: usize) -> Self {
        Self {
            assignment: vec![0; n],
            sizes: if n == 0 { Vec::new() } else { vec![n] },
        }
    }

    pub fn node_count(&self) -> usize {
        self.assignment.len()
    }

    pub fn community_count(&self) -> usize {
        self.sizes.len()
    }

    pub fn community_of(&self, node: usize) -> usize {
        self.assignment[node]
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// Member lists per community id, each sorted by node index.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out: Vec<Vec<usize>> = self.sizes.iter().map(|&s| Vec::with_capacity(s)).collect();
        for (node, &c) in self.assignment.iter().enumerate() {
            out[c].push(node);
        }
        out
    }
}

/// Modularity of `part` on `g`. An edgeless graph has modularity 0.
pub fn modularity(g: &Graph, part: &Partition) -> Result<f64, CommunityError> {
    Ok(ModularityState::new(g, part)?.modularity())
}

/// Community-level edge bookkeeping supporting O(row) merges.
#[derive(Debug, Clone)]
pub struct ModularityState {
    two_m: u64,
    /// Off-diagonal endpoint counts `c_pq`, symmetric.
    links: Vec<BTreeMap<usize, u64>>,
    /// Diagonal endpoint counts `c_pp` (twice the internal edge count).
    internal: Vec<u64>,
    /// Endpoint totals `d_p = Σ_q c_pq`.
    degree: Vec<u64>,
    alive: Vec<bool>,
    /// `Σ_p (2M·c_pp − d_p²)`, so that `Q = numerator / (2M)²`.
    numerator: i128,
}

impl ModularityState {
    pub fn new(g: &Graph, part: &Partition) -> Result<Self, CommunityError> {
        if part.node_count() != g.node_count() {
            return Err(CommunityError::SizeMismatch {
                partition: part.node_count(),
                graph: g.node_count(),
            });
        }
        let c = part.community_count();
        let mut links = vec![BTreeMap::new(); c];
        let mut internal = vec![0u64; c];
        let mut degree = vec![0u64; c];
        for &(u, v) in g.edges() {
            let (p, q) = (part.community_of(u), part.community_of(v));
            degree[p] += 1;
            degree[q] += 1;
            if p == q {
                internal[p] += 2;
            } else {
                *links[p].entry(q).or_insert(0) += 1;
                *links[q].entry(p).or_insert(0) += 1;
            }
        }
        let two_m = 2 * g.edge_count() as u64;
        let numerator = (0..c)
            .map(|p| two_m as i128 * internal[p] as i128 - (degree[p] as i128).pow(2))
            .sum();
        Ok(Self {
            two_m,
            links,
            internal,
            degree,
            alive: vec![true; c],
            numerator,
        })
    }

    fn norm(&self) -> f64 {
        (self.two_m as f64).max(1.0)
    }

    /// Current modularity.
    pub fn modularity(&self) -> f64 {
        if self.two_m == 0 {
            return 0.0;
        }
        self.numerator as f64 / (self.two_m as f64 * self.two_m as f64)
    }

    /// Fraction `e_pq` of edge endpoints joining `p` to `q`.
    pub fn e(&self, p: usize, q: usize) -> f64 {
        let count = if p == q {
            self.internal[p]
        } else {
            self.links[p].get(&q).copied().unwrap_or(0)
        };
        count as f64 / self.norm()
    }

    /// Fraction `a_p` of edge endpoints attached to `p`.
    pub fn a(&self, p: usize) -> f64 {
        self.degree[p] as f64 / self.norm()
    }

    pub fn is_alive(&self, p: usize) -> bool {
        self.alive.get(p).copied().unwrap_or(false)
    }

    pub fn live_communities(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.alive.len()).filter(|&p| self.alive[p])
    }

    /// Communities sharing at least one edge with `p`, with endpoint counts.
    pub fn neighbors(&self, p: usize) -> impl Iterator<Item = (usize, u64)> + '_ {
        self.links[p].iter().map(|(&q, &c)| (q, c))
    }

    fn check_pair(&self, p: usize, q: usize) -> Result<(), CommunityError> {
        if !self.is_alive(p) {
            return Err(CommunityError::DeadCommunity(p));
        }
        if !self.is_alive(q) {
            return Err(CommunityError::DeadCommunity(q));
        }
        if p == q {
            return Err(CommunityError::SameCommunity(p));
        }
        Ok(())
    }

    /// `ΔQ · (2M)² / 2`, exact.
    fn gain_key(&self, p: usize, q: usize) -> i128 {
        let c = self.links[p].get(&q).copied().unwrap_or(0);
        self.two_m as i128 * c as i128 - self.degree[p] as i128 * self.degree[q] as i128
    }

    /// Change in modularity if `p` and `q` were merged: `2(e_pq − a_p a_q)`.
    pub fn delta_q(&self, p: usize, q: usize) -> Result<f64, CommunityError> {
        self.check_pair(p, q)?;
        if self.two_m == 0 {
            return Ok(0.0);
        }
        Ok(2.0 * self.gain_key(p, q) as f64 / (self.two_m as f64 * self.two_m as f64))
    }

    /// Merges `p` and `q`, returning the id that survives. The community
    /// with more neighbors absorbs the other (smaller id on ties).
    pub fn merge(&mut self, p: usize, q: usize) -> Result<usize, CommunityError> {
        self.check_pair(p, q)?;
        let (keep, gone) = match self.links[p].len().cmp(&self.links[q].len()) {
            Ordering::Greater => (p, q),
            Ordering::Less => (q, p),
            Ordering::Equal => (p.min(q), p.max(q)),
        };
        self.numerator += 2 * self.gain_key(keep, gone);

        let absorbed = std::mem::take(&mut self.links[gone]);
        let between = absorbed.get(&keep).copied().unwrap_or(0);
        for (&k, &c) in &absorbed {
            if k == keep {
                continue;
            }
            *self.links[keep].entry(k).or_insert(0) += c;
            let row = &mut self.links[k];
            row.remove(&gone);
            *row.entry(keep).or_insert(0) += c;
        }
        self.links[keep].remove(&gone);
        self.internal[keep] += self.internal[gone] + 2 * between;
        self.degree[keep] += self.degree[gone];
        self.internal[gone] = 0;
        self.degree[gone] = 0;
        self.alive[gone] = false;
        Ok(keep)
    }
}

/// Output of [`greedy_modularity`].
#[derive(Debug, Clone)]
pub struct GreedyResult {
    /// Partition at the step where modularity peaked.
    pub partition: Partition,
    /// Modularity before any merge (index 0) and after each merge.
    pub q_trace: Vec<f64>,
    /// Number of merges applied to reach `partition`.
    pub best_step: usize,
    pub modularity: f64,
}

#[derive(Debug, PartialEq, Eq)]
struct Candidate {
    gain: i128,
    p: usize,
    q: usize,
    stamp_p: u32,
    stamp_q: u32,
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.gain
            .cmp(&other.gain)
            .then_with(|| (other.p, other.q).cmp(&(self.p, self.q)))
            .then_with(|| (self.stamp_p, self.stamp_q).cmp(&(other.stamp_p, other.stamp_q)))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Agglomerative modularity maximization starting from singletons.
///
/// At every step the adjacent community pair with the largest gain is
/// merged (ties: smallest `(p, q)`), until every connected component is a
/// single community. Stale heap entries are skipped by comparing stamps
/// that advance whenever a community absorbs another. The partition with
/// the highest modularity along the way is returned; on equal modularity
/// the earliest step wins.
pub fn greedy_modularity(g: &Graph) -> GreedyResult {
    let n = g.node_count();
    let mut state = ModularityState::new(g, &Partition::singletons(n))
        .expect("singleton partition always matches");
    let mut stamps = vec![0u32; n];
    let mut heap = BinaryHeap::with_capacity(g.edge_count());
    for &(u, v) in g.edges() {
        heap.push(Candidate {
            gain: state.gain_key(u, v),
            p: u,
            q: v,
            stamp_p: 0,
            stamp_q: 0,
        });
    }

    let mut merges = Vec::with_capacity(n.saturating_sub(1));
    let mut q_trace = vec![state.modularity()];
    let mut best = (state.numerator, 0usize);

    while let Some(c) = heap.pop() {
        if !state.alive[c.p]
            || !state.alive[c.q]
            || stamps[c.p] != c.stamp_p
            || stamps[c.q] != c.stamp_q
        {
            continue;
        }
        let keep = state.merge(c.p, c.q).expect("live distinct pair");
        let gone = if keep == c.p { c.q } else { c.p };
        stamps[keep] += 1;
        merges.push((gone, keep));
        q_trace.push(state.modularity());
        if state.numerator > best.0 {
            best = (state.numerator, merges.len());
        }
        for (k, _) in state.neighbors(keep) {
            let (p, q) = (keep.min(k), keep.max(k));
            heap.push(Candidate {
                gain: state.gain_key(p, q),
                p,
                q,
                stamp_p: stamps[p],
                stamp_q: stamps[q],
            });
        }
    }

    let mut parent: Vec<usize> = (0..n).collect();
    for &(gone, keep) in &merges[..best.1] {
        parent[gone] = keep;
    }
    let roots: Vec<usize> = (0..n).map(|i| find_root(&mut parent, i)).collect();
    let modularity = q_trace[best.1];
    GreedyResult {
        partition: Partition::from_assignment(&roots),
        q_trace,
        best_step: best.1,
        modularity,
    }
}

fn find_root(parent: &mut [usize], mut i: usize) -> usize {
    let mut root = i;
    while parent[root] != root {
        root = parent[root];
    }
    while parent[i] != root {
        let next = parent[i];
        parent[i] = root;
        i = next;
    }
    root
}

/// A community and, when it was re-optimized on its own, its split.
#[derive(Debug, Clone, PartialEq)]
pub struct CommunityNode {
    /// Node indices of the full graph, sorted.
    pub members: Vec<usize>,
    pub children: Vec<CommunityNode>,
    /// Modularity of the split, measured on this community's own subgraph.
    pub split_modularity: Option<f64>,
}

impl CommunityNode {
    fn leaf(members: Vec<usize>) -> Self {
        Self {
            members,
            children: Vec::new(),
            split_modularity: None,
        }
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }
}

/// Hierarchy of communities produced by [`refine_recursive`]. The root
/// holds every node; its children are the top-level communities.
#[derive(Debug, Clone, PartialEq)]
pub struct Dendrogram {
    pub root: CommunityNode,
}

impl Dendrogram {
    /// Community path of every node: child positions from the top level down
    /// to the node's leaf, e.g. `[3, 1]`.
    pub fn paths(&self) -> Vec<Vec<usize>> {
        let n = self.root.members.len();
        let mut out = vec![Vec::new(); n];
        let mut stack: Vec<(&CommunityNode, Vec<usize>)> = vec![(&self.root, Vec::new())];
        while let Some((node, path)) = stack.pop() {
            if node.is_leaf() {
                for &m in &node.members {
                    out[m] = path.clone();
                }
                continue;
            }
            for (i, child) in node.children.iter().enumerate() {
                let mut p = path.clone();
                p.push(i);
                stack.push((child, p));
            }
        }
        out
    }

    /// Partition formed by the leaves, numbered in depth-first order.
    pub fn leaves(&self) -> Partition {
        let mut assignment = vec![0; self.root.members.len()];
        let mut next = 0;
        fn walk(node: &CommunityNode, assignment: &mut [usize], next: &mut usize) {
            if node.is_leaf() {
                for &m in &node.members {
                    assignment[m] = *next;
                }
                *next += 1;
            } else {
                for child in &node.children {
                    walk(child, assignment, next);
                }
            }
        }
        walk(&self.root, &mut assignment, &mut next);
        Partition::from_assignment(&assignment)
    }

    pub fn depth(&self) -> usize {
        fn depth(node: &CommunityNode) -> usize {
            node.children
                .iter()
                .map(|c| 1 + depth(c))
                .max()
                .unwrap_or(0)
        }
        depth(&self.root)
    }
}

/// Re-optimizes every community larger than `size_threshold` on its induced
/// subgraph, recursively. A split is kept only when it yields at least two
/// groups with positive modularity on that subgraph.
pub fn refine_recursive(g: &Graph, part: &Partition, size_threshold: usize) -> Dendrogram {
    let children = part
        .members()
        .into_par_iter()
        .map(|members| refine_node(g, members, size_threshold))
        .collect();
    let root = CommunityNode {
        members: (0..g.node_count()).collect(),
        children,
        split_modularity: modularity(g, part).ok(),
    };
    Dendrogram { root }
}

fn refine_node(g: &Graph, members: Vec<usize>, size_threshold: usize) -> CommunityNode {
    if members.len() <= size_threshold {
        return CommunityNode::leaf(members);
    }
    let sub = g.induced_subgraph(&members);
    let result = greedy_modularity(&sub);
    if result.partition.community_count() < 2 || result.modularity <= 0.0 {
        return CommunityNode::leaf(members);
    }
    let children = result
        .partition
        .members()
        .into_par_iter()
        .map(|local| {
            let global = local.iter().map(|&i| members[i]).collect();
            refine_node(g, global, size_threshold)
        })
        .collect();
    CommunityNode {
        members,
        children,
        split_modularity: Some(result.modularity),
    }
}
