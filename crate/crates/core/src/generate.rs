//! Seeded synthetic graphs for tests and demos.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::graph::Graph;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("invalid generator parameters: {0}")]
pub struct GenError(pub String);

#[derive(Debug, Clone)]
pub struct Generated {
    /// Nodes are labeled `0..N` in index order; isolated nodes are kept.
    pub graph: Graph,
    /// Planted block of every node, when the generator has one.
    pub truth: Option<Vec<usize>>,
}

fn numbered(n: usize) -> Vec<String> {
    (0..n).map(|i| i.to_string()).collect()
}

fn build(n: usize, edges: Vec<(usize, usize)>) -> Graph {
    Graph::from_edges(numbered(n), edges).expect("generated edges are in range")
}

fn probability(name: &str, p: f64) -> Result<(), GenError> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(GenError(format!("{name} must lie in [0, 1], got {p}")))
    }
}

/// `blocks` groups of `block_size` nodes; each pair inside a block is an
/// edge with probability `p_in`, each pair across blocks with `p_out`.
pub fn planted_partition(
    blocks: usize,
    block_size: usize,
    p_in: f64,
    p_out: f64,
    seed: u64,
) -> Result<Generated, GenError> {
    if blocks == 0 || block_size == 0 {
        return Err(GenError("blocks and block size must be positive".into()));
    }
    probability("p_in", p_in)?;
    probability("p_out", p_out)?;
    let n = blocks * block_size;
    let truth: Vec<usize> = (0..n).map(|i| i / block_size).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            let p = if truth[u] == truth[v] { p_in } else { p_out };
            if rng.random::<f64>() < p {
                edges.push((u, v));
            }
        }
    }
    Ok(Generated {
        graph: build(n, edges),
        truth: Some(truth),
    })
}

/// A cycle of `ring` nodes with `tree_nodes` extra nodes hung off it, each
/// attached to a uniformly chosen earlier node.
pub fn ring_with_trees(ring: usize, tree_nodes: usize, seed: u64) -> Result<Generated, GenError> {
    if ring < 3 {
        return Err(GenError(format!("ring needs at least 3 nodes, got {ring}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges: Vec<(usize, usize)> = (0..ring).map(|i| (i, (i + 1) % ring)).collect();
    for v in ring..ring + tree_nodes {
        edges.push((rng.random_range(0..v), v));
    }
    Ok(Generated {
        graph: build(ring + tree_nodes, edges),
        truth: None,
    })
}

/// Preferential attachment: a seed clique of `m + 1` nodes, then each new
/// node links to `m` distinct existing nodes chosen proportionally to
/// degree.
pub fn scale_free(n: usize, m: usize, seed: u64) -> Result<Generated, GenError> {
    if m == 0 || n <= m {
        return Err(GenError(format!("need n > m >= 1, got n={n}, m={m}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    let mut endpoints = Vec::new();
    for u in 0..=m {
        for v in u + 1..=m {
            edges.push((u, v));
            endpoints.extend([u, v]);
        }
    }
    let mut targets = HashSet::with_capacity(m);
    let mut picked = Vec::with_capacity(m);
    for v in m + 1..n {
        targets.clear();
        picked.clear();
        while picked.len() < m {
            let t = endpoints[rng.random_range(0..endpoints.len())];
            if targets.insert(t) {
                picked.push(t);
            }
        }
        for &t in &picked {
            edges.push((t, v));
            endpoints.extend([t, v]);
        }
    }
    Ok(Generated {
        graph: build(n, edges),
        truth: None,
    })
}

/// Uniform random graph with exactly `m` distinct edges.
pub fn random_gnm(n: usize, m: usize, seed: u64) -> Result<Generated, GenError> {
    if n < 2 || m > n * (n - 1) / 2 {
        return Err(GenError(format!("cannot place {m} edges on {n} nodes")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = HashSet::with_capacity(m);
    let mut edges = Vec::with_capacity(m);
    while edges.len() < m {
        let (u, v) = (rng.random_range(0..n), rng.random_range(0..n));
        if u != v && seen.insert((u.min(v), u.max(v))) {
            edges.push((u.min(v), u.max(v)));
        }
    }
    Ok(Generated {
        graph: build(n, edges),
        truth: None,
    })
}
