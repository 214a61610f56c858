//! Landmark multidimensional scaling on graph distances.
//!
//! A small set of landmarks is embedded by classical MDS on their pairwise
//! hop distances; every node is then placed by distance-based triangulation
//! against the landmark coordinates. Cost is `O(L·(N + M))` for the BFS
//! sweeps plus one `L×L` eigendecomposition, so it scales to large graphs
//! where full `N×N` MDS would not.

use std::collections::VecDeque;

use faer::{Mat, Side};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::community::Partition;
use crate::graph::Graph;

pub const DEFAULT_LANDMARKS: usize = 100;

#[derive(Debug, Error, PartialEq)]
pub enum MdsError {
    #[error("graph is disconnected; pass its largest connected component")]
    Disconnected,
    #[error("need at least one landmark")]
    NoLandmarks,
    #[error("landmark {0} is not a node of the graph")]
    LandmarkOutOfRange(usize),
    #[error("partition covers {partition} nodes but the graph has {graph}")]
    SizeMismatch { partition: usize, graph: usize },
}

/// Shortest-path distances from each landmark to every node.
#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkDistances {
    landmarks: Vec<usize>,
    /// `dist[k][i]`: distance from landmark `k` to node `i`.
    dist: Vec<Vec<f64>>,
}

impl LandmarkDistances {
    pub fn landmarks(&self) -> &[usize] {
        &self.landmarks
    }

    pub fn node_count(&self) -> usize {
        self.dist.first().map_or(0, Vec::len)
    }

    pub fn get(&self, landmark: usize, node: usize) -> f64 {
        self.dist[landmark][node]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.dist
    }

    /// Adds `penalty` to every distance between nodes in different
    /// communities, pulling communities apart in the embedding.
    pub fn add_community_penalty(
        &mut self,
        part: &Partition,
        penalty: f64,
    ) -> Result<(), MdsError> {
        if part.node_count() != self.node_count() {
            return Err(MdsError::SizeMismatch {
                partition: part.node_count(),
                graph: self.node_count(),
            });
        }
        for (row, &l) in self.dist.iter_mut().zip(&self.landmarks) {
            let home = part.community_of(l);
            for (i, d) in row.iter_mut().enumerate() {
                if part.community_of(i) != home {
                    *d += penalty;
                }
            }
        }
        Ok(())
    }
}

fn bfs(g: &Graph, source: usize) -> Vec<u32> {
    let mut dist = vec![u32::MAX; g.node_count()];
    let mut queue = VecDeque::new();
    dist[source] = 0;
    queue.push_back(source);
    while let Some(u) = queue.pop_front() {
        let next = dist[u] + 1;
        for &w in g.neighbors(u) {
            if dist[w] == u32::MAX {
                dist[w] = next;
                queue.push_back(w);
            }
        }
    }
    dist
}

fn to_row(hops: Vec<u32>) -> Result<Vec<f64>, MdsError> {
    hops.into_iter()
        .map(|h| {
            if h == u32::MAX {
                Err(MdsError::Disconnected)
            } else {
                Ok(h as f64)
            }
        })
        .collect()
}

/// Exact BFS hop distances from each landmark, one BFS per landmark in
/// parallel.
pub fn bfs_distances(g: &Graph, landmarks: &[usize]) -> Result<LandmarkDistances, MdsError> {
    if landmarks.is_empty() {
        return Err(MdsError::NoLandmarks);
    }
    if let Some(&bad) = landmarks.iter().find(|&&l| l >= g.node_count()) {
        return Err(MdsError::LandmarkOutOfRange(bad));
    }
    let dist = landmarks
        .par_iter()
        .map(|&l| to_row(bfs(g, l)))
        .collect::<Result<_, _>>()?;
    Ok(LandmarkDistances {
        landmarks: landmarks.to_vec(),
        dist,
    })
}

/// Picks `count` landmarks by farthest-point sampling: a seeded random
/// start, then repeatedly the node farthest from all chosen landmarks
/// (smallest index on ties).
pub fn select_landmarks(g: &Graph, count: usize, seed: u64) -> Result<LandmarkDistances, MdsError> {
    let n = g.node_count();
    if count == 0 || n == 0 {
        return Err(MdsError::NoLandmarks);
    }
    let count = count.min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut landmarks = vec![rng.random_range(0..n)];
    let mut dist = vec![to_row(bfs(g, landmarks[0]))?];
    let mut nearest = dist[0].clone();
    while landmarks.len() < count {
        let (next, _) = nearest
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, &d)| {
                if d > best.1 {
                    (i, d)
                } else {
                    best
                }
            });
        if nearest[next] == 0.0 {
            break;
        }
        let row = to_row(bfs(g, next))?;
        for (m, &d) in nearest.iter_mut().zip(&row) {
            *m = m.min(d);
        }
        landmarks.push(next);
        dist.push(row);
    }
    Ok(LandmarkDistances { landmarks, dist })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MdsEmbedding<const D: usize> {
    pub positions: Vec<[f64; D]>,
    /// Number of coordinates backed by a positive eigenvalue. Fewer than
    /// `D` means the landmark metric was degenerate and the remaining
    /// coordinates are zero.
    pub rank: usize,
}

impl<const D: usize> MdsEmbedding<D> {
    pub fn is_degenerate(&self) -> bool {
        self.rank < D
    }
}

/// Classical MDS of the landmarks followed by triangulation of all nodes.
pub fn landmark_mds<const D: usize>(ld: &LandmarkDistances) -> MdsEmbedding<D> {
    let n = ld.node_count();
    let l = ld.landmarks.len();
    if n <= 1 || l <= 1 {
        return MdsEmbedding {
            positions: vec![[0.0; D]; n],
            rank: 0,
        };
    }

    let mut sq = Mat::<f64>::from_fn(l, l, |a, b| {
        let d = ld.dist[a][ld.landmarks[b]];
        d * d
    });
    // Symmetrize: penalties or asymmetric inputs must not break the solver.
    sq = Mat::from_fn(l, l, |a, b| 0.5 * (sq[(a, b)] + sq[(b, a)]));
    let row_means: Vec<f64> = (0..l)
        .map(|a| (0..l).map(|b| sq[(a, b)]).sum::<f64>() / l as f64)
        .collect();
    let grand = row_means.iter().sum::<f64>() / l as f64;
    let b = Mat::<f64>::from_fn(l, l, |a, c| {
        -0.5 * (sq[(a, c)] - row_means[a] - row_means[c] + grand)
    });

    let Ok(eig) = b.self_adjoint_eigen(Side::Lower) else {
        return MdsEmbedding {
            positions: vec![[0.0; D]; n],
            rank: 0,
        };
    };
    let values = eig.S().column_vector();
    let vectors = eig.U();
    let mut order: Vec<usize> = (0..l).collect();
    order.sort_by(|&i, &j| values[j].total_cmp(&values[i]).then(i.cmp(&j)));
    let top = values[order[0]].max(0.0);
    let tol = 1e-9 * top.max(f64::MIN_POSITIVE);

    // Pseudo-inverse rows v_k / sqrt(λ_k), with a fixed eigenvector sign.
    let mut pinv: Vec<Vec<f64>> = Vec::new();
    for &k in order.iter().take(D) {
        let lambda = values[k];
        if lambda <= tol {
            break;
        }
        let mut v: Vec<f64> = (0..l).map(|a| vectors[(a, k)]).collect();
        let pivot = v.iter().copied().fold(0.0f64, |best, c| {
            if c.abs() > best.abs() + 1e-12 {
                c
            } else {
                best
            }
        });
        if pivot < 0.0 {
            v.iter_mut().for_each(|c| *c = -*c);
        }
        let s = lambda.sqrt();
        pinv.push(v.into_iter().map(|c| c / s).collect());
    }
    let rank = pinv.len();

    let positions = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut x = [0.0; D];
            for (k, row) in pinv.iter().enumerate() {
                let mut acc = 0.0;
                for a in 0..l {
                    let d = ld.dist[a][i];
                    acc += row[a] * (d * d - row_means[a]);
                }
                x[k] = -0.5 * acc;
            }
            x
        })
        .collect();
    MdsEmbedding { positions, rank }
}

/// Mean Euclidean length of the graph's edges in `positions`.
pub fn mean_edge_length<const D: usize>(g: &Graph, positions: &[[f64; D]]) -> f64 {
    if g.edge_count() == 0 {
        return 0.0;
    }
    let total: f64 = g
        .edges()
        .iter()
        .map(|&(u, v)| {
            (0..D)
                .map(|k| (positions[u][k] - positions[v][k]).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .sum();
    total / g.edge_count() as f64
}

/// Rescales `positions` about the origin so the mean edge length equals
/// `target`. Leaves a collapsed embedding unchanged.
pub fn scale_to_edge_length<const D: usize>(g: &Graph, positions: &mut [[f64; D]], target: f64) {
    let mean = mean_edge_length(g, positions);
    if mean > 0.0 {
        let s = target / mean;
        for x in positions.iter_mut() {
            *x = x.map(|c| c * s);
        }
    }
}

/// Jitter added by [`mds_init`], as a fraction of the target edge length.
pub const INIT_JITTER: f64 = 0.1;

/// Displaces every point uniformly within a cube of side `amplitude`.
/// Nodes with identical landmark distances (sibling leaves, say) embed at
/// the same point and would otherwise feel identical forces forever.
pub fn jitter<const D: usize>(positions: &mut [[f64; D]], amplitude: f64, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6a09_e667_f3bc_c908);
    for x in positions.iter_mut() {
        for c in x.iter_mut() {
            *c += amplitude * (rng.random::<f64>() - 0.5);
        }
    }
}

/// Landmark MDS initial layout: farthest-point landmarks, embedding,
/// rescaling to a mean edge length of `edge_length`, and a small seeded
/// jitter.
pub fn mds_init<const D: usize>(
    g: &Graph,
    landmarks: usize,
    seed: u64,
    edge_length: f64,
) -> Result<MdsEmbedding<D>, MdsError> {
    let ld = select_landmarks(g, landmarks, seed)?;
    let mut emb = landmark_mds(&ld);
    scale_to_edge_length(g, &mut emb.positions, edge_length);
    jitter(&mut emb.positions, INIT_JITTER * edge_length, seed);
    Ok(emb)
}

/// `Σ (|x_a − x_b| − δ_ab)²` over landmark pairs.
pub fn landmark_stress<const D: usize>(ld: &LandmarkDistances, positions: &[[f64; D]]) -> f64 {
    let lm = &ld.landmarks;
    let mut stress = 0.0;
    for a in 0..lm.len() {
        for b in a + 1..lm.len() {
            let (p, q) = (positions[lm[a]], positions[lm[b]]);
            let d = (0..D).map(|k| (p[k] - q[k]).powi(2)).sum::<f64>().sqrt();
            stress += (d - ld.dist[a][lm[b]]).powi(2);
        }
    }
    stress
}
