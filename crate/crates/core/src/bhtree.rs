//! Barnes-Hut space-subdivision tree for inverse-square repulsion.
//!
//! The tree is generic over the dimension `D` (1 to 3): every internal cell
//! splits into up to `2^D` children, a quadtree in 2D and an octree in 3D.
//! Each cell stores its total charge and center of charge. During a force
//! query a cell of width `s` whose center of charge lies at distance `r` is
//! used as a single pseudo-particle when `s / r < θ` and the query point is
//! outside the cell; otherwise its children are visited.
//!
//! Bodies taken from leaves are summed in ascending index order with the
//! same kernel as [`direct_coulomb`], so `θ = 0` reproduces direct
//! summation bit for bit.

use rayon::prelude::*;
use thiserror::Error;

/// Cells at this depth become leaf buckets regardless of how many bodies
/// they hold, which bounds recursion for coincident points.
pub const MAX_DEPTH: usize = 48;

const NONE: u32 = u32::MAX;

#[derive(Debug, Error, PartialEq)]
pub enum BhError {
    #[error("no bodies")]
    Empty,
    #[error("body {index} has a non-finite position")]
    NonFinite { index: usize },
    #[error("body {index} has charge {charge}; charges must be positive")]
    NonPositiveCharge { index: usize, charge: f64 },
    #[error("{positions} positions but {charges} charges")]
    LengthMismatch { positions: usize, charges: usize },
    #[error("body index {index} out of range for {len} bodies")]
    IndexOutOfRange { index: usize, len: usize },
}

/// Constants of the repulsive force law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForceParams {
    /// Opening angle; 0 opens every cell.
    pub theta: f64,
    /// Coulomb constant `C`.
    pub coulomb: f64,
    /// Softening length `ε` added in quadrature to every distance.
    pub softening: f64,
}

#[derive(Debug, Clone)]
pub struct Cell<const D: usize> {
    center: [f64; D],
    half: f64,
    charge: f64,
    centroid: [f64; D],
    children: [u32; 8],
    start: u32,
    len: u32,
    leaf: bool,
}

impl<const D: usize> Cell<D> {
    pub fn center(&self) -> [f64; D] {
        self.center
    }

    /// Full edge length of the cell.
    pub fn width(&self) -> f64 {
        2.0 * self.half
    }

    pub fn charge(&self) -> f64 {
        self.charge
    }

    pub fn centroid(&self) -> [f64; D] {
        self.centroid
    }

    pub fn is_leaf(&self) -> bool {
        self.leaf
    }

    /// Indices of child cells; empty for leaves.
    pub fn children(&self) -> impl Iterator<Item = usize> + '_ {
        self.children[..1 << D]
            .iter()
            .filter(|&&c| c != NONE)
            .map(|&c| c as usize)
    }

    /// Whether `x` lies in the closed box of this cell, with a relative
    /// slack that absorbs rounding at the faces.
    pub fn contains(&self, x: &[f64; D]) -> bool {
        let slack = self.half * (1.0 + 1e-12);
        (0..D).all(|k| (x[k] - self.center[k]).abs() <= slack)
    }
}

#[derive(Debug, Clone)]
pub struct BhTree<const D: usize> {
    cells: Vec<Cell<D>>,
    order: Vec<u32>,
    positions: Vec<[f64; D]>,
    charges: Vec<f64>,
}

impl<const D: usize> BhTree<D> {
    /// Builds the tree over bodies at `positions` with positive `charges`.
    pub fn build(positions: &[[f64; D]], charges: &[f64]) -> Result<Self, BhError> {
        const { assert!(D >= 1 && D <= 3, "supported dimensions are 1 to 3") };
        if positions.len() != charges.len() {
            return Err(BhError::LengthMismatch {
                positions: positions.len(),
                charges: charges.len(),
            });
        }
        if positions.is_empty() {
            return Err(BhError::Empty);
        }
        for (index, x) in positions.iter().enumerate() {
            if !x.iter().all(|c| c.is_finite()) {
                return Err(BhError::NonFinite { index });
            }
        }
        for (index, &charge) in charges.iter().enumerate() {
            if !(charge > 0.0 && charge.is_finite()) {
                return Err(BhError::NonPositiveCharge { index, charge });
            }
        }

        let mut lo = positions[0];
        let mut hi = positions[0];
        for x in positions {
            for k in 0..D {
                lo[k] = lo[k].min(x[k]);
                hi[k] = hi[k].max(x[k]);
            }
        }
        let mut center = [0.0; D];
        let mut half: f64 = 0.0;
        for k in 0..D {
            center[k] = 0.5 * (lo[k] + hi[k]);
            half = half.max(0.5 * (hi[k] - lo[k]));
        }
        half *= 1.0 + 1e-9;

        let mut tree = Self {
            cells: Vec::with_capacity(2 * positions.len()),
            order: (0..positions.len() as u32).collect(),
            positions: positions.to_vec(),
            charges: charges.to_vec(),
        };
        let mut scratch = vec![0u32; positions.len()];
        tree.build_cell(0, positions.len(), center, half, 0, &mut scratch);
        Ok(tree)
    }

    fn build_cell(
        &mut self,
        start: usize,
        end: usize,
        center: [f64; D],
        half: f64,
        depth: usize,
        scratch: &mut [u32],
    ) -> u32 {
        let id = self.cells.len() as u32;
        let leaf = end - start <= 1 || half == 0.0 || depth >= MAX_DEPTH;
        self.cells.push(Cell {
            center,
            half,
            charge: 0.0,
            centroid: [0.0; D],
            children: [NONE; 8],
            start: start as u32,
            len: (end - start) as u32,
            leaf,
        });

        if leaf {
            let (charge, centroid) = self.centroid_of_bodies(start, end);
            let cell = &mut self.cells[id as usize];
            cell.charge = charge;
            cell.centroid = centroid;
            return id;
        }

        // Counting sort of the body range into orthants.
        let orthant = |x: &[f64; D]| -> usize {
            (0..D).fold(0, |acc, k| acc | (usize::from(x[k] >= center[k]) << k))
        };
        let mut counts = [0usize; 8];
        for &b in &self.order[start..end] {
            counts[orthant(&self.positions[b as usize])] += 1;
        }
        let mut offsets = [0usize; 9];
        for o in 0..8 {
            offsets[o + 1] = offsets[o] + counts[o];
        }
        let mut cursor = offsets;
        for &b in &self.order[start..end] {
            let o = orthant(&self.positions[b as usize]);
            scratch[start + cursor[o]] = b;
            cursor[o] += 1;
        }
        self.order[start..end].copy_from_slice(&scratch[start..end]);

        let child_half = 0.5 * half;
        let mut children = [NONE; 8];
        for o in 0..1usize << D {
            if counts[o] == 0 {
                continue;
            }
            let mut child_center = center;
            for k in 0..D {
                child_center[k] += if o >> k & 1 == 1 {
                    child_half
                } else {
                    -child_half
                };
            }
            children[o] = self.build_cell(
                start + offsets[o],
                start + offsets[o + 1],
                child_center,
                child_half,
                depth + 1,
                scratch,
            );
        }

        let mut charge = 0.0;
        let mut weighted = [0.0; D];
        for &c in children.iter().filter(|&&c| c != NONE) {
            let child = &self.cells[c as usize];
            charge += child.charge;
            for k in 0..D {
                weighted[k] += child.charge * child.centroid[k];
            }
        }
        let cell = &mut self.cells[id as usize];
        cell.children = children;
        cell.charge = charge;
        for k in 0..D {
            cell.centroid[k] = weighted[k] / charge;
        }
        id
    }

    fn centroid_of_bodies(&self, start: usize, end: usize) -> (f64, [f64; D]) {
        let mut charge = 0.0;
        let mut weighted = [0.0; D];
        for &b in &self.order[start..end] {
            let q = self.charges[b as usize];
            charge += q;
            for k in 0..D {
                weighted[k] += q * self.positions[b as usize][k];
            }
        }
        let mut centroid = [0.0; D];
        for k in 0..D {
            centroid[k] = weighted[k] / charge;
        }
        (charge, centroid)
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn root(&self) -> &Cell<D> {
        &self.cells[0]
    }

    pub fn cells(&self) -> &[Cell<D>] {
        &self.cells
    }

    /// Body indices held by `cell` (all bodies of its subtree).
    pub fn bodies(&self, cell: &Cell<D>) -> impl Iterator<Item = usize> + '_ {
        let (s, l) = (cell.start as usize, cell.len as usize);
        self.order[s..s + l].iter().map(|&b| b as usize)
    }

    /// Coulomb force on body `i`.
    pub fn coulomb_force(&self, i: usize, params: &ForceParams) -> Result<[f64; D], BhError> {
        if i >= self.len() {
            return Err(BhError::IndexOutOfRange {
                index: i,
                len: self.len(),
            });
        }
        Ok(self.field(i, params, &mut Vec::new(), &mut Vec::new()).0)
    }

    /// Force on body `i` and the potential `C q_i Σ_j q_j / sqrt(r² + ε²)`
    /// it feels, from one traversal.
    fn field(
        &self,
        i: usize,
        params: &ForceParams,
        exact: &mut Vec<u32>,
        stack: &mut Vec<u32>,
    ) -> ([f64; D], f64) {
        exact.clear();
        stack.clear();
        stack.push(0);
        let xi = self.positions[i];
        let eps2 = params.softening * params.softening;
        let mut far_force = [0.0; D];
        let mut far_pot = 0.0;
        let mut far_any = false;

        while let Some(c) = stack.pop() {
            let cell = &self.cells[c as usize];
            if cell.leaf {
                let (s, l) = (cell.start as usize, cell.len as usize);
                exact.extend(self.order[s..s + l].iter().filter(|&&b| b as usize != i));
                continue;
            }
            let mut r2 = 0.0;
            for k in 0..D {
                let d = xi[k] - cell.centroid[k];
                r2 += d * d;
            }
            let s = 2.0 * cell.half;
            if s * s < params.theta * params.theta * r2 && !cell.contains(&xi) {
                kernel(
                    &mut far_force,
                    &mut far_pot,
                    &xi,
                    &cell.centroid,
                    cell.charge,
                    eps2,
                );
                far_any = true;
            } else {
                for &ch in cell.children[..1 << D].iter().rev() {
                    if ch != NONE {
                        stack.push(ch);
                    }
                }
            }
        }

        exact.sort_unstable();
        let mut force = [0.0; D];
        let mut pot = 0.0;
        for &j in exact.iter() {
            let j = j as usize;
            kernel(
                &mut force,
                &mut pot,
                &xi,
                &self.positions[j],
                self.charges[j],
                eps2,
            );
        }
        if far_any {
            for k in 0..D {
                force[k] += far_force[k];
            }
            pot += far_pot;
        }
        let scale = params.coulomb * self.charges[i];
        (force.map(|f| f * scale), pot * scale)
    }

    /// Forces on every body, evaluated in parallel. Each body's sum is
    /// sequential, so the result does not depend on the thread count.
    pub fn forces(&self, params: &ForceParams) -> Vec<[f64; D]> {
        self.fields(params).0
    }

    /// Forces and per-body potentials on every body.
    pub fn fields(&self, params: &ForceParams) -> (Vec<[f64; D]>, Vec<f64>) {
        (0..self.len())
            .into_par_iter()
            .map_init(
                || (Vec::new(), Vec::new()),
                |(exact, stack), i| self.field(i, params, exact, stack),
            )
            .unzip()
    }

    /// Total Coulomb energy `½ Σ_i q_i φ_i` under the tree approximation.
    pub fn potential_energy(&self, params: &ForceParams) -> f64 {
        0.5 * self.fields(params).1.iter().sum::<f64>()
    }
}

#[inline(always)]
fn kernel<const D: usize>(
    force: &mut [f64; D],
    pot: &mut f64,
    xi: &[f64; D],
    xj: &[f64; D],
    qj: f64,
    eps2: f64,
) {
    let mut d = [0.0; D];
    let mut r2 = eps2;
    for k in 0..D {
        d[k] = xi[k] - xj[k];
        r2 += d[k] * d[k];
    }
    let inv = 1.0 / r2.sqrt();
    let inv3 = inv * inv * inv;
    for k in 0..D {
        force[k] += qj * d[k] * inv3;
    }
    *pot += qj * inv;
}

/// Exact Coulomb force on body `i`, summed over `j ≠ i` in index order.
pub fn direct_coulomb<const D: usize>(
    i: usize,
    coulomb: f64,
    charges: &[f64],
    positions: &[[f64; D]],
    softening: f64,
) -> Result<[f64; D], BhError> {
    if i >= positions.len() || i >= charges.len() {
        return Err(BhError::IndexOutOfRange {
            index: i,
            len: positions.len().min(charges.len()),
        });
    }
    Ok(direct_field(i, coulomb, charges, positions, softening).0)
}

fn direct_field<const D: usize>(
    i: usize,
    coulomb: f64,
    charges: &[f64],
    positions: &[[f64; D]],
    softening: f64,
) -> ([f64; D], f64) {
    let eps2 = softening * softening;
    let xi = positions[i];
    let mut force = [0.0; D];
    let mut pot = 0.0;
    for (j, xj) in positions.iter().enumerate() {
        if j != i {
            kernel(&mut force, &mut pot, &xi, xj, charges[j], eps2);
        }
    }
    let scale = coulomb * charges[i];
    (force.map(|f| f * scale), pot * scale)
}

/// Exact forces on every body, in parallel over bodies.
pub fn direct_forces<const D: usize>(
    coulomb: f64,
    charges: &[f64],
    positions: &[[f64; D]],
    softening: f64,
) -> Vec<[f64; D]> {
    (0..positions.len())
        .into_par_iter()
        .map(|i| direct_field(i, coulomb, charges, positions, softening).0)
        .collect()
}

/// Exact pair energy `Σ_{i<j} C q_i q_j / sqrt(r² + ε²)`.
pub fn direct_potential_energy<const D: usize>(
    coulomb: f64,
    charges: &[f64],
    positions: &[[f64; D]],
    softening: f64,
) -> f64 {
    let eps2 = softening * softening;
    let rows: Vec<f64> = (0..positions.len())
        .into_par_iter()
        .map(|i| {
            let mut sum = 0.0;
            for j in i + 1..positions.len() {
                let mut r2 = eps2;
                for k in 0..D {
                    let d = positions[i][k] - positions[j][k];
                    r2 += d * d;
                }
                sum += charges[j] / r2.sqrt();
            }
            coulomb * charges[i] * sum
        })
        .collect();
    rows.iter().sum()
}
