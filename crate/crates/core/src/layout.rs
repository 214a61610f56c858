//! Energy-based graph layout by damped N-body dynamics.
//!
//! Every node is a particle of mass `m` and charge `q`. All pairs repel
//! through an inverse-square Coulomb law (summed with a Barnes-Hut tree),
//! every edge is a Hookean spring of stiffness `K` and rest length `ℓ`,
//! and friction `−γ v` drains energy until the system comes to rest in a
//! local minimum of the potential energy. The inverse-square law is kept in
//! every dimension.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::bhtree::{direct_potential_energy, BhError, BhTree, ForceParams};
use crate::graph::Graph;

#[derive(Debug, Error, PartialEq)]
pub enum LayoutError {
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
    #[error("{expected} nodes in the graph but {found} initial positions")]
    SizeMismatch { expected: usize, found: usize },
    #[error("non-finite force on node {node} at step {step}; try a smaller dt")]
    NonFiniteForce { node: usize, step: usize },
    #[error(
        "kinetic energy grew more than tenfold over 100 steps (step {step}); \
         the integration is diverging, try a smaller dt (current {dt})"
    )]
    Diverged { step: usize, dt: f64 },
    #[error(transparent)]
    Tree(#[from] BhError),
}

/// Physical and numerical constants. Defaults are `m = 1`, `q = 2.7e-3`,
/// `γ = 2.7`, `K = 8.4e-2`, `ℓ = 7.2e-6` with `C = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimParams {
    pub coulomb: f64,
    pub spring: f64,
    pub rest_length: f64,
    pub friction: f64,
    pub mass: f64,
    pub charge: f64,
    /// Time step; `None` means `0.1·sqrt(m/K)`, capped at `m/γ`.
    pub dt: Option<f64>,
    pub theta: f64,
    /// Softening length; `None` means `1e-3` of the initial bounding-box
    /// width divided by `N^(1/d)`, raised to at least `(C q² dt² / m)^(1/3)`.
    pub softening: Option<f64>,
    pub max_steps: usize,
    /// Stop once every speed is below this; `None` means `1e-4·box_width`.
    pub v_stop: Option<f64>,
    /// Side of the cube used for random initial positions.
    pub box_width: f64,
    pub seed: u64,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            coulomb: 1.0,
            spring: 8.4e-2,
            rest_length: 7.2e-6,
            friction: 2.7,
            mass: 1.0,
            charge: 2.7e-3,
            dt: None,
            theta: 0.5,
            softening: None,
            max_steps: 5_000,
            v_stop: None,
            box_width: 1.0,
            seed: 0,
        }
    }
}

impl SimParams {
    pub fn validate(&self) -> Result<(), LayoutError> {
        let bad = |what: &str| Err(LayoutError::InvalidParams(what.to_owned()));
        let finite_nonneg = |v: f64| v.is_finite() && v >= 0.0;
        if !finite_nonneg(self.coulomb) {
            return bad("coulomb constant must be finite and >= 0");
        }
        if !finite_nonneg(self.spring) {
            return bad("spring constant must be finite and >= 0");
        }
        if !finite_nonneg(self.rest_length) {
            return bad("rest length must be finite and >= 0");
        }
        if !finite_nonneg(self.friction) {
            return bad("friction must be finite and >= 0");
        }
        if !(self.mass.is_finite() && self.mass > 0.0) {
            return bad("mass must be finite and > 0");
        }
        if !(self.charge.is_finite() && self.charge > 0.0) {
            return bad("charge must be finite and > 0");
        }
        if !finite_nonneg(self.theta) {
            return bad("theta must be finite and >= 0");
        }
        if !(self.dt().is_finite() && self.dt() > 0.0) {
            return bad("dt must be finite and > 0");
        }
        if self.softening.is_some_and(|e| !finite_nonneg(e)) {
            return bad("softening must be finite and >= 0");
        }
        if !(self.v_stop().is_finite() && self.v_stop() >= 0.0) {
            return bad("v_stop must be finite and >= 0");
        }
        if !(self.box_width.is_finite() && self.box_width > 0.0) {
            return bad("box width must be finite and > 0");
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        if let Some(dt) = self.dt {
            return dt;
        }
        let spring = if self.spring > 0.0 {
            0.1 * (self.mass / self.spring).sqrt()
        } else {
            f64::INFINITY
        };
        let friction = if self.friction > 0.0 {
            self.mass / self.friction
        } else {
            f64::INFINITY
        };
        match spring.min(friction) {
            dt if dt.is_finite() => dt,
            _ => 0.01,
        }
    }

    pub fn v_stop(&self) -> f64 {
        self.v_stop.unwrap_or(1e-4 * self.box_width)
    }

    /// Softening to use for a run starting from `positions`.
    pub fn softening_for<const D: usize>(&self, positions: &[[f64; D]]) -> f64 {
        if let Some(eps) = self.softening {
            return eps;
        }
        let width = bounding_width(positions);
        let width = if width > 0.0 { width } else { self.box_width };
        let n = positions.len().max(1) as f64;
        let spacing = 1e-3 * width / n.powf(1.0 / D as f64);
        // Below this length a close pair's repulsion stiffens faster than
        // one step can follow, and the first kick adds energy.
        let dt = self.dt();
        let stiff = (self.coulomb * self.charge * self.charge * dt * dt / self.mass).cbrt();
        spacing.max(stiff)
    }

    /// Separation at which one isolated spring balances the repulsion of its
    /// two endpoints: the root of `K(d − ℓ) = C q² / d²`.
    pub fn pair_equilibrium_distance(&self) -> f64 {
        let cq2 = self.coulomb * self.charge * self.charge;
        if self.spring == 0.0 || cq2 == 0.0 {
            return if self.rest_length > 0.0 {
                self.rest_length
            } else {
                1.0
            };
        }
        let f = |d: f64| self.spring * (d - self.rest_length) - cq2 / (d * d);
        let mut lo = self.rest_length.max(f64::MIN_POSITIVE);
        let mut hi = self.rest_length + (cq2 / self.spring).cbrt() + 1.0;
        while f(hi) < 0.0 {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

fn bounding_width<const D: usize>(positions: &[[f64; D]]) -> f64 {
    let Some(first) = positions.first() else {
        return 0.0;
    };
    let (mut lo, mut hi) = (*first, *first);
    for x in positions {
        for k in 0..D {
            lo[k] = lo[k].min(x[k]);
            hi[k] = hi[k].max(x[k]);
        }
    }
    (0..D).map(|k| hi[k] - lo[k]).fold(0.0, f64::max)
}

/// Positions, velocities, masses and charges of all nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct BodyState<const D: usize> {
    pub x: Vec<[f64; D]>,
    pub v: Vec<[f64; D]>,
    pub mass: Vec<f64>,
    pub charge: Vec<f64>,
}

impl<const D: usize> BodyState<D> {
    /// Bodies at rest at `x` with the uniform mass and charge of `p`.
    pub fn at_rest(x: Vec<[f64; D]>, p: &SimParams) -> Self {
        let n = x.len();
        Self {
            x,
            v: vec![[0.0; D]; n],
            mass: vec![p.mass; n],
            charge: vec![p.charge; n],
        }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn max_speed(&self) -> f64 {
        self.v.iter().map(norm).fold(0.0, f64::max)
    }

    pub fn kinetic_energy(&self) -> f64 {
        self.v
            .iter()
            .zip(&self.mass)
            .map(|(v, m)| 0.5 * m * dot(v, v))
            .sum()
    }

    pub fn is_finite(&self) -> bool {
        self.x
            .iter()
            .chain(&self.v)
            .flatten()
            .all(|c| c.is_finite())
    }
}

fn dot<const D: usize>(a: &[f64; D], b: &[f64; D]) -> f64 {
    (0..D).map(|k| a[k] * b[k]).sum()
}

fn norm<const D: usize>(a: &[f64; D]) -> f64 {
    dot(a, a).sqrt()
}

/// Uniform i.i.d. positions in the centered cube of side `box_width`.
pub fn random_init<const D: usize>(n: usize, box_width: f64, seed: u64) -> Vec<[f64; D]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| std::array::from_fn(|_| (rng.random::<f64>() - 0.5) * box_width))
        .collect()
}

/// Rescales `x` about its centroid to the size with the least potential
/// energy (springs plus tree-approximated Coulomb at `p.theta`), keeping
/// its shape. Returns the factor applied.
pub fn fit_scale<const D: usize>(
    g: &Graph,
    x: &mut [[f64; D]],
    p: &SimParams,
) -> Result<f64, LayoutError> {
    p.validate()?;
    check_sizes(g, x.len())?;
    let n = x.len();
    if n < 2 {
        return Ok(1.0);
    }
    let mut centroid = [0.0; D];
    for xi in x.iter() {
        for k in 0..D {
            centroid[k] += xi[k] / n as f64;
        }
    }
    let shape: Vec<[f64; D]> = x
        .iter()
        .map(|xi| std::array::from_fn(|k| xi[k] - centroid[k]))
        .collect();
    if bounding_width(&shape) == 0.0 {
        return Ok(1.0);
    }
    let charges = vec![p.charge; n];
    let energy = |t: f64| -> Result<f64, LayoutError> {
        let s = t.exp();
        let y: Vec<[f64; D]> = shape.iter().map(|v| v.map(|c| c * s)).collect();
        let mut u = spring_energy(g, &y, p.spring, p.rest_length);
        if p.coulomb > 0.0 {
            let tree = BhTree::build(&y, &charges)?;
            u += tree.potential_energy(&ForceParams {
                theta: p.theta,
                coulomb: p.coulomb,
                softening: p.softening_for(&y),
            });
        }
        Ok(u)
    };

    // Coarse scan over six decades each way, then golden-section refinement
    // inside the bracket around the best grid point.
    let step = 0.5;
    let grid: Vec<f64> = (-28..=28).map(|k| k as f64 * step).collect();
    let mut values = Vec::with_capacity(grid.len());
    for &t in &grid {
        values.push(energy(t)?);
    }
    let best = (0..grid.len())
        .min_by(|&a, &b| values[a].total_cmp(&values[b]))
        .unwrap_or(0);
    let (mut lo, mut hi) = (grid[best] - step, grid[best] + step);
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (hi - phi * (hi - lo), lo + phi * (hi - lo));
    let (mut fa, mut fb) = (energy(a)?, energy(b)?);
    for _ in 0..40 {
        if fa <= fb {
            hi = b;
            (b, fb) = (a, fa);
            a = hi - phi * (hi - lo);
            fa = energy(a)?;
        } else {
            lo = a;
            (a, fa) = (b, fb);
            b = lo + phi * (hi - lo);
            fb = energy(b)?;
        }
    }
    let s = (0.5 * (lo + hi)).exp();
    for (xi, v) in x.iter_mut().zip(&shape) {
        *xi = std::array::from_fn(|k| centroid[k] + s * v[k]);
    }
    Ok(s)
}

/// Deterministic unit vector for the unordered pair `{i, j}`, used as the
/// spring direction when the endpoints coincide.
fn pair_direction<const D: usize>(i: usize, j: usize) -> [f64; D] {
    let (a, b) = (i.min(j) as u64, i.max(j) as u64);
    let mut state = a.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ b.rotate_left(32);
    let mut next = || {
        state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
        (z >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
    };
    loop {
        let u: [f64; D] = std::array::from_fn(|_| next());
        let n = norm(&u);
        if n > 1e-3 && n <= 1.0 {
            let sign = if i < j { 1.0 } else { -1.0 };
            return u.map(|c| sign * c / n);
        }
    }
}

/// Hooke force on node `i` from all its springs:
/// `Σ_j K(|x_i − x_j| − ℓ)·(x_j − x_i)/|x_i − x_j|`. Stretched springs pull
/// `i` toward `j`, compressed ones push it away. Closer than `guard` the
/// direction falls back to a fixed pseudo-random unit vector per pair.
pub fn spring_force<const D: usize>(
    g: &Graph,
    x: &[[f64; D]],
    spring: f64,
    rest_length: f64,
    i: usize,
    guard: f64,
) -> [f64; D] {
    let mut f = [0.0; D];
    for &j in g.neighbors(i) {
        let mut d = [0.0; D];
        for k in 0..D {
            d[k] = x[j][k] - x[i][k];
        }
        let dist = norm(&d);
        let dir = if dist < guard || dist == 0.0 {
            pair_direction(i, j)
        } else {
            d.map(|c| c / dist)
        };
        let mag = spring * (dist - rest_length);
        for k in 0..D {
            f[k] += mag * dir[k];
        }
    }
    f
}

/// Friction `−γ v`.
pub fn friction_force<const D: usize>(v: &[f64; D], friction: f64) -> [f64; D] {
    v.map(|c| -friction * c)
}

/// Total spring energy `Σ_edges ½K(|x_i − x_j| − ℓ)²`.
pub fn spring_energy<const D: usize>(
    g: &Graph,
    x: &[[f64; D]],
    spring: f64,
    rest_length: f64,
) -> f64 {
    g.edges()
        .iter()
        .map(|&(u, v)| {
            let mut d = [0.0; D];
            for k in 0..D {
                d[k] = x[u][k] - x[v][k];
            }
            let stretch = norm(&d) - rest_length;
            0.5 * spring * stretch * stretch
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Energies {
    pub kinetic: f64,
    pub spring: f64,
    pub coulomb: f64,
}

impl Energies {
    pub fn total(&self) -> f64 {
        self.kinetic + self.spring + self.coulomb
    }
}

/// Kinetic, spring and exact Coulomb energies of `state`. The Coulomb term
/// is the O(N²) pair sum with softening `p.softening` (0 when unset).
pub fn energies<const D: usize>(state: &BodyState<D>, g: &Graph, p: &SimParams) -> Energies {
    Energies {
        kinetic: state.kinetic_energy(),
        spring: spring_energy(g, &state.x, p.spring, p.rest_length),
        coulomb: direct_potential_energy(
            p.coulomb,
            &state.charge,
            &state.x,
            p.softening.unwrap_or(0.0),
        ),
    }
}

/// Total forces at the current state plus the Coulomb energy under the
/// same tree approximation.
#[derive(Debug, Clone)]
pub struct Evaluation<const D: usize> {
    pub forces: Vec<[f64; D]>,
    pub coulomb_energy: f64,
}

/// Coulomb + spring + friction forces on every node. Coulomb uses the tree
/// at opening angle `p.theta` and the given softening.
pub fn evaluate<const D: usize>(
    state: &BodyState<D>,
    g: &Graph,
    p: &SimParams,
    softening: f64,
) -> Result<Evaluation<D>, LayoutError> {
    let n = state.len();
    let (coulomb, potentials) = if p.coulomb > 0.0 && n > 1 {
        let tree = BhTree::build(&state.x, &state.charge)?;
        tree.fields(&ForceParams {
            theta: p.theta,
            coulomb: p.coulomb,
            softening,
        })
    } else {
        (vec![[0.0; D]; n], vec![0.0; n])
    };
    let forces = (0..n)
        .into_par_iter()
        .map(|i| {
            let s = spring_force(g, &state.x, p.spring, p.rest_length, i, softening);
            let fr = friction_force(&state.v[i], p.friction);
            std::array::from_fn(|k| coulomb[i][k] + s[k] + fr[k])
        })
        .collect();
    Ok(Evaluation {
        forces,
        coulomb_energy: 0.5 * potentials.iter().sum::<f64>(),
    })
}

fn first_non_finite<const D: usize>(forces: &[[f64; D]]) -> Option<usize> {
    forces.iter().position(|f| !f.iter().all(|c| c.is_finite()))
}

/// Semi-implicit Euler update with precomputed forces: `v ← v + dt·F/m`,
/// then `x ← x + dt·v`. Returns the largest new speed.
fn advance<const D: usize>(state: &mut BodyState<D>, forces: &[[f64; D]], dt: f64) -> f64 {
    let BodyState { x, v, mass, .. } = state;
    x.par_iter_mut()
        .zip(v.par_iter_mut())
        .zip(mass.par_iter())
        .zip(forces.par_iter())
        .map(|(((x, v), m), f)| {
            for k in 0..D {
                v[k] += dt * f[k] / m;
                x[k] += dt * v[k];
            }
            norm(v)
        })
        .reduce(|| 0.0, f64::max)
}

/// Advances `state` by one time step. An unset softening is resolved from
/// the current positions.
pub fn step<const D: usize>(
    state: &mut BodyState<D>,
    g: &Graph,
    p: &SimParams,
) -> Result<f64, LayoutError> {
    check_sizes(g, state.len())?;
    let eps = p.softening_for(&state.x);
    let eval = evaluate(state, g, p, eps)?;
    if let Some(node) = first_non_finite(&eval.forces) {
        return Err(LayoutError::NonFiniteForce { node, step: 0 });
    }
    Ok(advance(state, &eval.forces, p.dt()))
}

fn check_sizes(g: &Graph, n: usize) -> Result<(), LayoutError> {
    if g.node_count() != n {
        return Err(LayoutError::SizeMismatch {
            expected: g.node_count(),
            found: n,
        });
    }
    Ok(())
}

/// Energies of the state reached after `step` integration steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergySample {
    pub step: usize,
    pub kinetic: f64,
    pub spring: f64,
    pub coulomb: f64,
}

impl EnergySample {
    pub fn total(&self) -> f64 {
        self.kinetic + self.spring + self.coulomb
    }
}

#[derive(Debug, Clone)]
pub struct RelaxOutcome<const D: usize> {
    pub state: BodyState<D>,
    /// One sample per visited state, starting with the initial one. The
    /// Coulomb column uses the tree approximation at the run's `θ`.
    pub trace: Vec<EnergySample>,
    pub steps: usize,
    pub max_speed: f64,
    pub converged: bool,
    /// Softening length the run used.
    pub softening: f64,
}

/// Integrates from rest at `init` until every speed stays below
/// `v_stop` or `max_steps` steps have been taken.
pub fn relax<const D: usize>(
    g: &Graph,
    init: Vec<[f64; D]>,
    p: &SimParams,
) -> Result<RelaxOutcome<D>, LayoutError> {
    relax_with(g, init, p, |_, _| {})
}

/// [`relax`] with an observer called on every visited state.
pub fn relax_with<const D: usize, F>(
    g: &Graph,
    init: Vec<[f64; D]>,
    p: &SimParams,
    mut observe: F,
) -> Result<RelaxOutcome<D>, LayoutError>
where
    F: FnMut(usize, &BodyState<D>),
{
    p.validate()?;
    check_sizes(g, init.len())?;
    if let Some(index) = init.iter().position(|x| !x.iter().all(|c| c.is_finite())) {
        return Err(BhError::NonFinite { index }.into());
    }
    let softening = p.softening_for(&init);
    let dt = p.dt();
    let v_stop = p.v_stop();
    let mut state = BodyState::at_rest(init, p);
    // Kinetic energy of a single node moving at `v_stop`; growth below this
    // level is noise, not divergence.
    let ke_floor = 0.5 * p.mass * v_stop * v_stop;

    let mut trace = Vec::new();
    let mut steps = 0;
    let converged = loop {
        let eval = evaluate(&state, g, p, softening)?;
        if let Some(node) = first_non_finite(&eval.forces) {
            return Err(LayoutError::NonFiniteForce { node, step: steps });
        }
        let kinetic = state.kinetic_energy();
        trace.push(EnergySample {
            step: steps,
            kinetic,
            spring: spring_energy(g, &state.x, p.spring, p.rest_length),
            coulomb: eval.coulomb_energy,
        });
        observe(steps, &state);

        // Window peaks rather than single samples: kinetic energy of an
        // oscillating but decaying system passes near zero every half period.
        // A burst fed by released potential energy leaves the total falling;
        // only integration error makes it climb.
        if steps >= 200 && steps % 100 == 0 {
            let peak = |w: &[EnergySample]| w.iter().map(|s| s.kinetic).fold(0.0, f64::max);
            let recent = peak(&trace[steps - 99..=steps]);
            let earlier = peak(&trace[steps - 199..=steps - 100]);
            let climbing = trace[steps].total() > trace[steps - 100].total();
            if recent > ke_floor && recent > 10.0 * earlier && climbing {
                return Err(LayoutError::Diverged { step: steps, dt });
            }
        }

        let predicted = state
            .v
            .iter()
            .zip(&eval.forces)
            .zip(&state.mass)
            .map(|((v, f), m)| norm(&std::array::from_fn::<f64, D, _>(|k| v[k] + dt * f[k] / m)))
            .fold(0.0, f64::max);
        if state.max_speed() < v_stop && predicted < v_stop {
            break true;
        }
        if steps >= p.max_steps {
            break false;
        }
        advance(&mut state, &eval.forces, dt);
        steps += 1;
    };

    Ok(RelaxOutcome {
        max_speed: state.max_speed(),
        state,
        trace,
        steps,
        converged,
        softening,
    })
}
