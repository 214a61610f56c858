use std::collections::BTreeSet;

use proptest::prelude::*;

use netlayout::bhtree::{direct_forces, direct_potential_energy, BhTree, ForceParams};
use netlayout::community::{greedy_modularity, modularity, ModularityState, Partition};
use netlayout::generate::{planted_partition, random_gnm};
use netlayout::graph::{parse_edge_list, Graph};
use netlayout::layout::{
    energies, evaluate, random_init, relax, relax_with, spring_energy, BodyState, SimParams,
};
use netlayout::mds::{bfs_distances, landmark_mds, landmark_stress, select_landmarks};

fn small_graph(max_n: usize) -> impl Strategy<Value = Graph> {
    (2..=max_n)
        .prop_flat_map(|n| (Just(n), 0..=n * (n - 1) / 2, any::<u64>()))
        .prop_map(|(n, m, seed)| random_gnm(n, m, seed).unwrap().graph)
}

/// Random spanning tree plus extra edges, so always connected.
fn connected_graph(min_n: usize, max_n: usize) -> impl Strategy<Value = Graph> {
    (min_n..=max_n)
        .prop_flat_map(|n| {
            (
                prop::collection::vec(any::<prop::sample::Index>(), n - 1),
                prop::collection::vec((0..n, 0..n), 0..2 * n),
            )
        })
        .prop_map(|(parents, extra)| {
            let n = parents.len() + 1;
            let mut edges: BTreeSet<(usize, usize)> = parents
                .iter()
                .enumerate()
                .map(|(i, p)| (p.index(i + 1), i + 1))
                .collect();
            edges.extend(
                extra
                    .into_iter()
                    .filter(|(a, b)| a != b)
                    .map(|(a, b)| (a.min(b), a.max(b))),
            );
            Graph::from_edges((0..n).map(|i| i.to_string()).collect(), edges).unwrap()
        })
}

fn edge_text() -> impl Strategy<Value = String> {
    prop::collection::vec((0u8..12, 0u8..12), 0..40)
        .prop_map(|pairs| pairs.iter().map(|(a, b)| format!("n{a}\tn{b}\n")).collect())
}

fn edge_set(g: &Graph) -> BTreeSet<(String, String)> {
    g.edges()
        .iter()
        .map(|&(u, v)| {
            let (a, b) = (g.label(u).to_string(), g.label(v).to_string());
            if a < b {
                (a, b)
            } else {
                (b, a)
            }
        })
        .collect()
}

fn assignment_for(n: usize) -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(0..n.max(1), n)
}

fn dist<const D: usize>(a: &[f64; D], b: &[f64; D]) -> f64 {
    (0..D).map(|k| (a[k] - b[k]).powi(2)).sum::<f64>().sqrt()
}

fn max_relative_error<const D: usize>(a: &[[f64; D]], b: &[[f64; D]]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| dist(x, y) / dist(y, &[0.0; D]))
        .fold(0.0, f64::max)
}

/// Eigenvalues of `-½ J D² J`, largest first.
fn centered_spectrum(ld: &netlayout::mds::LandmarkDistances) -> Vec<f64> {
    let n = ld.node_count();
    let sq = faer::Mat::<f64>::from_fn(n, n, |i, j| ld.get(i, j).powi(2));
    let j = faer::Mat::<f64>::from_fn(n, n, |r, c| f64::from(u8::from(r == c)) - 1.0 / n as f64);
    let b = -0.5 * (&j * &sq * &j);
    let mut ev: Vec<f64> = b.self_adjoint_eigenvalues(faer::Side::Lower).unwrap();
    ev.sort_by(|a, b| b.total_cmp(a));
    ev
}

fn brute_force_q(g: &Graph) -> f64 {
    let n = g.node_count();
    let mut best = f64::MIN;
    let mut a = vec![0usize; n];
    loop {
        best = best.max(modularity(g, &Partition::from_assignment(&a)).unwrap());
        // Next restricted growth string.
        let mut i = n;
        loop {
            if i <= 1 {
                return best;
            }
            i -= 1;
            let cap = a[..i].iter().max().copied().unwrap_or(0) + 1;
            if a[i] < cap {
                a[i] += 1;
                for x in &mut a[i + 1..] {
                    *x = 0;
                }
                break;
            }
        }
    }
}

proptest! {
    #[test]
    fn reparsing_canonical_text_is_stable(text in edge_text()) {
        let Ok((g, _)) = parse_edge_list(&text) else { return Ok(()) };
        let (h, _) = parse_edge_list(&g.to_edge_list()).unwrap();
        let (k, _) = parse_edge_list(&h.to_edge_list()).unwrap();
        prop_assert_eq!(edge_set(&h), edge_set(&g));
        prop_assert_eq!(edge_set(&k), edge_set(&h));
    }

    #[test]
    fn degrees_sum_to_twice_the_edges(text in edge_text()) {
        let Ok((g, _)) = parse_edge_list(&text) else { return Ok(()) };
        let sum: usize = (0..g.node_count()).map(|i| g.degree(i)).sum();
        prop_assert_eq!(sum, 2 * g.edge_count());
        let sub: Vec<usize> = (0..g.node_count()).step_by(2).collect();
        let h = g.induced_subgraph(&sub);
        let sum: usize = (0..h.node_count()).map(|i| h.degree(i)).sum();
        prop_assert_eq!(sum, 2 * h.edge_count());
    }

    #[test]
    fn components_cover_every_node_once(g in small_graph(30)) {
        let comps = g.connected_components();
        let mut seen = vec![false; g.node_count()];
        for c in &comps {
            for &i in c {
                prop_assert!(!seen[i]);
                seen[i] = true;
            }
        }
        prop_assert_eq!(comps.iter().map(Vec::len).sum::<usize>(), g.node_count());
    }

    #[test]
    fn modularity_stays_in_range(
        (g, raw) in small_graph(20).prop_flat_map(|g| {
            let n = g.node_count();
            (Just(g), assignment_for(n))
        })
    ) {
        let q = modularity(&g, &Partition::from_assignment(&raw)).unwrap();
        prop_assert!((-1.0..1.0).contains(&q), "Q = {}", q);
        let whole = modularity(&g, &Partition::whole(g.node_count())).unwrap();
        prop_assert_eq!(whole, 0.0);
    }

    #[test]
    fn incremental_modularity_matches_scratch(
        g in small_graph(64),
        picks in prop::collection::vec((any::<prop::sample::Index>(), any::<prop::sample::Index>()), 1..40),
    ) {
        let n = g.node_count();
        let mut state = ModularityState::new(&g, &Partition::singletons(n)).unwrap();
        let mut owner: Vec<usize> = (0..n).collect();
        for (a, b) in picks {
            let live: Vec<usize> = state.live_communities().collect();
            if live.len() < 2 {
                break;
            }
            let p = live[a.index(live.len())];
            let q = live[b.index(live.len())];
            if p == q {
                continue;
            }
            let keep = state.merge(p, q).unwrap();
            let gone = if keep == p { q } else { p };
            for o in &mut owner {
                if *o == gone {
                    *o = keep;
                }
            }
            let scratch = modularity(&g, &Partition::from_assignment(&owner)).unwrap();
            prop_assert!((state.modularity() - scratch).abs() <= 1e-9);
        }
    }

    #[test]
    fn greedy_never_beats_the_optimum(g in small_graph(8)) {
        let r = greedy_modularity(&g);
        prop_assert!(r.modularity <= brute_force_q(&g) + 1e-12);
        if g.edge_count() > 0 {
            prop_assert!(r.modularity >= 0.0);
        }
    }

    #[test]
    fn mds_distances_do_not_depend_on_the_seed(g in connected_graph(4, 14), s1 in any::<u64>(), s2 in any::<u64>()) {
        let n = g.node_count();
        let a = landmark_mds::<2>(&select_landmarks(&g, n, s1).unwrap());
        let b = landmark_mds::<2>(&select_landmarks(&g, n, s2).unwrap());
        prop_assume!(!a.is_degenerate() && !b.is_degenerate());
        // A tie at the cut between kept and dropped eigenvalues leaves the
        // embedding free to rotate out of the plane.
        let ev = centered_spectrum(&bfs_distances(&g, &(0..n).collect::<Vec<_>>()).unwrap());
        prop_assume!((ev[1] - ev[2]).abs() > 1e-6 * ev[0].abs());
        for i in 0..n {
            for j in i + 1..n {
                let da = dist(&a.positions[i], &a.positions[j]);
                let db = dist(&b.positions[i], &b.positions[j]);
                prop_assert!((da - db).abs() <= 1e-6, "{} {} {} {}", i, j, da, db);
            }
        }
    }

    #[test]
    fn path_embeds_in_one_dimension(n in 2usize..40) {
        let labels = (0..n).map(|i| i.to_string()).collect();
        let g = Graph::from_edges(labels, (1..n).map(|i| (i - 1, i))).unwrap();
        let all: Vec<usize> = (0..n).collect();
        let ld = bfs_distances(&g, &all).unwrap();
        let emb = landmark_mds::<1>(&ld);
        prop_assert!(landmark_stress(&ld, &emb.positions) <= 1e-8);
    }

    #[test]
    fn bfs_matches_floyd_warshall(g in small_graph(20), count in 1usize..6, seed in any::<u64>()) {
        let g = g.largest_connected_component();
        let n = g.node_count();
        let mut d = vec![vec![f64::INFINITY; n]; n];
        for (i, row) in d.iter_mut().enumerate() {
            row[i] = 0.0;
        }
        for &(u, v) in g.edges() {
            d[u][v] = 1.0;
            d[v][u] = 1.0;
        }
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    d[i][j] = d[i][j].min(d[i][k] + d[k][j]);
                }
            }
        }
        let ld = select_landmarks(&g, count, seed).unwrap();
        for (row, &l) in ld.landmarks().iter().enumerate() {
            for v in 0..n {
                prop_assert_eq!(ld.get(row, v), d[l][v]);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn wider_opening_is_no_more_accurate(seed in any::<u64>(), n in 50usize..400) {
        let x = random_init::<3>(n, 1.0, seed);
        let q = vec![1.0; n];
        let direct = direct_forces(1.0, &q, &x, 0.0);
        let tree = BhTree::build(&x, &q).unwrap();
        let at = |theta| {
            let f = tree.forces(&ForceParams { theta, coulomb: 1.0, softening: 0.0 });
            max_relative_error(&f, &direct)
        };
        prop_assert!(at(0.3) <= at(0.8));
    }

    #[test]
    fn forces_are_minus_the_energy_gradient(g in small_graph(12), seed in any::<u64>()) {
        let n = g.node_count();
        prop_assume!(n >= 2);
        let p = SimParams {
            theta: 0.0,
            friction: 0.0,
            rest_length: 0.3,
            spring: 1.5,
            coulomb: 0.05,
            ..SimParams::default()
        };
        let eps = 0.05;
        let x = random_init::<2>(n, 1.0, seed);
        // Shorter springs switch to a fixed direction that no potential has.
        prop_assume!(g.edges().iter().all(|&(u, v)| dist(&x[u], &x[v]) > 2.0 * eps));
        let q = vec![p.charge; n];
        let energy = |x: &[[f64; 2]]| {
            spring_energy(&g, x, p.spring, p.rest_length) + direct_potential_energy(p.coulomb, &q, x, eps)
        };
        let state = BodyState::at_rest(x.clone(), &p);
        let f = evaluate(&state, &g, &p, eps).unwrap().forces;
        let h = 1e-6;
        let (mut diff2, mut f2) = (0.0, 0.0);
        for i in 0..n {
            for k in 0..2 {
                let mut up = x.clone();
                let mut down = x.clone();
                up[i][k] += h;
                down[i][k] -= h;
                let grad = (energy(&up) - energy(&down)) / (2.0 * h);
                diff2 += (f[i][k] + grad).powi(2);
                f2 += f[i][k].powi(2);
            }
        }
        prop_assert!(diff2.sqrt() <= 1e-4 * f2.sqrt().max(1e-9), "{} vs {}", diff2.sqrt(), f2.sqrt());
    }

    #[test]
    fn translation_carries_through_relaxation(
        g in small_graph(15),
        seed in any::<u64>(),
        shift in prop::array::uniform3(-10.0f64..10.0),
    ) {
        let n = g.node_count();
        let p = SimParams { theta: 0.0, softening: Some(1e-2), max_steps: 60, ..SimParams::default() };
        let x = random_init::<3>(n, 1.0, seed);
        let moved: Vec<[f64; 3]> = x.iter().map(|a| std::array::from_fn(|k| a[k] + shift[k])).collect();
        let a = relax(&g, x, &p).unwrap();
        let b = relax(&g, moved, &p).unwrap();
        prop_assert_eq!(a.steps, b.steps);
        for (u, v) in a.state.x.iter().zip(&b.state.x) {
            for k in 0..3 {
                prop_assert!((u[k] + shift[k] - v[k]).abs() <= 1e-6);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn planted_halves_sit_apart(seed in any::<u64>()) {
        let gen = planted_partition(2, 20, 0.5, 0.02, seed).unwrap();
        let truth = gen.truth.unwrap();
        let g = gen.graph.largest_connected_component();
        prop_assume!(g.node_count() == 40);
        let block: Vec<usize> = g.labels().iter().map(|l| truth[l.parse::<usize>().unwrap()]).collect();
        let p = SimParams { seed, ..SimParams::default() };
        let out = relax(&g, random_init::<2>(40, p.box_width, seed), &p).unwrap();
        let (mut intra, mut ni, mut inter, mut no) = (0.0, 0.0, 0.0, 0.0);
        for i in 0..40 {
            for j in i + 1..40 {
                let d = dist(&out.state.x[i], &out.state.x[j]);
                if block[i] == block[j] { intra += d; ni += 1.0; } else { inter += d; no += 1.0; }
            }
        }
        prop_assert!(intra / ni < inter / no);
    }

    #[test]
    fn relaxation_only_loses_energy(g in small_graph(30), seed in any::<u64>()) {
        let g = g.largest_connected_component();
        prop_assume!(g.node_count() >= 3);
        // Tree forces are not the gradient of any energy, so only exact forces
        // are held to this.
        let p = SimParams { seed, max_steps: 400, theta: 0.0, ..SimParams::default() };
        let init = random_init::<2>(g.node_count(), p.box_width, seed);
        let exact = SimParams { theta: 0.0, softening: Some(p.softening_for(&init)), ..p.clone() };
        let mut totals = Vec::new();
        relax_with(&g, init, &p, |_, s| totals.push(energies(s, &g, &exact).total())).unwrap();
        for w in totals.windows(2) {
            prop_assert!(w[1] - w[0] <= 1e-6 * w[0].abs(), "{} -> {}", w[0], w[1]);
        }
    }
}
