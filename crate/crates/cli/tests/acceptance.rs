//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line
//! with the measured numbers; the process exits non-zero if any fails.

use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use netlayout::bhtree::{direct_forces, BhTree, ForceParams};
use netlayout::community::{greedy_modularity, modularity, refine_recursive, Partition};
use netlayout::generate::{planted_partition, random_gnm, ring_with_trees};
use netlayout::graph::Graph;
use netlayout::layout::{
    energies, fit_scale, random_init, relax, relax_with, step, BodyState, SimParams,
};
use netlayout::mds::mds_init;

type Check = Result<String, String>;
type Criterion = (&'static str, Duration, fn() -> Check);

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Modularity from the adjacency-matrix form, independent of the library.
fn oracle_q(g: &Graph, comm: &[usize]) -> f64 {
    let n = g.node_count();
    let m2 = 2.0 * g.edge_count() as f64;
    if m2 == 0.0 {
        return 0.0;
    }
    let mut adj = vec![vec![0.0; n]; n];
    for &(u, v) in g.edges() {
        adj[u][v] = 1.0;
        adj[v][u] = 1.0;
    }
    let k: Vec<f64> = adj.iter().map(|r| r.iter().sum()).collect();
    let mut q = 0.0;
    for i in 0..n {
        for j in 0..n {
            if comm[i] == comm[j] {
                q += adj[i][j] - k[i] * k[j] / m2;
            }
        }
    }
    q / m2
}

/// Every set partition of `0..n` as a restricted growth string.
fn set_partitions(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut a = vec![0usize; n];
    fn rec(i: usize, max: usize, a: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if i == a.len() {
            out.push(a.clone());
            return;
        }
        for c in 0..=max + 1 {
            a[i] = c;
            rec(i + 1, max.max(c), a, out);
        }
    }
    if n == 0 {
        return vec![vec![]];
    }
    rec(1, 0, &mut a, &mut out);
    out
}

/// Fraction of nodes whose found group maps to their true block under the
/// best one-to-one matching of groups to blocks.
fn agreement(found: &[usize], truth: &[usize]) -> f64 {
    let kf = found.iter().max().map_or(0, |m| m + 1);
    let kt = truth.iter().max().map_or(0, |m| m + 1);
    let mut table = vec![vec![0usize; kt]; kf];
    for (&f, &t) in found.iter().zip(truth) {
        table[f][t] += 1;
    }
    // dp[mask]: best matched count using truth blocks in `mask`.
    let mut dp = vec![None::<usize>; 1 << kt];
    dp[0] = Some(0);
    for row in &table {
        let mut next = dp.clone();
        for mask in 0..1usize << kt {
            let Some(base) = dp[mask] else { continue };
            for (t, &c) in row.iter().enumerate() {
                if mask & (1 << t) == 0 {
                    let slot = &mut next[mask | 1 << t];
                    *slot = Some(slot.unwrap_or(0).max(base + c));
                }
            }
        }
        dp = next;
    }
    dp.into_iter().flatten().max().unwrap_or(0) as f64 / found.len() as f64
}

fn planted_4x32() -> (Graph, Vec<usize>) {
    let gen = planted_partition(4, 32, 0.3, 0.01, 2024).unwrap();
    (gen.graph, gen.truth.unwrap())
}

fn c1_modularity_oracle() -> Check {
    let mut graphs = 0;
    let mut worst_gap = f64::MIN;
    let mut worst_eval = 0.0f64;
    for k in 0..240u64 {
        let n = 2 + (k % 7) as usize;
        let max_m = n * (n - 1) / 2;
        let m = 1 + (k as usize * 7919) % max_m;
        let g = random_gnm(n, m, k).unwrap().graph;
        let best = set_partitions(n)
            .iter()
            .map(|c| oracle_q(&g, c))
            .fold(f64::MIN, f64::max);
        let greedy = greedy_modularity(&g);
        worst_gap = worst_gap.max(greedy.modularity - best);
        let mut probes = vec![greedy.partition.assignment().to_vec()];
        probes.push((0..n).map(|i| i % 2).collect());
        probes.push((0..n).map(|i| (i * 5 + k as usize) % 3).collect());
        for c in probes {
            let q = modularity(&g, &Partition::from_assignment(&c)).unwrap();
            worst_eval = worst_eval.max((q - oracle_q(&g, &c)).abs());
        }
        graphs += 1;
    }
    ensure(
        graphs >= 200 && worst_gap <= 1e-12 && worst_eval <= 1e-12,
        format!("{graphs} graphs, max(greedy Q - optimum) = {worst_gap:.2e}, max |Q - oracle| = {worst_eval:.2e}"),
    )
}

fn c2_strong_structure() -> Check {
    let (g, truth) = planted_4x32();
    let r = greedy_modularity(&g);
    let agree = agreement(r.partition.assignment(), &truth);
    ensure(
        r.modularity > 0.55 && agree >= 0.9,
        format!(
            "Q = {:.4}, {} communities, agreement {:.1}%",
            r.modularity,
            r.partition.community_count(),
            100.0 * agree
        ),
    )
}

fn c3_tree_accuracy() -> Check {
    let mut worst = [0.0f64; 3];
    let mut field = [0.0f64; 2];
    for seed in 0..3 {
        let x = random_init::<3>(1000, 1.0, seed);
        let q = vec![1.0; x.len()];
        let direct = direct_forces(1.0, &q, &x, 0.0);
        let tree = BhTree::build(&x, &q).unwrap();
        for (slot, theta) in [0.5, 0.2, 0.0].into_iter().enumerate() {
            let f = tree.forces(&ForceParams {
                theta,
                coulomb: 1.0,
                softening: 0.0,
            });
            let (mut err2, mut ref2) = (0.0, 0.0);
            for (a, b) in f.iter().zip(&direct) {
                let e: f64 = (0..3).map(|k| (a[k] - b[k]).powi(2)).sum();
                let r: f64 = (0..3).map(|k| b[k].powi(2)).sum();
                worst[slot] = worst[slot].max((e / r).sqrt());
                err2 += e;
                ref2 += r;
            }
            if slot < 2 {
                field[slot] = field[slot].max((err2 / ref2).sqrt());
            }
        }
    }
    ensure(
        worst[0] <= 1e-2 && worst[1] <= 1e-3 && worst[2] <= 1e-12,
        format!(
            "max per-body relative error: {:.2e} at 0.5, {:.2e} at 0.2, {:.2e} at 0; \
             whole-field relative error: {:.2e} at 0.5, {:.2e} at 0.2",
            worst[0], worst[1], worst[2], field[0], field[1]
        ),
    )
}

fn c4_tree_scaling() -> Check {
    let x = random_init::<3>(20_000, 1.0, 11);
    let q = vec![1.0; x.len()];
    let params = ForceParams {
        theta: 0.5,
        coulomb: 1.0,
        softening: 0.0,
    };
    let t = Instant::now();
    let tree = BhTree::build(&x, &q).unwrap();
    let f = tree.forces(&params);
    let tree_time = t.elapsed();
    let t = Instant::now();
    let d = direct_forces(1.0, &q, &x, 0.0);
    let direct_time = t.elapsed();
    assert_eq!(f.len(), d.len());
    let ratio = direct_time.as_secs_f64() / tree_time.as_secs_f64();
    ensure(
        ratio > 2.0,
        format!("direct {direct_time:.2?}, tree {tree_time:.2?}, ratio {ratio:.1}"),
    )
}

fn c5_dissipation() -> Check {
    let g = planted_partition(4, 25, 0.3, 0.01, 5).unwrap().graph;
    if !g.is_connected() {
        return Err("planted graph is not connected".into());
    }
    let p = SimParams::default();
    let init = random_init::<2>(g.node_count(), p.box_width, p.seed);
    let exact = SimParams {
        softening: Some(p.softening_for(&init)),
        ..p.clone()
    };
    let mut prev: Option<f64> = None;
    let mut worst = f64::MIN;
    let out = relax_with(&g, init, &p, |_, s| {
        let e = energies(s, &g, &exact).total();
        if let Some(before) = prev {
            worst = worst.max((e - before) / before.abs());
        }
        prev = Some(e);
    })
    .map_err(|e| e.to_string())?;
    ensure(
        worst <= 1e-6 && out.max_speed < p.v_stop(),
        format!(
            "N = {}, {} steps, largest relative energy rise {worst:.2e}, final max speed {:.3e} (v_stop {:.0e})",
            g.node_count(),
            out.steps,
            out.max_speed,
            p.v_stop()
        ),
    )
}

fn c6_friction_decay() -> Check {
    let g = Graph::from_edges(vec!["a".into()], []).unwrap();
    let p = SimParams {
        coulomb: 0.0,
        spring: 0.0,
        softening: Some(0.0),
        ..SimParams::default()
    };
    let (m, gamma) = (p.mass, p.friction);
    let dt = 1e-3 * m / gamma;
    let p = SimParams { dt: Some(dt), ..p };
    let mut s = BodyState::at_rest(vec![[0.0, 0.0, 0.0]], &p);
    s.v[0] = [0.6, -0.8, 0.0];
    let steps = 2700;
    for _ in 0..steps {
        step(&mut s, &g, &p).map_err(|e| e.to_string())?;
    }
    let t = steps as f64 * dt;
    let expected = (-gamma * t / m).exp();
    let rel = (s.max_speed() - expected).abs() / expected;
    ensure(
        rel <= 0.01,
        format!(
            "t = {t:.4}, speed {:.6} vs {expected:.6}, relative error {rel:.2e}",
            s.max_speed()
        ),
    )
}

fn c7_layout_coherence() -> Check {
    let (g, truth) = planted_4x32();
    let lcc = g.largest_connected_component();
    let block: Vec<usize> = lcc
        .labels()
        .iter()
        .map(|l| truth[l.parse::<usize>().unwrap()])
        .collect();
    let mut ratios = Vec::new();
    for seed in 0..5 {
        let p = SimParams {
            seed,
            ..SimParams::default()
        };
        let out = relax(
            &lcc,
            random_init::<2>(lcc.node_count(), p.box_width, seed),
            &p,
        )
        .map_err(|e| e.to_string())?;
        let x = &out.state.x;
        let (mut intra, mut ni, mut inter, mut no) = (0.0, 0usize, 0.0, 0usize);
        for i in 0..x.len() {
            for j in i + 1..x.len() {
                let d = (x[i][0] - x[j][0]).hypot(x[i][1] - x[j][1]);
                if block[i] == block[j] {
                    intra += d;
                    ni += 1;
                } else {
                    inter += d;
                    no += 1;
                }
            }
        }
        ratios.push((intra / ni as f64) / (inter / no as f64));
    }
    let good = ratios.iter().filter(|&&r| r < 0.7).count();
    ensure(
        good >= 4,
        format!(
            "intra/inter distance ratios {:?}, {good}/5 below 0.7",
            ratios.iter().map(|r| format!("{r:.3}")).collect::<Vec<_>>()
        ),
    )
}

fn median(mut v: Vec<usize>) -> usize {
    v.sort_unstable();
    v[v.len() / 2]
}

fn c8_mds_benefit() -> Check {
    let g = ring_with_trees(500, 1000, 1).unwrap().graph;
    let base = SimParams::default();
    // The MDS runs get room to finish; the random runs are then capped at
    // the MDS median, since a random run still moving at that point needs
    // more steps than the median whatever its eventual count.
    let mut mds_steps = Vec::new();
    for seed in 0..5 {
        let p = SimParams {
            seed,
            max_steps: 50_000,
            ..base.clone()
        };
        let mut x = mds_init::<2>(&g, 100, seed, 1.0)
            .map_err(|e| e.to_string())?
            .positions;
        fit_scale(&g, &mut x, &p).map_err(|e| e.to_string())?;
        let out = relax(&g, x, &p).map_err(|e| e.to_string())?;
        if !out.converged {
            return Err(format!(
                "mds run with seed {seed} did not settle in {} steps",
                p.max_steps
            ));
        }
        mds_steps.push(out.steps);
    }
    let mds_median = median(mds_steps.clone());
    let mut random_steps = Vec::new();
    let mut beyond = 0;
    for seed in 0..5 {
        let p = SimParams {
            seed,
            max_steps: mds_median,
            ..base.clone()
        };
        let out = relax(&g, random_init::<2>(g.node_count(), p.box_width, seed), &p)
            .map_err(|e| e.to_string())?;
        random_steps.push(if out.converged {
            out.steps.to_string()
        } else {
            format!(">{}", out.steps)
        });
        if !out.converged {
            beyond += 1;
        }
        if beyond >= 3 {
            break;
        }
    }
    ensure(
        beyond >= 3,
        format!("mds steps {mds_steps:?} (median {mds_median}), random steps {random_steps:?}"),
    )
}

fn c9_refinement() -> Check {
    let (g, truth) = planted_4x32();
    let merged: Vec<usize> = truth.iter().map(|&b| if b == 1 { 0 } else { b }).collect();
    let part = Partition::from_assignment(&merged);
    let tree = refine_recursive(&g, &part, 40);
    let leaves = tree.leaves();
    let agree = agreement(leaves.assignment(), &truth);
    let inside: Vec<usize> = (0..g.node_count()).filter(|&i| truth[i] <= 1).collect();
    let local = agreement(
        Partition::from_assignment(
            &inside
                .iter()
                .map(|&i| leaves.community_of(i))
                .collect::<Vec<_>>(),
        )
        .assignment(),
        &inside.iter().map(|&i| truth[i]).collect::<Vec<_>>(),
    );
    ensure(
        agree >= 0.9 && local >= 0.9,
        format!(
            "{} leaf communities, agreement {:.1}% overall, {:.1}% inside the merged pair",
            leaves.community_count(),
            100.0 * agree,
            100.0 * local
        ),
    )
}

fn pipeline(dir: &Path) -> Result<Vec<Vec<u8>>, String> {
    let bin = env!("CARGO_BIN_EXE_netlayout");
    let steps: [&[&str]; 4] = [
        &[
            "gen",
            "planted",
            "--seed",
            "7",
            "--out",
            "g.tsv",
            "--truth",
            "truth.tsv",
        ],
        &["communities", "g.tsv", "--out", "c.tsv", "--trace", "q.csv"],
        &[
            "layout", "g.tsv", "--seed", "3", "--init", "mds", "--out", "l.tsv", "--trace", "e.csv",
        ],
        &[
            "render",
            "l.tsv",
            "--communities",
            "c.tsv",
            "--highlight",
            "0",
            "--out",
            "g.svg",
        ],
    ];
    for args in steps {
        let out = Command::new(bin)
            .current_dir(dir)
            .args(args)
            .output()
            .map_err(|e| e.to_string())?;
        if !out.status.success() {
            return Err(format!(
                "{args:?}: {}",
                String::from_utf8_lossy(&out.stderr)
            ));
        }
    }
    [
        "g.tsv",
        "truth.tsv",
        "c.tsv",
        "q.csv",
        "l.tsv",
        "e.csv",
        "g.svg",
    ]
    .iter()
    .map(|f| fs::read(dir.join(f)).map_err(|e| e.to_string()))
    .collect()
}

fn c10_determinism() -> Check {
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    let first = pipeline(a.path())?;
    let second = pipeline(b.path())?;
    let bytes: usize = first.iter().map(Vec::len).sum();
    ensure(
        first == second,
        format!(
            "7 output files, {bytes} bytes, identical: {}",
            first == second
        ),
    )
}

fn main() {
    let criteria: [Criterion; 10] = [
        (
            "1 modularity oracle",
            Duration::from_secs(60),
            c1_modularity_oracle,
        ),
        (
            "2 strong structure",
            Duration::from_secs(5),
            c2_strong_structure,
        ),
        ("3 tree accuracy", Duration::from_secs(30), c3_tree_accuracy),
        ("4 tree scaling", Duration::from_secs(120), c4_tree_scaling),
        ("5 dissipation", Duration::from_secs(60), c5_dissipation),
        (
            "6 friction decay",
            Duration::from_secs(1),
            c6_friction_decay,
        ),
        (
            "7 layout coherence",
            Duration::from_secs(120),
            c7_layout_coherence,
        ),
        ("8 mds benefit", Duration::from_secs(300), c8_mds_benefit),
        ("9 refinement", Duration::from_secs(10), c9_refinement),
        ("10 determinism", Duration::MAX, c10_determinism),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (name, limit, check) in criteria {
        let t = Instant::now();
        let result = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into());
            Err(format!("panic: {msg}"))
        });
        let elapsed = t.elapsed();
        let result = match result {
            Ok(d) if elapsed > limit => Err(format!("{d}; took {elapsed:.1?}, limit {limit:?}")),
            other => other,
        };
        match result {
            Ok(d) => println!("criterion {name}: PASS ({elapsed:.1?}) {d}"),
            Err(d) => {
                failed += 1;
                println!("criterion {name}: FAIL ({elapsed:.1?}) {d}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
