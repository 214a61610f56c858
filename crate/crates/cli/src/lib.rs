//! Command-line front end: community detection, layout, rendering and
//! synthetic graph generation over edge-list files.
//!
//! Results go to `--out` (stdout when absent); one-line summaries go to
//! stderr. Exit codes: 0 success, 2 bad input or configuration, 3 the
//! simulation diverged.

pub mod config;

use std::collections::HashMap;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use netlayout::community::{self, DEFAULT_SIZE_THRESHOLD};
use netlayout::generate::{self, Generated};
use netlayout::graph::{parse_edge_list, Graph};
use netlayout::io;
use netlayout::layout::{self, LayoutError, SimParams};
use netlayout::mds::{self, DEFAULT_LANDMARKS, INIT_JITTER};
use netlayout::render::{self, Plane, RenderOptions};

use config::{parse_config, ConfigError, Layered};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Diverged(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Diverged(_) => 3,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<LayoutError> for CliError {
    fn from(e: LayoutError) -> Self {
        match e {
            LayoutError::Diverged { .. } | LayoutError::NonFiniteForce { .. } => {
                CliError::Diverged(e.to_string())
            }
            other => CliError::Input(other.to_string()),
        }
    }
}

fn input_err(context: impl std::fmt::Display, e: impl std::fmt::Display) -> CliError {
    CliError::Input(format!("{context}: {e}"))
}

#[derive(Debug, Parser)]
#[command(
    name = "netlayout",
    version,
    about = "Community detection and force-directed layout for large graphs"
)]
pub struct Cli {
    /// Flat key = value file; flags given on the command line win.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Detect communities in the largest connected component.
    Communities(CommunitiesArgs),
    /// Lay out the largest connected component.
    Layout(LayoutArgs),
    /// Draw a layout as SVG.
    Render(RenderArgs),
    /// Write a synthetic edge list.
    Gen(GenArgs),
}

#[derive(Debug, Args)]
pub struct CommunitiesArgs {
    /// Edge list: two labels per line, `#` comments.
    pub input: PathBuf,
    /// Communities larger than this are re-optimized on their own.
    #[arg(long)]
    pub threshold: Option<usize>,
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Modularity after every merge, as CSV.
    #[arg(long, value_name = "PATH")]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LayoutArgs {
    pub input: PathBuf,
    #[arg(long, value_parser = ["2", "3"])]
    pub dim: Option<String>,
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    /// Maximum number of integration steps.
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// `random`, `mds`, or `file:PATH` with a layout covering every node.
    #[arg(long)]
    pub init: Option<String>,
    #[arg(long)]
    pub landmarks: Option<usize>,
    /// Extra MDS distance between nodes of different communities.
    #[arg(long)]
    pub penalty: Option<f64>,
    /// Community file used by `--penalty`.
    #[arg(long, value_name = "PATH")]
    pub communities: Option<PathBuf>,
    #[arg(long)]
    pub coulomb: Option<f64>,
    #[arg(long)]
    pub spring: Option<f64>,
    #[arg(long)]
    pub rest_length: Option<f64>,
    #[arg(long)]
    pub friction: Option<f64>,
    #[arg(long)]
    pub mass: Option<f64>,
    #[arg(long)]
    pub charge: Option<f64>,
    #[arg(long)]
    pub softening: Option<f64>,
    #[arg(long)]
    pub v_stop: Option<f64>,
    #[arg(long)]
    pub box_width: Option<f64>,
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Energies at every step, as CSV.
    #[arg(long, value_name = "PATH")]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    /// Layout file: `label<TAB>x<TAB>y[<TAB>z]`.
    pub layout: PathBuf,
    #[arg(long, value_name = "PATH")]
    pub communities: Option<PathBuf>,
    /// Community path to draw black, e.g. `3` or `3.1`.
    #[arg(long, value_name = "ID")]
    pub highlight: Option<String>,
    #[arg(long)]
    pub plane: Option<String>,
    /// Draw edges too (needs `--graph`).
    #[arg(long)]
    pub edges: bool,
    #[arg(long, value_name = "PATH")]
    pub graph: Option<PathBuf>,
    #[arg(long)]
    pub dot_size: Option<f64>,
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GenKind {
    Planted,
    Ring,
    ScaleFree,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    pub kind: GenKind,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub blocks: Option<usize>,
    #[arg(long)]
    pub size: Option<usize>,
    #[arg(long)]
    pub p_in: Option<f64>,
    #[arg(long)]
    pub p_out: Option<f64>,
    /// Cycle length for `ring`.
    #[arg(long)]
    pub ring: Option<usize>,
    /// Tree nodes hung off the cycle for `ring`.
    #[arg(long)]
    pub trees: Option<usize>,
    #[arg(long)]
    pub nodes: Option<usize>,
    /// Links per new node for `scale-free`.
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Planted block of every node, for `planted`.
    #[arg(long, value_name = "PATH")]
    pub truth: Option<PathBuf>,
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| input_err(path.display(), e))
}

fn emit(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| input_err(p.display(), e)),
        None => std::io::stdout()
            .lock()
            .write_all(text.as_bytes())
            .map_err(|e| input_err("stdout", e)),
    }
}

fn load_graph(path: &Path) -> Result<Graph, CliError> {
    let text = read(path)?;
    let (g, _) = parse_edge_list(&text).map_err(|e| input_err(path.display(), e))?;
    Ok(g.largest_connected_component())
}

/// Runs one parsed command line. Summaries are written to `log`.
pub fn run(cli: Cli, log: &mut dyn std::io::Write) -> Result<(), CliError> {
    let values = match &cli.config {
        Some(p) => parse_config(&read(p)?).map_err(|e| input_err(p.display(), e))?,
        None => Default::default(),
    };
    let mut cfg = Layered::new(values);
    match cli.command {
        Command::Communities(a) => communities(a, &mut cfg, log),
        Command::Layout(a) => layout_cmd(a, &mut cfg, log),
        Command::Render(a) => render_cmd(a, &mut cfg, log),
        Command::Gen(a) => gen(a, &mut cfg, log),
    }
}

fn note(log: &mut dyn std::io::Write, line: String) {
    let _ = writeln!(log, "{line}");
}

fn communities(
    a: CommunitiesArgs,
    cfg: &mut Layered,
    log: &mut dyn std::io::Write,
) -> Result<(), CliError> {
    let threshold = cfg
        .get("threshold", a.threshold)?
        .unwrap_or(DEFAULT_SIZE_THRESHOLD);
    let out = cfg.get("out", a.out)?;
    let trace = cfg.get("trace", a.trace)?;
    std::mem::take(cfg).finish()?;

    let g = load_graph(&a.input)?;
    let greedy = community::greedy_modularity(&g);
    let tree = community::refine_recursive(&g, &greedy.partition, threshold);
    let leaves = tree.leaves();
    emit(
        out.as_deref(),
        &io::write_communities(g.labels(), &tree.paths()),
    )?;
    if let Some(t) = trace {
        emit(Some(&t), &io::write_q_trace(&greedy.q_trace))?;
    }
    note(
        log,
        format!(
            "N={} M={} C={} Q={:.6}",
            g.node_count(),
            g.edge_count(),
            greedy.partition.community_count(),
            greedy.modularity
        ),
    );
    if tree.depth() > 1 {
        note(
            log,
            format!(
                "refined: {} leaf communities, depth {}",
                leaves.community_count(),
                tree.depth()
            ),
        );
    }
    Ok(())
}

enum Init {
    Random,
    Mds,
    File(PathBuf),
}

fn parse_init(s: &str) -> Result<Init, CliError> {
    match s {
        "random" => Ok(Init::Random),
        "mds" => Ok(Init::Mds),
        _ => match s.strip_prefix("file:") {
            Some(p) if !p.is_empty() => Ok(Init::File(PathBuf::from(p))),
            _ => Err(CliError::Input(format!(
                "unknown init {s:?}; use random, mds or file:PATH"
            ))),
        },
    }
}

struct LayoutPlan {
    params: SimParams,
    init: Init,
    landmarks: usize,
    penalty: Option<(f64, PathBuf)>,
    out: Option<PathBuf>,
    trace: Option<PathBuf>,
}

fn layout_cmd(
    a: LayoutArgs,
    cfg: &mut Layered,
    log: &mut dyn std::io::Write,
) -> Result<(), CliError> {
    let dim: usize = cfg
        .get("dim", a.dim.map(|d| d.parse().unwrap_or(0)))?
        .unwrap_or(2);
    let d = SimParams::default();
    let params = SimParams {
        coulomb: cfg.get("coulomb", a.coulomb)?.unwrap_or(d.coulomb),
        spring: cfg.get("spring", a.spring)?.unwrap_or(d.spring),
        rest_length: cfg
            .get("rest-length", a.rest_length)?
            .unwrap_or(d.rest_length),
        friction: cfg.get("friction", a.friction)?.unwrap_or(d.friction),
        mass: cfg.get("mass", a.mass)?.unwrap_or(d.mass),
        charge: cfg.get("charge", a.charge)?.unwrap_or(d.charge),
        dt: cfg.get("dt", a.dt)?,
        theta: cfg.get("theta", a.theta)?.unwrap_or(d.theta),
        softening: cfg.get("softening", a.softening)?,
        max_steps: cfg.get("steps", a.steps)?.unwrap_or(d.max_steps),
        v_stop: cfg.get("v-stop", a.v_stop)?,
        box_width: cfg.get("box-width", a.box_width)?.unwrap_or(d.box_width),
        seed: cfg.get("seed", a.seed)?.unwrap_or(d.seed),
    };
    params.validate()?;
    let init = parse_init(&cfg.get("init", a.init)?.unwrap_or_else(|| "random".into()))?;
    let landmarks = cfg
        .get("landmarks", a.landmarks)?
        .unwrap_or(DEFAULT_LANDMARKS);
    let penalty = cfg.get("penalty", a.penalty)?;
    let communities = cfg.get("communities", a.communities)?;
    let penalty = match (penalty, communities) {
        (None, _) => None,
        (Some(p), Some(c)) if p.is_finite() && p >= 0.0 => Some((p, c)),
        (Some(p), Some(_)) => {
            return Err(CliError::Input(format!(
                "penalty must be finite and >= 0, got {p}"
            )))
        }
        (Some(_), None) => return Err(CliError::Input("--penalty needs --communities".into())),
    };
    if penalty.is_some() && !matches!(init, Init::Mds) {
        return Err(CliError::Input(
            "--penalty only applies to --init mds".into(),
        ));
    }
    let plan = LayoutPlan {
        params,
        init,
        landmarks,
        penalty,
        out: cfg.get("out", a.out)?,
        trace: cfg.get("trace", a.trace)?,
    };
    std::mem::take(cfg).finish()?;

    let g = load_graph(&a.input)?;
    match dim {
        2 => run_layout::<2>(&g, &plan, log),
        3 => run_layout::<3>(&g, &plan, log),
        other => Err(CliError::Input(format!("dim must be 2 or 3, got {other}"))),
    }
}

fn initial_positions<const D: usize>(
    g: &Graph,
    plan: &LayoutPlan,
    log: &mut dyn std::io::Write,
) -> Result<Vec<[f64; D]>, CliError> {
    let p = &plan.params;
    match &plan.init {
        Init::Random => Ok(layout::random_init(g.node_count(), p.box_width, p.seed)),
        Init::Mds => {
            let mut ld = mds::select_landmarks(g, plan.landmarks, p.seed)
                .map_err(|e| input_err("mds", e))?;
            if let Some((penalty, path)) = &plan.penalty {
                let part = top_level_partition(g, path)?;
                ld.add_community_penalty(&part, *penalty)
                    .map_err(|e| input_err("mds", e))?;
            }
            let emb = mds::landmark_mds::<D>(&ld);
            if emb.is_degenerate() {
                note(
                    log,
                    format!(
                        "warning: landmark distances span only {} of {D} dimensions",
                        emb.rank
                    ),
                );
            }
            let mut x = emb.positions;
            mds::scale_to_edge_length(g, &mut x, 1.0);
            mds::jitter(&mut x, INIT_JITTER, p.seed);
            layout::fit_scale(g, &mut x, p)?;
            Ok(x)
        }
        Init::File(path) => {
            let parsed =
                io::parse_layout(&read(path)?).map_err(|e| input_err(path.display(), e))?;
            let points = parsed.points::<D>().ok_or_else(|| {
                CliError::Input(format!(
                    "{}: {}-dimensional layout, expected {D}",
                    path.display(),
                    parsed.dim
                ))
            })?;
            let by_label: HashMap<&str, [f64; D]> = parsed
                .labels
                .iter()
                .map(String::as_str)
                .zip(points)
                .collect();
            let missing: Vec<&str> = g
                .labels()
                .iter()
                .map(String::as_str)
                .filter(|l| !by_label.contains_key(l))
                .collect();
            if !missing.is_empty() {
                let first: Vec<&str> = missing.iter().take(10).copied().collect();
                return Err(CliError::Input(format!(
                    "{}: {} nodes have no position, first: {}",
                    path.display(),
                    missing.len(),
                    first.join(", ")
                )));
            }
            Ok(g.labels().iter().map(|l| by_label[l.as_str()]).collect())
        }
    }
}

/// Top-level community of every node of `g`, read from a community file.
fn top_level_partition(g: &Graph, path: &Path) -> Result<community::Partition, CliError> {
    let rows = io::parse_communities(&read(path)?).map_err(|e| input_err(path.display(), e))?;
    let top: HashMap<&str, usize> = rows.iter().map(|(l, p)| (l.as_str(), p[0])).collect();
    let assignment = g
        .labels()
        .iter()
        .map(|l| {
            top.get(l.as_str()).copied().ok_or_else(|| {
                CliError::Input(format!("{}: no community for node {l:?}", path.display()))
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(community::Partition::from_assignment(&assignment))
}

fn run_layout<const D: usize>(
    g: &Graph,
    plan: &LayoutPlan,
    log: &mut dyn std::io::Write,
) -> Result<(), CliError> {
    let init = initial_positions::<D>(g, plan, log)?;
    let out = layout::relax(g, init, &plan.params)?;
    emit(
        plan.out.as_deref(),
        &io::write_layout(g.labels(), &out.state.x),
    )?;
    if let Some(t) = &plan.trace {
        emit(Some(t), &io::write_energy_trace(&out.trace))?;
    }
    note(
        log,
        format!(
            "N={} M={} steps={} max_speed={:e} converged={}",
            g.node_count(),
            g.edge_count(),
            out.steps,
            out.max_speed,
            out.converged
        ),
    );
    Ok(())
}

fn render_cmd(
    a: RenderArgs,
    cfg: &mut Layered,
    log: &mut dyn std::io::Write,
) -> Result<(), CliError> {
    let communities = cfg.get("communities", a.communities)?;
    let highlight = cfg.get("highlight", a.highlight)?;
    let plane: Plane = match cfg.get::<String>("plane", a.plane)? {
        Some(s) => s.parse().map_err(|e| input_err("plane", e))?,
        None => Plane::Xy,
    };
    let edges = cfg.switch("edges", a.edges)?;
    let graph = cfg.get("graph", a.graph)?;
    let dot_size = cfg
        .get("dot-size", a.dot_size)?
        .unwrap_or(RenderOptions::default().dot_size);
    let out = cfg.get("out", a.out)?;
    std::mem::take(cfg).finish()?;
    if !(dot_size.is_finite() && dot_size > 0.0) {
        return Err(CliError::Input(format!(
            "dot size must be finite and > 0, got {dot_size}"
        )));
    }

    let layout =
        io::parse_layout(&read(&a.layout)?).map_err(|e| input_err(a.layout.display(), e))?;
    let rows = match &communities {
        Some(p) => Some(io::parse_communities(&read(p)?).map_err(|e| input_err(p.display(), e))?),
        None => None,
    };
    let edge_pairs = match (edges, graph) {
        (false, _) => None,
        (true, None) => return Err(CliError::Input("--edges needs --graph".into())),
        (true, Some(p)) => {
            let (g, _) = parse_edge_list(&read(&p)?).map_err(|e| input_err(p.display(), e))?;
            Some(
                g.edges()
                    .iter()
                    .map(|&(u, v)| (g.label(u).to_owned(), g.label(v).to_owned()))
                    .collect::<Vec<_>>(),
            )
        }
    };
    let opts = RenderOptions {
        plane,
        highlight,
        dot_size,
    };
    let svg = render::render_svg(&layout, rows.as_deref(), edge_pairs.as_deref(), &opts)
        .map_err(|e| CliError::Input(e.to_string()))?;
    emit(out.as_deref(), &svg)?;
    note(
        log,
        format!(
            "N={} dim={} plane={}",
            layout.labels.len(),
            layout.dim,
            plane
        ),
    );
    Ok(())
}

fn gen(a: GenArgs, cfg: &mut Layered, log: &mut dyn std::io::Write) -> Result<(), CliError> {
    let seed = cfg.get("seed", a.seed)?.unwrap_or(0);
    let blocks = cfg.get("blocks", a.blocks)?.unwrap_or(4);
    let size = cfg.get("size", a.size)?.unwrap_or(32);
    let p_in = cfg.get("p-in", a.p_in)?.unwrap_or(0.3);
    let p_out = cfg.get("p-out", a.p_out)?.unwrap_or(0.01);
    let ring = cfg.get("ring", a.ring)?.unwrap_or(500);
    let trees = cfg.get("trees", a.trees)?.unwrap_or(1000);
    let nodes = cfg.get("nodes", a.nodes)?.unwrap_or(1000);
    let m = cfg.get("m", a.m)?.unwrap_or(2);
    let out = cfg.get("out", a.out)?;
    let truth = cfg.get("truth", a.truth)?;
    std::mem::take(cfg).finish()?;

    let generated: Generated = match a.kind {
        GenKind::Planted => generate::planted_partition(blocks, size, p_in, p_out, seed),
        GenKind::Ring => generate::ring_with_trees(ring, trees, seed),
        GenKind::ScaleFree => generate::scale_free(nodes, m, seed),
    }
    .map_err(|e| CliError::Input(e.to_string()))?;
    let g = &generated.graph;
    emit(out.as_deref(), &g.to_edge_list())?;
    match (truth, &generated.truth) {
        (Some(path), Some(blocks)) => emit(Some(&path), &io::write_truth(g.labels(), blocks))?,
        (Some(_), None) => {
            return Err(CliError::Input(
                "only planted graphs have ground truth".into(),
            ))
        }
        (None, _) => {}
    }
    note(log, format!("N={} M={}", g.node_count(), g.edge_count()));
    Ok(())
}
