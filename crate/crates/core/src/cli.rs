//! Command-line front end.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::dynamics::{run_trajectory, simulate_chain, write_events_jsonl, CoalescenceOptions, WakeRule};
use crate::error::{Error, Result};
use crate::graph::{
    brownian_sheet_potential, grid_graph, metropolis_grid, Forest, ForestJson, Graph, GraphJson, GridGeometry,
    KillingPlan, Topology,
};
use crate::render::{render_forest, render_trajectory, tree_count_series, RenderSpec};
use crate::rng::RngStream;
use crate::verify::{run_suite, Suite, VerifyConfig};
use crate::wilson::{sample_forest, target_root_count};

#[derive(Parser, Debug)]
#[command(name = "rootforest", version, about = "Rooted spanning forests of weighted digraphs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Draw one forest from the killed forest measure.
    Sample(SampleArgs),
    /// Tune a uniform killing rate until the root count is near --m.
    Target(TargetArgs),
    /// Run the coalescence-fragmentation process and take snapshots.
    Coalesce(CoalesceArgs),
    /// Simulate the add/swap/remove forest chain.
    Chain(ChainArgs),
    /// Check the exact identities on random small instances.
    Verify(VerifyArgs),
    /// Render a forest JSON file as a P6 image.
    Render(RenderArgs),
}

/// Where the graph comes from: a JSON file or a grid, optionally with
/// Metropolis rates in a Brownian-sheet potential.
#[derive(Args, Debug, Clone)]
pub struct GraphSource {
    /// Graph JSON file `{"n", "edges": [[x, y, rate], ..]}`.
    #[arg(long, conflicts_with = "grid")]
    pub graph: Option<PathBuf>,
    /// Grid size `WxH`.
    #[arg(long, value_name = "WxH")]
    pub grid: Option<String>,
    /// Wrap the grid into a torus.
    #[arg(long, requires = "grid")]
    pub torus: bool,
    /// Metropolis rates in a Brownian-sheet potential at this inverse temperature.
    #[arg(long, requires = "grid", value_name = "BETA")]
    pub brownian: Option<f64>,
    /// Seed of the Brownian-sheet potential.
    #[arg(long, default_value_t = 0)]
    pub potential_seed: u64,
}

pub struct LoadedGraph {
    pub graph: Graph,
    pub geometry: Option<GridGeometry>,
    pub potential: Option<Vec<f64>>,
}

pub fn parse_grid(s: &str) -> Result<(usize, usize)> {
    let bad = || Error::InvalidArgument(format!("--grid expects WxH, got '{s}'"));
    let (w, h) = s.split_once(['x', 'X']).ok_or_else(bad)?;
    let w: usize = w.trim().parse().map_err(|_| bad())?;
    let h: usize = h.trim().parse().map_err(|_| bad())?;
    if w == 0 || h == 0 {
        return Err(bad());
    }
    Ok((w, h))
}

impl GraphSource {
    pub fn load(&self) -> Result<LoadedGraph> {
        if let Some(p) = &self.graph {
            return Ok(LoadedGraph {
                graph: GraphJson::parse(&fs::read_to_string(p)?)?,
                geometry: None,
                potential: None,
            });
        }
        let spec = self
            .grid
            .as_deref()
            .ok_or_else(|| Error::InvalidArgument("one of --graph or --grid is required".into()))?;
        let (w, h) = parse_grid(spec)?;
        let topo = if self.torus {
            Topology::Torus
        } else {
            Topology::Rectangle
        };
        let geometry = Some(GridGeometry::new(w, h, topo));
        match self.brownian {
            Some(beta) => {
                let v = brownian_sheet_potential(w, h, self.potential_seed)?;
                Ok(LoadedGraph {
                    graph: metropolis_grid(w, h, topo, &v, beta)?,
                    geometry,
                    potential: Some(v),
                })
            }
            None => Ok(LoadedGraph {
                graph: grid_graph(w, h, topo, None)?,
                geometry,
                potential: None,
            }),
        }
    }
}

#[derive(Args, Debug)]
pub struct SampleArgs {
    #[command(flatten)]
    pub source: GraphSource,
    /// Uniform killing rate.
    #[arg(long, conflicts_with = "q_file")]
    pub q: Option<f64>,
    /// Comma-separated vertices with infinite rate.
    #[arg(long, value_delimiter = ',')]
    pub kill_set: Vec<usize>,
    /// File with one rate per vertex (JSON array or whitespace separated; `inf` allowed).
    #[arg(long)]
    pub q_file: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Forest JSON output; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also render to this P6 file (grids only).
    #[arg(long)]
    pub image: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct TargetArgs {
    #[command(flatten)]
    pub source: GraphSource,
    /// Target number of roots.
    #[arg(long)]
    pub m: usize,
    /// Starting killing rate.
    #[arg(long, default_value_t = 1.0)]
    pub q0: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Forest JSON of the accepted sample.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also render the accepted sample to this P6 file (grids only).
    #[arg(long)]
    pub image: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct CoalesceArgs {
    #[command(flatten)]
    pub source: GraphSource,
    /// Comma-separated snapshot times `t = 1/q`.
    #[arg(long, value_delimiter = ',', default_value = "0,0.5,2,8,32")]
    pub snapshots: Vec<f64>,
    /// Final time; the last snapshot when absent.
    #[arg(long)]
    pub t_end: Option<f64>,
    /// Wake rule: `cornice` or `stack-coupled`.
    #[arg(long, default_value = "cornice")]
    pub wake: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Directory for snapshot images, `tree_counts.csv` and `events.jsonl`.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Pixels per vertex in snapshot images.
    #[arg(long)]
    pub cell: Option<usize>,
}

#[derive(Args, Debug)]
pub struct ChainArgs {
    #[command(flatten)]
    pub source: GraphSource,
    /// Uniform killing rate.
    #[arg(long)]
    pub q: f64,
    /// Simulated continuous time.
    #[arg(long)]
    pub horizon: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Forest JSON of the final state.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    /// `all` or one of partition, determinantal, hitting, fw, cumulant, mw, dynamics.
    #[arg(long, default_value = "all")]
    pub suite: String,
    #[arg(long, default_value_t = 5)]
    pub n_max: usize,
    #[arg(long, default_value_t = 50)]
    pub instances: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Print one JSON object per suite instead of text.
    #[arg(long)]
    pub json: bool,
}

#[derive(Args, Debug)]
pub struct RenderArgs {
    /// Forest JSON file.
    #[arg(long)]
    pub forest: PathBuf,
    /// Grid size `WxH` the forest lives on.
    #[arg(long, value_name = "WxH")]
    pub grid: String,
    /// Grid is a torus.
    #[arg(long)]
    pub torus: bool,
    /// Pixels per vertex.
    #[arg(long)]
    pub cell: Option<usize>,
    /// Underlay a Brownian-sheet potential with this seed.
    #[arg(long)]
    pub potential_seed: Option<u64>,
    /// P6 output file.
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_rates(text: &str) -> Result<Vec<f64>> {
    let t = text.trim();
    let tokens: Vec<&str> = if t.starts_with('[') {
        t.trim_start_matches('[').trim_end_matches(']').split(',').collect()
    } else {
        t.split_whitespace().collect()
    };
    tokens
        .iter()
        .map(|s| s.trim().trim_matches('"'))
        .filter(|s| !s.is_empty())
        .map(|s| match s.to_ascii_lowercase().as_str() {
            "inf" | "infinity" | "+inf" => Ok(f64::INFINITY),
            v => v
                .parse::<f64>()
                .map_err(|_| Error::InvalidArgument(format!("--q-file: cannot parse rate '{s}'"))),
        })
        .collect()
}

fn killing_plan(n: usize, a: &SampleArgs) -> Result<KillingPlan> {
    let mut rates = match (&a.q_file, a.q) {
        (Some(p), _) => {
            let r = parse_rates(&fs::read_to_string(p)?)?;
            if r.len() != n {
                return Err(Error::InvalidArgument(format!(
                    "--q-file has {} rates for {n} vertices",
                    r.len()
                )));
            }
            r
        }
        (None, Some(q)) => vec![q; n],
        (None, None) if !a.kill_set.is_empty() => vec![0.0; n],
        (None, None) => {
            return Err(Error::InvalidArgument(
                "one of --q, --kill-set or --q-file is required".into(),
            ))
        }
    };
    for &x in &a.kill_set {
        if x >= n {
            return Err(Error::InvalidArgument(format!("--kill-set: vertex {x} out of range")));
        }
        rates[x] = f64::INFINITY;
    }
    KillingPlan::new(rates)
}

fn write_json(value: &impl Serialize, out: Option<&Path>) -> Result<()> {
    let s = serde_json::to_string(value)?;
    match out {
        Some(p) => fs::write(p, s + "\n")?,
        None => {
            let mut o = std::io::stdout().lock();
            writeln!(o, "{s}")?;
        }
    }
    Ok(())
}

fn render_to(forest: &Forest, g: &LoadedGraph, cell: Option<usize>, path: &Path) -> Result<()> {
    let geometry = g
        .geometry
        .ok_or_else(|| Error::InvalidArgument("--image needs a --grid graph".into()))?;
    let mut spec = RenderSpec::new(geometry);
    if let Some(c) = cell {
        spec.cell = c;
    }
    spec.potential = g.potential.clone();
    render_forest(forest, &spec)?.write_p6(path)
}

/// Outcome of a command: success or a failed verification.
pub enum Status {
    Ok,
    VerificationFailed,
}

pub fn execute(cli: Cli) -> Result<Status> {
    match cli.command {
        Command::Sample(a) => {
            let g = a.source.load()?;
            let plan = killing_plan(g.graph.n(), &a)?;
            let mut rng = RngStream::new(a.seed, 0);
            let rep = sample_forest(&g.graph, &plan, &mut rng);
            write_json(
                &ForestJson::new(&rep.forest, plan.uniform_q(), Some(a.seed)),
                a.out.as_deref(),
            )?;
            if let Some(p) = &a.image {
                render_to(&rep.forest, &g, None, p)?;
            }
            Ok(Status::Ok)
        }
        Command::Target(a) => {
            let g = a.source.load()?;
            let mut rng = RngStream::new(a.seed, 0);
            let out = target_root_count(&g.graph, a.m, a.q0, &mut rng)?;
            #[derive(Serialize)]
            struct Summary<'a> {
                m: usize,
                iterations: usize,
                q_final: f64,
                roots: usize,
                trace: &'a [(f64, usize)],
            }
            let summary = Summary {
                m: a.m,
                iterations: out.iterations,
                q_final: out.q_final,
                roots: out.forest.n_roots(),
                trace: &out.trace,
            };
            write_json(&summary, None)?;
            if let Some(p) = &a.out {
                write_json(&ForestJson::new(&out.forest, Some(out.q_final), Some(a.seed)), Some(p))?;
            }
            if let Some(p) = &a.image {
                render_to(&out.forest, &g, None, p)?;
            }
            Ok(Status::Ok)
        }
        Command::Coalesce(a) => {
            let g = a.source.load()?;
            let wake = match a.wake.as_str() {
                "cornice" => WakeRule::Cornice,
                "stack-coupled" => WakeRule::StackCoupled,
                other => return Err(Error::InvalidArgument(format!("--wake: unknown rule '{other}'"))),
            };
            let mut times = a.snapshots.clone();
            if times.iter().any(|t| !(*t >= 0.0) || !t.is_finite()) {
                return Err(Error::InvalidArgument(
                    "--snapshots: times must be finite and >= 0".into(),
                ));
            }
            times.sort_by(f64::total_cmp);
            let t_end = a.t_end.unwrap_or_else(|| times.last().copied().unwrap_or(0.0));
            let opts = CoalescenceOptions {
                wake,
                ..Default::default()
            };
            let keep = a.out_dir.is_some();
            let traj = run_trajectory(&g.graph, RngStream::new(a.seed, 0), opts, t_end, &times, keep)?;
            match &a.out_dir {
                Some(dir) => {
                    fs::create_dir_all(dir)?;
                    fs::write(dir.join("tree_counts.csv"), tree_count_series(&traj))?;
                    write_events_jsonl(
                        &traj.events,
                        std::io::BufWriter::new(fs::File::create(dir.join("events.jsonl"))?),
                    )?;
                    if let Some(geo) = g.geometry {
                        let mut spec = RenderSpec::new(geo);
                        if let Some(c) = a.cell {
                            spec.cell = c;
                        }
                        for (k, img) in render_trajectory(&traj.snapshots, &spec)?.iter().enumerate() {
                            img.write_p6(dir.join(format!("snapshot_{k:03}.ppm")))?;
                        }
                    }
                }
                None => print!("{}", tree_count_series(&traj)),
            }
            for (t, f) in &traj.snapshots {
                eprintln!("t = {t}: {} trees", f.n_trees());
            }
            Ok(Status::Ok)
        }
        Command::Chain(a) => {
            let g = a.source.load()?;
            let start = Forest::all_roots(g.graph.n());
            let traj = simulate_chain(&g.graph, a.q, &start, a.horizon, &mut RngStream::new(a.seed, 0))?;
            let n = g.graph.n();
            let occ = traj.occupation(n + 1, |f| f.n_roots());
            #[derive(Serialize)]
            struct Summary {
                jumps: usize,
                horizon: f64,
                final_roots: usize,
                /// Fraction of time spent with `k` roots, `k = 0..=n`.
                root_count_occupation: Vec<f64>,
            }
            let last = &traj.jumps.last().expect("non-empty").1;
            write_json(
                &Summary {
                    jumps: traj.jumps.len() - 1,
                    horizon: a.horizon,
                    final_roots: last.n_roots(),
                    root_count_occupation: occ.iter().map(|o| o / a.horizon.max(f64::MIN_POSITIVE)).collect(),
                },
                None,
            )?;
            if let Some(p) = &a.out {
                write_json(&ForestJson::new(last, Some(a.q), Some(a.seed)), Some(p))?;
            }
            Ok(Status::Ok)
        }
        Command::Verify(a) => {
            let suites: Vec<Suite> = if a.suite == "all" {
                Suite::ALL.to_vec()
            } else {
                vec![a
                    .suite
                    .parse()
                    .map_err(|_| Error::InvalidArgument(format!("--suite: unknown suite '{}'", a.suite)))?]
            };
            let cfg = VerifyConfig {
                n_max: a.n_max,
                instances: a.instances,
                seed: a.seed,
            };
            let mut ok = true;
            for s in suites {
                let o = run_suite(s, &cfg)?;
                ok &= o.pass;
                if a.json {
                    write_json(&o, None)?;
                } else {
                    println!(
                        "{} {:<14} instances={} checks={} failures={} max_error={:.3e}",
                        if o.pass { "[PASS]" } else { "[FAIL]" },
                        s.name(),
                        o.instances,
                        o.checks,
                        o.failures,
                        o.max_error
                    );
                    if let Some(f) = &o.first_failure {
                        println!("       first failure: {f}");
                    }
                }
            }
            Ok(if ok { Status::Ok } else { Status::VerificationFailed })
        }
        Command::Render(a) => {
            let (w, h) = parse_grid(&a.grid)?;
            let topo = if a.torus { Topology::Torus } else { Topology::Rectangle };
            let forest = serde_json::from_str::<ForestJson>(&fs::read_to_string(&a.forest)?)?.into_forest()?;
            let mut spec = RenderSpec::new(GridGeometry::new(w, h, topo));
            if let Some(c) = a.cell {
                spec.cell = c;
            }
            if let Some(s) = a.potential_seed {
                spec.potential = Some(brownian_sheet_potential(w, h, s)?);
            }
            render_forest(&forest, &spec)?.write_p6(&a.out)?;
            Ok(Status::Ok)
        }
    }
}

/// Parse `args` (program name first) and run; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(Status::Ok) => 0,
        Ok(Status::VerificationFailed) => 1,
        Err(e @ (Error::InvalidArgument(_) | Error::InvalidKillingPlan(_))) => {
            eprintln!("error: {e}");
            2
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
