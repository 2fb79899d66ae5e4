use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use cascade_source::detectors::{DetectorSpec, Method, StationaryMode};
use cascade_source::graph::load_edge_list;
use cascade_source::harness::{merged_summary_csv, run_all, RunConfig};
use cascade_source::oracles::{self, Direction};
use cascade_source::{Error, WeightedDigraph};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

#[derive(Parser)]
#[command(
    name = "cascade-source",
    version,
    about = "Find the source of an Independent Cascade diffusion"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiments in a TOML config and write reports.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Override the worker count of every experiment.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Score the candidate sources of one observed cascade.
    Detect {
        #[arg(long)]
        graph: PathBuf,
        /// Active node labels, comma or whitespace separated, or a file
        /// holding them.
        #[arg(long)]
        active: String,
        #[arg(long)]
        method: String,
        /// Estimate the stationary distribution with a walk of this many
        /// steps instead of solving for it.
        #[arg(long)]
        steps: Option<u64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        walks: u32,
        #[arg(long, default_value_t = 1000)]
        im_simulations: u32,
    },
    /// Exact quantities for small graphs.
    Oracle(OracleArgs),
}

#[derive(Args)]
#[group(required = true, multiple = false, id = "what")]
struct OracleKind {
    /// Exact source posterior by enumerating edge subsets.
    #[arg(long)]
    brute_force: bool,
    /// Spanning out-tree weight sums per root, by enumeration.
    #[arg(long)]
    gamma: bool,
    /// Spanning out-tree weight sum for one root, by determinant.
    #[arg(long, requires = "root")]
    matrix_tree: bool,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long)]
    graph: PathBuf,
    #[command(flatten)]
    kind: OracleKind,
    #[arg(long)]
    root: Option<String>,
    /// Count in-trees instead of out-trees (matrix-tree only).
    #[arg(long)]
    in_trees: bool,
}

fn load_graph(path: &Path) -> Result<WeightedDigraph, Error> {
    load_edge_list(&fs::read_to_string(path)?)?.into_weighted()
}

fn node(g: &WeightedDigraph, label: &str) -> Result<usize, Error> {
    g.node_by_label(label)
        .ok_or_else(|| Error::InvalidParameter(format!("unknown node {label:?}")))
}

fn parse_active(g: &WeightedDigraph, arg: &str) -> Result<Vec<usize>, Error> {
    let text = if Path::new(arg).is_file() {
        fs::read_to_string(arg)?
    } else {
        arg.to_string()
    };
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| node(g, s))
        .collect()
}

/// Writes to stdout; a closed pipe is not an error.
fn emit(text: &str) -> Result<(), Error> {
    match io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Run { config, workers } => {
            let mut cfg = RunConfig::load(&config)?;
            if let Some(w) = workers {
                cfg.experiments.iter_mut().for_each(|e| e.workers = Some(w));
            }
            let tables = run_all(&cfg)?;
            emit(&merged_summary_csv(&tables))?;
        }
        Command::Detect {
            graph,
            active,
            method,
            steps,
            seed,
            walks,
            im_simulations,
        } => {
            let g = load_graph(&graph)?;
            let active = parse_active(&g, &active)?;
            let method: Method = method.parse()?;
            let spec = DetectorSpec {
                mode: steps.map_or(StationaryMode::Direct, |steps| StationaryMode::RandomWalk {
                    steps,
                }),
                walks,
                im_simulations,
                seed,
                ..DetectorSpec::new(method)
            };
            let sv = cascade_source::detect(&g, &active, &spec)?;
            let out = json!({
                "method": spec.label(),
                "predicted": g.label(sv.predicted()),
                "rerouted": sv.rerouted,
                "scores": sv.nodes.iter().zip(&sv.scores)
                    .map(|(&v, &s)| json!({"node": g.label(v), "score": s}))
                    .collect::<Vec<_>>(),
            });
            emit(&(serde_json::to_string_pretty(&out)? + "\n"))?;
        }
        Command::Oracle(args) => {
            let g = load_graph(&args.graph)?;
            let labels: Vec<String> = (0..g.node_count()).map(|v| g.label(v)).collect();
            let out = if args.kind.brute_force {
                let post = oracles::brute_force_posterior(&g)?;
                json!({"nodes": labels, "joint": post.joint, "posterior": post.posterior, "total_mass": post.total_mass})
            } else if args.kind.gamma {
                json!({"nodes": labels, "gamma": oracles::gamma_exact(&g)?})
            } else {
                let root_label = args.root.as_deref().expect("clap requires --root");
                let root = node(&g, root_label)?;
                let dir = if args.in_trees {
                    Direction::In
                } else {
                    Direction::Out
                };
                json!({"root": root_label, "weight": oracles::arborescence_weight_sum(&g, root, dir)?})
            };
            emit(&(serde_json::to_string_pretty(&out)? + "\n"))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_input_error() { 1 } else { 2 })
        }
    }
}
