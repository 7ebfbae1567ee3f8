//! `graph-calib` command-line interface.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::inference::{infer, BpOptions, InferOptions, InferenceMethod, MeanFieldOptions};
use crate::io;
use crate::marginals::ValidationMode;
use crate::metrics::{evaluate, Evaluation, ReliabilityTable, DEFAULT_BINS};
use crate::synth::{self, GraphKind, MiscalibrationSpec, SynthSpec};

/// Environment variable holding the log filter (e.g. `info`, `debug`).
pub const LOG_ENV: &str = "GRAPH_CALIB_LOG";

/// Test fraction used by `synth`; matches a 15/85 train/test split.
pub const DEFAULT_TEST_FRACTION: f64 = 0.85;

#[derive(Debug, Parser)]
#[command(
    name = "graph-calib",
    version,
    about = "Structured calibration metrics for node classification"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute the metric report for one set of predictions.
    Metrics(MetricsArgs),
    /// Export nodewise, edgewise, agree and disagree reliability tables.
    Reliability(ReliabilityArgs),
    /// Compute node and edge marginals of a pairwise MRF.
    Infer(InferArgs),
    /// Generate a synthetic dataset.
    Synth(SynthArgs),
    /// Write the three-node chain/cycle reference fixtures.
    Fixtures(FixturesArgs),
}

#[derive(Debug, Args)]
pub struct EvalInputs {
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long)]
    pub mask: PathBuf,
    #[arg(long)]
    pub node_marginals: PathBuf,
    /// Joint edge marginals; defaults to products of node marginals.
    #[arg(long)]
    pub edge_marginals: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_BINS as u64, value_parser = clap::value_parser!(u64).range(1..))]
    pub bins: u64,
    /// Divide each probability row by its sum instead of rejecting it.
    #[arg(long)]
    pub renormalize: bool,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    #[command(flatten)]
    pub inputs: EvalInputs,
    /// Print fractions as percentages (the JSON report keeps fractions).
    #[arg(long)]
    pub percent: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReliabilityArgs {
    #[command(flatten)]
    pub inputs: EvalInputs,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MethodArg {
    Exact,
    Meanfield,
    Lbp,
}

impl From<MethodArg> for InferenceMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Exact => InferenceMethod::Exact,
            MethodArg::Meanfield => InferenceMethod::MeanField,
            MethodArg::Lbp => InferenceMethod::Lbp,
        }
    }
}

#[derive(Debug, Args)]
pub struct InferArgs {
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long)]
    pub potentials: PathBuf,
    #[arg(long, value_enum)]
    pub method: MethodArg,
    /// `node,label` file of clamped nodes.
    #[arg(long)]
    pub observed: Option<PathBuf>,
    /// Defaults to 1000 for meanfield and 100 for lbp.
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long, default_value_t = 0.0)]
    pub damping: f64,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// chain, cycle, grid, erdos_renyi or sbm
    #[arg(long)]
    pub kind: GraphKind,
    #[arg(long)]
    pub nodes: usize,
    #[arg(long)]
    pub classes: usize,
    #[arg(long, default_value_t = 0.8)]
    pub homophily: f64,
    /// Expected mean degree for erdos_renyi and sbm.
    #[arg(long, default_value_t = 4.0)]
    pub density: f64,
    #[arg(long, default_value_t = 1.0)]
    pub temperature: f64,
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, default_value_t = DEFAULT_TEST_FRACTION)]
    pub test_fraction: f64,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct FixturesArgs {
    #[arg(long)]
    pub out_dir: PathBuf,
}

struct Loaded {
    graph: Graph,
    evaluation: Evaluation,
}

fn load_and_evaluate(inputs: &EvalInputs) -> Result<Loaded> {
    let mode = if inputs.renormalize {
        ValidationMode::Renormalize
    } else {
        ValidationMode::Strict
    };
    let nm = io::read_node_marginals(&inputs.node_marginals, mode)?;
    let labels = io::read_labels(&inputs.labels, nm.num_classes())?;
    if labels.len() != nm.len() {
        return Err(Error::DimensionMismatch(format!(
            "labels cover {} nodes, node marginals cover {}",
            labels.len(),
            nm.len()
        )));
    }
    let partition = io::read_mask(&inputs.mask)?;
    if partition.len() != labels.len() {
        return Err(Error::DimensionMismatch(format!(
            "mask covers {} nodes, labels cover {}",
            partition.len(),
            labels.len()
        )));
    }
    let graph = io::read_graph(&inputs.graph, labels.len())?;
    let em = match &inputs.edge_marginals {
        Some(p) => Some(io::read_edge_marginals(p, mode)?),
        None => None,
    };
    log::info!(
        "loaded {} nodes, {} edges, {} classes",
        graph.num_nodes(),
        graph.num_edges(),
        labels.num_classes()
    );
    let evaluation = evaluate(
        &graph,
        &labels,
        &partition,
        &nm,
        em.as_ref(),
        inputs.bins as usize,
    )?;
    Ok(Loaded { graph, evaluation })
}

pub fn run_metrics(args: &MetricsArgs) -> Result<String> {
    let loaded = load_and_evaluate(&args.inputs)?;
    io::write_json(&args.out, &loaded.evaluation.report)?;
    log::debug!("graph has {} edges", loaded.graph.num_edges());
    Ok(loaded.evaluation.report.to_table(args.percent))
}

/// Table file names written by `reliability`, in write order.
pub const RELIABILITY_FILES: [&str; 4] =
    ["nodewise.csv", "edgewise.csv", "agree.csv", "disagree.csv"];

pub fn run_reliability(args: &ReliabilityArgs) -> Result<String> {
    let ev = load_and_evaluate(&args.inputs)?.evaluation;
    let tables: [&Option<ReliabilityTable>; 4] =
        [&ev.nodewise, &ev.edgewise, &ev.agree, &ev.disagree];
    let mut summary = String::new();
    for (name, table) in RELIABILITY_FILES.iter().zip(tables) {
        let path = args.out_dir.join(name);
        match table {
            Some(t) => {
                io::write_reliability(&path, t)?;
                summary.push_str(&format!("{name}: {} items, ECE {:.4}\n", t.total, t.ece));
            }
            None => {
                // header only: the metric is undefined on an empty set
                io::write_reliability(
                    &path,
                    &ReliabilityTable {
                        bins: Vec::new(),
                        total: 0,
                        ece: 0.0,
                    },
                )?;
                log::warn!("{name}: no items, table left empty");
                summary.push_str(&format!("{name}: n/a\n"));
            }
        }
    }
    Ok(summary)
}

#[derive(Debug, Serialize)]
struct ConvergenceInfo<'a> {
    method: &'a str,
    converged: bool,
    iterations: usize,
    final_delta: f64,
    max_iters: usize,
    tol: f64,
    damping: f64,
    observed_nodes: usize,
}

pub fn run_infer(args: &InferArgs) -> Result<String> {
    let potentials = io::read_potentials(&args.potentials)?;
    let graph = io::read_graph(&args.graph, potentials.unary.len())?;
    let mut mrf = potentials.into_mrf(graph)?;
    let mut observed_nodes = 0;
    if let Some(p) = &args.observed {
        let obs = io::read_observations(p)?;
        observed_nodes = obs.labels.len();
        mrf = mrf.clamp(&obs)?;
    }
    let method = InferenceMethod::from(args.method);
    let opts = InferOptions {
        mean_field: MeanFieldOptions {
            max_iters: args
                .max_iters
                .unwrap_or(MeanFieldOptions::default().max_iters),
            tol: args.tol,
            ..Default::default()
        },
        bp: BpOptions {
            max_iters: args.max_iters.unwrap_or(BpOptions::default().max_iters),
            tol: args.tol,
            damping: args.damping,
        },
    };
    let result = infer(&mrf, method, &opts)?;
    io::write_node_marginals(
        &args.out_dir.join("node_marginals.csv"),
        &result.node_marginals,
    )?;
    io::write_edge_marginals(
        &args.out_dir.join("edge_marginals.csv"),
        &result.edge_marginals,
    )?;
    let max_iters = match method {
        InferenceMethod::Exact => 1,
        InferenceMethod::MeanField => opts.mean_field.max_iters,
        InferenceMethod::Lbp => opts.bp.max_iters,
    };
    io::write_json(
        &args.out_dir.join("convergence.json"),
        &ConvergenceInfo {
            method: method.name(),
            converged: result.converged,
            iterations: result.iterations,
            final_delta: result.final_delta,
            max_iters,
            tol: args.tol,
            damping: args.damping,
            observed_nodes,
        },
    )?;
    Ok(format!(
        "{}: converged={} iterations={} final_delta={:e}\n",
        method.name(),
        result.converged,
        result.iterations,
        result.final_delta
    ))
}

#[derive(Debug, Serialize)]
struct SynthRecord<'a> {
    spec: &'a SynthSpec,
    predictions: &'a MiscalibrationSpec,
    test_fraction: f64,
}

pub fn run_synth(args: &SynthArgs) -> Result<String> {
    let spec = SynthSpec {
        kind: args.kind,
        num_nodes: args.nodes,
        num_classes: args.classes,
        homophily: args.homophily,
        density: args.density,
        seed: args.seed,
    };
    let mis = MiscalibrationSpec::new(args.temperature, args.noise, args.seed);
    let (graph, labels) = synth::gen_graph(&spec)?;
    let mask = synth::gen_mask(graph.num_nodes(), args.test_fraction, args.seed)?;
    let nm = synth::gen_predictions(&labels, &mis)?;
    let d = &args.out_dir;
    io::write_graph(&d.join("graph.csv"), &graph)?;
    io::write_labels(&d.join("labels.csv"), &labels)?;
    io::write_mask(&d.join("mask.csv"), &mask)?;
    io::write_node_marginals(&d.join("node_marginals.csv"), &nm)?;
    io::write_json(
        &d.join("synth.json"),
        &SynthRecord {
            spec: &spec,
            predictions: &mis,
            test_fraction: args.test_fraction,
        },
    )?;
    Ok(format!(
        "{}: {} nodes, {} edges, {} test nodes -> {}\n",
        spec.kind,
        graph.num_nodes(),
        graph.num_edges(),
        mask.num_test(),
        d.display()
    ))
}

#[derive(Debug, Serialize)]
struct ExpectedEntry<'a> {
    graph: &'a str,
    setting: &'a str,
    blue_probs: [f64; 3],
    bins: usize,
    #[serde(flatten)]
    values: &'a synth::ExpectedValues,
}

/// Writes `<out_dir>/appendix_a/<graph>_<setting>/` datasets and
/// `<out_dir>/appendix_a/expected.json`.
pub fn run_fixtures(args: &FixturesArgs) -> Result<String> {
    let root = args.out_dir.join("appendix_a");
    let fixtures = synth::appendix_a_fixtures();
    let mut expected = std::collections::BTreeMap::new();
    for f in &fixtures {
        let d = root.join(f.name());
        io::write_graph(&d.join("graph.csv"), &f.graph)?;
        io::write_labels(&d.join("labels.csv"), &f.labels)?;
        io::write_mask(&d.join("mask.csv"), &f.partition)?;
        io::write_node_marginals(&d.join("node_marginals.csv"), &f.marginals)?;
        expected.insert(
            f.name(),
            ExpectedEntry {
                graph: f.graph_name,
                setting: f.setting,
                blue_probs: f.blue_probs,
                bins: 1,
                values: &f.expected,
            },
        );
    }
    io::write_json(&root.join("expected.json"), &expected)?;
    Ok(format!(
        "{} fixtures -> {}\n",
        fixtures.len(),
        root.display()
    ))
}

pub fn run(cli: &Cli) -> Result<String> {
    match &cli.command {
        Command::Metrics(a) => run_metrics(a),
        Command::Reliability(a) => run_reliability(a),
        Command::Infer(a) => run_infer(a),
        Command::Synth(a) => run_synth(a),
        Command::Fixtures(a) => run_fixtures(a),
    }
}

pub fn init_logging() {
    let env = env_logger::Env::new().filter_or(LOG_ENV, "warn");
    let _ = env_logger::Builder::from_env(env)
        .format_timestamp(None)
        .try_init();
}

/// Parses arguments, runs the command, prints its summary and returns the
/// process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(out) => {
            print!("{out}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
