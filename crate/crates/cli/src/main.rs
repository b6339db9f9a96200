//! `latent-recover`: generate geometric graphs, recover hidden coordinates
//! from their structure, evaluate recoveries and run experiments.
//!
//! Exit status is 0 on success, 2 on usage errors and 1 on runtime errors.

mod commands;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use latent_recovery::pipeline::Engine;
use latent_recovery::programs::Walk;
use latent_recovery::synthetic::HiddenKind;

#[derive(Debug, Parser)]
#[command(name = "latent-recover", version, about = "Recover hidden node coordinates of geometric graphs")]
struct Cli {
    /// Worker threads for parallel stages (results do not depend on it).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
pub(crate) enum Command {
    /// Sample latent points and write their kNN graph as a dataset file.
    Generate(GenerateArgs),
    /// Recover coordinates from a dataset's graph and write them as CSV.
    Recover(RecoverArgs),
    /// Score a recovered CSV against a dataset.
    Eval(EvalArgs),
    /// Run a full experiment and write its report.
    #[command(subcommand)]
    Experiment(ExperimentCommand),
    /// Build a dataset file from a user-supplied edge list.
    ImportEdgelist(ImportArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub(crate) enum KindArg {
    TwoMoon,
    UniformSquare,
    GaussianBlobs,
}

impl From<KindArg> for HiddenKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::TwoMoon => HiddenKind::TwoMoon,
            KindArg::UniformSquare => HiddenKind::UniformSquare,
            KindArg::GaussianBlobs => HiddenKind::GaussianBlobs,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub(crate) enum EngineArg {
    Direct,
    #[value(alias = "message-passing")]
    Mp,
}

impl From<EngineArg> for Engine {
    fn from(e: EngineArg) -> Self {
        match e {
            EngineArg::Direct => Engine::Direct,
            EngineArg::Mp => Engine::MessagePassing,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub(crate) enum WalkArg {
    Lazy,
    Plain,
}

impl From<WalkArg> for Walk {
    fn from(w: WalkArg) -> Self {
        match w {
            WalkArg::Lazy => Walk::Lazy,
            WalkArg::Plain => Walk::Plain,
        }
    }
}

#[derive(Debug, Args)]
pub(crate) struct DataArgs {
    #[arg(long, value_enum)]
    kind: KindArg,
    /// Noise standard deviation (two-moon default 0.1, others 0).
    #[arg(long)]
    noise: Option<f64>,
    /// Latent dimension.
    #[arg(long, default_value_t = 2)]
    latent_dim: usize,
    /// Neighbour count of the kNN graph.
    #[arg(long, conflicts_with = "paper_k")]
    k: Option<usize>,
    /// Use k = floor(√n · ln n / 10) (the default).
    #[arg(long)]
    paper_k: bool,
}

#[derive(Debug, Args)]
pub(crate) struct GenerateArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
pub(crate) struct RecoveryArgs {
    /// Landmark count (default min(500, n/2)).
    #[arg(long)]
    m: Option<usize>,
    /// Output dimension.
    #[arg(long, default_value_t = 2)]
    dim: usize,
    #[arg(long, value_enum, default_value = "direct")]
    engine: EngineArg,
    #[arg(long, value_enum, default_value = "lazy")]
    walk: WalkArg,
    /// Max-norm stopping tolerance of the stationary iteration (default 1/n²).
    #[arg(long)]
    stationary_tol: Option<f64>,
    #[arg(long, default_value_t = 50_000)]
    stationary_max_iter: usize,
}

#[derive(Debug, Args)]
pub(crate) struct RecoverArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[command(flatten)]
    recovery: RecoveryArgs,
    /// Fixed scale constant (default 1).
    #[arg(long, conflicts_with = "kappa_auto")]
    kappa: Option<f64>,
    /// Fit kappa on 70% of the nodes against the dataset's z.
    #[arg(long)]
    kappa_auto: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
pub(crate) struct EvalArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    recovered: PathBuf,
    /// Split seed; defaults to the seed recorded next to the CSV, else 0.
    #[arg(long)]
    split_seed: Option<u64>,
    /// Neighbour count for the reconstruction score (default: dataset k,
    /// else the rounded mean out-degree).
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub(crate) enum ExperimentCommand {
    /// One graph, 70/30 node split.
    Transductive(TransductiveArgs),
    /// Power-law kappa fitted on small graphs, evaluated on a larger one.
    Inductive(InductiveArgs),
}

#[derive(Debug, Args)]
pub(crate) struct ReportArgs {
    /// Record wall times (reports are then not byte-stable).
    #[arg(long)]
    timings: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
pub(crate) struct TransductiveArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    n: usize,
    #[command(flatten)]
    recovery: RecoveryArgs,
    /// Seed for data and landmarks.
    #[arg(long)]
    seed: u64,
    /// Seed of the 70/30 split (default: --seed).
    #[arg(long)]
    split_seed: Option<u64>,
    /// Skip the logistic-regression probe.
    #[arg(long)]
    no_downstream: bool,
    #[command(flatten)]
    report: ReportArgs,
}

#[derive(Debug, Args)]
pub(crate) struct InductiveArgs {
    #[arg(long, value_enum)]
    kind: KindArg,
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long, default_value_t = 2)]
    latent_dim: usize,
    #[arg(long, value_delimiter = ',', required = true)]
    train_sizes: Vec<usize>,
    #[arg(long)]
    test_size: usize,
    #[arg(long, value_delimiter = ',', required = true)]
    seeds: Vec<u64>,
    #[command(flatten)]
    recovery: RecoveryArgs,
    #[command(flatten)]
    report: ReportArgs,
}

#[derive(Debug, Args)]
pub(crate) struct ImportArgs {
    /// Lines `tail head` with 0-based node ids.
    #[arg(long)]
    edges: PathBuf,
    /// Lines `node label`, covering every node.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Node count (default: largest id + 1).
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: cannot configure {t} threads: {e}");
            return ExitCode::from(2);
        }
    }
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
