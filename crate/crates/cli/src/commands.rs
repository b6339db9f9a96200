use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use latent_recovery::eval::{
    generate_dataset, logistic_eval, run_inductive, run_transductive, split_train_test, transductive_fit, DatasetSpec, InductiveSpec,
    LogisticHyper, RunOptions, TRAIN_FRACTION,
};
use latent_recovery::pipeline::{recover_features, reconstruction_score, Diagnostics};
use latent_recovery::procrustes::{centered_variance, procrustes_align};
use latent_recovery::programs::StationaryOptions;
use latent_recovery::synthetic::{make_node_features, HiddenKind, LandmarkSet};
use latent_recovery::{KappaModel, RecoveryConfig};
use serde::{Deserialize, Serialize};

use crate::io::{
    graph_fingerprint, meta_path, read_coords_csv, read_pairs, write_coords_csv, write_json, DatasetFile,
    Provenance, SCHEMA_VERSION,
};
use crate::{
    Command, DataArgs, EvalArgs, ExperimentCommand, GenerateArgs, ImportArgs, InductiveArgs, RecoverArgs,
    RecoveryArgs, TransductiveArgs,
};

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Generate(a) => generate(a),
        Command::Recover(a) => recover(a),
        Command::Eval(a) => evaluate(a),
        Command::Experiment(ExperimentCommand::Transductive(a)) => transductive(a),
        Command::Experiment(ExperimentCommand::Inductive(a)) => inductive(a),
        Command::ImportEdgelist(a) => import(a),
    }
}

fn dataset_spec(data: &DataArgs, n: usize, seed: u64) -> DatasetSpec {
    let kind = HiddenKind::from(data.kind);
    DatasetSpec {
        kind,
        n,
        dim: data.latent_dim,
        noise: data.noise.unwrap_or_else(|| kind.default_noise()),
        k: data.k,
        seed,
    }
}

fn generate(a: GenerateArgs) -> Result<()> {
    let spec = dataset_spec(&a.data, a.n, a.seed);
    let data = generate_dataset(&spec)?;
    let mut file = DatasetFile::from_graph(
        &data.graph,
        Some(spec.dim),
        Provenance {
            generator: spec.kind.to_string(),
            seed: Some(spec.seed),
            k: Some(data.k),
            noise: Some(spec.noise),
        },
    );
    file.z = Some(data.z.to_rows());
    file.labels = data.labels;
    write_json(&a.out, &file)
}

fn recovery_config(r: &RecoveryArgs, kappa: KappaModel, seed: u64) -> RecoveryConfig {
    RecoveryConfig {
        landmarks: r.m,
        dim: r.dim,
        kappa,
        seed,
        engine: r.engine.into(),
        stationary: StationaryOptions {
            walk: r.walk.into(),
            tolerance: r.stationary_tol,
            max_iterations: r.stationary_max_iter,
        },
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct KappaFitRecord {
    split_seed: u64,
    train_fraction: f64,
    train_nodes: usize,
    d_g_train: f64,
}

/// Sidecar written next to a recovered CSV.
#[derive(Debug, Serialize, Deserialize)]
struct RecoverMeta {
    schema_version: u32,
    command: String,
    input: String,
    config: RecoveryConfig,
    kappa: f64,
    /// Rows are aligned into the frame of the dataset's z.
    aligned: bool,
    kappa_fit: Option<KappaFitRecord>,
    landmarks: Vec<usize>,
    diagnostics: Diagnostics,
}

fn recover(a: RecoverArgs) -> Result<()> {
    let file = DatasetFile::read(&a.input)?;
    let graph = file.graph()?;
    let kappa = KappaModel::Fixed { kappa: a.kappa.unwrap_or(1.0) };
    kappa.validate()?;
    let cfg = recovery_config(&a.recovery, kappa, a.seed);
    let rec = recover_features(&graph, &cfg)?;

    let (coords, kappa_value, kappa_fit, aligned, cfg) = if a.kappa_auto {
        let z = file
            .z_matrix()?
            .context("--kappa-auto needs latent coordinates (z) in the dataset")?;
        ensure!(
            z.cols() == rec.coords.cols(),
            "dataset z has {} columns, recovery has {}",
            z.cols(),
            rec.coords.cols()
        );
        let (train, test) = split_train_test(graph.node_count(), TRAIN_FRACTION, a.seed)?;
        let fit = transductive_fit(&rec.coords, &z, &train, &test)?;
        let record = KappaFitRecord {
            split_seed: a.seed,
            train_fraction: TRAIN_FRACTION,
            train_nodes: train.len(),
            d_g_train: fit.d_g_train,
        };
        let cfg = cfg.with_kappa(KappaModel::Fixed { kappa: fit.kappa });
        (fit.aligned, fit.kappa, Some(record), true, cfg)
    } else {
        let k = rec.diagnostics.kappa;
        (rec.coords.clone(), k, None, false, cfg)
    };
    write_coords_csv(&a.out, &coords)?;
    let meta = RecoverMeta {
        schema_version: SCHEMA_VERSION,
        command: "recover".into(),
        input: a.input.display().to_string(),
        config: RecoveryConfig {
            landmarks: Some(rec.landmarks.len()),
            ..cfg
        },
        kappa: kappa_value,
        aligned,
        kappa_fit,
        landmarks: rec.landmarks.ids().to_vec(),
        diagnostics: rec.diagnostics,
    };
    write_json(&meta_path(&a.out), &meta)
}

#[derive(Debug, Serialize, Deserialize)]
struct GraphSummary {
    n: usize,
    arcs: usize,
    fingerprint: String,
    weakly_connected: bool,
    strongly_connected: bool,
}

#[derive(Debug, Serialize, Deserialize)]
struct Accuracy {
    recovered: f64,
    baseline: f64,
    classifier: LogisticHyper,
}

#[derive(Debug, Serialize, Deserialize)]
struct EvalReport {
    schema_version: u32,
    input: String,
    recovered: String,
    graph: GraphSummary,
    dim: usize,
    split_seed: u64,
    alignment: String,
    /// Procrustes distance over all nodes (rotation fitted on all nodes).
    d_g: Option<f64>,
    d_g_train: Option<f64>,
    d_g_test: Option<f64>,
    test_variance: Option<f64>,
    k: usize,
    reconstruction_score: f64,
    accuracy: Option<Accuracy>,
}

fn recorded_seed(csv: &Path) -> Option<u64> {
    let text = std::fs::read_to_string(meta_path(csv)).ok()?;
    let meta: RecoverMeta = serde_json::from_str(&text).ok()?;
    Some(meta.kappa_fit.map_or(meta.config.seed, |f| f.split_seed))
}

fn evaluate(a: EvalArgs) -> Result<()> {
    let file = DatasetFile::read(&a.input)?;
    let graph = file.graph()?;
    let coords = read_coords_csv(&a.recovered)?;
    let n = graph.node_count();
    ensure!(coords.rows() == n, "{} coordinate rows for {n} nodes", coords.rows());
    let split_seed = a.split_seed.or_else(|| recorded_seed(&a.recovered)).unwrap_or(0);
    let (train, test) = split_train_test(n, TRAIN_FRACTION, split_seed)?;

    let (d_g, d_g_train, d_g_test, test_variance) = match file.z_matrix()? {
        Some(z) => {
            ensure!(
                z.cols() == coords.cols(),
                "dataset z has {} columns, recovered coordinates have {}",
                z.cols(),
                coords.cols()
            );
            let all = procrustes_align(&z, &coords)?.residual;
            let train_fit = procrustes_align(&z.select_rows(&train), &coords.select_rows(&train))?;
            let aligned = train_fit.apply(&coords)?;
            let test_err = test
                .iter()
                .map(|&v| aligned.row(v).iter().zip(z.row(v)).map(|(x, y)| (x - y) * (x - y)).sum::<f64>())
                .sum::<f64>()
                / test.len().max(1) as f64;
            (
                Some(all),
                Some(train_fit.residual),
                Some(test_err),
                Some(centered_variance(&z.select_rows(&test))),
            )
        }
        None => (None, None, None, None),
    };

    let k = match (a.k, file.provenance.k) {
        (Some(k), _) | (None, Some(k)) => k,
        (None, None) => ((graph.arc_count() as f64 / n as f64).round() as usize).max(1),
    };
    let score = reconstruction_score(&coords, &graph, k)?;

    let accuracy = match &file.labels {
        Some(labels) if !train.is_empty() && !test.is_empty() => {
            let hyper = LogisticHyper::default();
            let baseline = make_node_features(&graph, &LandmarkSet::empty())?;
            Some(Accuracy {
                recovered: logistic_eval(&coords, labels, &train, &test, &hyper)?.accuracy,
                baseline: logistic_eval(&baseline, labels, &train, &test, &hyper)?.accuracy,
                classifier: hyper,
            })
        }
        _ => None,
    };

    let report = EvalReport {
        schema_version: SCHEMA_VERSION,
        input: a.input.display().to_string(),
        recovered: a.recovered.display().to_string(),
        graph: GraphSummary {
            n,
            arcs: graph.arc_count(),
            fingerprint: graph_fingerprint(&graph),
            weakly_connected: graph.is_weakly_connected(),
            strongly_connected: graph.is_strongly_connected(),
        },
        dim: coords.cols(),
        split_seed,
        alignment: "d_g: rotation fitted on all nodes; d_g_train: Procrustes residual on training nodes; \
                    d_g_test: mean squared error of the training alignment on test nodes"
            .into(),
        d_g,
        d_g_train,
        d_g_test,
        test_variance,
        k,
        reconstruction_score: score,
        accuracy,
    };
    write_json(&a.out, &report)
}

fn transductive(a: TransductiveArgs) -> Result<()> {
    let spec = dataset_spec(&a.data, a.n, a.seed);
    let cfg = recovery_config(&a.recovery, KappaModel::Fixed { kappa: 1.0 }, a.seed);
    let opts = RunOptions {
        timings: a.report.timings,
        downstream: (!a.no_downstream).then(LogisticHyper::default),
        reconstruction: true,
    };
    let report = run_transductive(&spec, &cfg, a.split_seed.unwrap_or(a.seed), &opts)?;
    write_json(&a.report.out, &report)
}

fn inductive(a: InductiveArgs) -> Result<()> {
    let kind = HiddenKind::from(a.kind);
    let spec = InductiveSpec {
        kind,
        dim: a.latent_dim,
        noise: a.noise.unwrap_or_else(|| kind.default_noise()),
        train_sizes: a.train_sizes,
        test_size: a.test_size,
        seeds: a.seeds,
    };
    let cfg = recovery_config(&a.recovery, KappaModel::Fixed { kappa: 1.0 }, 0);
    let opts = RunOptions {
        timings: a.report.timings,
        downstream: None,
        reconstruction: false,
    };
    let report = run_inductive(&spec, &cfg, &opts)?;
    write_json(&a.report.out, &report)
}

fn import(a: ImportArgs) -> Result<()> {
    let arcs = read_pairs(&a.edges)?;
    let max_id = arcs.iter().map(|&(t, h)| t.max(h)).max();
    let n = match (a.n, max_id) {
        (Some(n), _) => n,
        (None, Some(m)) => m + 1,
        (None, None) => bail!("edge list is empty; pass --n"),
    };
    let graph = latent_recovery::DirectedGraph::new(n, &arcs)?;
    let mut file = DatasetFile::from_graph(
        &graph,
        None,
        Provenance {
            generator: "import-edgelist".into(),
            seed: None,
            k: None,
            noise: None,
        },
    );
    if let Some(path) = &a.labels {
        let mut labels: Vec<Option<usize>> = vec![None; n];
        for (v, c) in read_pairs(path)? {
            ensure!(v < n, "label for node {v} out of range for {n} nodes");
            ensure!(labels[v].replace(c).is_none(), "node {v} labelled twice");
        }
        let missing = labels.iter().position(Option::is_none);
        if let Some(v) = missing {
            bail!("node {v} has no label");
        }
        file.labels = Some(labels.into_iter().flatten().collect());
    }
    write_json(&a.out, &file)
}
