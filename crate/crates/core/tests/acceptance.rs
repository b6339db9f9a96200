//! Acceptance suite. Each test prints one `PASS` or `FAIL` line to the
//! uncaptured stdout and then asserts the criterion.

mod common;

use std::io::Write;
use std::sync::OnceLock;

use latent_recovery::eval::{prepare_run, run_inductive, run_transductive, DatasetSpec, InductiveSpec, RunOptions, RunRecord};
use latent_recovery::numerics::{classical_mds, pairwise_distances};
use latent_recovery::pipeline::{recover_features, stationary_direct, Engine, RecoveryConfig};
use latent_recovery::procrustes::d_g;
use latent_recovery::programs::{edge_length_readout, ScaleParams, StationaryOptions};
use latent_recovery::synthetic::{build_knn_graph, kth_neighbor_distances, paper_k, sample_hidden, HiddenKind};
use latent_recovery::{KappaModel, Matrix};
use rand::Rng;
use rayon::prelude::*;

fn report(name: &str, pass: bool, detail: String) {
    let line = format!("\n{} {name}: {detail}\n", if pass { "PASS" } else { "FAIL" });
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(line.as_bytes());
    let _ = out.flush();
    assert!(pass, "{name}: {detail}");
}

fn max_abs(a: &Matrix, b: &Matrix) -> f64 {
    assert_eq!(a.shape(), b.shape());
    common::max_abs_diff(a.as_slice(), b.as_slice())
}

#[test]
fn oracle_equivalence() {
    let mut rng = common::rng(0xACCE);
    let mut worst: f64 = 0.0;
    let mut failures = Vec::new();
    for trial in 0..20u64 {
        let n = rng.random_range(10..=300);
        let g = if trial % 4 == 3 {
            common::random_undirected_graph(n, n, &mut rng)
        } else {
            common::random_strong_graph(n, rng.random_range(0.5..5.0), &mut rng)
        };
        let m = rng.random_range(3..=20usize.min(n));
        let cfg = RecoveryConfig {
            landmarks: Some(m),
            seed: trial,
            ..Default::default()
        };
        let direct = recover_features(&g, &cfg).unwrap();
        let mp = recover_features(
            &g,
            &RecoveryConfig {
                engine: Engine::MessagePassing,
                ..cfg
            },
        )
        .unwrap();
        let diff = [
            common::max_abs_diff(&direct.stationary, &mp.stationary),
            max_abs(&direct.distances.per_node, &mp.distances.per_node),
            max_abs(&direct.distances.landmark_matrix, &mp.distances.landmark_matrix),
            max_abs(&direct.coords, &mp.coords),
        ]
        .into_iter()
        .fold(0.0, f64::max);
        worst = worst.max(diff);
        if diff > 1e-12 {
            failures.push((trial, n, m, diff));
        }
    }
    report(
        "oracle equivalence",
        failures.is_empty(),
        format!("20 graphs, n <= 300, m <= 20, max entrywise difference {worst:e} (tol 1e-12); failing {failures:?}"),
    );
}

#[test]
fn mds_exactness() {
    let mut rng = common::rng(0x3D5);
    let z = common::random_points(100, 2, &mut rng);
    let emb = classical_mds(&pairwise_distances(&z), 2).unwrap();
    let err = d_g(&z, &emb.coords).unwrap();
    report("mds exactness", err <= 1e-8, format!("d_g = {err:e} (tol 1e-8)"));
}

#[test]
fn procrustes_invariances() {
    let mut rng = common::rng(0x9A0C);
    let (mut invariance, mut symmetry, mut oracle) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..50 {
        let n = rng.random_range(3..60);
        let d = rng.random_range(1..5);
        let x = common::random_points(n, d, &mut rng).scaled(rng.random_range(0.1..10.0));
        let q = common::random_orthogonal(d, &mut rng);
        let t: Vec<f64> = (0..d).map(|_| rng.random_range(-5.0..5.0)).collect();
        let moved = x.matmul(&q).unwrap().translated(&t);
        invariance = invariance.max(d_g(&x, &moved).unwrap());
        let y = common::random_points(n, d, &mut rng);
        symmetry = symmetry.max((d_g(&x, &y).unwrap() - d_g(&y, &x).unwrap()).abs());
    }
    for _ in 0..10 {
        let n = rng.random_range(3..50);
        let x = common::random_points(n, 2, &mut rng);
        let y = common::random_points(n, 2, &mut rng).scaled(rng.random_range(0.5..2.0));
        oracle = oracle.max((d_g(&x, &y).unwrap() - common::procrustes_by_grid_2d(&x, &y)).abs());
    }
    report(
        "procrustes invariances",
        invariance <= 1e-10 && symmetry <= 1e-10 && oracle <= 1e-6,
        format!("rigid motion {invariance:e} (tol 1e-10), symmetry {symmetry:e} (tol 1e-10), grid oracle {oracle:e} (tol 1e-6)"),
    );
}

#[test]
fn stationary_correctness() {
    let mut rng = common::rng(0x57A7);
    let opts = StationaryOptions {
        tolerance: Some(1e-13),
        ..Default::default()
    };
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let n = rng.random_range(2..=200);
        let g = common::random_strong_graph(n, rng.random_range(0.3..5.0), &mut rng);
        let (x, _) = stationary_direct(&g, &opts).unwrap();
        let pi = common::stationary_by_linear_solve(&g);
        let estimate: Vec<f64> = x.iter().map(|v| v / n as f64).collect();
        worst = worst.max(common::max_abs_diff(&estimate, &pi));
    }
    let mut degree_law: f64 = 0.0;
    for _ in 0..10 {
        let n = rng.random_range(3..=200);
        let g = common::random_undirected_graph(n, n, &mut rng);
        let (x, _) = stationary_direct(&g, &opts).unwrap();
        let arcs = g.arc_count() as f64;
        for (v, xv) in x.iter().enumerate() {
            degree_law = degree_law.max((xv / n as f64 - g.out_degree(v) as f64 / arcs).abs());
        }
    }
    report(
        "stationary correctness",
        worst <= 1e-9 && degree_law <= 1e-12,
        format!("L-inf vs linear solve {worst:e} (tol 1e-9), degree law {degree_law:e} (tol 1e-12)"),
    );
}

#[test]
fn scale_estimate_consistency() {
    let n = 3000;
    let k = paper_k(n).unwrap();
    let z = sample_hidden(HiddenKind::UniformSquare, n, 2, 0.0, 0).unwrap().z;
    let g = build_knn_graph(&z, k).unwrap();
    let (stat, _) = stationary_direct(&g, &StationaryOptions::default()).unwrap();
    let params = ScaleParams::new(1.0, 2).unwrap();
    let lengths: Vec<f64> = (0..n)
        .map(|v| edge_length_readout(g.out_degree(v) as f64, n as f64, stat[v], params).unwrap())
        .collect();
    let radii = kth_neighbor_distances(&z, k).unwrap();
    let r = common::pearson(&lengths, &radii);
    report(
        "scale estimate consistency",
        r >= 0.9,
        format!("uniform square n = {n}, k = {k}: Pearson r = {r:.4} (min 0.9)"),
    );
}

const SEEDS: [u64; 3] = [0, 1, 2];
const SIZES: [usize; 3] = [1000, 2000, 3000];

/// Transductive two-moon runs with `m = 200`, indexed `[size][seed]`.
fn transductive_runs() -> &'static Vec<Vec<RunRecord>> {
    static RUNS: OnceLock<Vec<Vec<RunRecord>>> = OnceLock::new();
    RUNS.get_or_init(|| {
        let jobs: Vec<(usize, u64)> = SIZES.iter().flat_map(|&n| SEEDS.map(|s| (n, s))).collect();
        let records: Vec<RunRecord> = jobs
            .par_iter()
            .map(|&(n, seed)| {
                let cfg = RecoveryConfig {
                    landmarks: Some(200),
                    seed,
                    ..Default::default()
                };
                let report = run_transductive(&DatasetSpec::two_moon(n, seed), &cfg, seed, &RunOptions::default()).unwrap();
                report.runs.into_iter().next().unwrap()
            })
            .collect();
        records.chunks(SEEDS.len()).map(<[RunRecord]>::to_vec).collect()
    })
}

#[test]
fn end_to_end_recovery() {
    let runs = transductive_runs();
    let ratios: Vec<f64> = runs[2].iter().map(|r| r.d_g_test.unwrap() / r.test_variance).collect();
    let medians: Vec<f64> = runs
        .iter()
        .map(|row| common::median(row.iter().map(|r| r.d_g_all).collect()))
        .collect();
    let decreasing = medians.windows(2).all(|w| w[1] < w[0]);
    let ratio_ok = ratios.iter().all(|&r| r <= 0.2);
    report(
        "end-to-end recovery",
        ratio_ok && decreasing,
        format!(
            "two-moon n = 3000, m = 200: d_g_test / test variance = {:.4?} (max 0.2); median d_g_all at n = {SIZES:?}: {:.4?} (strictly decreasing)",
            ratios, medians
        ),
    );
}

#[test]
fn kappa_homogeneity() {
    let n = 500;
    let cfg = RecoveryConfig {
        landmarks: Some(100),
        seed: 5,
        ..Default::default()
    };
    let run = prepare_run(&DatasetSpec::two_moon(n, 2), &cfg).unwrap();
    let (g, unit) = (&run.dataset.graph, &run.unit);
    let scaled = recover_features(g, &cfg.with_kappa(KappaModel::Fixed { kappa: 2.5 })).unwrap();
    let err = d_g(&scaled.coords, &unit.coords.scaled(2.5)).unwrap();
    report("kappa homogeneity", err <= 1e-8, format!("n = {n}: d_g = {err:e} (tol 1e-8)"));
}

#[test]
fn inductive_extrapolation() {
    let spec = InductiveSpec {
        kind: HiddenKind::TwoMoon,
        dim: 2,
        noise: HiddenKind::TwoMoon.default_noise(),
        train_sizes: SIZES.to_vec(),
        test_size: 6000,
        seeds: SEEDS.to_vec(),
    };
    let cfg = RecoveryConfig {
        landmarks: Some(200),
        ..Default::default()
    };
    let reports: Vec<_> = SEEDS
        .par_iter()
        .map(|&s| {
            let one = InductiveSpec { seeds: vec![s], ..spec.clone() };
            run_inductive(&one, &cfg, &RunOptions::default()).unwrap()
        })
        .collect();
    let pairs: Vec<(f64, f64)> = reports
        .iter()
        .flat_map(|r| r.runs.iter().filter(|run| run.reference_d_g_test.is_some()))
        .map(|run| (run.d_g_test.unwrap(), run.reference_d_g_test.unwrap()))
        .collect();
    let ratios: Vec<f64> = pairs.iter().map(|(a, b)| a / b).collect();
    report(
        "inductive extrapolation",
        pairs.len() == SEEDS.len() && ratios.iter().all(|&r| r <= 2.0),
        format!("train n = {SIZES:?}, test n = 6000: (inductive, transductive) d_g_test = {pairs:.4?}, ratios {ratios:.3?} (max 2)"),
    );
}

#[test]
fn downstream_gap() {
    let runs = &transductive_runs()[2];
    let acc: Vec<(f64, f64)> = runs
        .iter()
        .map(|r| (r.accuracy_recovered.unwrap(), r.accuracy_baseline.unwrap()))
        .collect();
    let gaps: Vec<f64> = acc.iter().map(|(a, b)| a - b).collect();
    report(
        "downstream gap",
        gaps.iter().all(|&g| g >= 0.2),
        format!("two-moon n = 3000: (recovered, degree features) accuracy = {acc:.3?}, gaps {gaps:.3?} (min 0.2)"),
    );
}
