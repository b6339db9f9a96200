mod common;

use latent_recovery::pipeline::{recover_features, stationary_direct, Engine, RecoveryConfig};
use latent_recovery::programs::{run_stationary, StationaryOptions, Walk};
use latent_recovery::synthetic::{make_node_features, LandmarkSet};
use rand::Rng;

fn tight() -> StationaryOptions {
    StationaryOptions {
        tolerance: Some(1e-14),
        ..Default::default()
    }
}

#[test]
fn lazy_iteration_matches_linear_solve() {
    let mut rng = common::rng(2024);
    for _ in 0..15 {
        let n = rng.random_range(2..=200);
        let g = common::random_strong_graph(n, rng.random_range(0.5..4.0), &mut rng);
        let (x, trace) = stationary_direct(&g, &tight()).unwrap();
        assert!(trace.converged);
        let pi: Vec<f64> = common::stationary_by_linear_solve(&g).iter().map(|p| p * n as f64).collect();
        let err = common::max_abs_diff(&x, &pi) / n as f64;
        assert!(err <= 1e-9, "n = {n}: {err:e}");
        let total: f64 = x.iter().sum();
        assert!((total - n as f64).abs() <= 1e-9 * n as f64);
    }
}

#[test]
fn undirected_graphs_follow_the_degree_law() {
    let mut rng = common::rng(5);
    for _ in 0..10 {
        let n = rng.random_range(3..=150);
        let g = common::random_undirected_graph(n, 2 * n, &mut rng);
        let (x, _) = stationary_direct(&g, &tight()).unwrap();
        let arcs = g.arc_count() as f64;
        for (v, &xv) in x.iter().enumerate() {
            let expected = n as f64 * g.out_degree(v) as f64 / arcs;
            assert!((xv - expected).abs() <= 1e-10 * expected.max(1.0), "node {v}: {xv} vs {expected}");
        }
    }
}

#[test]
fn degree_law_is_a_fixed_point_of_one_step() {
    // x_v ∝ d_v is reproduced by one walk step on an undirected graph.
    let mut rng = common::rng(9);
    let g = common::random_undirected_graph(60, 90, &mut rng);
    let n = g.node_count() as f64;
    let arcs = g.arc_count() as f64;
    let x: Vec<f64> = (0..60).map(|v| n * g.out_degree(v) as f64 / arcs).collect();
    for v in 0..60 {
        let inflow: f64 = g.in_neighbors(v).iter().map(|&u| x[u] / g.out_degree(u) as f64).sum();
        assert!((inflow - x[v]).abs() <= 1e-13 * x[v]);
    }
}

#[test]
fn program_and_direct_iteration_agree_bitwise() {
    let mut rng = common::rng(77);
    for walk in [Walk::Lazy, Walk::Plain] {
        let g = common::random_strong_graph(50, 3.0, &mut rng);
        let opts = StationaryOptions {
            walk,
            tolerance: Some(1e-12),
            max_iterations: 5_000,
        };
        let (direct, t1) = stationary_direct(&g, &opts).unwrap();
        let input = make_node_features(&g, &LandmarkSet::empty()).unwrap();
        let (state, t2) = run_stationary(&g, &input, 0, &opts).unwrap();
        assert_eq!(t1, t2);
        let programmed: Vec<f64> = (0..50).map(|v| state[(v, 2)]).collect();
        assert_eq!(direct, programmed);
    }
}

#[test]
fn default_tolerance_is_accurate_enough_for_recovery() {
    let mut rng = common::rng(3);
    let g = common::random_strong_graph(120, 3.0, &mut rng);
    let cfg = RecoveryConfig {
        landmarks: Some(10),
        engine: Engine::Direct,
        ..Default::default()
    };
    let rec = recover_features(&g, &cfg).unwrap();
    let exact = common::stationary_by_linear_solve(&g);
    for (x, p) in rec.stationary.iter().zip(&exact) {
        assert!((x / (120.0 * p) - 1.0).abs() < 1e-2);
    }
}
