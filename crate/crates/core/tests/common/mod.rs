//! Independent oracles and graph generators shared by the integration tests.

#![allow(dead_code)]

use latent_recovery::{DirectedGraph, Matrix};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Hamiltonian cycle over a random permutation plus `extra` random arcs
/// per node on average; always strongly connected.
pub fn random_strong_graph(n: usize, extra: f64, rng: &mut ChaCha8Rng) -> DirectedGraph {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut arcs: Vec<(usize, usize)> = (0..n).map(|i| (order[i], order[(i + 1) % n])).collect();
    let total = (extra * n as f64).round() as usize;
    while arcs.len() < n + total {
        let (t, h) = (rng.random_range(0..n), rng.random_range(0..n));
        if t != h {
            arcs.push((t, h));
        }
    }
    DirectedGraph::new(n, &arcs).unwrap()
}

/// Random undirected graph (each arc present in both directions) built on
/// a spanning path, so it is connected.
pub fn random_undirected_graph(n: usize, extra: usize, rng: &mut ChaCha8Rng) -> DirectedGraph {
    let mut arcs = Vec::new();
    for v in 1..n {
        let u = rng.random_range(0..v);
        arcs.push((u, v));
        arcs.push((v, u));
    }
    for _ in 0..extra {
        let (a, b) = (rng.random_range(0..n), rng.random_range(0..n));
        if a != b {
            arcs.push((a, b));
            arcs.push((b, a));
        }
    }
    DirectedGraph::new(n, &arcs).unwrap()
}

pub fn random_points(n: usize, d: usize, rng: &mut ChaCha8Rng) -> Matrix {
    Matrix::from_fn(n, d, |_, _| rng.random_range(-1.0..1.0))
}

/// Stationary distribution (summing to 1) of the simple random walk,
/// from Gaussian elimination on `πᵀ(P − I) = 0` with one equation replaced
/// by `Σπ = 1`.
pub fn stationary_by_linear_solve(g: &DirectedGraph) -> Vec<f64> {
    let n = g.node_count();
    // a[r][c]: equation r, unknown c; row r is the balance of node r.
    let mut a = vec![vec![0.0; n + 1]; n];
    for v in 0..n {
        a[v][v] -= 1.0;
        let p = 1.0 / g.out_degree(v) as f64;
        for &u in g.out_neighbors(v) {
            a[u][v] += p;
        }
    }
    a[n - 1] = vec![1.0; n + 1];
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        let p = a[col][col];
        assert!(p.abs() > 1e-14, "singular system");
        for r in 0..n {
            if r != col {
                let f = a[r][col] / p;
                if f != 0.0 {
                    for c in col..=n {
                        a[r][c] -= f * a[col][c];
                    }
                }
            }
        }
    }
    (0..n).map(|i| a[i][n] / a[i][i]).collect()
}

pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy / (sxx * syy).sqrt()
}

pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// `min over θ` of the 2-D Procrustes objective, over rotations and
/// reflections, by a 3600-point grid followed by golden-section refinement.
/// Uses no linear algebra beyond sums.
pub fn procrustes_by_grid_2d(x: &Matrix, y: &Matrix) -> f64 {
    let center = |m: &Matrix| {
        let n = m.rows() as f64;
        let (cx, cy) = (
            (0..m.rows()).map(|i| m[(i, 0)]).sum::<f64>() / n,
            (0..m.rows()).map(|i| m[(i, 1)]).sum::<f64>() / n,
        );
        (0..m.rows()).map(|i| (m[(i, 0)] - cx, m[(i, 1)] - cy)).collect::<Vec<_>>()
    };
    let (xc, yc) = (center(x), center(y));
    let n = xc.len() as f64;
    let objective = |theta: f64, reflect: bool| {
        let (s, c) = theta.sin_cos();
        xc.iter()
            .zip(&yc)
            .map(|(&(x0, x1), &(y0, y1))| {
                let y1 = if reflect { -y1 } else { y1 };
                let (r0, r1) = (c * y0 - s * y1, s * y0 + c * y1);
                (x0 - r0).powi(2) + (x1 - r1).powi(2)
            })
            .sum::<f64>()
            / n
    };
    let mut best = f64::INFINITY;
    for reflect in [false, true] {
        let steps = 3600;
        let h = std::f64::consts::TAU / steps as f64;
        let start = (0..steps)
            .map(|i| i as f64 * h)
            .min_by(|&a, &b| objective(a, reflect).total_cmp(&objective(b, reflect)))
            .unwrap();
        let (mut lo, mut hi) = (start - h, start + h);
        let phi = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..200 {
            let (a, b) = (hi - phi * (hi - lo), lo + phi * (hi - lo));
            if objective(a, reflect) < objective(b, reflect) {
                hi = b;
            } else {
                lo = a;
            }
        }
        best = best.min(objective(0.5 * (lo + hi), reflect));
    }
    best
}

/// Random orthogonal `d × d` matrix from Gram-Schmidt on a random matrix,
/// with a random reflection.
pub fn random_orthogonal(d: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let mut cols: Vec<Vec<f64>> = Vec::new();
    while cols.len() < d {
        let mut v: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        for c in &cols {
            let dot: f64 = v.iter().zip(c).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(c).for_each(|(a, b)| *a -= dot * b);
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 1e-3 {
            cols.push(v.into_iter().map(|a| a / norm).collect());
        }
    }
    if rng.random_bool(0.5) {
        cols[0].iter_mut().for_each(|a| *a = -*a);
    }
    Matrix::from_fn(d, d, |i, j| cols[j][i])
}
