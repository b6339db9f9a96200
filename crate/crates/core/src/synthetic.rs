//! Hidden-feature samplers, geometric graph generators, landmark selection
//! and the synthetic input features `[d_v, n]` / `[d_v, n, e_i]`.

use std::cmp::Ordering;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::DirectedGraph;
use crate::matrix::{FeatureMatrix, Matrix};

/// Seeded generator used everywhere randomness is needed.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Latent densities available to the generators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HiddenKind {
    /// Two interleaved half-circles of radius 1. The upper moon is centred at
    /// the origin, the lower one at `(1, 0.5)`. Requires `d = 2`.
    TwoMoon,
    /// Uniform on `[0, 1]^d`. The noise argument is ignored.
    UniformSquare,
    /// Equal-weight mixture of three unit-variance Gaussians with centres on a
    /// circle of radius 4 (at −4, 0, 4 when `d = 1`).
    GaussianBlobs,
}

impl HiddenKind {
    pub fn as_str(self) -> &'static str {
        match self {
            HiddenKind::TwoMoon => "two-moon",
            HiddenKind::UniformSquare => "uniform-square",
            HiddenKind::GaussianBlobs => "gaussian-blobs",
        }
    }

    /// Noise used when the caller does not pick one. Two moons at n ≈ 10³
    /// need about 0.1 for the kNN graph to join both moons.
    pub fn default_noise(self) -> f64 {
        match self {
            HiddenKind::TwoMoon => 0.1,
            HiddenKind::UniformSquare | HiddenKind::GaussianBlobs => 0.0,
        }
    }
}

impl fmt::Display for HiddenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for HiddenKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "two-moon" => Ok(HiddenKind::TwoMoon),
            "uniform-square" => Ok(HiddenKind::UniformSquare),
            "gaussian-blobs" => Ok(HiddenKind::GaussianBlobs),
            other => Err(Error::invalid(format!("unknown generator kind '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HiddenSample {
    pub z: FeatureMatrix,
    /// Moon or blob index; `None` for the uniform square.
    pub labels: Option<Vec<usize>>,
}

pub fn sample_hidden(
    kind: HiddenKind,
    n: usize,
    d: usize,
    noise: f64,
    seed: u64,
) -> Result<HiddenSample> {
    if n == 0 {
        return Err(Error::invalid("sample size must be positive"));
    }
    if d == 0 {
        return Err(Error::invalid("latent dimension must be positive"));
    }
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(Error::invalid("noise must be a finite nonnegative number"));
    }
    let mut rng = seeded_rng(seed);
    let jitter = Normal::new(0.0, noise).map_err(|e| Error::invalid(e.to_string()))?;
    let mut z = Matrix::zeros(n, d);
    match kind {
        HiddenKind::TwoMoon => {
            if d != 2 {
                return Err(Error::invalid(format!("two-moon requires d = 2, got {d}")));
            }
            let mut labels = Vec::with_capacity(n);
            for v in 0..n {
                let moon = usize::from(rng.random_bool(0.5));
                let t = rng.random_range(0.0..PI);
                let (x, y) = if moon == 0 {
                    (t.cos(), t.sin())
                } else {
                    (1.0 - t.cos(), 0.5 - t.sin())
                };
                let row = z.row_mut(v);
                row[0] = x + jitter.sample(&mut rng);
                row[1] = y + jitter.sample(&mut rng);
                labels.push(moon);
            }
            Ok(HiddenSample {
                z,
                labels: Some(labels),
            })
        }
        HiddenKind::UniformSquare => {
            for x in z.as_mut_slice() {
                *x = rng.random::<f64>();
            }
            Ok(HiddenSample { z, labels: None })
        }
        HiddenKind::GaussianBlobs => {
            let centers = blob_centers(d);
            let mut labels = Vec::with_capacity(n);
            for v in 0..n {
                let blob = rng.random_range(0..centers.len());
                let row = z.row_mut(v);
                for (x, c) in row.iter_mut().zip(&centers[blob]) {
                    let unit: f64 = StandardNormal.sample(&mut rng);
                    *x = c + unit + jitter.sample(&mut rng);
                }
                labels.push(blob);
            }
            Ok(HiddenSample {
                z,
                labels: Some(labels),
            })
        }
    }
}

fn blob_centers(d: usize) -> Vec<Vec<f64>> {
    (0..3)
        .map(|j| {
            let mut c = vec![0.0; d];
            if d == 1 {
                c[0] = 4.0 * (j as f64 - 1.0);
            } else {
                let angle = PI / 2.0 + 2.0 * PI * j as f64 / 3.0;
                c[0] = 4.0 * angle.cos();
                c[1] = 4.0 * angle.sin();
            }
            c
        })
        .collect()
}

/// `floor(√n · ln n / 10)`, the neighbour count used for the two-moon kNN graphs.
pub fn paper_k(n: usize) -> Result<usize> {
    let nf = n as f64;
    let k = (nf.sqrt() * nf.ln() / 10.0).floor();
    if !(k >= 1.0) {
        return Err(Error::invalid(format!("graph too small for paper_k (n = {n})")));
    }
    Ok(k as usize)
}

#[inline]
pub(crate) fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Lexicographic order on `(distance, id)`: nearer first, lower id on ties.
fn by_distance_then_id(a: &(f64, usize), b: &(f64, usize)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

/// The `k` nearest other points of row `v`, ordered by `(distance, id)`.
fn nearest(z: &Matrix, v: usize, k: usize) -> Vec<(f64, usize)> {
    let zv = z.row(v);
    let mut cand: Vec<(f64, usize)> = (0..z.rows())
        .filter(|&u| u != v)
        .map(|u| (euclidean(zv, z.row(u)), u))
        .collect();
    if k < cand.len() {
        cand.select_nth_unstable_by(k - 1, by_distance_then_id);
        cand.truncate(k);
    }
    cand.sort_unstable_by(by_distance_then_id);
    cand
}

fn check_knn_args(z: &Matrix, k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::invalid("k must be positive"));
    }
    if k >= z.rows() {
        return Err(Error::invalid(format!(
            "k = {k} must be smaller than the number of points ({})",
            z.rows()
        )));
    }
    if !z.is_finite() {
        return Err(Error::invalid("features must be finite"));
    }
    Ok(())
}

/// Directed kNN graph: an arc from every node to each of its `k` nearest
/// neighbours. Ties are broken by lower node id.
pub fn build_knn_graph(z: &Matrix, k: usize) -> Result<DirectedGraph> {
    check_knn_args(z, k)?;
    let arcs: Vec<(usize, usize)> = (0..z.rows())
        .into_par_iter()
        .flat_map_iter(|v| nearest(z, v, k).into_iter().map(move |(_, u)| (v, u)))
        .collect();
    DirectedGraph::new(z.rows(), &arcs)
}

/// Smallest radius per node under which the strict-inequality threshold graph
/// contains the node's `k` nearest neighbours: the k-th NN distance, bumped
/// to the next representable value.
pub fn knn_radii(z: &Matrix, k: usize) -> Result<Vec<f64>> {
    Ok(kth_neighbor_distances(z, k)?
        .into_iter()
        .map(f64::next_up)
        .collect())
}

/// Distance from each node to its k-th nearest neighbour.
pub fn kth_neighbor_distances(z: &Matrix, k: usize) -> Result<Vec<f64>> {
    check_knn_args(z, k)?;
    Ok((0..z.rows())
        .into_par_iter()
        .map(|v| nearest(z, v, k)[k - 1].0)
        .collect())
}

/// Arc `v → u` iff `‖z_v − z_u‖ < radii[v]`.
pub fn build_threshold_graph(z: &Matrix, radii: &[f64]) -> Result<DirectedGraph> {
    if radii.len() != z.rows() {
        return Err(Error::ShapeMismatch(format!(
            "{} radii for {} points",
            radii.len(),
            z.rows()
        )));
    }
    if let Some(v) = radii.iter().position(|&r| !(r > 0.0)) {
        return Err(Error::invalid(format!("radius of node {v} must be positive")));
    }
    let arcs: Vec<(usize, usize)> = (0..z.rows())
        .into_par_iter()
        .flat_map_iter(|v| {
            let zv = z.row(v);
            let r = radii[v];
            (0..z.rows())
                .filter(move |&u| u != v && euclidean(zv, z.row(u)) < r)
                .map(move |u| (v, u))
        })
        .collect();
    DirectedGraph::new(z.rows(), &arcs)
}

/// Ordered set of landmark node ids `u_1 < … < u_m`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LandmarkSet {
    ids: Vec<usize>,
}

impl LandmarkSet {
    /// Validates distinct in-range ids and sorts them.
    pub fn new(mut ids: Vec<usize>, n: usize) -> Result<Self> {
        ids.sort_unstable();
        if let Some(&bad) = ids.iter().find(|&&u| u >= n) {
            return Err(Error::invalid(format!("landmark {bad} out of range for {n} nodes")));
        }
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("landmark ids must be distinct"));
        }
        Ok(Self { ids })
    }

    pub fn empty() -> Self {
        Self { ids: Vec::new() }
    }

    pub fn ids(&self) -> &[usize] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Position `i` such that `node = u_i`.
    pub fn index_of(&self, node: usize) -> Option<usize> {
        self.ids.binary_search(&node).ok()
    }

    /// For every node, its landmark index if it is one.
    pub fn membership(&self, n: usize) -> Vec<Option<usize>> {
        let mut out = vec![None; n];
        for (i, &u) in self.ids.iter().enumerate() {
            out[u] = Some(i);
        }
        out
    }
}

/// Draws `m` distinct nodes uniformly (partial Fisher–Yates) and sorts them.
pub fn select_landmarks(n: usize, m: usize, seed: u64) -> Result<LandmarkSet> {
    if m == 0 || m > n {
        return Err(Error::invalid(format!(
            "landmark count {m} must lie in 1..={n}"
        )));
    }
    let mut rng = seeded_rng(seed);
    let mut pool: Vec<usize> = (0..n).collect();
    for i in 0..m {
        let j = rng.random_range(i..n);
        pool.swap(i, j);
    }
    pool.truncate(m);
    LandmarkSet::new(pool, n)
}

/// Input features `x_v = [d_v, n, e_i]` for `v = u_i` and `[d_v, n, 0]`
/// otherwise. An empty landmark set gives the plain `[d_v, n]` features.
pub fn make_node_features(g: &DirectedGraph, landmarks: &LandmarkSet) -> Result<FeatureMatrix> {
    let n = g.node_count();
    if let Some(&bad) = landmarks.ids().iter().find(|&&u| u >= n) {
        return Err(Error::invalid(format!("landmark {bad} out of range for {n} nodes")));
    }
    let m = landmarks.len();
    let mut x = Matrix::zeros(n, 2 + m);
    for v in 0..n {
        let row = x.row_mut(v);
        row[0] = g.out_degree(v) as f64;
        row[1] = n as f64;
    }
    for (i, &u) in landmarks.ids().iter().enumerate() {
        x[(u, 2 + i)] = 1.0;
    }
    Ok(x)
}
