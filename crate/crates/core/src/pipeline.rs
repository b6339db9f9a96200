//! End-to-end recovery: landmarks, stationary estimate, edge lengths,
//! landmark shortest paths, MDS and nearest-landmark assignment.
//!
//! [`Engine::Direct`] runs graph algorithms (power iteration, Dijkstra);
//! [`Engine::MessagePassing`] runs the layer programs of [`crate::programs`].
//! Both evaluate every floating-point expression in the same order and
//! return bit-identical results.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calibration::KappaModel;
use crate::error::{Error, Result};
use crate::graph::DirectedGraph;
use crate::matrix::{FeatureMatrix, Matrix};
use crate::message_passing::step;
use crate::programs::{
    edge_length, final_layer, inf_sentinel, relax, run_bellman_ford, run_landmark_matrix, run_stationary,
    scale_readout_layer, walk_update, DistanceTable, FinalReadout, ScaleParams, StationaryOptions,
    StationaryTrace,
};
use crate::synthetic::{build_knn_graph, make_node_features, select_landmarks, LandmarkSet};

/// Landmark count used when none is configured, before clipping to `n/2`.
pub const DEFAULT_LANDMARKS: usize = 500;

/// Largest graph accepted by the message-passing engine; its per-node
/// state is `1 + 2m + m²` wide.
pub const MESSAGE_PASSING_NODE_LIMIT: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Engine {
    #[default]
    Direct,
    MessagePassing,
}

impl Engine {
    pub fn as_str(self) -> &'static str {
        match self {
            Engine::Direct => "direct",
            Engine::MessagePassing => "message-passing",
        }
    }
}

impl fmt::Display for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Engine {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct" => Ok(Engine::Direct),
            "mp" | "message-passing" => Ok(Engine::MessagePassing),
            other => Err(Error::invalid(format!("unknown engine '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryConfig {
    /// Landmark count `m`; `None` means `min(500, ⌊n/2⌋)`.
    pub landmarks: Option<usize>,
    pub dim: usize,
    pub kappa: KappaModel,
    pub seed: u64,
    pub engine: Engine,
    pub stationary: StationaryOptions,
}

impl Default for RecoveryConfig {
    fn default() -> Self {
        Self {
            landmarks: None,
            dim: 2,
            kappa: KappaModel::default(),
            seed: 0,
            engine: Engine::Direct,
            stationary: StationaryOptions::default(),
        }
    }
}

impl RecoveryConfig {
    pub fn resolved_landmarks(&self, n: usize) -> usize {
        self.landmarks.unwrap_or_else(|| DEFAULT_LANDMARKS.min(n / 2).max(1))
    }

    pub fn with_kappa(&self, kappa: KappaModel) -> Self {
        Self { kappa, ..self.clone() }
    }

    fn validate(&self, n: usize) -> Result<usize> {
        self.kappa.validate()?;
        self.stationary.validate()?;
        let m = self.resolved_landmarks(n);
        if m == 0 || m > n {
            return Err(Error::invalid(format!("landmark count {m} must lie in 1..={n}")));
        }
        if self.dim == 0 || self.dim >= m {
            return Err(Error::invalid(format!(
                "dimension {} must lie in 1..{m} for {m} landmarks",
                self.dim
            )));
        }
        if self.engine == Engine::MessagePassing && n > MESSAGE_PASSING_NODE_LIMIT {
            return Err(Error::invalid(format!(
                "message-passing engine is limited to {MESSAGE_PASSING_NODE_LIMIT} nodes, graph has {n}"
            )));
        }
        Ok(m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub engine: Engine,
    pub n: usize,
    pub m: usize,
    pub kappa: f64,
    pub stationary: StationaryTrace,
    /// Sentinel entries in the node-by-landmark distance table.
    pub inf_entries: usize,
    /// Message-passing only: layers spent on distances and on `D`.
    pub distance_layers: Option<usize>,
    pub matrix_layers: Option<usize>,
    /// Message-passing only: nodes whose flooded `D` differs from the
    /// element-wise minimum over all nodes. Zero on strongly connected graphs.
    pub matrix_disagreements: Option<usize>,
    /// Spectrum of the double-centred landmark Gram matrix, descending.
    pub mds_eigenvalues: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Recovery {
    pub coords: FeatureMatrix,
    pub landmarks: LandmarkSet,
    /// `n·π̂_v` per node.
    pub stationary: Vec<f64>,
    /// `ℓ_v` per node.
    pub lengths: Vec<f64>,
    pub distances: DistanceTable,
    /// MDS coordinates of the landmarks, row `i` for `u_i`.
    pub landmark_coords: Matrix,
    pub diagnostics: Diagnostics,
}

/// Recovers `n × dim` coordinates from the structure of `g`.
pub fn recover_features(g: &DirectedGraph, cfg: &RecoveryConfig) -> Result<Recovery> {
    let n = g.node_count();
    let m = cfg.validate(n)?;
    if !g.is_weakly_connected() {
        return Err(Error::Disconnected);
    }
    if let Some(node) = g.first_dangling() {
        return Err(Error::DanglingNode { node });
    }
    let landmarks = select_landmarks(n, m, cfg.seed)?;
    let kappa = cfg.kappa.eval(n);
    let params = ScaleParams::new(kappa, cfg.dim)?;
    match cfg.engine {
        Engine::Direct => recover_direct(g, cfg, landmarks, params),
        Engine::MessagePassing => recover_message_passing(g, cfg, landmarks, params),
    }
}

fn recover_direct(
    g: &DirectedGraph,
    cfg: &RecoveryConfig,
    landmarks: LandmarkSet,
    params: ScaleParams,
) -> Result<Recovery> {
    let n = g.node_count();
    let (stationary, trace) = stationary_direct(g, &cfg.stationary)?;
    let lengths = (0..n)
        .map(|v| {
            edge_length(g.out_degree(v) as f64, n as f64, stationary[v], params)
                .map_err(|_| Error::NonPositiveStationary { node: v })
        })
        .collect::<Result<Vec<f64>>>()?;
    let inf = inf_sentinel(&lengths);
    let per_node = landmark_distances(g, &lengths, &landmarks, inf);
    let distances = DistanceTable::from_per_node(per_node, &landmarks, inf)?;
    let readout = FinalReadout::new(&distances.symmetrized(&landmarks)?, cfg.dim)?;
    let coords = readout.assign(&distances, &landmarks)?;
    Ok(Recovery {
        diagnostics: Diagnostics {
            engine: Engine::Direct,
            n,
            m: landmarks.len(),
            kappa: params.kappa,
            stationary: trace,
            inf_entries: distances.inf_count(),
            distance_layers: None,
            matrix_layers: None,
            matrix_disagreements: None,
            mds_eigenvalues: readout.embedding().eigenvalues.clone(),
        },
        coords,
        landmarks,
        stationary,
        lengths,
        landmark_coords: readout.landmark_coords().clone(),
        distances,
    })
}

fn recover_message_passing(
    g: &DirectedGraph,
    cfg: &RecoveryConfig,
    landmarks: LandmarkSet,
    params: ScaleParams,
) -> Result<Recovery> {
    let n = g.node_count();
    let m = landmarks.len();
    let x0 = make_node_features(g, &landmarks)?;
    let (state, trace) = run_stationary(g, &x0, m, &cfg.stationary)?;
    let stationary = state.column(2);
    let state = step(g, &state, &scale_readout_layer(m, params), 1).map_err(|e| match e {
        Error::Execution { node, .. } => Error::NonPositiveStationary { node },
        other => other,
    })?;
    let lengths = state.column(0);
    let inf = inf_sentinel(&lengths);

    let (state, distance_layers) = run_bellman_ford(g, &state, m, inf)?;
    let per_node = Matrix::from_fn(n, m, |v, i| state[(v, 1 + m + i)]);
    let (state, matrix_layers) = run_landmark_matrix(g, &state, m, inf)?;

    // Every node's D is an upper bound of the true matrix, and landmark u_j
    // holds column j exactly, so the element-wise minimum over nodes is exact.
    let off = 1 + 2 * m;
    let mut landmark_matrix = Matrix::filled(m, m, inf);
    for row in state.row_iter() {
        for (d, &x) in landmark_matrix.as_mut_slice().iter_mut().zip(&row[off..]) {
            if x < *d {
                *d = x;
            }
        }
    }
    let disagreements = state
        .row_iter()
        .filter(|row| &row[off..] != landmark_matrix.as_slice())
        .count();
    let distances = DistanceTable {
        per_node,
        landmark_matrix,
        inf,
    };

    let readout = Arc::new(FinalReadout::new(&distances.symmetrized(&landmarks)?, cfg.dim)?);
    let coords = step(g, &state, &final_layer(readout.clone(), m, inf), 1).map_err(|e| match e {
        Error::Execution { node, .. } => Error::Unreachable { node },
        other => other,
    })?;
    Ok(Recovery {
        diagnostics: Diagnostics {
            engine: Engine::MessagePassing,
            n,
            m,
            kappa: params.kappa,
            stationary: trace,
            inf_entries: distances.inf_count(),
            distance_layers: Some(distance_layers),
            matrix_layers: Some(matrix_layers),
            matrix_disagreements: Some(disagreements),
            mds_eigenvalues: readout.embedding().eigenvalues.clone(),
        },
        coords,
        landmarks,
        stationary,
        lengths,
        landmark_coords: readout.landmark_coords().clone(),
        distances,
    })
}

/// Power iteration for `n·π` starting from the all-ones vector; stops on the
/// same rule as [`run_stationary`].
pub fn stationary_direct(g: &DirectedGraph, opts: &StationaryOptions) -> Result<(Vec<f64>, StationaryTrace)> {
    opts.validate()?;
    if let Some(node) = g.first_dangling() {
        return Err(Error::DanglingNode { node });
    }
    let n = g.node_count();
    let tol = opts.resolved_tolerance(n);
    let degree: Vec<f64> = (0..n).map(|v| g.out_degree(v) as f64).collect();
    let mut x = vec![1.0; n];
    let mut outflow = vec![0.0; n];
    let mut iterations = 0;
    let mut change;
    loop {
        outflow
            .par_iter_mut()
            .zip(&x)
            .zip(&degree)
            .for_each(|((w, &xu), &du)| *w = xu / du);
        let next: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|v| {
                let mut a = 0.0;
                for &u in g.in_neighbors(v) {
                    a += outflow[u];
                }
                walk_update(opts.walk, x[v], a)
            })
            .collect();
        change = next.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        x = next;
        iterations += 1;
        if change < tol || iterations >= opts.max_iterations {
            break;
        }
    }
    Ok((
        x,
        StationaryTrace {
            iterations,
            converged: change < tol,
            last_change: change,
        },
    ))
}

#[derive(PartialEq)]
struct HeapItem {
    dist: f64,
    node: usize,
}

impl Eq for HeapItem {}

impl Ord for HeapItem {
    // Reversed: BinaryHeap is a max-heap.
    fn cmp(&self, other: &Self) -> Ordering {
        other.dist.total_cmp(&self.dist).then(other.node.cmp(&self.node))
    }
}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Single-source shortest paths where arc `s → t` has length `lengths[s]`.
/// Unreached nodes keep `inf`.
pub fn dijkstra(g: &DirectedGraph, lengths: &[f64], source: usize, inf: f64) -> Vec<f64> {
    let mut dist = vec![inf; g.node_count()];
    let mut done = vec![false; g.node_count()];
    let mut heap = BinaryHeap::new();
    dist[source] = 0.0;
    heap.push(HeapItem { dist: 0.0, node: source });
    while let Some(HeapItem { dist: d, node: s }) = heap.pop() {
        if std::mem::replace(&mut done[s], true) {
            continue;
        }
        for &t in g.out_neighbors(s) {
            let nd = relax(d, lengths[s], inf);
            if nd < dist[t] {
                dist[t] = nd;
                heap.push(HeapItem { dist: nd, node: t });
            }
        }
    }
    dist
}

/// `n × m` table of shortest-path lengths from each landmark, one Dijkstra
/// run per landmark.
pub fn landmark_distances(g: &DirectedGraph, lengths: &[f64], landmarks: &LandmarkSet, inf: f64) -> Matrix {
    let columns: Vec<Vec<f64>> = landmarks
        .ids()
        .par_iter()
        .map(|&u| dijkstra(g, lengths, u, inf))
        .collect();
    Matrix::from_fn(g.node_count(), landmarks.len(), |v, i| columns[i][v])
}

/// MDS of a supplied symmetric landmark matrix followed by the
/// nearest-landmark rule over `table`. Lets callers substitute `D`, for
/// example with exact latent distances.
pub fn readout_with_landmark_matrix(
    table: &DistanceTable,
    symmetric_d: &Matrix,
    landmarks: &LandmarkSet,
    dim: usize,
) -> Result<(Matrix, Matrix)> {
    let readout = FinalReadout::new(symmetric_d, dim)?;
    let coords = readout.assign(table, landmarks)?;
    Ok((coords, readout.landmark_coords().clone()))
}

/// Jaccard similarity between the arc sets of `g` and the kNN graph of `zhat`.
pub fn reconstruction_score(zhat: &Matrix, g: &DirectedGraph, k: usize) -> Result<f64> {
    if zhat.rows() != g.node_count() {
        return Err(Error::ShapeMismatch(format!(
            "{} coordinate rows for {} nodes",
            zhat.rows(),
            g.node_count()
        )));
    }
    let rebuilt = build_knn_graph(zhat, k)?;
    let common = g.arcs().filter(|&(t, h)| rebuilt.has_arc(t, h)).count();
    let union = g.arc_count() + rebuilt.arc_count() - common;
    Ok(if union == 0 { 1.0 } else { common as f64 / union as f64 })
}
