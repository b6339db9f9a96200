//! The constructive recovery stages written as [`LayerProgram`]s, together
//! with the scalar formulas they share with the direct algorithms in
//! [`crate::pipeline`].
//!
//! State layouts (`m` landmarks, one-hot ids carried through every stage):
//!
//! ```text
//! input        [d, n, ids]                     2 + m
//! stationary   [d, n, x, ids]                  3 + m
//! lengths      [ℓ, ids]                        1 + m
//! distances    [ℓ, ids, dist]                  1 + 2m
//! matrix       [ℓ, ids, dist, D]               1 + 2m + m²
//! coordinates  [c_0 .. c_{dim-1}]              dim
//! ```
//!
//! `dist[i]` is the length of the shortest path from landmark `u_i` to the
//! node, where an arc `s → t` has length `ℓ_s`. `D` is row-major with
//! `D[i·m + j] = dist_{u_j}[i]`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::DirectedGraph;
use crate::matrix::Matrix;
use crate::message_passing::{step, LayerProgram, NodeResult, Reduction};
use crate::numerics::{classical_mds, MdsEmbedding};
use crate::synthetic::LandmarkSet;

/// Random-walk operator used by the stationary iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Walk {
    /// `x ← ½(x + Rx)`; converges on every strongly connected graph.
    #[default]
    Lazy,
    /// `x ← Rx`; oscillates on periodic graphs.
    Plain,
}

/// Stopping rule for the stationary iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationaryOptions {
    pub walk: Walk,
    /// Max-norm change below which iteration stops. `None` means `1/n²`.
    pub tolerance: Option<f64>,
    pub max_iterations: usize,
}

impl Default for StationaryOptions {
    fn default() -> Self {
        Self {
            walk: Walk::Lazy,
            tolerance: None,
            max_iterations: 50_000,
        }
    }
}

impl StationaryOptions {
    pub fn resolved_tolerance(&self, n: usize) -> f64 {
        self.tolerance.unwrap_or_else(|| 1.0 / (n as f64 * n as f64))
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::invalid("stationary iteration cap must be positive"));
        }
        if let Some(t) = self.tolerance {
            if !(t >= 0.0) || !t.is_finite() {
                return Err(Error::invalid("stationary tolerance must be finite and nonnegative"));
            }
        }
        Ok(())
    }
}

/// How the stationary iteration ended.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationaryTrace {
    pub iterations: usize,
    pub converged: bool,
    /// Max-norm change of the last iteration.
    pub last_change: f64,
}

/// One walk step at a node from its current value and the aggregated inflow.
#[inline]
pub(crate) fn walk_update(walk: Walk, x: f64, inflow: f64) -> f64 {
    match walk {
        Walk::Lazy => 0.5 * (x + inflow),
        Walk::Plain => inflow,
    }
}

/// Scale parameters of the edge-length readout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleParams {
    /// `(c·g_n²)^{1/(dim+2)}`, positive.
    pub kappa: f64,
    pub dim: usize,
}

impl ScaleParams {
    pub fn new(kappa: f64, dim: usize) -> Result<Self> {
        if !(kappa > 0.0) || !kappa.is_finite() {
            return Err(Error::invalid("kappa must be positive"));
        }
        if dim == 0 {
            return Err(Error::invalid("latent dimension must be at least 1"));
        }
        Ok(Self { kappa, dim })
    }
}

const NOT_POSITIVE: &str = "stationary estimate not positive";
const DANGLING: &str = "dangling node";
const UNREACHABLE: &str = "node unreachable from all landmarks";

/// `ℓ_v = κ · (d_v / (n · stat))^{1/(dim+2)}` with `stat ≈ n·π_v`.
///
/// The density estimate at `z_v` is `p̂ ∝ n·π_v / d_v`, the local radius
/// `ŝ = (c·g_n^{-d}·d_v / (n·p̂))^{1/(d+2)}`, and the arc length `g_n·ŝ`
/// collapses to this form with `κ = (c·g_n²)^{1/(d+2)}`.
pub fn edge_length_readout(degree: f64, n: f64, stat: f64, params: ScaleParams) -> Result<f64> {
    edge_length(degree, n, stat, params).map_err(|_| Error::invalid(NOT_POSITIVE))
}

#[inline]
pub(crate) fn edge_length(degree: f64, n: f64, stat: f64, params: ScaleParams) -> std::result::Result<f64, &'static str> {
    if !(stat > 0.0) {
        return Err(NOT_POSITIVE);
    }
    let exponent = 1.0 / (params.dim as f64 + 2.0);
    Ok(params.kappa * (degree / (n * stat)).powf(exponent))
}

/// `n · max ℓ + 1`, larger than any simple path length.
pub fn inf_sentinel(lengths: &[f64]) -> f64 {
    let max = lengths.iter().cloned().fold(0.0, f64::max);
    lengths.len() as f64 * max + 1.0
}

/// Index `i` of the set slot in a one-hot id block.
#[inline]
fn one_hot_index(ids: &[f64]) -> Option<usize> {
    ids.iter().position(|&x| x == 1.0)
}

/// First stationary layer on `[d, n, ids]`; `x^{(0)} = 1` is implicit.
pub fn stationary_first_layer(m: usize, walk: Walk) -> LayerProgram {
    LayerProgram::new(
        "stationary-first",
        2 + m,
        1,
        3 + m,
        Reduction::Sum,
        |h, msg| {
            if h[0] == 0.0 {
                return Err(DANGLING);
            }
            msg[0] = 1.0 / h[0];
            Ok(())
        },
        move |h, a, out| {
            out[0] = h[0];
            out[1] = h[1];
            out[2] = walk_update(walk, 1.0, a[0]);
            out[3..].copy_from_slice(&h[2..]);
            Ok(())
        },
    )
}

/// Subsequent stationary layers on `[d, n, x, ids]`.
pub fn stationary_mid_layer(m: usize, walk: Walk) -> LayerProgram {
    LayerProgram::new(
        "stationary-mid",
        3 + m,
        1,
        3 + m,
        Reduction::Sum,
        |h, msg| {
            if h[0] == 0.0 {
                return Err(DANGLING);
            }
            msg[0] = h[2] / h[0];
            Ok(())
        },
        move |h, a, out| {
            out.copy_from_slice(h);
            out[2] = walk_update(walk, h[2], a[0]);
            Ok(())
        },
    )
}

/// `L` stationary layers: one first layer followed by `L − 1` mid layers.
pub fn stationary_program(layers: usize, m: usize, walk: Walk) -> Result<Vec<LayerProgram>> {
    if layers == 0 {
        return Err(Error::invalid("stationary program needs at least one layer"));
    }
    let mut out = vec![stationary_first_layer(m, walk)];
    out.extend(std::iter::repeat_with(|| stationary_mid_layer(m, walk)).take(layers - 1));
    Ok(out)
}

/// Runs stationary layers on `[d, n, ids]` until the max-norm change of
/// `x` drops below the tolerance or the cap is reached.
pub fn run_stationary(
    g: &DirectedGraph,
    input: &Matrix,
    m: usize,
    opts: &StationaryOptions,
) -> Result<(Matrix, StationaryTrace)> {
    opts.validate()?;
    let tol = opts.resolved_tolerance(g.node_count());
    let first = stationary_first_layer(m, opts.walk);
    let mid = stationary_mid_layer(m, opts.walk);
    let mut state = step(g, input, &first, 1)?;
    let mut change = state.row_iter().map(|r| (r[2] - 1.0).abs()).fold(0.0, f64::max);
    let mut iterations = 1;
    while !(change < tol) && iterations < opts.max_iterations {
        let next = step(g, &state, &mid, iterations + 1)?;
        change = next
            .row_iter()
            .zip(state.row_iter())
            .map(|(a, b)| (a[2] - b[2]).abs())
            .fold(0.0, f64::max);
        state = next;
        iterations += 1;
    }
    Ok((
        state,
        StationaryTrace {
            iterations,
            converged: change < tol,
            last_change: change,
        },
    ))
}

/// Local layer `[d, n, x, ids] → [ℓ, ids]`.
pub fn scale_readout_layer(m: usize, params: ScaleParams) -> LayerProgram {
    LayerProgram::local("scale-readout", 3 + m, 1 + m, move |h, out| {
        out[0] = edge_length(h[0], h[1], h[2], params)?;
        out[1..].copy_from_slice(&h[3..]);
        Ok(())
    })
}

/// First Bellman–Ford layer `[ℓ, ids] → [ℓ, ids, dist]`.
///
/// Landmark `u_i` sends `ℓ_{u_i}` in slot `i` and `INF` elsewhere; a node
/// starts at `0` in its own slot.
pub fn bellman_ford_first_layer(m: usize, inf: f64) -> LayerProgram {
    LayerProgram::new(
        "bellman-ford-first",
        1 + m,
        m,
        1 + 2 * m,
        Reduction::Min { sentinel: inf },
        move |h, msg| {
            msg.fill(inf);
            if let Some(i) = one_hot_index(&h[1..]) {
                msg[i] = h[0];
            }
            Ok(())
        },
        move |h, a, out| {
            out[..1 + m].copy_from_slice(h);
            let dist = &mut out[1 + m..];
            dist.copy_from_slice(a);
            if let Some(i) = one_hot_index(&h[1..]) {
                dist[i] = 0.0;
            }
            Ok(())
        },
    )
}

/// Relaxation step `min(dist_u + ℓ_u, INF)`.
#[inline]
pub(crate) fn relax(dist: f64, length: f64, inf: f64) -> f64 {
    let through = dist + length;
    if through < inf {
        through
    } else {
        inf
    }
}

/// Bellman–Ford layer on `[ℓ, ids, dist]`.
pub fn bellman_ford_mid_layer(m: usize, inf: f64) -> LayerProgram {
    LayerProgram::new(
        "bellman-ford-mid",
        1 + 2 * m,
        m,
        1 + 2 * m,
        Reduction::Min { sentinel: inf },
        move |h, msg| {
            let len = h[0];
            for (o, &d) in msg.iter_mut().zip(&h[1 + m..]) {
                *o = relax(d, len, inf);
            }
            Ok(())
        },
        move |h, a, out| {
            out.copy_from_slice(h);
            for (o, &x) in out[1 + m..].iter_mut().zip(a) {
                if x < *o {
                    *o = x;
                }
            }
            Ok(())
        },
    )
}

/// `budget` Bellman–Ford layers (at least one).
pub fn bellman_ford_program(m: usize, inf: f64, budget: usize) -> Vec<LayerProgram> {
    let mut out = vec![bellman_ford_first_layer(m, inf)];
    out.extend(std::iter::repeat_with(|| bellman_ford_mid_layer(m, inf)).take(budget.saturating_sub(1)));
    out
}

/// Layer budget for distance propagation: `n − 1`, and at least one.
pub fn propagation_budget(n: usize) -> usize {
    n.saturating_sub(1).max(1)
}

/// Runs Bellman–Ford layers from `[ℓ, ids]` with early exit at a fixpoint.
/// Returns the final state and the number of layers executed.
pub fn run_bellman_ford(g: &DirectedGraph, input: &Matrix, m: usize, inf: f64) -> Result<(Matrix, usize)> {
    let first = bellman_ford_first_layer(m, inf);
    let mid = bellman_ford_mid_layer(m, inf);
    let state = step(g, input, &first, 1)?;
    iterate_to_fixpoint(g, state, &mid, propagation_budget(g.node_count()))
}

fn iterate_to_fixpoint(
    g: &DirectedGraph,
    mut state: Matrix,
    layer: &LayerProgram,
    budget: usize,
) -> Result<(Matrix, usize)> {
    let mut layers = 1;
    while layers < budget {
        let next = step(g, &state, layer, layers + 1)?;
        layers += 1;
        if next == state {
            break;
        }
        state = next;
    }
    Ok((state, layers))
}

/// First landmark-matrix layer `[ℓ, ids, dist] → [ℓ, ids, dist, D]`.
///
/// Landmark `u_j` owns column `j` of `D`, filled with its own `dist`; every
/// other entry starts at `INF` and is lowered by min-flooding.
pub fn landmark_matrix_first_layer(m: usize, inf: f64) -> LayerProgram {
    let own = move |h: &[f64], d: &mut [f64]| {
        d.fill(inf);
        if let Some(j) = one_hot_index(&h[1..1 + m]) {
            for i in 0..m {
                d[i * m + j] = h[1 + m + i];
            }
        }
    };
    LayerProgram::new(
        "landmark-matrix-first",
        1 + 2 * m,
        m * m,
        1 + 2 * m + m * m,
        Reduction::Min { sentinel: inf },
        move |h, msg| {
            own(h, msg);
            Ok(())
        },
        move |h, a, out| {
            out[..1 + 2 * m].copy_from_slice(h);
            let d = &mut out[1 + 2 * m..];
            own(h, d);
            min_into(d, a);
            Ok(())
        },
    )
}

/// Landmark-matrix flooding layer on `[ℓ, ids, dist, D]`.
pub fn landmark_matrix_mid_layer(m: usize, inf: f64) -> LayerProgram {
    let off = 1 + 2 * m;
    LayerProgram::new(
        "landmark-matrix-mid",
        off + m * m,
        m * m,
        off + m * m,
        Reduction::Min { sentinel: inf },
        move |h, msg| {
            msg.copy_from_slice(&h[off..]);
            Ok(())
        },
        move |h, a, out| {
            out.copy_from_slice(h);
            min_into(&mut out[off..], a);
            Ok(())
        },
    )
}

fn min_into(acc: &mut [f64], other: &[f64]) {
    for (x, &y) in acc.iter_mut().zip(other) {
        if y < *x {
            *x = y;
        }
    }
}

/// `budget` landmark-matrix layers (at least one).
pub fn landmark_matrix_program(m: usize, inf: f64, budget: usize) -> Vec<LayerProgram> {
    let mut out = vec![landmark_matrix_first_layer(m, inf)];
    out.extend(std::iter::repeat_with(|| landmark_matrix_mid_layer(m, inf)).take(budget.saturating_sub(1)));
    out
}

/// Runs landmark-matrix flooding from `[ℓ, ids, dist]` to a fixpoint.
pub fn run_landmark_matrix(g: &DirectedGraph, input: &Matrix, m: usize, inf: f64) -> Result<(Matrix, usize)> {
    let first = landmark_matrix_first_layer(m, inf);
    let mid = landmark_matrix_mid_layer(m, inf);
    let state = step(g, input, &first, 1)?;
    iterate_to_fixpoint(g, state, &mid, propagation_budget(g.node_count()))
}

/// Landmark shortest-path lengths: `per_node[(v, i)]` from `u_i` to `v`,
/// and the `m × m` block `landmark_matrix[(i, j)]` from `u_i` to `u_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceTable {
    pub per_node: Matrix,
    pub landmark_matrix: Matrix,
    /// Sentinel marking "no path".
    pub inf: f64,
}

impl DistanceTable {
    /// Extracts `D` from the landmark rows of `per_node`.
    pub fn from_per_node(per_node: Matrix, landmarks: &LandmarkSet, inf: f64) -> Result<Self> {
        let m = landmarks.len();
        if per_node.cols() != m {
            return Err(Error::ShapeMismatch(format!(
                "distance table has {} columns for {m} landmarks",
                per_node.cols()
            )));
        }
        let ids = landmarks.ids();
        let landmark_matrix = Matrix::from_fn(m, m, |i, j| per_node[(ids[j], i)]);
        Ok(Self {
            per_node,
            landmark_matrix,
            inf,
        })
    }

    /// Entries of `per_node` equal to the sentinel.
    pub fn inf_count(&self) -> usize {
        self.per_node.as_slice().iter().filter(|&&x| x >= self.inf).count()
    }

    /// `½(D + Dᵀ)` where both directions are finite, the finite one where
    /// only one is, and an error where neither is.
    pub fn symmetrized(&self, landmarks: &LandmarkSet) -> Result<Matrix> {
        symmetrize(&self.landmark_matrix, self.inf, landmarks)
    }
}

pub fn symmetrize(d: &Matrix, inf: f64, landmarks: &LandmarkSet) -> Result<Matrix> {
    let m = d.rows();
    let mut s = Matrix::zeros(m, m);
    for i in 0..m {
        for j in (i + 1)..m {
            let a = d[(i, j)];
            let b = d[(j, i)];
            let v = match (a < inf, b < inf) {
                (true, true) => 0.5 * (a + b),
                (true, false) => a,
                (false, true) => b,
                (false, false) => {
                    let ids = landmarks.ids();
                    return Err(Error::LandmarksUnreachable {
                        first: ids.get(i).copied().unwrap_or(i),
                        second: ids.get(j).copied().unwrap_or(j),
                    });
                }
            };
            s[(i, j)] = v;
            s[(j, i)] = v;
        }
    }
    Ok(s)
}

/// Nearest-landmark readout built once from the symmetrised `D`.
#[derive(Debug, Clone, PartialEq)]
pub struct FinalReadout {
    embedding: MdsEmbedding,
}

impl FinalReadout {
    pub fn new(symmetric_d: &Matrix, dim: usize) -> Result<Self> {
        Ok(Self {
            embedding: classical_mds(symmetric_d, dim)?,
        })
    }

    pub fn embedding(&self) -> &MdsEmbedding {
        &self.embedding
    }

    pub fn landmark_coords(&self) -> &Matrix {
        &self.embedding.coords
    }

    /// Landmark `i` gets MDS row `i`; other nodes get the row of
    /// `argmin_i dist[i]` (lowest index on ties).
    pub fn coordinate(&self, dist: &[f64], landmark: Option<usize>, inf: f64) -> std::result::Result<&[f64], &'static str> {
        let i = match landmark {
            Some(i) => i,
            None => nearest_landmark(dist, inf).ok_or(UNREACHABLE)?,
        };
        Ok(self.embedding.coords.row(i))
    }

    /// Coordinates for every node from its distance row.
    pub fn assign(&self, table: &DistanceTable, landmarks: &LandmarkSet) -> Result<Matrix> {
        let n = table.per_node.rows();
        let membership = landmarks.membership(n);
        let dim = self.embedding.coords.cols();
        let mut out = Matrix::zeros(n, dim);
        for v in 0..n {
            let c = self
                .coordinate(table.per_node.row(v), membership[v], table.inf)
                .map_err(|_| Error::Unreachable { node: v })?;
            out.row_mut(v).copy_from_slice(c);
        }
        Ok(out)
    }
}

/// `argmin_i dist[i]` over entries below the sentinel; lowest index on ties.
pub fn nearest_landmark(dist: &[f64], inf: f64) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &d) in dist.iter().enumerate() {
        if d < inf && best.is_none_or(|b| d < dist[b]) {
            best = Some(i);
        }
    }
    best
}

/// Single-node form of the readout: MDS of the symmetrised `D`, then the
/// landmark or nearest-landmark rule. Fails when a non-landmark has no
/// finite distance.
pub fn final_readout(d: &Matrix, dist: &[f64], landmark: Option<usize>, dim: usize, inf: f64) -> Result<Vec<f64>> {
    let readout = FinalReadout::new(d, dim)?;
    readout
        .coordinate(dist, landmark, inf)
        .map(<[f64]>::to_vec)
        .map_err(|r| Error::invalid(r))
}

/// Local layer `[ℓ, ids, dist, D] → coordinates` driven by a shared readout.
pub fn final_layer(readout: Arc<FinalReadout>, m: usize, inf: f64) -> LayerProgram {
    let dim = readout.landmark_coords().cols();
    LayerProgram::local("final-readout", 1 + 2 * m + m * m, dim, move |h, out| -> NodeResult {
        let landmark = one_hot_index(&h[1..1 + m]);
        let c = readout.coordinate(&h[1 + m..1 + 2 * m], landmark, inf)?;
        out.copy_from_slice(c);
        Ok(())
    })
}
