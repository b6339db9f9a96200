//! Synchronous message-passing engine.
//!
//! One layer computes, for every node `v`,
//!
//! ```text
//! a_v = ⊕_{u ∈ 𝒩⁻(v)} msg(h_u)        (⊕ ∈ {sum, min, max})
//! h'_v = update(h_v, a_v)
//! ```
//!
//! where `𝒩⁻(v)` are the tails of arcs entering `v`. The aggregation is a
//! per-sender message followed by a commutative reduction, so the result is a
//! function of the neighbour multiset only. Neighbours are visited in
//! ascending id order, which fixes floating-point summation order.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::DirectedGraph;
use crate::matrix::Matrix;

/// Failure reason reported by a message or update function.
pub type NodeResult = std::result::Result<(), &'static str>;

type MessageFn = dyn Fn(&[f64], &mut [f64]) -> NodeResult + Send + Sync;
type UpdateFn = dyn Fn(&[f64], &[f64], &mut [f64]) -> NodeResult + Send + Sync;

/// Commutative reduction applied to neighbour messages.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Reduction {
    Sum,
    /// Element-wise minimum. A node without in-neighbours receives the
    /// sentinel in every slot.
    Min { sentinel: f64 },
    /// Element-wise maximum with the given identity.
    Max { sentinel: f64 },
}

impl Reduction {
    fn identity(self) -> f64 {
        match self {
            Reduction::Sum => 0.0,
            Reduction::Min { sentinel } | Reduction::Max { sentinel } => sentinel,
        }
    }

    #[inline]
    fn fold(self, acc: &mut [f64], msg: &[f64]) {
        match self {
            Reduction::Sum => acc.iter_mut().zip(msg).for_each(|(a, m)| *a += m),
            Reduction::Min { .. } => acc.iter_mut().zip(msg).for_each(|(a, &m)| {
                if m < *a {
                    *a = m;
                }
            }),
            Reduction::Max { .. } => acc.iter_mut().zip(msg).for_each(|(a, &m)| {
                if m > *a {
                    *a = m;
                }
            }),
        }
    }
}

/// One aggregation/update pair with declared state widths.
#[derive(Clone)]
pub struct LayerProgram {
    name: String,
    input_width: usize,
    message_width: usize,
    output_width: usize,
    reduction: Reduction,
    message: Arc<MessageFn>,
    update: Arc<UpdateFn>,
}

impl LayerProgram {
    /// `message(h_u, out)` fills a `message_width` slice from a sender's
    /// state; `update(h_v, a_v, out)` fills the `output_width` new state.
    pub fn new<M, U>(
        name: impl Into<String>,
        input_width: usize,
        message_width: usize,
        output_width: usize,
        reduction: Reduction,
        message: M,
        update: U,
    ) -> Self
    where
        M: Fn(&[f64], &mut [f64]) -> NodeResult + Send + Sync + 'static,
        U: Fn(&[f64], &[f64], &mut [f64]) -> NodeResult + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            input_width,
            message_width,
            output_width,
            reduction,
            message: Arc::new(message),
            update: Arc::new(update),
        }
    }

    /// A layer that ignores its neighbours.
    pub fn local<U>(name: impl Into<String>, input_width: usize, output_width: usize, update: U) -> Self
    where
        U: Fn(&[f64], &mut [f64]) -> NodeResult + Send + Sync + 'static,
    {
        Self::new(
            name,
            input_width,
            0,
            output_width,
            Reduction::Sum,
            |_, _| Ok(()),
            move |h, _, out| update(h, out),
        )
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn input_width(&self) -> usize {
        self.input_width
    }

    pub fn message_width(&self) -> usize {
        self.message_width
    }

    pub fn output_width(&self) -> usize {
        self.output_width
    }

    pub fn reduction(&self) -> Reduction {
        self.reduction
    }

    /// Aggregates an explicit list of neighbour states. Exposed so the
    /// multiset invariance of a layer can be tested directly.
    pub fn aggregate<'a, I>(&self, neighbors: I) -> std::result::Result<Vec<f64>, &'static str>
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        let mut acc = vec![self.reduction.identity(); self.message_width];
        let mut msg = vec![0.0; self.message_width];
        for h in neighbors {
            (self.message)(h, &mut msg)?;
            self.reduction.fold(&mut acc, &msg);
        }
        Ok(acc)
    }
}

impl fmt::Debug for LayerProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LayerProgram")
            .field("name", &self.name)
            .field("input_width", &self.input_width)
            .field("message_width", &self.message_width)
            .field("output_width", &self.output_width)
            .field("reduction", &self.reduction)
            .finish()
    }
}

/// Checks that `state` can feed `layers` in sequence.
pub fn check_arities(n: usize, state: &Matrix, layers: &[LayerProgram]) -> Result<()> {
    if state.rows() != n {
        return Err(Error::ShapeMismatch(format!(
            "initial state has {} rows for {n} nodes",
            state.rows()
        )));
    }
    let mut width = state.cols();
    for (l, layer) in layers.iter().enumerate() {
        if layer.input_width != width {
            return Err(Error::ArityMismatch {
                layer: l + 1,
                detail: format!(
                    "'{}' expects width {}, previous state has width {width}",
                    layer.name, layer.input_width
                ),
            });
        }
        width = layer.output_width;
    }
    Ok(())
}

/// Runs `layers` from the initial state `x0` and returns `h^{(L)}`.
/// Zero layers return `x0` unchanged.
pub fn run_layers(g: &DirectedGraph, x0: &Matrix, layers: &[LayerProgram]) -> Result<Matrix> {
    check_arities(g.node_count(), x0, layers)?;
    let mut state = x0.clone();
    for (l, layer) in layers.iter().enumerate() {
        state = step_unchecked(g, &state, layer, l + 1)?;
    }
    Ok(state)
}

/// Executes a single layer. `index` is reported in execution errors.
pub fn step(g: &DirectedGraph, state: &Matrix, layer: &LayerProgram, index: usize) -> Result<Matrix> {
    check_arities(g.node_count(), state, std::slice::from_ref(layer)).map_err(|e| match e {
        Error::ArityMismatch { detail, .. } => Error::ArityMismatch { layer: index, detail },
        other => other,
    })?;
    step_unchecked(g, state, layer, index)
}

fn step_unchecked(g: &DirectedGraph, state: &Matrix, layer: &LayerProgram, index: usize) -> Result<Matrix> {
    let n = g.node_count();
    let mw = layer.message_width;
    let exec_err = |node: usize, reason: &'static str| Error::Execution {
        layer: index,
        node,
        reason,
    };

    // Messages depend only on the sender, so compute each once.
    let mut messages = Matrix::zeros(n, mw);
    if mw > 0 {
        messages
            .as_mut_slice()
            .par_chunks_mut(mw)
            .enumerate()
            .try_for_each(|(u, out)| (layer.message)(state.row(u), out).map_err(|r| exec_err(u, r)))?;
    }

    let ow = layer.output_width;
    let mut next = Matrix::zeros(n, ow);
    let identity = layer.reduction.identity();
    next.as_mut_slice()
        .par_chunks_mut(ow.max(1))
        .take(n)
        .enumerate()
        .try_for_each_init(
            || vec![0.0; mw],
            |acc, (v, out)| {
                acc.iter_mut().for_each(|a| *a = identity);
                for &u in g.in_neighbors(v) {
                    layer.reduction.fold(acc, messages.row(u));
                }
                let out = &mut out[..ow];
                (layer.update)(state.row(v), acc, out).map_err(|r| exec_err(v, r))
            },
        )?;
    Ok(next)
}
