//! Recovery of hidden node coordinates from the structure of a geometric graph.
//!
//! A graph is assumed to be generated from latent points `z_v`: node `v` has an
//! arc to `u` whenever `‖z_v − z_u‖` is below a per-node threshold (a kNN graph
//! is the canonical example). Only the unweighted arcs are observed. The
//! recovery pipeline is:
//!
//! 1. estimate the random-walk stationary distribution (lazy power iteration),
//! 2. turn it into a per-node edge length `ℓ_v = κ·(d_v / (n · nπ_v))^{1/(d+2)}`,
//! 3. run shortest paths from `m` random landmarks,
//! 4. embed the landmarks with classical MDS,
//! 5. copy each non-landmark's coordinate from its nearest landmark.
//!
//! Every stage exists twice: as direct graph algorithms ([`pipeline`] with
//! [`pipeline::Engine::Direct`]) and as layer programs run by a generic
//! message-passing engine ([`message_passing`], [`programs`]). The two are
//! bit-for-bit equivalent, which the test suites check.

pub mod calibration;
pub mod error;
pub mod eval;
pub mod graph;
pub mod matrix;
pub mod message_passing;
pub mod numerics;
pub mod pipeline;
pub mod procrustes;
pub mod programs;
pub mod synthetic;

pub use calibration::KappaModel;
pub use error::{Error, Result};
pub use graph::DirectedGraph;
pub use matrix::{FeatureMatrix, Matrix};
pub use pipeline::{recover_features, Engine, RecoveryConfig};
pub use synthetic::LandmarkSet;
