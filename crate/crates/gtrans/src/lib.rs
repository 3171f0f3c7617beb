//! Transfer learning for edge-probability (graphon) estimation.
//!
//! A small target graph rarely carries enough signal for accurate graphon
//! estimation. When a larger, structurally related source graph is available,
//! its smoothed edge-probability estimate can be aligned to the target via
//! Gromov-Wasserstein optimal transport and projected into the target's node
//! space. An adaptive debiasing step guards against negative transfer when the
//! two domains turn out to be dissimilar.
//!
//! The crate is organized around that pipeline:
//!
//! - [`graphon`]: closed-form graphon functions, latent sampling, probability
//!   matrices, Bernoulli adjacency sampling, and perturbation schemes.
//! - [`smoothing`]: the neighborhood-smoothing estimator (for binary and
//!   real-valued symmetric inputs) and the USVT baseline.
//! - [`ot`]: exact and entropic Gromov-Wasserstein solvers built on a
//!   network-simplex linear OT solver and log-domain Sinkhorn iterations.
//! - [`transfer`]: the end-to-end estimator (initial estimation, alignment,
//!   projection, re-smoothing, distance gate, debiasing).
//! - [`eval`]: the MSE metric, simulation campaigns, masked link prediction
//!   with AUC scoring, low-rank completion, and cross-validated threshold
//!   selection.
//! - [`io`]: dense CSV matrices and undirected edge lists.

pub mod error;
pub mod eval;
pub mod graphon;
pub mod io;
pub mod matrix;
pub mod ot;
pub mod rng;
pub mod smoothing;
pub mod transfer;

pub use error::{Error, Result};
pub use graphon::{AdjMatrix, GraphonSpec, LatentPositions, Perturbation, ProbMatrix};
pub use ot::{Coupling, GwSolverOptions, Marginals, SolverKind};
pub use smoothing::SmootherConfig;
pub use transfer::{TransferConfig, TransferResult, Variant};
