//! Sharpness-aware optimization toolkit.
//!
//! This crate implements a family of optimizers that descend not the raw
//! loss but the worst loss in a small neighborhood of the current
//! parameters — plain SGD, the Euclidean-ball rule (SAM), a
//! parameter-magnitude-scaled rule (ASAM), and an information-geometric
//! rule (Fisher SAM) whose neighborhood is an ellipsoid induced by the
//! Fisher information metric. Around them sit the pieces needed to study
//! the rules end to end:
//!
//! - [`model`]: the differentiable-model contract the optimizers drive,
//!   plus gradient-checking helpers;
//! - [`fisher`]: diagonal Fisher estimators, the anti-regularized
//!   inverse, and a batch-decomposition identity checker;
//! - [`optim`]: the probe rules and the step loop with momentum, weight
//!   decay, and cosine scheduling;
//! - [`toy2d`]: a two-parameter Gaussian landscape with one wide and one
//!   narrow basin, used to visualize which basin each rule selects;
//! - [`mlp`]: a small deterministic ReLU classifier with per-example
//!   gradients;
//! - [`bench`]: label-noise and parameter-perturbation robustness
//!   benchmarks over the classifier;
//! - [`vector`], [`rng`], [`error`]: shared numeric, randomness, and
//!   error plumbing.
//!
//! Determinism is a design constraint throughout: all floating-point
//! reductions run left to right, and all randomness flows through the
//! seeded [`rng::RandomSource`], so identical configurations produce
//! byte-identical outputs.

pub mod bench;
pub mod error;
pub mod fisher;
pub mod mlp;
pub mod model;
pub mod optim;
pub mod rng;
pub mod toy2d;
pub mod vector;

pub use error::{Error, Result};
