//! Self-organizing maps with a gradient-adapted neighborhood radius.
//!
//! The map's bandwidth is a model parameter trained jointly with the
//! weights by stochastic gradient descent on a per-sample variational
//! objective, instead of following a decreasing schedule. The crate also
//! carries the elasticity-controlled DSOM baseline, seeded observation
//! streams, evaluation metrics, and deterministic CSV/SVG/PGM emitters;
//! the `vdsom` binary drives the two experiment scenarios.

pub mod config;
pub mod data;
pub mod dsom;
pub mod elbo;
pub mod error;
pub mod gradcheck;
pub mod grid;
pub mod metrics;
pub mod optim;
pub mod render;
pub mod rng;
pub mod run;

pub use config::{AlgorithmKind, OptimizerKind, RunConfig};
pub use data::{ObservationStream, StreamSpec};
pub use dsom::{dsom_step, DsomState};
pub use elbo::{
    gradient, per_sample_objective, responsibilities, MapState, VdsomConfig, VdsomGradient,
};
pub use error::{Result, VdsomError};
pub use grid::{build_grid, Grid, GridSpec, Topology};
pub use metrics::{distortion, organization_score, TrainLog};
pub use optim::{adam_step, sgd_step, AdamState};
pub use rng::SplitMix64;
pub use run::{run_sweep, run_train, RunOutcome};
