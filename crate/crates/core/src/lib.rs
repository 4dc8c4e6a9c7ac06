//! Kernel bandit simulations for studying how the alignment between an
//! agent's similarity kernel and a reference kernel affects how quickly and
//! how safely it learns a value function.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! at the crate root fix it to `f64`, which is what the campaign runner and
//! the command-line tool use.

// `!(x > 0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod agents;
pub mod alignment;
pub mod domain;
pub mod error;
pub mod io;
pub mod kernels;
pub mod scalar;
pub mod simulation;
pub mod theory;

pub use agents::{AgentConfig, AgentKind, Prediction};
pub use domain::{ActionSet, Provenance, SplitSpec, ValueScale};
pub use error::{Error, Result};
pub use scalar::Scalar;

pub type SimilarityMatrix = domain::SimilarityMatrix<f64>;
pub type ValueScores = domain::ValueScores<f64>;
pub type RunMetrics = domain::RunMetrics<f64>;
pub type Agent = agents::Agent<f64>;
pub type Config = agents::AgentConfig<f64>;
pub type EpisodeConfig = simulation::EpisodeConfig<f64>;
pub type Trajectory = simulation::Trajectory<f64>;
