//! Quality-diversity search over neural-network policies for a planar
//! unicycle robot.
//!
//! The crate provides an unstructured novelty archive with size control,
//! polynomial mutation, PCA and autoencoder descriptor learners, the AURORA
//! loop that alternates QD iterations with encoder training, hand-coded and
//! mean-stream baselines, and coverage/entropy analytics over finished
//! archives.

pub mod config;
pub mod container;
pub mod dimred;
pub mod env;
mod error;
pub mod genotype;
pub mod metrics;
pub mod rng;
pub mod runner;
pub mod snapshot;
pub mod variation;

pub use config::{EncoderConfig, EncoderKind, ExperimentConfig, Task, Variant};
pub use container::{AddOutcome, Container, ContainerEntry};
pub use env::{simulate_episode, Evaluation, Trajectory};
pub use error::{Error, Result};
pub use genotype::{controller_param_count, Genotype};
pub use rng::{Purpose, RngState};
pub use runner::{run, RunState};
