//! Genetic architecture search over variational quantum circuits embedded in
//! hybrid quantum-classical autoencoders.
//!
//! The crate is organised bottom-up:
//!
//! * [`simulator`] exact statevector simulation with a minimal gate set,
//! * [`circuit`] circuit genomes, execution and parameter-shift gradients,
//! * [`nn`] dense layers, the hybrid autoencoder, loss, backprop and Adam,
//! * [`evolve`] the elitist genetic algorithm over circuit genomes,
//! * [`data`] IDX image loading, splitting and batching,
//! * [`runner`] configuration, orchestration, metrics, checkpoints and image dumps.

pub mod circuit;
pub mod data;
pub mod error;
pub mod evolve;
mod json_float;
pub mod nn;
pub mod rng;
pub mod runner;
pub mod simulator;

pub use error::{Error, Result};
