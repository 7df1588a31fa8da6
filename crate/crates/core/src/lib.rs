//! Simulation of infection spreading among independent biased random walks on
//! `Z^d`, with couplings, renormalization estimators and exact oracles.

pub mod coupling;
pub mod engine;
pub mod error;
pub mod harness;
pub mod infection;
pub mod lattice;
pub mod renorm;
pub mod stats;

pub use error::{Error, ModelError, Result};
