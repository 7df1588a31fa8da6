//! Couplings between systems at different densities.

pub mod decouple;
pub mod monotone;
pub mod sprinkle;

pub use decouple::*;
pub use monotone::{run_monotone, MonotoneOutcome};
pub use sprinkle::*;
