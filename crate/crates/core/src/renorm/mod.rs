//! Multiscale objects: scale, velocity and density ladders, the box events,
//! estimators for the elementary bad events, and the recursion report.

pub mod estimate;
pub mod ladder;
pub mod recursion;

pub use estimate::*;
pub use ladder::{velocity, RenormBox, ScaleLadder};
pub use recursion::{recursion_report, RecursionReport};
