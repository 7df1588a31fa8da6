//! Exact and Monte Carlo oracles: Poisson tails, walk deviations, transition
//! kernels, meeting probabilities and interval estimates.

pub mod ci;
pub mod kernel;
pub mod mc;
pub mod poisson;
pub mod walk;

pub use ci::{chi_square, chi_square_poisson, correlation, two_proportion_z, wilson_ci, z_for_level, ChiSquareStat, Interval};
pub use poisson::{poisson_pmf, poisson_tail, poisson_upper_tail, TailReport};
pub use kernel::{
    decomposed_kernel, exact_kernel, exact_kernel_with_budget, floor_spread, kernel_floor_scan, meeting_floor_scan,
    meeting_probability, FloorPoint, KernelTable,
};
pub use mc::{kernel_mc, meeting_mc, McPoint, MeetingCheck};
pub use walk::{
    deviation_tail, linear_fit, log_slope, mushroom_tail, symmetric_exit_probability, walk_moments, DeviationPoint, LinearFit,
    MushroomReport, WalkMoments,
};
