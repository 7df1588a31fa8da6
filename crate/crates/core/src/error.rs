use thiserror::Error;

/// Validation failures for the lattice model.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("dimension {0} outside supported range 1..=4")]
    Dimension(usize),
    #[error("p_pos has {pos} entries but p_neg has {neg}")]
    LengthMismatch { pos: usize, neg: usize },
    #[error("p({sign}e_{axis}) = {value} must lie strictly inside (0, 1)")]
    Probability { axis: usize, sign: char, value: f64 },
    #[error("jump probabilities sum to {0}, expected 1 within 1e-12")]
    Sum(f64),
    #[error("empty box {0}")]
    EmptyBox(String),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("capacity exceeded: {what} needs {requested}, limit is {limit}")]
    Capacity { what: &'static str, requested: u64, limit: u64 },
    #[error("truncation error {target:e} unreachable with radius <= {max_radius}")]
    TruncationUnreachable { target: f64, max_radius: i64 },
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("event references unknown particle {0}")]
    UnknownParticle(String),
    #[error("no genealogical path: {0}")]
    NoPath(String),
    #[error("invalid path encoding: {0}")]
    Encoding(String),
    #[error("sprinkling schedule degenerate for T = {horizon}: need T >= {min_horizon}")]
    DegenerateSchedule { horizon: f64, min_horizon: f64 },
    #[error("scale L_{k} overflows 128-bit integers")]
    ScaleOverflow { k: usize },
    #[error("density rho_{k} = {rho} exceeds L_{prev}^2 = {bound}")]
    DensityTooLarge { k: usize, prev: usize, rho: f64, bound: f64 },
    #[error("window too small: {0}")]
    WindowTooSmall(String),
    #[error("kernel table needs {cells} cells over budget {budget}; try radius <= {suggested_radius}")]
    KernelBudget { cells: u64, budget: u64, suggested_radius: i64 },
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter { name, reason: reason.into() }
}
