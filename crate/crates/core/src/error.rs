use thiserror::Error;

pub type Result<T, E = GameError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum GameError {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("invalid control set: {0}")]
    InvalidControls(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid scheme parameters: {0}")]
    InvalidScheme(String),

    #[error("grid too large: {0}; use a coarser grid")]
    GridTooLarge(String),

    #[error("point {point:?} lies outside the grid box")]
    OutsideGrid { point: Vec<f64> },

    #[error("value iteration did not converge in {iterations} sweeps (last residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("invalid control signal: {0}")]
    InvalidSignal(String),

    #[error("no inward control at boundary point {point:?} (boundary controllability fails there)")]
    NoInwardControl { point: Vec<f64> },

    #[error("controllability margin zeta = {zeta} does not exceed coupling bound c_tilde = {c_tilde}")]
    MarginTooSmall { zeta: f64, c_tilde: f64 },

    #[error("instance is not node-exact: {0}")]
    NotExactifiable(String),

    #[error("invalid strategy: {0}")]
    InvalidStrategy(String),

    #[error("simulation error: {0}")]
    Simulation(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
