use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("time {time} is not a multiple of the grid step {dt}")]
    NotGridAligned { time: f64, dt: f64 },
    #[error("window [{requested_min}, {requested_max}] exceeds materialized window [{available_min}, {available_max}]")]
    WindowViolation {
        requested_min: f64,
        requested_max: f64,
        available_min: f64,
        available_max: f64,
    },
    #[error("non-finite state at t = {time}: {detail}")]
    NonFinite { time: f64, detail: String },
    #[error("pullback did not converge: gap {gap:e} at depth {depth} (tolerance {tol:e})")]
    NonConvergence { depth: f64, gap: f64, tol: f64 },
    #[error("singular generator matrix (index {0})")]
    SingularMatrix(usize),
    #[error("fixed point covers [{available_min}, {available_max}], need [{required_min}, {required_max}]")]
    MissingCoverage {
        required_min: f64,
        required_max: f64,
        available_min: f64,
        available_max: f64,
    },
    #[error("identity check failed: {0}")]
    IdentityViolation(String),
    #[error("parameters outside the conjugacy window: E[a^2] = {ex2}, delta = E[a^2]/4 - alpha = {delta}")]
    OutsideDeltaWindow { ex2: f64, delta: f64 },
    #[error("root of the radius equation is not bracketed inside the available window: {0}")]
    NonBracketing(String),
    #[error("no root at x = {x}: int |psi| over the backward lifetime from {reach} is {integral} < {level}")]
    RootMissing { x: f64, reach: f64, integral: f64, level: f64 },
    #[error("tail bound needs horizon {needed}, window ends at {available}")]
    TailUnachievable { needed: f64, available: f64 },
    #[error("construction failed: {0}")]
    Construction(String),
    #[error("config: {0}")]
    Config(String),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Json(#[from] serde_json::Error),
}
