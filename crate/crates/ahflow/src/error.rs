use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("invalid metric at node {node}: {reason}")]
    Metric { node: usize, reason: String },

    #[error("profile must vanish at the origin, got w(0) = {0}")]
    Profile(f64),

    #[error("operands live on different grids")]
    GridMismatch,

    #[error("metric degenerated at node {node} (t = {t})")]
    Degenerate { node: usize, t: f64 },

    #[error("non-finite sample at node {node} (t = {t})")]
    BlowUp { node: usize, t: f64 },

    #[error("explicit step size {dt} exceeds the parabolic stability bound {bound}")]
    StepBound { dt: f64, bound: f64 },

    #[error("Ricci-DeTurck flow requires a reference metric")]
    MissingReference,

    #[error("gauge map lost monotonicity at t = {t}")]
    GaugeFailure { t: f64 },

    #[error("map is not strictly increasing")]
    NonMonotoneMap,

    #[error("resolvent is singular at lambda = {re} {im:+}i")]
    SingularResolvent { re: f64, im: f64 },

    #[error("eigenvalue computation failed: {0}")]
    Eigen(String),

    #[error("config error at line {line}: {msg}")]
    Config { line: usize, msg: String },

    #[error("fit failed: {0}")]
    Fit(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
