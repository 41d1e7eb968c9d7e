use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("lambda = {lambda} is not in the resolvent set (requires lambda > -{gamma})")]
    OutOfResolventSet { lambda: f64, gamma: f64 },

    /// The semi-implicit boundary system cannot be solved at this age step.
    #[error("step size too large: boundary self-coupling {coupling:.6} >= 1 at da = {da}; try da <= {suggested_da}")]
    StepSize { coupling: f64, da: f64, suggested_da: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("no characteristic root: {reason} (g(lo={lo}) = {g_lo}, g(hi={hi}) = {g_hi})")]
    NoRoot {
        reason: String,
        lo: f64,
        hi: f64,
        g_lo: f64,
        g_hi: f64,
    },

    #[error("fixed-point iteration diverging at iteration {iteration} (window starting at step {window_start}); last gaps {gaps:?}")]
    Divergence {
        iteration: usize,
        window_start: usize,
        gaps: Vec<f64>,
    },

    #[error("undefined: {0}")]
    Undefined(String),

    #[error("solver failed at step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("config error at {pointer}: {message}")]
    Config { pointer: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn config(pointer: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            pointer: pointer.into(),
            message: message.into(),
        }
    }

    /// Step index carried by a solver failure, if any.
    pub fn step(&self) -> Option<usize> {
        match self {
            Error::AtStep { step, .. } => Some(*step),
            _ => None,
        }
    }
}
