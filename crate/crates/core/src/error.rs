use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found} ({context})")]
    DimensionMismatch {
        expected: usize,
        found: usize,
        context: &'static str,
    },

    #[error("invalid model:\n{0}")]
    InvalidModel(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("trace drift {drift:.3e} at t = {time} exceeds {threshold:.1e}; reduce the step size")]
    StepTooLarge {
        time: f64,
        drift: f64,
        threshold: f64,
    },

    #[error("jump probability per step {dp:.3e} at t = {time} exceeds {limit}; reduce dt")]
    JumpProbabilityTooLarge { time: f64, dp: f64, limit: f64 },

    #[error("jump into channel {channel} has zero amplitude (rate is zero)")]
    ForbiddenJump { channel: usize },

    #[error("integrand jump factor 1 + f = {value} is not positive at t = {time}")]
    InadmissibleIntegrand { time: f64, value: f64 },

    #[error("jump-time root search failed near t = {0}")]
    Bisection(f64),

    #[error("time {time} is not on the {grid} grid")]
    GridMismatch { time: f64, grid: &'static str },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed document: {0}")]
    Format(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code used by the command-line driver.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io(_) | Error::Format(_) => 2,
            Error::NonFinite(_)
            | Error::StepTooLarge { .. }
            | Error::JumpProbabilityTooLarge { .. }
            | Error::Bisection(_)
            | Error::ForbiddenJump { .. } => 3,
            _ => 1,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
