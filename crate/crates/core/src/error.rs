use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid MDP: {0}")]
    InvalidMdp(String),

    #[error("invalid policy: {0}")]
    InvalidPolicy(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("non-finite value encountered after {iteration} sweeps")]
    NumericFailure { iteration: usize },

    #[error("no convergence after {iterations} sweeps (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("unknown {kind} `{id}`")]
    UnknownId { kind: &'static str, id: String },

    #[error(
        "cart-pole calibration failed: optimal tabular policy averages {mean_return:.1} \
         steps (< {floor}); adjust the bin ranges"
    )]
    Calibration { mean_return: f64, floor: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
