use thiserror::Error;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("linear solve failed: {0}")]
    Singular(String),

    #[error("cost constraint infeasible: {0}")]
    CostInfeasible(String),

    #[error("occupancy program infeasible under the estimated model: {0}")]
    SupportInfeasible(String),

    #[error("solver did not converge after {iterations} iterations (flow residual {flow_residual:.3e}, kkt residual {kkt_residual:.3e})")]
    NonConvergence {
        iterations: usize,
        flow_residual: f64,
        kkt_residual: f64,
    },

    #[error("zero behavior probability for action {action} in state {state} (trajectory {trajectory}, step {step})")]
    ZeroBehaviorProbability {
        trajectory: usize,
        step: usize,
        state: usize,
        action: usize,
    },

    #[error("empty cluster {0}")]
    EmptyCluster(usize),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
