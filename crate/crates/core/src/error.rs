use thiserror::Error;

/// Errors produced by the simulation and optimization pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("missing required field `{0}`")]
    MissingField(String),

    #[error("failed to parse {path}: {message}")]
    Parse { path: String, message: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate channel: beamforming needs a nonzero channel vector")]
    DegenerateChannel,

    #[error("degenerate scenario: {0}")]
    Degenerate(String),

    #[error("access mode violation: {0}")]
    Mode(String),

    #[error("infeasible scenario: {0}")]
    Infeasible(String),

    #[error("grid of {points} points exceeds the bound of {bound}")]
    GridTooLarge { points: f64, bound: f64 },

    #[error("objective is not finite at {point:?}")]
    NonFinite { point: Vec<f64> },

    #[error("local solve for cell {cell} stopped after {iterations} iterations (projected gradient {gradient:.3e})")]
    LocalNotConverged {
        cell: usize,
        iterations: usize,
        gradient: f64,
        last: Box<crate::admm::LocalPoint>,
        objective: f64,
    },

    #[error("ADMM diverged at iteration {iteration}: {detail}")]
    Divergence { iteration: usize, detail: String },

    #[error("inner solver failed at Dinkelbach iteration {iteration}: {source}")]
    Inner {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
