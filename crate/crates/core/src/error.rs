use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid alphabet: {0}")]
    InvalidAlphabet(String),
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("alphabet mismatch: {0}")]
    AlphabetMismatch(String),
    #[error("sensitive value {s} has zero marginal probability")]
    DegenerateMarginal { s: usize },
    #[error("argument outside domain: {0}")]
    InvalidDomain(String),
    #[error("pair is not in the projected uncertainty set: {0}")]
    LiftingInfeasible(String),
    #[error("inner minimization did not converge (best bound {best_bound})")]
    ConvergenceFailure { best_bound: f64 },
    #[error("solver failure: {0}")]
    SolverFailure(String),
    #[error("solver reported the problem infeasible")]
    InfeasibleReported,
    #[error("mechanism repair of {adjustment:e} exceeds the allowed {limit:e}")]
    ExcessiveRepair { adjustment: f64, limit: f64 },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
