use thiserror::Error;

/// Errors produced anywhere in the simulation core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("equivalent inertia is zero")]
    ZeroInertia,
    #[error("integration produced a non-finite plant state")]
    NonFiniteState,
    #[error("no stiffness: K_H + K_A must be positive for a static equilibrium")]
    NoStiffness,
    #[error("I - ts*alpha is singular (ts*alpha_{channel} = 1)")]
    SingularDiscretization { channel: &'static str },
    #[error("beta_tilde has a zero {channel} entry; impedance target not reachable")]
    DegenerateBeta { channel: &'static str },
    #[error("prediction horizon must be at least one step")]
    HorizonZero,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("sequence length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("least-squares system could not be solved: {0}")]
    SingularSystem(String),
    #[error("controller history is missing: {0}")]
    HistoryMissing(&'static str),
    #[error("t = {t} is outside the schedule domain")]
    OutOfDomain { t: f64 },
    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },
    #[error("invalid configuration: {0}")]
    Validation(String),
    #[error("simulation failed at control step {step}: {source}")]
    Step { step: usize, source: Box<Error> },
    #[error("log is empty")]
    EmptyLog,
    #[error("runs do not share the same timing: {0}")]
    TimingMismatch(String),
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
