use thiserror::Error;

/// Errors raised by the modeling, inference and simulation routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("descriptor matrix E is singular")]
    SingularDescriptor,

    #[error("(sE - A) is singular at s = {re} + {im}j")]
    SingularResolvent { re: f64, im: f64 },

    #[error("quadratic operator is not symmetric (max deviation {0:e})")]
    NotSymmetric(f64),

    #[error("duplicate sample point {0}")]
    DuplicatePoint(String),

    #[error("left and right point sets intersect (mu_{i} = lambda_{j})")]
    ZeroDenominator { i: usize, j: usize },

    #[error("interpolation data is not closed under complex conjugation: {0}")]
    NotConjugateClosed(String),

    #[error("pencil is identically zero")]
    ZeroPencil,

    #[error("projected descriptor E is singular at order {0}")]
    SingularE(usize),

    #[error("least-squares matrix is identically zero")]
    ZeroMatrix,

    #[error("linearized third-harmonic system is degenerate (all rows vanish)")]
    DegenerateLinearization,

    #[error("harmonic probe did not reach steady state at omega = {omega} (relative energy change {change:e})")]
    NonConvergedTransient { omega: f64, change: f64 },

    #[error("acquisition failed at frequency index {index} (omega = {omega}): {source}")]
    Acquisition { index: usize, omega: f64, source: Box<Error> },

    #[error("simulation diverged at t = {0}")]
    UnstableSimulation(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("malformed file {path}: {msg}")]
    Format { path: String, msg: String },

    #[error("missing artifacts: {}", .0.join(", "))]
    MissingArtifacts(Vec<String>),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
