use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid assignment: {0}")]
    InvalidAssignment(String),

    #[error("unsupported structure: {0}")]
    UnsupportedStructure(String),

    #[error("degenerate conditional for factor {factor}: all unnormalized weights are zero")]
    DegenerateConditional { factor: usize },

    #[error("quadrature order {0} out of range (1..=64)")]
    QuadratureOrder(usize),

    #[error("non-finite integrand value {value} at quadrature node {node}")]
    NonFiniteIntegrand { node: usize, value: f64 },

    #[error("estimator {estimator} does not support {reason}")]
    UnsupportedFamily { estimator: &'static str, reason: String },

    #[error("dimension mismatch: model has {model} coordinates, target expects {target}")]
    DimensionMismatch { model: usize, target: usize },

    #[error("state space too large for enumeration: {states} joint states")]
    StateSpaceTooLarge { states: u128 },

    #[error("no closed-form oracle for this model/target pair")]
    OracleUnavailable,

    #[error("non-finite gradient at iteration {iteration}, parameter {parameter}")]
    Divergence { iteration: usize, parameter: usize },

    #[error("parameter index {0} is not tracked")]
    UntrackedIndex(usize),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}
