use num_complex::Complex64;
use thiserror::Error;

/// Errors produced by the analysis routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum IlcError {
    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("the (U, Kp) -> (A, B) transform is defined only for Ki = 0 (got Ki = {0})")]
    IntegralGainNotSupported(f64),

    #[error("evaluation at a pole: z = {0}")]
    Pole(Complex64),

    #[error("learning function with look-back taps cannot be evaluated at z = 0")]
    ZeroArgument,

    #[error("invalid learning taps: {0}")]
    InvalidTaps(String),

    #[error("unknown learning kind `{0}` (expected one of l1, l2back, l2ahead, l3sym, l3symhalf, l3ahead, l3back)")]
    UnknownKind(String),

    #[error("{kind} has no closed-form {what} region; use the numeric tests instead")]
    UnsupportedKind { kind: &'static str, what: &'static str },

    #[error("trial length n = {n} is too short for this learning function (need n >= {min})")]
    TrialTooShort { n: usize, min: usize },

    #[error("matrix must be square and non-empty (got {rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("eigenvalue iteration did not converge")]
    NoConvergence,

    #[error("initial vector has zero norm")]
    ZeroInitialVector,

    #[error("reports do not form a complete rectangular grid: {0}")]
    IncompleteGrid(String),

    #[error("invalid sweep configuration: {0}")]
    InvalidConfig(String),

    #[error("method comparison needs at least two populated methods")]
    NotEnoughMethods,
}

pub type Result<T> = std::result::Result<T, IlcError>;
