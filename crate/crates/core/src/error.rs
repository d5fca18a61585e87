use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeomError {
    #[error("syntax error at byte {pos}: {msg}")]
    Syntax { pos: usize, msg: String },

    #[error("unknown identifier `{name}` at byte {pos}")]
    UnknownIdentifier { name: String, pos: usize },

    #[error("variable `{name}` out of range for dimension {dim}")]
    VariableOutOfRange { name: String, dim: usize },

    #[error("domain violation in `{expr}` at {point:?}: {reason}")]
    Domain {
        expr: String,
        point: Vec<f64>,
        reason: String,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("metric is degenerate at {point:?} (det = {det:e})")]
    DegenerateMetric { point: Vec<f64>, det: f64 },

    #[error("point {point:?} lies outside the chart domain")]
    OutsideDomain { point: Vec<f64> },

    #[error("invalid metric definition: {0}")]
    InvalidMetric(String),

    #[error("signature changes across the domain: {base:?} at base point, {found:?} at {point:?}")]
    SignatureChange {
        base: (usize, usize),
        found: (usize, usize),
        point: Vec<f64>,
    },

    #[error("metric has definite signature; no null vectors exist")]
    DefiniteSignature,

    #[error("field is not differentiable to order {needed} (have {have})")]
    InsufficientOrder { needed: usize, have: usize },

    #[error("step size underflow at t = {t}")]
    StepUnderflow { t: f64 },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),

    #[error("tensor is degenerate: {0}")]
    DegenerateTensor(String),

    #[error("model rejected: fit residual {residual:e} exceeds {tol:e}")]
    ModelRejected { residual: f64, tol: f64 },
}

pub type Result<T> = std::result::Result<T, GeomError>;
