use thiserror::Error;

/// Errors produced by the simulation and verification engine.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("coordinate {axis} = {value} of {what} is not aligned to the level-{level} dyadic grid")]
    Alignment {
        what: String,
        axis: usize,
        value: f64,
        level: u32,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("set has zero measure: {0}")]
    DegenerateSet(String),

    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("quadrature did not converge: residual estimate {residual:e}")]
    Quadrature { residual: f64 },

    #[error("characteristic-function inversion failed: mass {mass:e} at node {node} (grid too coarse)")]
    Inversion { node: i64, mass: f64 },

    #[error("incompatible grids: step {left} vs {right}")]
    GridMismatch { left: f64, right: f64 },

    #[error("{0} outside the admissible range")]
    Range(String),

    #[error("semilattice not consistently ordered: element {later} is contained in element {earlier}")]
    Ordering { earlier: usize, later: usize },

    #[error("semilattice not closed under intersection: elements {0} and {1}")]
    NotIntersectionClosed(usize, usize),

    #[error("mark set {0} touches the origin")]
    UnsupportedSet(String),

    #[error("epsilon {requested} is below the jump truncation {truncation}")]
    UnsupportedRefinement { requested: f64, truncation: f64 },

    #[error("too few samples: need at least {needed}, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(field: &str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        field: field.to_string(),
        reason: reason.into(),
    }
}
