use thiserror::Error;

/// Errors raised by the numerical routines of this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension {0} is not supported (expected 1, 2 or 3)")]
    Dimension(usize),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("point {0:?} lies outside the domain")]
    OutsideDomain(Vec<f64>),

    #[error("requested order {requested} exceeds the jet order {available}")]
    OrderExceeded { requested: usize, available: usize },

    #[error("shift index of order {shift} exceeds the remainder order {order}")]
    ShiftTooLarge { shift: usize, order: usize },

    #[error("scale {eps} is below the quadrature resolution 2h = {}", 2.0 * .h)]
    Unresolved { eps: f64, h: f64 },

    #[error("invalid mollifier: {0}")]
    Mollifier(String),

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("domain is empty: {0}")]
    EmptyDomain(String),

    #[error("cube with center {center:?} and side {side} holds {points} grid points, need at least {needed}")]
    UnresolvedCube {
        center: Vec<f64>,
        side: f64,
        points: usize,
        needed: usize,
    },

    #[error("least-squares system is rank deficient ({0})")]
    RankDeficient(String),

    #[error("partition of unity denominator {value:e} below 1e-8 at {point:?}")]
    PartitionDegenerate { point: Vec<f64>, value: f64 },

    #[error("need at least {needed} levels, got {got}")]
    TooFewLevels { needed: usize, got: usize },

    #[error("unknown catalog entry or malformed expression: {0}")]
    Catalog(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
