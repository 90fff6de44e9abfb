use thiserror::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("measure has no atom with positive weight")]
    EmptyMeasure,

    #[error("negative weight {weight} at atom {index}")]
    NegativeWeight { index: usize, weight: f64 },

    #[error("non-finite weight at atom {index}")]
    NonFiniteWeight { index: usize },

    #[error("non-finite coordinate at atom {index}")]
    NonFiniteCoordinate { index: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("length mismatch: {points} points but {weights} weights")]
    LengthMismatch { points: usize, weights: usize },

    #[error("image has no pixel with positive intensity")]
    AllZeroImage,

    #[error("grid of {height}x{width} does not match {len} values")]
    InvalidGrid {
        height: usize,
        width: usize,
        len: usize,
    },

    #[error("invalid box domain: {0}")]
    InvalidDomain(&'static str),

    #[error("lambda must be positive and finite, got {0}")]
    NonPositiveLambda(f64),

    #[error("transport solver failure: {0}")]
    SolverFailure(&'static str),

    #[error("at least two points are required")]
    FewerThanTwoPoints,

    #[error("plan cost does not match the requested cost")]
    CostMismatch,

    #[error("candidate grid is empty")]
    EmptyGrid,

    #[error("problem size {size} exceeds oracle budget {limit}")]
    BudgetExceeded { size: usize, limit: usize },

    #[error("measure grew to {atoms} atoms, above the cap of {limit}")]
    AtomBudgetExceeded { atoms: usize, limit: usize },

    #[error("schedule has no stages")]
    EmptySchedule,
}
