use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("denominator vanishes on the unit circle at omega = {omega}")]
    Domain { omega: f64 },

    #[error("winding number inconclusive: |a(e^jw)| = {magnitude:e} at omega = {omega}")]
    InconclusiveWinding { omega: f64, magnitude: f64 },

    #[error("plant is not stable (denominator has roots on or outside the unit circle)")]
    UnstablePlant,

    #[error("matrix is not doubly hyperdominant")]
    NotHyperdominant,

    #[error("matrix is not doubly hyperdominant with zero excess")]
    NotZeroExcess,

    #[error("Birkhoff decomposition stalled with residual mass {residual:e}")]
    DecompositionStalled { residual: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("entry ({row}, {col}) has no in-band congruent column for bandwidth {band}")]
    BandInfeasible { row: usize, col: usize, band: usize },

    #[error("enumeration exceeded the budget of {cap} permutations")]
    BudgetExceeded { cap: usize },

    #[error("periodic operator fails validation: {0}")]
    InvalidOperator(String),

    #[error("sequence pair is not similarly ordered")]
    NotSimilarlyOrdered,

    #[error("perturbation step {delta} too large; admissible steps are below {max_delta}")]
    DeltaTooLarge { delta: f64, max_delta: f64 },

    #[error("horizon {horizon} is not a multiple of the period {period}")]
    HorizonNotMultipleOfPeriod { horizon: usize, period: usize },

    #[error("no signal found with every constraint form strictly positive")]
    SlaterViolated,

    #[error("simplex iteration guard tripped after {iterations} pivots")]
    LpNumericalFailure { iterations: usize },

    #[error("well-posedness cannot be verified: g0 = {g0}, slope bound = {slope}")]
    WellPosednessUnverifiable { g0: f64, slope: f64 },

    #[error("bisection failed to bracket the loop equation at step {step}")]
    BisectionFailure { step: usize },

    #[error("eigen solver did not converge in {sweeps} sweeps")]
    EigenNotConverged { sweeps: usize },
}
