use thiserror::Error;

/// Errors raised by the operator algebra, the dynamics and the probability
/// constructions built on top of them.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix or vector is empty")]
    Empty,

    #[error("non-finite entry encountered")]
    NonFinite,

    #[error("operator is not Hermitian (max |A - A^dag| = {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error("operator is not positive (min eigenvalue = {min_eigenvalue:e})")]
    NotPositive { min_eigenvalue: f64 },

    #[error("operator is not a projector (max |P^2 - P| = {deviation:e})")]
    NotProjector { deviation: f64 },

    #[error("operator is not an effect (spectrum [{min:e}, {max:e}] leaves [0, 1])")]
    NotEffect { min: f64, max: f64 },

    #[error("density operator trace is {trace}, expected 1")]
    BadTrace { trace: f64 },

    #[error("state vector has zero norm")]
    ZeroNorm,

    #[error("eigensolver failed to converge")]
    ConvergenceFailure,

    #[error("support of the operator is empty")]
    EmptySupport,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("dimension {dim} exceeds the configured maximum {max}")]
    DimensionOverflow { dim: usize, max: usize },

    #[error("time must be non-negative, got {0}")]
    NegativeTime(f64),

    #[error("conditioning event has probability {probability:e}, at or below threshold")]
    ZeroCondition { probability: f64 },

    #[error("quadrature budget of {max_evals} evaluations exhausted (error estimate {error_estimate:e})")]
    QuadratureBudgetExceeded { max_evals: usize, error_estimate: f64 },

    #[error("experiment has no outcome: <S> = {expectation:e}")]
    NoOutcome { expectation: f64 },

    #[error("state leaks outside the support of S by {leakage:e}")]
    SupportLeakage { leakage: f64 },

    #[error("invalid interval [{t1}, {t2}]")]
    BadInterval { t1: f64, t2: f64 },

    #[error("amplitudes are not normalized: |c_a|^2 + |c_b|^2 = {norm_sq}")]
    BadAmplitudes { norm_sq: f64 },

    #[error("initial state is not in the M = 0 subspace (weight {weight:e} in range(M))")]
    BadInitialState { weight: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
