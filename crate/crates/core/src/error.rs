use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("operator dimension {0} is below the minimum of 2")]
    DimensionTooSmall(usize),

    #[error("matrix is not Hermitian: max |X - X^dag| = {deviation:e} exceeds {tolerance:e}")]
    NotHermitian { deviation: f64, tolerance: f64 },

    #[error("state is not normalized: norm = {norm}")]
    NotNormalized { norm: f64 },

    #[error("operator is not traceless: |Tr X|/D = {trace:e}")]
    NotTraceless { trace: f64 },

    #[error("basis does not span the operator: residual norm {residual:e}")]
    SpanningFailure { residual: f64 },

    #[error("basis is not orthonormal: max deviation {deviation:e}")]
    NotOrthonormal { deviation: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite entries in {0}")]
    NonFinite(&'static str),

    #[error("degenerate levels {levels:?} at t = {time}: gap {gap:e} below {threshold:e}")]
    Degeneracy {
        time: f64,
        levels: (usize, usize),
        gap: f64,
        threshold: f64,
    },

    #[error("grid too coarse near t = {time}: eigenvector overlap {overlap} after refinement")]
    GridTooCoarse { time: f64, overlap: f64 },

    #[error("gauge discontinuity at grid index {index}: overlap {overlap}")]
    GaugeDiscontinuity { index: usize, overlap: f64 },

    #[error("nested commutator of order {order} has norm {norm:e}; rescale H and dH/dt")]
    Overflow { order: usize, norm: f64 },

    #[error("ill-conditioned amplitude near x = {x}: r = {amplitude:e} carries flux {flux:e}")]
    IllConditioned { x: f64, amplitude: f64, flux: f64 },

    #[error("inconsistent linear system at t = {time}: residual {residual:e}")]
    InconsistentSystem { time: f64, residual: f64 },

    #[error("extended precision did not converge up to {bits} bits (change {change:e})")]
    PrecisionExhausted { bits: usize, change: f64 },
}
