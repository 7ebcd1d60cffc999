use thiserror::Error;

/// Errors raised by the certification, characterization and simulation routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("probability out of range: {0}")]
    ProbabilityOutOfRange(f64),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("dimension {0} exceeds the supported maximum of {max}", max = crate::numerics::MAX_DIM)]
    DimensionTooLarge(usize),

    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("matrix is not Hermitian (deviation {0:e})")]
    NotHermitian(f64),

    #[error("not a density operator: {0}")]
    NotDensity(String),

    #[error("not a projector (deviation {0:e})")]
    NotProjector(f64),

    #[error("matrix is not positive semidefinite (min eigenvalue {0:e})")]
    NotPsd(f64),

    #[error("no bracket: f(lo) = {f_lo}, f(hi) = {f_hi}")]
    NoBracket { f_lo: f64, f_hi: f64 },

    #[error("empty subspace: projector has zero rank")]
    EmptySubspace,

    #[error("invalid POVM element: eigenvalues must lie in [0, 1] (found {0})")]
    InvalidPovm(f64),

    #[error("fully blinded detectors: both detection efficiencies are zero")]
    FullyBlinded,

    #[error("inconsistent statistics: observed data violate the phase-error inequality at its maximum ({rhs_max} < {target})")]
    InconsistentStatistics { rhs_max: f64, target: f64 },

    #[error("no sifted key: q_z = 0")]
    NoSiftedKey,

    #[error("insufficient statistics: {0}")]
    InsufficientStatistics(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid sweep: {0}")]
    InvalidSweep(String),
}

pub type Result<T> = std::result::Result<T, Error>;
