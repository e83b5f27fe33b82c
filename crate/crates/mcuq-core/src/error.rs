use alloc::string::String;
use core::fmt;

/// Crate-wide error type.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Matrix dimensions do not match what the operation requires.
    DimensionMismatch { expected: (usize, usize), got: (usize, usize) },
    /// A matrix entry was NaN or infinite.
    NonFinite,
    /// Requested rank is outside `1..=min(rows, cols)`.
    RankOutOfRange { r: usize, max: usize },
    /// Columns expected to be orthonormal are not, within tolerance.
    NotOrthonormal { defect: f64 },
    /// A Gram matrix in the de-bias step is numerically singular.
    SingularGram { factor: &'static str },
    /// Gradient descent diverged (objective blew up or became non-finite).
    Divergence { iter: usize },
    /// No observed entries were supplied.
    EmptyObservations,
    /// Observation indices repeat or fall outside the grid.
    InvalidEntry { i: usize, j: usize, reason: &'static str },
    /// A configuration field failed validation.
    InvalidConfig { field: &'static str, message: String },
    /// A value was outside the domain a noise model requires.
    DomainViolation { what: &'static str },
    /// The requested subset of entries is empty.
    EmptySubset,
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DimensionMismatch { expected, got } => write!(
                f,
                "dimension mismatch: expected {}x{}, got {}x{}",
                expected.0, expected.1, got.0, got.1
            ),
            Error::NonFinite => write!(f, "non-finite value (NaN or Inf)"),
            Error::RankOutOfRange { r, max } => {
                write!(f, "rank {r} out of range (must be in 1..={max})")
            }
            Error::NotOrthonormal { defect } => {
                write!(f, "columns are not orthonormal (defect {defect:e})")
            }
            Error::SingularGram { factor } => {
                write!(f, "gram matrix of factor {factor} is numerically singular")
            }
            Error::Divergence { iter } => {
                write!(f, "gradient descent diverged at iteration {iter}")
            }
            Error::EmptyObservations => write!(f, "observation set is empty"),
            Error::InvalidEntry { i, j, reason } => {
                write!(f, "invalid observation entry ({i}, {j}): {reason}")
            }
            Error::InvalidConfig { field, message } => {
                write!(f, "invalid config field `{field}`: {message}")
            }
            Error::DomainViolation { what } => write!(f, "domain violation: {what}"),
            Error::EmptySubset => write!(f, "subset of entries is empty"),
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
