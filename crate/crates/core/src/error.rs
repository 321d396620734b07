use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not Hermitian (largest asymmetry {residual:e})")]
    NotHermitian { residual: f64 },

    #[error("degenerate spectrum: eigenvalues {index} and {next} differ by only {gap:e}", next = index + 1)]
    DegenerateSpectrum { index: usize, gap: f64 },

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid measurement basis: {0}")]
    InvalidBasis(String),

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("invalid outcome sequence: {0}")]
    InvalidSequence(String),

    #[error("invalid waiting-time distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("exact enumeration needs {required} terms but the cap is {cap}")]
    EnumerationTooLarge { required: u128, cap: u128 },

    #[error(
        "moment of order {order} disagrees between routes: direct {direct:e}, \
         finite-difference {finite_difference:e}"
    )]
    MomentMismatch { order: u32, direct: f64, finite_difference: f64 },

    #[error("mean waiting time {target} is outside the support range [{min}, {max}]")]
    UnreachableMean { target: f64, min: f64, max: f64 },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }
}
