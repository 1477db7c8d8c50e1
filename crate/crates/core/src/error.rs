use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("matrix is not Hermitian (asymmetry {asymmetry:.3e} exceeds {tolerance:.3e})")]
    NotHermitian { asymmetry: f64, tolerance: f64 },

    #[error("invalid layout: {0}")]
    InvalidLayout(String),

    #[error("invalid permutation: {0}")]
    InvalidPermutation(String),

    #[error("subsystem index {index} out of range for layout with {len} systems")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    /// The conic engine stopped without meeting its tolerances.
    #[error(
        "conic solver failed after {iterations} iterations: {reason} \
         (primal residual {primal_residual:.2e}, dual residual {dual_residual:.2e}, \
         gap {gap:.2e}, bounds [{lower:.9}, {upper:.9}])"
    )]
    SolverFailed {
        reason: String,
        iterations: usize,
        primal_residual: f64,
        dual_residual: f64,
        gap: f64,
        lower: f64,
        upper: f64,
    },

    #[error("cutting-plane loop exceeded {cuts} cuts with bracket [{lower:.9}, {upper:.9}]")]
    CutLimit { cuts: usize, lower: f64, upper: f64 },

    #[error("{path}: {message}")]
    Schema { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn schema(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Schema {
            path: path.into(),
            message: message.into(),
        }
    }
}
