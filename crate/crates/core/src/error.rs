use thiserror::Error;

/// Errors raised by the analysis routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A parameter violates a structural requirement (dimensions, grid, counts).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Matrix entries are NaN or infinite.
    #[error("non-finite matrix entry at ({row}, {col}): {value}")]
    NonFinite { row: usize, col: usize, value: f64 },

    /// The kernel is undefined for this input (e.g. a zero column for coherence).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// Exhaustive subset enumeration would exceed the configured cap.
    #[error("enumeration infeasible: C({n}, {k}) = {count:.6e} subsets exceeds cap {cap}")]
    EnumerationInfeasible {
        n: usize,
        k: usize,
        count: f64,
        cap: u64,
    },

    /// An argument lies outside the validity domain of a formula.
    #[error("{what}: argument outside domain, {detail}")]
    Domain { what: &'static str, detail: String },

    /// Moments that no distribution can have.
    #[error("invalid moments: E A^4 = {fourth} < (E A^2)^2 = {second_sq}")]
    InvalidMoments { fourth: f64, second_sq: f64 },

    /// The requested variant is not defined for these parameters.
    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(what: &'static str, detail: impl Into<String>) -> Self {
        Error::Domain {
            what,
            detail: detail.into(),
        }
    }
}
