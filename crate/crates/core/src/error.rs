use thiserror::Error;

/// Errors raised by the analyses.
///
/// [`Error::is_numerical`] separates numerical failures (non-convergence,
/// flagged estimates) from input-validation failures; the CLI maps them to
/// different exit codes.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("parameter out of domain: {0}")]
    Domain(String),

    #[error("order {order} out of range: family defines orders up to max_order = {max_order}")]
    OrderOutOfRange { order: usize, max_order: usize },

    #[error("hierarchy is missing order {0}")]
    MissingOrder(usize),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("support condition violated: {0}")]
    Support(String),

    #[error(
        "resolution too coarse: estimated error {estimate:.3e} exceeds tolerance {tolerance:.3e}; \
         try resolution {suggested}"
    )]
    Resolution {
        estimate: f64,
        tolerance: f64,
        suggested: usize,
    },

    #[error("grid: {0}")]
    Grid(String),

    #[error("fit: {0}")]
    Fit(String),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Numerical(_) | Error::Resolution { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
