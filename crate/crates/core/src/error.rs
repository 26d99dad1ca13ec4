use thiserror::Error;

/// Errors raised by kernel construction, the solvers and the file readers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("dimension mismatch: {what} (expected {expected}, got {got})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("point {value} outside kernel domain {domain}")]
    OutOfDomain { value: f64, domain: &'static str },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("index {index} out of range for size {size}")]
    IndexOutOfRange { index: usize, size: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid label {0}")]
    InvalidLabel(String),

    #[error("only one class present in the labels")]
    SingleClass,

    #[error("null-space basis is rank deficient (rank {rank} < {columns} columns)")]
    RankDeficient { rank: usize, columns: usize },

    #[error("singular linear system: {0}")]
    Singular(&'static str),

    #[error("{solver} did not converge after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("{solver} produced a non-finite iterate at step {iteration} (step size {step:.3e})")]
    Diverged {
        solver: &'static str,
        iteration: usize,
        step: f64,
    },

    #[error("degenerate: {0}")]
    Degenerate(String),

    #[error("{path}: line {line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// True when the failure came from a numerical routine rather than from
    /// the shape or content of the input data.
    pub fn is_solver_failure(&self) -> bool {
        matches!(
            self,
            Error::Singular(_)
                | Error::NonConvergence { .. }
                | Error::RankDeficient { .. }
                | Error::Diverged { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure_finite<'a, I>(values: I, what: &'static str) -> Result<()>
where
    I: IntoIterator<Item = &'a f64>,
{
    if values.into_iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}
