use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument fell outside the domain where the formula is defined.
    #[error("{what}: value {value} outside domain ({expected})")]
    Domain {
        what: &'static str,
        value: f64,
        expected: String,
    },

    /// A spiked eigenvalue at or below the detection threshold `1 + sqrt(c)`.
    #[error("spike alpha = {alpha} is subcritical for c = {c} (needs alpha > {threshold})")]
    Subcritical { alpha: f64, c: f64, threshold: f64 },

    #[error("{what} did not converge after {iterations} terms (last |term| = {last})")]
    Convergence {
        what: &'static str,
        iterations: usize,
        last: f64,
    },

    #[error("invalid dimensions: {0}")]
    Shape(String),

    #[error("matrix is not positive semi-definite: eigenvalue {value} below -{threshold}")]
    NotPsd { value: f64, threshold: f64 },

    #[error("invalid spike specification: {0}")]
    Spike(String),

    #[error("{0} is outside the tabulated range")]
    Range(String),

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(what: &'static str, value: f64, expected: impl Into<String>) -> Self {
        Error::Domain {
            what,
            value,
            expected: expected.into(),
        }
    }

    /// Errors caused by bad inputs rather than by a numerical procedure.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Convergence { .. } | Error::NotPsd { .. } | Error::Io(_))
    }
}
