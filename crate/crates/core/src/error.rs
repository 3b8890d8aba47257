use thiserror::Error;

/// Errors raised by the filtering, forecasting and diagnostic routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{function}: argument {value} outside the domain ({expected})")]
    Domain {
        function: &'static str,
        value: f64,
        expected: &'static str,
    },

    #[error("structural error: {0}")]
    Structural(String),

    #[error("degenerate linear predictor: variance {q} is not positive")]
    DegeneratePredictor { q: f64 },

    #[error("observation {y} outside the support of the {family} family: {reason}")]
    Observation {
        family: &'static str,
        y: f64,
        reason: &'static str,
    },

    #[error("conjugate parameters (r={r}, s={s}) outside the {family} domain: {hint}")]
    ConjugateDomain {
        family: &'static str,
        r: f64,
        s: f64,
        hint: String,
    },

    #[error("observation context for the {family} family is missing or invalid: {field}")]
    Context {
        family: &'static str,
        field: &'static str,
    },

    #[error("{family} family does not support {operation}")]
    Unsupported {
        family: &'static str,
        operation: &'static str,
    },

    #[error("evaluation failed at t={t}: {reason}")]
    Evaluation { t: usize, reason: String },

    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn domain(function: &'static str, value: f64, expected: &'static str) -> Self {
        Error::Domain {
            function,
            value,
            expected,
        }
    }

    /// True for the numeric/domain class of failures (as opposed to malformed
    /// input or configuration).
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::Domain { .. }
                | Error::DegeneratePredictor { .. }
                | Error::ConjugateDomain { .. }
                | Error::Evaluation { .. }
                | Error::Unsupported { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
