use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numeric(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 2 configuration, 3 data, 4 numeric or domain failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) | CliError::Io(_) => 3,
            CliError::Numeric(_) => 4,
        }
    }
}

impl From<dglm::Error> for CliError {
    fn from(e: dglm::Error) -> Self {
        use dglm::Error as E;
        let msg = e.to_string();
        match e {
            E::Config(_) | E::Context { .. } | E::Unsupported { .. } => CliError::Config(msg),
            E::Structural(_) | E::Observation { .. } => CliError::Data(msg),
            E::Domain { .. }
            | E::DegeneratePredictor { .. }
            | E::ConjugateDomain { .. }
            | E::Evaluation { .. } => CliError::Numeric(msg),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(std::io::Error::other(e))
    }
}
