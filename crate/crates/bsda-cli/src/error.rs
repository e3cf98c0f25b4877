use bsda_nn::model::ModelError;
use thiserror::Error;

/// One variant per documented exit-code family.
#[derive(Debug, Error)]
pub enum CliError {
    /// Exit 1: an internal self-check (oracle comparison, gradient suite)
    /// did not hold.
    #[error("{0}")]
    SelfCheck(String),
    /// Exit 2: unreadable or unwritable paths.
    #[error("{0}")]
    Io(String),
    /// Exit 3: masks that failed to parse.
    #[error("{0}")]
    MaskParse(String),
    /// Exit 4: configuration rejected by schema or range validation.
    #[error("{0}")]
    Config(String),
    /// Exit 5: checkpoint does not fit the model it claims to describe.
    #[error("{0}")]
    Checkpoint(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::SelfCheck(_) => 1,
            CliError::Io(_) => 2,
            CliError::MaskParse(_) => 3,
            CliError::Config(_) => 4,
            CliError::Checkpoint(_) => 5,
        }
    }
}

pub fn from_model(e: ModelError) -> CliError {
    match e {
        ModelError::ConfigInvalid(m) => CliError::Config(m),
        ModelError::DataEmpty => CliError::Config("no samples to work with".into()),
        ModelError::Checkpoint(m) => CliError::Checkpoint(m),
        ModelError::ShapeMismatch(m) => CliError::Checkpoint(m),
        ModelError::Target(m) => CliError::MaskParse(m),
        other => CliError::SelfCheck(other.to_string()),
    }
}
