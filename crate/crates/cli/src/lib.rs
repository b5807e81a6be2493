//! Pipeline orchestration behind the `mia` binary: configuration, stage
//! commands, the full audit pipeline, and environment diagnostics.

pub mod commands;
pub mod config;
pub mod pipeline;

/// Errors carrying the process exit code contract:
/// 1 validation, 2 backend, 3 partial completion.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Backend(String),
    #[error("{0}")]
    Partial(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Backend(_) => 2,
            CliError::Partial(_) => 3,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Validation(format!("io error: {e}"))
    }
}

pub(crate) fn map_model_err(e: mia_core::modelgw::ModelError) -> CliError {
    use mia_core::modelgw::ModelError;
    match e {
        ModelError::InvalidConfig(_) | ModelError::InvalidModel(_) => {
            CliError::Validation(e.to_string())
        }
        _ => CliError::Backend(e.to_string()),
    }
}
