use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// A config value failed validation.
    #[error("config error at `{field}`: {message}")]
    Config { field: String, message: String },
    #[error("cannot parse {path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: toml::de::Error,
    },
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error("writing {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("cannot serialize the manifest: {0}")]
    Manifest(#[from] toml::ser::Error),
    /// A computation failed; `context` names the scenario stage.
    #[error("{context}: {source}")]
    Compute {
        context: String,
        #[source]
        source: sensched_core::Error,
    },
}

pub type Result<T> = std::result::Result<T, CliError>;

impl CliError {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        CliError::Io {
            context: context.into(),
            source,
        }
    }
}

/// Attaches scenario context to core errors.
pub(crate) trait Context<T> {
    fn context(self, what: impl FnOnce() -> String) -> Result<T>;
}

impl<T> Context<T> for sensched_core::Result<T> {
    fn context(self, what: impl FnOnce() -> String) -> Result<T> {
        self.map_err(|source| CliError::Compute {
            context: what(),
            source,
        })
    }
}
