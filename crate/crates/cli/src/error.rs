use thiserror::Error;

use pointstab::Error as CoreError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("{0}")]
    Core(#[from] CoreError),

    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl CliError {
    /// 0 success, 1 i/o, 2 configuration, 3 degenerate configuration,
    /// 4 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io { .. } => 1,
            CliError::Core(e) => match e {
                CoreError::InvalidParameter(_) | CoreError::Dimension(_) => 2,
                CoreError::DegenerateWeight { .. } | CoreError::DegenerateConfiguration { .. } => 3,
                _ => 4,
            },
        }
    }

    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.display().to_string(), source }
    }
}
