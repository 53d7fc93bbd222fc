use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] starkmbl::Error),

    #[error("cannot write {path}: {source}")]
    Write {
        path: String,
        source: std::io::Error,
    },
}

impl CliError {
    /// 2 config, 3 resource guard, 4 numerical failure.
    pub fn exit_code(&self) -> i32 {
        use starkmbl::Error as E;
        match self {
            CliError::Parse { .. } | CliError::Config(_) => 2,
            CliError::Core(E::ResourceGuard { .. }) => 3,
            CliError::Core(
                E::Numerical(_)
                | E::TooFewLevels { .. }
                | E::InsufficientData(_)
                | E::EmptyWindow { .. },
            ) => 4,
            CliError::Core(E::Io(_)) | CliError::Write { .. } => 1,
            CliError::Core(_) => 2,
        }
    }
}
