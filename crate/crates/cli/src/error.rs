use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    /// A stage needs artifacts of an earlier stage that are missing or stale.
    #[error("missing dependency: {0}")]
    Dependency(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Dependency(_) | CliError::Io(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl From<frontlab::Error> for CliError {
    fn from(e: frontlab::Error) -> Self {
        use frontlab::Error as E;
        match e {
            E::Config(_) | E::Precondition(_) => CliError::Config(e.to_string()),
            E::Io(io) => CliError::Io(io),
            E::Json(_) | E::Csv(_) => CliError::Dependency(format!("unreadable artifact: {e}")),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Dependency(format!("unreadable artifact: {e}"))
    }
}
