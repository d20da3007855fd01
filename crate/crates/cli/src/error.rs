use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad configuration or command-line usage.
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl From<rmtkd::Error> for CliError {
    fn from(e: rmtkd::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}
