use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad config, bad CSV, unreadable or unwritable file.
    #[error("{0}")]
    Input(String),
    /// Integration failure, observer divergence or a failed gain design.
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl From<iwp_core::Error> for CliError {
    fn from(e: iwp_core::Error) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Input(e.to_string())
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Input(e.to_string())
    }
}
