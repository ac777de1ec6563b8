use std::fmt;

/// Everything a command can fail with; the exit status is nonzero for all of them.
#[derive(Debug)]
pub enum CliError {
    /// Malformed or inconsistent configuration.
    Config(String),
    /// A numerical routine refused, tagged with the module that raised it.
    Domain {
        module: &'static str,
        source: qcrystal_core::Error,
    },
    Io(String),
    /// `verify` found failing criteria.
    Failed(String),
}

impl CliError {
    pub(crate) fn config(msg: String) -> Self {
        CliError::Config(msg)
    }

    pub(crate) fn domain(module: &'static str, source: qcrystal_core::Error) -> Self {
        CliError::Domain { module, source }
    }

    pub(crate) fn io(what: impl fmt::Display, e: std::io::Error) -> Self {
        CliError::Io(format!("{what}: {e}"))
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Domain { .. } => 3,
            CliError::Io(_) => 4,
            CliError::Failed(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Domain { module, source } => write!(f, "{module}: {source}"),
            CliError::Io(m) => write!(f, "io error: {m}"),
            CliError::Failed(m) => write!(f, "verification failed: {m}"),
        }
    }
}

impl std::error::Error for CliError {}
