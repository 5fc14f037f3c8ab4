use std::fmt;

/// Failure of a subcommand, mapped onto the process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad configuration or override.
    Config(String),
    /// Unreadable, empty or malformed input data.
    Input(String),
    /// The computation itself failed.
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Input(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }

    /// Library error raised while handling config section `section`.
    pub fn in_section(section: &str, e: unravel::Error) -> Self {
        use unravel::Error as E;
        match e {
            E::InvalidParam { name, reason } => CliError::Config(format!("`{section}.{name}`: {reason}")),
            E::TooFewTrajectories { .. } => CliError::Config(format!("`{section}`: {e}")),
            E::Parse(_) | E::EmptySeries(_) | E::InvalidState(_) => CliError::Input(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Input(m) => write!(f, "input error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Input(e.to_string())
    }
}
