use std::fmt;

use ssf_core::SsfError;

#[derive(Debug)]
pub enum CliError {
    /// One message per invalid field.
    Config(Vec<String>),
    UnknownKeys(Vec<String>),
    Io(String),
    Core(SsfError),
    /// Number of tasks that failed; their outputs carry the messages.
    TasksFailed(usize),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(errs) => {
                writeln!(f, "invalid configuration:")?;
                for e in errs {
                    writeln!(f, "  {e}")?;
                }
                Ok(())
            }
            CliError::UnknownKeys(keys) => write!(f, "unknown configuration keys: {}", keys.join(", ")),
            CliError::Io(m) => write!(f, "{m}"),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::TasksFailed(n) => write!(f, "{n} task(s) failed; see the error column of the outputs"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<SsfError> for CliError {
    fn from(e: SsfError) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::TasksFailed(_) | CliError::Core(_) => 1,
            _ => 2,
        }
    }
}
