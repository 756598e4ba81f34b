use std::path::{Path, PathBuf};

use purcell_core::Error as CoreError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error at `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error("{0}")]
    Convergence(CoreError),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed input {}: {message}", path.display())]
    Input { path: PathBuf, message: String },
    #[error("{0}")]
    Core(CoreError),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Schema { .. } | CliError::Usage(_) => 2,
            CliError::Convergence(_) => 3,
            CliError::Io { .. } | CliError::Input { .. } => 4,
            CliError::Core(_) => 5,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::NoConvergence { .. }
            | CoreError::NonConvergence { .. }
            | CoreError::StepUnderflow { .. } => CliError::Convergence(e),
            other => CliError::Core(other),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_by_kind() {
        assert_eq!(
            CliError::from(CoreError::NoConvergence { iterations: 3 }).exit_code(),
            3
        );
        assert_eq!(
            CliError::from(CoreError::StepUnderflow {
                t: 0.0,
                min_dt: 1e-15
            })
            .exit_code(),
            3
        );
        assert_eq!(CliError::from(CoreError::EmptySupport).exit_code(), 5);
        let io = CliError::io(Path::new("x"), std::io::Error::other("gone"));
        assert_eq!(io.exit_code(), 4);
        let schema = CliError::Schema {
            path: "a.b".into(),
            message: "bad".into(),
        };
        assert_eq!(schema.exit_code(), 2);
        assert!(schema.to_string().contains("`a.b`"));
    }
}
