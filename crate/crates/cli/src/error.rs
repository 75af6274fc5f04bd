use std::path::{Path, PathBuf};

use thiserror::Error;

/// Pipeline stage an error came from; printed as the message prefix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Load,
    Compile,
    Synthesize,
    Evaluate,
    Simulate,
    Export,
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Stage::Load => "load",
            Stage::Compile => "compile",
            Stage::Synthesize => "synthesize",
            Stage::Evaluate => "evaluate",
            Stage::Simulate => "simulate",
            Stage::Export => "export",
        })
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{stage}: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: Box<dyn std::error::Error + Send + Sync>,
    },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {message}", path.display())]
    Format { path: PathBuf, message: String },
    #[error("hash mismatch: {} was made for scenario {expected}, but {} hashes to {found}", file.display(), scenario.display())]
    HashMismatch {
        file: PathBuf,
        scenario: PathBuf,
        expected: String,
        found: String,
    },
    #[error("replay differs from the manifest: {0}")]
    ReplayMismatch(String),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> CliError {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// Attaches a stage to any error.
pub trait StageExt<T> {
    fn at(self, stage: Stage) -> Result<T, CliError>;
}

impl<T, E: std::error::Error + Send + Sync + 'static> StageExt<T> for Result<T, E> {
    fn at(self, stage: Stage) -> Result<T, CliError> {
        self.map_err(|e| CliError::Stage {
            stage,
            source: Box::new(e),
        })
    }
}
