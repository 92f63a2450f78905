use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Problems in an input file, each with its 1-based line when known.
    #[error("{}", render_issues(.path, .issues))]
    Input {
        path: PathBuf,
        issues: Vec<(Option<u64>, String)>,
    },

    #[error("{0}")]
    Usage(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] cefbounds::Error),
}

fn render_issues(path: &Path, issues: &[(Option<u64>, String)]) -> String {
    issues
        .iter()
        .map(|(line, msg)| match line {
            Some(l) => format!("{}:{l}: {msg}", path.display()),
            None => format!("{}: {msg}", path.display()),
        })
        .collect::<Vec<_>>()
        .join("\n")
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn at(path: &Path, line: Option<u64>, msg: impl Into<String>) -> Self {
        CliError::Input {
            path: path.to_path_buf(),
            issues: vec![(line, msg.into())],
        }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// 2 for bad input, 3 for infeasible constraints, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        use cefbounds::Error as E;
        match self {
            CliError::Input { .. } | CliError::Usage(_) => 2,
            CliError::Io { .. } => 1,
            CliError::Core(e) => match e {
                E::Validation(_) | E::OutOfSupport { .. } | E::InvalidArgument(_) | E::RankDeficient(_) => 2,
                E::Infeasible(_) => 3,
                _ => 1,
            },
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
