use std::fmt;

use thiserror::Error;

/// One problem found while validating inputs.
///
/// `row` is the zero-based bin (or grid row) the issue refers to, when there
/// is one; front ends translate it into a file line number.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationIssue {
    pub row: Option<usize>,
    pub message: String,
}

impl ValidationIssue {
    pub fn new(message: impl Into<String>) -> Self {
        Self {
            row: None,
            message: message.into(),
        }
    }

    pub fn at(row: usize, message: impl Into<String>) -> Self {
        Self {
            row: Some(row),
            message: message.into(),
        }
    }
}

impl fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.row {
            Some(r) => write!(f, "row {}: {}", r, self.message),
            None => f.write_str(&self.message),
        }
    }
}

fn join_issues(issues: &[ValidationIssue]) -> String {
    issues
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {}", join_issues(.0))]
    Validation(Vec<ValidationIssue>),

    #[error("{what} = {value} lies outside the support [{lo}, {hi}]")]
    OutOfSupport {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("constraint set is infeasible: {0}")]
    Infeasible(String),

    #[error("solver did not converge: {0}")]
    NonConvergence(String),

    #[error("design matrix is rank deficient: {0}")]
    RankDeficient(String),

    #[error("bootstrap aborted: {0}")]
    BootstrapAborted(String),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn validation(issue: ValidationIssue) -> Self {
        Error::Validation(vec![issue])
    }

    /// True for errors that front ends report as infeasibility rather than
    /// bad input.
    pub fn is_infeasible(&self) -> bool {
        matches!(self, Error::Infeasible(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
