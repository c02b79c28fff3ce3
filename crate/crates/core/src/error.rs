use std::fmt;

use thiserror::Error;

/// What went wrong while reading a hypothesis string.
#[derive(Debug, Clone, PartialEq)]
pub enum ParseErrorKind {
    UnknownIdentifier(String),
    Syntax(String),
    DegenerateRow,
    Contradictory,
    Empty,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParseError {
    pub kind: ParseErrorKind,
    /// Byte offset into the hypothesis string, when known.
    pub position: Option<usize>,
}

impl ParseError {
    pub fn new(kind: ParseErrorKind, position: Option<usize>) -> Self {
        ParseError { kind, position }
    }

    /// Renders the offending input with a caret under the error position.
    pub fn caret(&self, input: &str) -> Option<String> {
        let pos = self.position?;
        let line: String = input.chars().map(|c| if c == '\n' { ' ' } else { c }).collect();
        let col = input[..pos.min(input.len())].chars().count();
        Some(format!("{line}\n{}^", " ".repeat(col)))
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ParseErrorKind::UnknownIdentifier(name) => write!(f, "unknown parameter `{name}`")?,
            ParseErrorKind::Syntax(msg) => write!(f, "syntax error: {msg}")?,
            ParseErrorKind::DegenerateRow => write!(f, "degenerate constraint: all parameter coefficients cancel")?,
            ParseErrorKind::Contradictory => write!(f, "contradictory equality constraints")?,
            ParseErrorKind::Empty => write!(f, "empty hypothesis")?,
        }
        if let Some(p) = self.position {
            write!(f, " at position {p}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ParseError {}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("infeasible hypothesis: {0}")]
    Infeasible(String),
    #[error("redundant equality constraints in `{0}`")]
    RedundantEqualities(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code used by the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse(_) | Error::Infeasible(_) | Error::RedundantEqualities(_) => 2,
            Error::Data(_) | Error::Io(_) | Error::InvalidArgument(_) | Error::Unsupported(_) => 3,
            Error::Numerical(_) => 4,
        }
    }

    pub(crate) fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
