use std::fmt;

use serde::{Deserialize, Serialize};

use crate::lexer::Pos;

/// A lexing or parsing failure with a one-line message.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[error("{line}:{column}: {message}")]
pub struct ParseError {
    pub line: u32,
    pub column: u32,
    pub message: String,
}

impl ParseError {
    pub fn new(pos: Pos, message: impl Into<String>) -> Self {
        Self {
            line: pos.line,
            column: pos.col,
            message: message.into(),
        }
    }
}

/// Name-resolution and type errors found before execution.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
pub struct CheckError {
    pub line: u32,
    pub message: String,
    /// Whether the offending construct lives in the test source (as opposed
    /// to the program under test).
    pub in_test: bool,
}

impl fmt::Display for CheckError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let origin = if self.in_test { "test" } else { "program" };
        write!(f, "{origin} line {}: {}", self.line, self.message)
    }
}
