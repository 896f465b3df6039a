use std::fmt;

use thiserror::Error;

use super::sexpr::Pos;

/// What went wrong while reading PDDL text.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("unexpected character `{0}`")]
    Lexical(char),
    #[error("unbalanced parentheses")]
    UnbalancedParens,
    #[error("unexpected end of input")]
    UnexpectedEnd,
    #[error("unexpected {0}")]
    UnexpectedToken(String),
    #[error("unsupported requirement `{0}`")]
    UnknownRequirement(String),
    #[error("undeclared type `{0}`")]
    UndeclaredType(String),
    #[error("undeclared predicate `{0}`")]
    UndeclaredPredicate(String),
    #[error("variable `{0}` is not an action parameter")]
    UndeclaredVariable(String),
    #[error("unknown object `{0}`")]
    UnknownObject(String),
    #[error("predicate `{predicate}` takes {expected} argument(s), got {found}")]
    ArityMismatch {
        predicate: String,
        expected: usize,
        found: usize,
    },
    #[error("`{name}` has type `{found}`, expected `{expected}`")]
    TypeMismatch {
        name: String,
        expected: String,
        found: String,
    },
    #[error("duplicate {what} `{name}`")]
    Duplicate { what: &'static str, name: String },
    #[error("problem targets domain `{found}`, expected `{expected}`")]
    DomainMismatch { expected: String, found: String },
    #[error("atom `{0}` is both added and deleted")]
    AddDeleteOverlap(String),
    #[error("cyclic type hierarchy at `{0}`")]
    CyclicType(String),
}

/// A parse failure with its source position and the tokens that would have
/// been accepted there (empty when not meaningful).
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub kind: ParseErrorKind,
    pub expected: Vec<String>,
}

impl ParseError {
    pub fn new(pos: Pos, kind: ParseErrorKind) -> Self {
        Self {
            line: pos.line,
            column: pos.column,
            kind,
            expected: Vec::new(),
        }
    }

    pub fn expecting<I, S>(mut self, expected: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.expected = expected.into_iter().map(Into::into).collect();
        self
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.column, self.kind)?;
        if !self.expected.is_empty() {
            write!(f, " (expected one of: {})", self.expected.join(", "))?;
        }
        Ok(())
    }
}
