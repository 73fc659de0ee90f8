//! The Pythonic STL mini-language emitted by the planning assistant.
//!
//! ```text
//! expression := and_expr ('|' and_expr)*
//! and_expr   := term ('&' term)*
//! term       := '~' term | primary method*
//! primary    := '(' expression ')' | 'TRUE' | atom
//! atom       := 'STL_formulas' '.' ('inside_cuboid' | 'outside_cuboid') '(' region ')'
//!             | 'STL_formulas' '.' 'linear' '(' '[' number{6} ']' ',' number ')'
//! region     := STRING | NAME | number{6} | '[' number{6} ']'
//! method     := '.' ('eventually' | 'always') '(' time ',' time ')'
//!             | '.' 'until' '(' expression ',' time ',' time ')'
//! ```
//!
//! Times are seconds and are mapped to steps with `round(t / dt)`, rounding
//! half away from zero. Numeric bounds are `xmin, xmax, ymin, ymax, zmin,
//! zmax`. Formulas are over the 6-dimensional drone state `(p, v)`.

mod format;
mod lexer;
mod parser;

use std::fmt;

use thiserror::Error;

pub use format::format;
pub use parser::parse;

use crate::scene::Scene;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Lex,
    Syntax,
    UnknownObject,
    BadInterval,
    TypeError,
}

impl fmt::Display for ErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ErrorKind::Lex => "lexical error",
            ErrorKind::Syntax => "syntax error",
            ErrorKind::UnknownObject => "unknown object",
            ErrorKind::BadInterval => "bad interval",
            ErrorKind::TypeError => "type error",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{kind} at bytes {}..{}: {message}", span.0, span.1)]
pub struct ParseError {
    pub kind: ErrorKind,
    pub span: (usize, usize),
    pub message: String,
}

impl ParseError {
    pub(crate) fn new(kind: ErrorKind, start: usize, end: usize, message: impl Into<String>) -> Self {
        Self { kind, span: (start, end), message: message.into() }
    }

    /// Multi-line report with the offending line and a caret underline.
    pub fn render(&self, src: &str) -> String {
        let (start, end) = self.span;
        let line_start = src[..start.min(src.len())].rfind('\n').map_or(0, |i| i + 1);
        let line_end = src[line_start..].find('\n').map_or(src.len(), |i| line_start + i);
        let line = &src[line_start..line_end];
        let col = src[line_start..start.min(src.len())].chars().count();
        let width = src[start.min(src.len())..end.min(line_end).max(start.min(src.len()))].chars().count().max(1);
        format!("{self}\n  {line}\n  {}{}", " ".repeat(col), "^".repeat(width))
    }
}

/// Source text plus the context needed to resolve it.
#[derive(Debug, Clone, Copy)]
pub struct DslSource<'a> {
    pub text: &'a str,
    pub scene: &'a Scene,
    /// Sampling time in seconds.
    pub dt: f64,
}

impl<'a> DslSource<'a> {
    pub fn new(text: &'a str, scene: &'a Scene, dt: f64) -> Self {
        Self { text, scene, dt }
    }
}

pub const STL_OPEN: &str = "<STL>";
pub const STL_CLOSE: &str = "</STL>";

/// Contents of the last complete `<STL>...</STL>` block in an assistant reply.
pub fn extract_stl_block(reply: &str) -> Result<String, ParseError> {
    extract_block(reply, STL_OPEN, STL_CLOSE)
        .ok_or_else(|| ParseError::new(ErrorKind::Syntax, 0, 0, "missing STL block"))
}

/// Last complete `open ... close` block, trimmed.
pub fn extract_block(reply: &str, open: &str, close: &str) -> Option<String> {
    let mut last = None;
    let mut from = 0;
    while let Some(i) = reply[from..].find(open) {
        let body = from + i + open.len();
        match reply[body..].find(close) {
            Some(j) => {
                last = Some(reply[body..body + j].trim().to_string());
                from = body + j + close.len();
            }
            None => break,
        }
    }
    last
}
