//! Tokenizer and S-expression reader shared by the domain, problem and plan
//! parsers.

use std::fmt;

use super::error::{ParseError, ParseErrorKind};

/// Source position, 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Pos {
    pub line: usize,
    pub column: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Token {
    Open,
    Close,
    Symbol(String),
}

fn is_symbol_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '?' | ':' | '.' | '=')
}

fn tokenize(src: &str) -> Result<Vec<(Token, Pos)>, ParseError> {
    let mut out = Vec::new();
    let mut chars = src.chars().peekable();
    let (mut line, mut column) = (1usize, 1usize);
    while let Some(&c) = chars.peek() {
        let pos = Pos { line, column };
        match c {
            '\n' => {
                chars.next();
                line += 1;
                column = 1;
            }
            c if c.is_whitespace() => {
                chars.next();
                column += 1;
            }
            ';' => {
                while let Some(&c) = chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    chars.next();
                }
            }
            '(' => {
                chars.next();
                column += 1;
                out.push((Token::Open, pos));
            }
            ')' => {
                chars.next();
                column += 1;
                out.push((Token::Close, pos));
            }
            c if is_symbol_char(c) => {
                let mut sym = String::new();
                while let Some(&c) = chars.peek() {
                    if !is_symbol_char(c) {
                        break;
                    }
                    sym.push(c.to_ascii_lowercase());
                    chars.next();
                    column += 1;
                }
                out.push((Token::Symbol(sym), pos));
            }
            other => {
                return Err(ParseError::new(pos, ParseErrorKind::Lexical(other)));
            }
        }
    }
    Ok(out)
}

/// A parsed S-expression. Symbols are already lowercased.
#[derive(Debug, Clone, PartialEq)]
pub enum SExpr {
    Symbol(String, Pos),
    List(Vec<SExpr>, Pos),
}

impl SExpr {
    pub fn pos(&self) -> Pos {
        match self {
            SExpr::Symbol(_, p) | SExpr::List(_, p) => *p,
        }
    }

    pub fn as_symbol(&self) -> Option<&str> {
        match self {
            SExpr::Symbol(s, _) => Some(s),
            SExpr::List(..) => None,
        }
    }

    pub fn as_list(&self) -> Option<&[SExpr]> {
        match self {
            SExpr::List(items, _) => Some(items),
            SExpr::Symbol(..) => None,
        }
    }

    /// Head symbol of a list, if the list is non-empty and starts with one.
    pub fn head(&self) -> Option<&str> {
        self.as_list().and_then(|l| l.first()).and_then(SExpr::as_symbol)
    }

    pub fn describe(&self) -> String {
        match self {
            SExpr::Symbol(s, _) => format!("`{s}`"),
            SExpr::List(..) => "a list".to_string(),
        }
    }
}

/// Reads every top-level expression in `src`.
pub fn read_all(src: &str) -> Result<Vec<SExpr>, ParseError> {
    let tokens = tokenize(src)?;
    let mut stack: Vec<(Vec<SExpr>, Pos)> = Vec::new();
    let mut top = Vec::new();
    for (tok, pos) in tokens {
        match tok {
            Token::Open => stack.push((Vec::new(), pos)),
            Token::Close => {
                let (items, open) = stack
                    .pop()
                    .ok_or_else(|| ParseError::new(pos, ParseErrorKind::UnbalancedParens))?;
                let list = SExpr::List(items, open);
                match stack.last_mut() {
                    Some((parent, _)) => parent.push(list),
                    None => top.push(list),
                }
            }
            Token::Symbol(s) => {
                let sym = SExpr::Symbol(s, pos);
                match stack.last_mut() {
                    Some((parent, _)) => parent.push(sym),
                    None => top.push(sym),
                }
            }
        }
    }
    if let Some((_, open)) = stack.pop() {
        return Err(ParseError::new(open, ParseErrorKind::UnbalancedParens));
    }
    Ok(top)
}

/// Reads exactly one top-level list.
pub fn read_one(src: &str) -> Result<SExpr, ParseError> {
    let mut all = read_all(src)?;
    match all.len() {
        0 => Err(ParseError::new(Pos { line: 1, column: 1 }, ParseErrorKind::UnexpectedEnd)
            .expecting(["("])),
        1 => Ok(all.remove(0)),
        _ => {
            let extra = &all[1];
            Err(ParseError::new(
                extra.pos(),
                ParseErrorKind::UnexpectedToken(extra.describe()),
            )
            .expecting(["end of input"]))
        }
    }
}
