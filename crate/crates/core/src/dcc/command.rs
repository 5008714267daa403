//! The console command language.
//!
//! ```text
//! command := "add" kind name { param "=" value }
//!          | "set" ref value
//!          | "link" ref "=" expr
//!          | "delete" name
//!          | "query" name
//!          | "snapshot"
//!          | "render_summary"
//! expr    := term { ("+" | "-") term }
//! term    := unary { ("*" | "/") unary }
//! unary   := "-" unary | atom
//! atom    := number | ref | "(" expr ")"
//! value   := ["-"] number | word | string
//! ```
//!
//! Parsing is total: every input yields a [`Command`] or a [`Diagnostic`]
//! with a 1-based character column. Errors at end of input point one column
//! past the last character.

use std::collections::BTreeMap;
use std::fmt;

use super::expr::{BinOp, Expr, ParamRef};
use super::scene::{ObjectKind, ParamValue};

#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    Add {
        kind: ObjectKind,
        name: String,
        params: BTreeMap<String, ParamValue>,
    },
    Set {
        target: ParamRef,
        value: ParamValue,
    },
    Link {
        target: ParamRef,
        expr: Expr,
    },
    Delete {
        name: String,
    },
    Query {
        name: String,
    },
    Snapshot,
    RenderSummary,
}

impl Command {
    pub fn is_mutation(&self) -> bool {
        matches!(
            self,
            Command::Add { .. } | Command::Set { .. } | Command::Link { .. } | Command::Delete { .. }
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("column {column}: {message}")]
pub struct Diagnostic {
    pub message: String,
    pub column: usize,
}

impl Diagnostic {
    fn new(column: usize, message: impl Into<String>) -> Self {
        Self {
            message: message.into(),
            column,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    Num(f64),
    Str(String),
    Sym(char),
    End,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Word(w) => write!(f, "'{w}'"),
            Tok::Num(_) => f.write_str("number"),
            Tok::Str(_) => f.write_str("string"),
            Tok::Sym(c) => write!(f, "'{c}'"),
            Tok::End => f.write_str("end of line"),
        }
    }
}

struct Lexer {
    tokens: Vec<(Tok, usize)>,
    pos: usize,
}

fn lex(line: &str) -> Result<Lexer, Diagnostic> {
    let chars: Vec<char> = line.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let column = i + 1;
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_' || chars[i] == '.') {
                i += 1;
            }
            tokens.push((Tok::Word(chars[start..i].iter().collect()), column));
        } else if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            if i + 1 < chars.len() && chars[i] == '.' && chars[i + 1].is_ascii_digit() {
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    while j < chars.len() && chars[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let text: String = chars[start..i].iter().collect();
            let value: f64 = text
                .parse()
                .map_err(|_| Diagnostic::new(column, format!("invalid number '{text}'")))?;
            if !value.is_finite() {
                return Err(Diagnostic::new(column, format!("number '{text}' is out of range")));
            }
            tokens.push((Tok::Num(value), column));
        } else if c == '"' {
            i += 1;
            let mut text = String::new();
            loop {
                match chars.get(i) {
                    None => return Err(Diagnostic::new(column, "unterminated string")),
                    Some('"') => {
                        i += 1;
                        break;
                    }
                    Some('\\') => {
                        let escaped = match chars.get(i + 1) {
                            Some('"') => '"',
                            Some('\\') => '\\',
                            Some('n') => '\n',
                            Some('t') => '\t',
                            _ => return Err(Diagnostic::new(i + 1, "invalid escape in string")),
                        };
                        text.push(escaped);
                        i += 2;
                    }
                    Some(&ch) => {
                        text.push(ch);
                        i += 1;
                    }
                }
            }
            tokens.push((Tok::Str(text), column));
        } else if "=+-*/()".contains(c) {
            tokens.push((Tok::Sym(c), column));
            i += 1;
        } else {
            return Err(Diagnostic::new(column, format!("unexpected character '{}'", c.escape_debug())));
        }
    }
    tokens.push((Tok::End, chars.len() + 1));
    Ok(Lexer { tokens, pos: 0 })
}

impl Lexer {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].0
    }

    fn column(&self) -> usize {
        self.tokens[self.pos].1
    }

    fn next(&mut self) -> (Tok, usize) {
        let tok = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        tok
    }

    fn expected(&self, what: &str) -> Diagnostic {
        Diagnostic::new(self.column(), format!("expected {what}, found {}", self.peek()))
    }

    fn word(&mut self, what: &str) -> Result<(String, usize), Diagnostic> {
        match self.peek() {
            Tok::Word(_) => match self.next() {
                (Tok::Word(w), col) => Ok((w, col)),
                _ => unreachable!(),
            },
            _ => Err(self.expected(what)),
        }
    }

    fn sym(&mut self, c: char) -> Result<(), Diagnostic> {
        if *self.peek() == Tok::Sym(c) {
            self.next();
            Ok(())
        } else {
            Err(self.expected(&format!("'{c}'")))
        }
    }

    fn end(&self) -> Result<(), Diagnostic> {
        if *self.peek() == Tok::End {
            Ok(())
        } else {
            Err(Diagnostic::new(
                self.column(),
                format!("unexpected trailing input {}", self.peek()),
            ))
        }
    }

    fn name(&mut self) -> Result<String, Diagnostic> {
        let (name, col) = self.word("object name")?;
        if super::is_valid_name(&name) {
            Ok(name)
        } else {
            Err(Diagnostic::new(col, format!("invalid object name '{name}'")))
        }
    }

    fn param_ref(&mut self) -> Result<ParamRef, Diagnostic> {
        let (text, col) = self.word("parameter reference 'object.param'")?;
        ParamRef::parse(&text).ok_or_else(|| {
            Diagnostic::new(col, format!("'{text}' is not a parameter reference 'object.param'"))
        })
    }

    fn value(&mut self) -> Result<ParamValue, Diagnostic> {
        match self.peek().clone() {
            Tok::Num(n) => {
                self.next();
                Ok(ParamValue::Num(n))
            }
            Tok::Sym('-') => {
                self.next();
                match self.peek().clone() {
                    Tok::Num(n) => {
                        self.next();
                        Ok(ParamValue::Num(-n))
                    }
                    _ => Err(self.expected("number after '-'")),
                }
            }
            Tok::Word(w) | Tok::Str(w) => {
                self.next();
                Ok(ParamValue::Text(w))
            }
            _ => Err(self.expected("value")),
        }
    }

    fn expr(&mut self) -> Result<Expr, Diagnostic> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Sym('+') => BinOp::Add,
                Tok::Sym('-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.next();
            let rhs = self.term()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr, Diagnostic> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Sym('*') => BinOp::Mul,
                Tok::Sym('/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.next();
            let rhs = self.unary()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expr, Diagnostic> {
        if *self.peek() == Tok::Sym('-') {
            self.next();
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<Expr, Diagnostic> {
        match self.peek().clone() {
            Tok::Num(n) => {
                self.next();
                Ok(Expr::Num(n))
            }
            Tok::Word(_) => Ok(Expr::Ref(self.param_ref()?)),
            Tok::Sym('(') => {
                self.next();
                let inner = self.expr()?;
                self.sym(')')?;
                Ok(inner)
            }
            _ => Err(self.expected("number, reference or '('")),
        }
    }
}

const VERBS: &str = "add, set, link, delete, query, snapshot, render_summary";

/// Parses one console line.
pub fn parse_command(line: &str) -> Result<Command, Diagnostic> {
    let mut lx = lex(line)?;
    if *lx.peek() == Tok::End {
        return Err(Diagnostic::new(lx.column(), "empty command"));
    }
    let (verb, verb_col) = match lx.peek() {
        Tok::Word(_) => lx.word("command")?,
        _ => return Err(lx.expected(&format!("command ({VERBS})"))),
    };
    let cmd = match verb.as_str() {
        "add" => {
            let (kind_text, kind_col) = lx.word("object kind")?;
            let kind: ObjectKind = kind_text.parse().map_err(|_| {
                Diagnostic::new(
                    kind_col,
                    format!("unknown object kind '{kind_text}'; expected one of {}", ObjectKind::NAMES.join(", ")),
                )
            })?;
            let name = lx.name()?;
            let mut params = BTreeMap::new();
            while *lx.peek() != Tok::End {
                let (key, key_col) = lx.word("parameter name")?;
                if !super::is_valid_param(&key) {
                    return Err(Diagnostic::new(key_col, format!("invalid parameter name '{key}'")));
                }
                lx.sym('=')?;
                let value = lx.value()?;
                if params.insert(key.clone(), value).is_some() {
                    return Err(Diagnostic::new(key_col, format!("duplicate parameter '{key}'")));
                }
            }
            Command::Add { kind, name, params }
        }
        "set" => {
            let target = lx.param_ref()?;
            let value = lx.value()?;
            Command::Set { target, value }
        }
        "link" => {
            let target = lx.param_ref()?;
            lx.sym('=')?;
            let expr = lx.expr()?;
            Command::Link { target, expr }
        }
        "delete" => Command::Delete { name: lx.name()? },
        "query" => Command::Query { name: lx.name()? },
        "snapshot" => Command::Snapshot,
        "render_summary" => Command::RenderSummary,
        other => {
            return Err(Diagnostic::new(
                verb_col,
                format!("unknown command '{other}'; expected one of {VERBS}"),
            ))
        }
    };
    lx.end()?;
    Ok(cmd)
}

/// Parses a standalone expression (used by tests and tooling).
pub fn parse_expr(text: &str) -> Result<Expr, Diagnostic> {
    let mut lx = lex(text)?;
    let e = lx.expr()?;
    lx.end()?;
    Ok(e)
}

/// Splits a multi-line console script into commands, skipping blank lines and
/// `#` comments. Errors carry the 1-based line number.
pub fn parse_script(script: &str) -> Result<Vec<Command>, (usize, Diagnostic)> {
    script
        .lines()
        .enumerate()
        .filter(|(_, l)| {
            let t = l.trim();
            !t.is_empty() && !t.starts_with('#')
        })
        .map(|(i, l)| parse_command(l).map_err(|d| (i + 1, d)))
        .collect()
}
