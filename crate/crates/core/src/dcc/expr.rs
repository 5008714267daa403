use std::fmt;

use serde::{Deserialize, Serialize};

use crate::canon::fmt_num;

/// A reference to one parameter of one scene object, written `object.param`.
///
/// Object names may themselves contain dots; the parameter is always the part
/// after the last dot.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ParamRef {
    pub object: String,
    pub param: String,
}

impl ParamRef {
    pub fn new(object: impl Into<String>, param: impl Into<String>) -> Self {
        Self {
            object: object.into(),
            param: param.into(),
        }
    }

    /// Splits `a.b.c` into object `a.b` and param `c`.
    pub fn parse(text: &str) -> Option<Self> {
        let (object, param) = text.rsplit_once('.')?;
        if !super::is_valid_name(object) || !super::is_valid_param(param) {
            return None;
        }
        Some(Self::new(object, param))
    }
}

impl fmt::Display for ParamRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.object, self.param)
    }
}

impl Serialize for ParamRef {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ParamRef {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        ParamRef::parse(&text)
            .ok_or_else(|| serde::de::Error::custom(format!("invalid parameter reference '{text}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
        }
    }

    fn precedence(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => 1,
            BinOp::Mul | BinOp::Div => 2,
        }
    }
}

/// Arithmetic over number literals and parameter references.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Ref(ParamRef),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("unresolved reference {0}")]
    Unresolved(ParamRef),
    #[error("{0} is not numeric")]
    NotNumeric(ParamRef),
    #[error("result is not a finite number")]
    NonFinite,
}

/// What a reference lookup found.
pub enum Lookup {
    Number(f64),
    Text,
    Missing,
}

impl Expr {
    pub fn refs(&self) -> Vec<&ParamRef> {
        let mut out = Vec::new();
        self.collect_refs(&mut out);
        out
    }

    fn collect_refs<'a>(&'a self, out: &mut Vec<&'a ParamRef>) {
        match self {
            Expr::Num(_) => {}
            Expr::Ref(r) => out.push(r),
            Expr::Neg(inner) => inner.collect_refs(out),
            Expr::Bin(_, lhs, rhs) => {
                lhs.collect_refs(out);
                rhs.collect_refs(out);
            }
        }
    }

    pub fn eval(&self, lookup: &dyn Fn(&ParamRef) -> Lookup) -> Result<f64, EvalError> {
        let value = match self {
            Expr::Num(n) => *n,
            Expr::Ref(r) => match lookup(r) {
                Lookup::Number(n) => n,
                Lookup::Text => return Err(EvalError::NotNumeric(r.clone())),
                Lookup::Missing => return Err(EvalError::Unresolved(r.clone())),
            },
            Expr::Neg(inner) => -inner.eval(lookup)?,
            Expr::Bin(op, lhs, rhs) => {
                let a = lhs.eval(lookup)?;
                let b = rhs.eval(lookup)?;
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => {
                        if b == 0.0 {
                            return Err(EvalError::DivisionByZero);
                        }
                        a / b
                    }
                }
            }
        };
        if value.is_finite() {
            Ok(value)
        } else {
            Err(EvalError::NonFinite)
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Num(_) | Expr::Ref(_) => 4,
            Expr::Neg(_) => 3,
            Expr::Bin(op, _, _) => op.precedence(),
        }
    }

    fn write_child(&self, f: &mut fmt::Formatter<'_>, parens: bool) -> fmt::Result {
        if parens {
            write!(f, "({self})")
        } else {
            write!(f, "{self}")
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(n) if *n < 0.0 => write!(f, "({})", fmt_num(*n)),
            Expr::Num(n) => f.write_str(&fmt_num(*n)),
            Expr::Ref(r) => write!(f, "{r}"),
            Expr::Neg(inner) => {
                f.write_str("-")?;
                inner.write_child(f, inner.precedence() < 3)
            }
            Expr::Bin(op, lhs, rhs) => {
                let p = op.precedence();
                lhs.write_child(f, lhs.precedence() < p)?;
                write!(f, " {} ", op.symbol())?;
                rhs.write_child(f, rhs.precedence() <= p)
            }
        }
    }
}
