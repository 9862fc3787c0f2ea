//! Scalar expressions in `t` and `x1 … xn`.
//!
//! Expressions are parsed once and evaluated over any [`Scalar`], so the same
//! tree yields plain values, first derivatives (`Dual<f64>`) and second
//! derivatives (`Dual<Dual<f64>>`).

mod lexer;
mod parser;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::autodiff::Scalar;

pub use lexer::{tokenize, Token, TokenKind};
pub use parser::parse;

/// Integer exponents up to this magnitude are expanded into products.
const MAX_EXPANDED_POWER: i32 = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
        }
    }

    fn precedence(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => 1,
            BinOp::Mul | BinOp::Div => 2,
            BinOp::Pow => 4,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Sinh,
    Cosh,
    Tanh,
    Exp,
    Ln,
    Sqrt,
    Abs,
}

impl Func {
    pub const ALL: [Func; 9] = [
        Func::Sin,
        Func::Cos,
        Func::Sinh,
        Func::Cosh,
        Func::Tanh,
        Func::Exp,
        Func::Ln,
        Func::Sqrt,
        Func::Abs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Sinh => "sinh",
            Func::Cosh => "cosh",
            Func::Tanh => "tanh",
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == name)
    }
}

/// Parsed expression tree. Variables are 1-based (`Var(1)` is `x1`).
#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Const(f64),
    Time,
    Var(usize),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum ParseError {
    #[error("unexpected character {ch:?} at offset {offset}")]
    Lexical { offset: usize, ch: char },
    #[error("invalid number {text:?} at offset {offset}")]
    BadNumber { offset: usize, text: String },
    #[error("unexpected {found} at offset {offset}; expected {}", expected.join(" or "))]
    Unexpected {
        offset: usize,
        found: String,
        expected: Vec<String>,
    },
    #[error("unknown identifier `{name}` at offset {offset} (variables are t, x1, x2, ...)")]
    UnknownIdentifier { offset: usize, name: String },
}

impl ParseError {
    pub fn offset(&self) -> usize {
        match self {
            ParseError::Lexical { offset, .. }
            | ParseError::BadNumber { offset, .. }
            | ParseError::Unexpected { offset, .. }
            | ParseError::UnknownIdentifier { offset, .. } => *offset,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DomainError {
    DivisionByZero,
    LogOfNonPositive,
    SqrtOfNegative,
    NegativeBaseFractionalPower,
    NonPositiveBaseVariablePower,
}

impl fmt::Display for DomainError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DomainError::DivisionByZero => "division by zero",
            DomainError::LogOfNonPositive => "logarithm of a non-positive value",
            DomainError::SqrtOfNegative => "square root of a negative value",
            DomainError::NegativeBaseFractionalPower => "negative base raised to a fractional power",
            DomainError::NonPositiveBaseVariablePower => {
                "non-positive base raised to a variable power"
            }
        })
    }
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum EvalError {
    #[error("{kind} in `{node}`")]
    Domain { kind: DomainError, node: String },
    #[error("variable x{index} is not bound (dimension {dim})")]
    Unbound { index: usize, dim: usize },
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("expression uses x{index} but the system dimension is {dim}")]
pub struct BindError {
    pub index: usize,
    pub dim: usize,
}

/// Variables syntactically present in an expression.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FreeVariables {
    pub time: bool,
    /// 1-based indices.
    pub vars: BTreeSet<usize>,
}

impl FreeVariables {
    pub fn is_empty(&self) -> bool {
        !self.time && self.vars.is_empty()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.vars.contains(&index)
    }
}

impl Expr {
    pub fn free_variables(&self) -> FreeVariables {
        let mut fv = FreeVariables::default();
        self.collect_vars(&mut fv);
        fv
    }

    fn collect_vars(&self, fv: &mut FreeVariables) {
        match self {
            Expr::Const(_) => {}
            Expr::Time => fv.time = true,
            Expr::Var(i) => {
                fv.vars.insert(*i);
            }
            Expr::Neg(e) | Expr::Call(_, e) => e.collect_vars(fv),
            Expr::Binary(_, a, b) => {
                a.collect_vars(fv);
                b.collect_vars(fv);
            }
        }
    }

    /// Largest variable index used, 0 if none.
    pub fn max_index(&self) -> usize {
        self.free_variables().vars.last().copied().unwrap_or(0)
    }

    /// Checks every variable index lies in `1..=dim`.
    pub fn check_dimension(&self, dim: usize) -> Result<(), BindError> {
        match self.max_index() {
            i if i > dim => Err(BindError { index: i, dim }),
            _ => Ok(()),
        }
    }

    /// Value of the expression if it contains no variables.
    pub fn constant_value(&self) -> Option<f64> {
        match self {
            Expr::Const(v) => Some(*v),
            e if e.is_constant() => e.eval::<f64>(0.0, &[]).ok(),
            _ => None,
        }
    }

    pub fn is_constant(&self) -> bool {
        match self {
            Expr::Const(_) => true,
            Expr::Time | Expr::Var(_) => false,
            Expr::Neg(e) | Expr::Call(_, e) => e.is_constant(),
            Expr::Binary(_, a, b) => a.is_constant() && b.is_constant(),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Const(v) if *v == 0.0)
    }

    pub fn eval<S: Scalar>(&self, t: S, x: &[S]) -> Result<S, EvalError> {
        match self {
            Expr::Const(v) => Ok(S::from_f64(*v)),
            Expr::Time => Ok(t),
            Expr::Var(i) => x.get(i.wrapping_sub(1)).copied().ok_or(EvalError::Unbound {
                index: *i,
                dim: x.len(),
            }),
            Expr::Neg(e) => Ok(-e.eval(t, x)?),
            Expr::Binary(op, a, b) => {
                if *op == BinOp::Pow {
                    return self.eval_pow(a, b, t, x);
                }
                let lhs = a.eval(t, x)?;
                let rhs = b.eval(t, x)?;
                Ok(match op {
                    BinOp::Add => lhs + rhs,
                    BinOp::Sub => lhs - rhs,
                    BinOp::Mul => lhs * rhs,
                    BinOp::Div => {
                        if rhs.re() == 0.0 {
                            return Err(self.domain(DomainError::DivisionByZero));
                        }
                        lhs / rhs
                    }
                    BinOp::Pow => unreachable!(),
                })
            }
            Expr::Call(func, e) => {
                let v = e.eval(t, x)?;
                Ok(match func {
                    Func::Sin => v.sin(),
                    Func::Cos => v.cos(),
                    Func::Sinh => v.sinh(),
                    Func::Cosh => v.cosh(),
                    Func::Tanh => v.tanh(),
                    Func::Exp => v.exp(),
                    Func::Ln => {
                        if v.re() <= 0.0 {
                            return Err(self.domain(DomainError::LogOfNonPositive));
                        }
                        v.ln()
                    }
                    Func::Sqrt => {
                        if v.re() < 0.0 {
                            return Err(self.domain(DomainError::SqrtOfNegative));
                        }
                        v.sqrt()
                    }
                    Func::Abs => v.abs(),
                })
            }
        }
    }

    fn eval_pow<S: Scalar>(&self, base: &Expr, exponent: &Expr, t: S, x: &[S]) -> Result<S, EvalError> {
        let b = base.eval(t, x)?;
        match exponent.constant_value() {
            Some(c) if c.fract() == 0.0 && c.abs() <= MAX_EXPANDED_POWER as f64 => {
                let k = c as i32;
                let mut acc = S::one();
                for _ in 0..k.abs() {
                    acc = acc * b;
                }
                if k < 0 {
                    if acc.re() == 0.0 {
                        return Err(self.domain(DomainError::DivisionByZero));
                    }
                    acc = S::one() / acc;
                }
                Ok(acc)
            }
            Some(c) => {
                if b.re() < 0.0 && c.fract() != 0.0 {
                    return Err(self.domain(DomainError::NegativeBaseFractionalPower));
                }
                if b.re() == 0.0 && c < 0.0 {
                    return Err(self.domain(DomainError::DivisionByZero));
                }
                Ok(b.powf(c))
            }
            None => {
                if b.re() <= 0.0 {
                    return Err(self.domain(DomainError::NonPositiveBaseVariablePower));
                }
                let e = exponent.eval(t, x)?;
                Ok((e * b.ln()).exp())
            }
        }
    }

    fn domain(&self, kind: DomainError) -> EvalError {
        EvalError::Domain {
            kind,
            node: self.to_string(),
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Binary(op, _, _) => op.precedence(),
            Expr::Neg(_) => 3,
            Expr::Const(v) if *v < 0.0 || v.is_sign_negative() => 3,
            _ => 5,
        }
    }
}

impl FromStr for Expr {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse(s)
    }
}

fn write_child(f: &mut fmt::Formatter<'_>, e: &Expr, parens: bool) -> fmt::Result {
    if parens {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

/// Minimal-parenthesis rendering that parses back to the same tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(v) => {
                if v.is_sign_negative() {
                    write!(f, "-{}", -v)
                } else {
                    write!(f, "{v}")
                }
            }
            Expr::Time => f.write_str("t"),
            Expr::Var(i) => write!(f, "x{i}"),
            Expr::Neg(e) => {
                f.write_str("-")?;
                write_child(f, e, e.precedence() < 3)
            }
            Expr::Call(func, e) => write!(f, "{}({e})", func.name()),
            Expr::Binary(op, a, b) => {
                let p = op.precedence();
                if *op == BinOp::Pow {
                    write_child(f, a, a.precedence() <= p)?;
                    f.write_str("^")?;
                    write_child(f, b, b.precedence() < 3)
                } else {
                    write_child(f, a, a.precedence() < p)?;
                    write!(f, " {} ", op.symbol())?;
                    write_child(f, b, b.precedence() <= p)
                }
            }
        }
    }
}

impl Serialize for Expr {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Expr {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
