//! Recursive-descent parser.
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := primary ('^' unary)?
//! primary := number | 't' | 'x' index | func '(' expr ')' | '(' expr ')'
//! ```
//!
//! `^` binds tighter than unary minus, so `-x1^2` is `-(x1^2)`, and it is
//! right associative because its right operand is itself a `unary`.

use super::lexer::{tokenize, Token, TokenKind};
use super::{BinOp, Expr, Func, ParseError};

pub fn parse(source: &str) -> Result<Expr, ParseError> {
    let tokens = tokenize(source)?;
    let mut p = Parser {
        tokens,
        pos: 0,
        end: source.len(),
    };
    let e = p.expr()?;
    if let Some(tok) = p.peek() {
        return Err(ParseError::Unexpected {
            offset: tok.offset,
            found: tok.kind.describe(),
            expected: vec!["operator".into(), "end of input".into()],
        });
    }
    Ok(e)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn peek_kind(&self) -> Option<&TokenKind> {
        self.peek().map(|t| &t.kind)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn unexpected(&self, expected: &[&str]) -> ParseError {
        let (offset, found) = match self.peek() {
            Some(t) => (t.offset, t.kind.describe()),
            None => (self.end, "end of input".to_string()),
        };
        ParseError::Unexpected {
            offset,
            found,
            expected: expected.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek_kind() {
                Some(TokenKind::Plus) => BinOp::Add,
                Some(TokenKind::Minus) => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek_kind() {
                Some(TokenKind::Star) => BinOp::Mul,
                Some(TokenKind::Slash) => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if let Some(TokenKind::Minus) = self.peek_kind() {
            self.pos += 1;
            let inner = self.unary()?;
            return Ok(Expr::Neg(Box::new(inner)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        if let Some(TokenKind::Caret) = self.peek_kind() {
            self.pos += 1;
            let exponent = self.unary()?;
            return Ok(Expr::Binary(BinOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        const START: &[&str] = &["number", "variable", "function", "`(`", "`-`"];
        let Some(tok) = self.peek().cloned() else {
            return Err(self.unexpected(START));
        };
        match tok.kind {
            TokenKind::Number(v) => {
                self.pos += 1;
                Ok(Expr::Const(v))
            }
            TokenKind::LParen => {
                self.pos += 1;
                let inner = self.expr()?;
                self.expect_rparen()?;
                Ok(inner)
            }
            TokenKind::Ident(name) => {
                self.pos += 1;
                if name == "t" {
                    return Ok(Expr::Time);
                }
                if let Some(index) = variable_index(&name) {
                    return Ok(Expr::Var(index));
                }
                if let Some(func) = Func::from_name(&name) {
                    match self.peek_kind() {
                        Some(TokenKind::LParen) => self.pos += 1,
                        _ => return Err(self.unexpected(&["`(`"])),
                    }
                    if let Some(TokenKind::RParen) = self.peek_kind() {
                        return Err(self.unexpected(&["function argument"]));
                    }
                    let arg = self.expr()?;
                    self.expect_rparen()?;
                    return Ok(Expr::Call(func, Box::new(arg)));
                }
                Err(ParseError::UnknownIdentifier {
                    offset: tok.offset,
                    name,
                })
            }
            _ => Err(self.unexpected(START)),
        }
    }

    fn expect_rparen(&mut self) -> Result<(), ParseError> {
        match self.peek_kind() {
            Some(TokenKind::RParen) => {
                self.next();
                Ok(())
            }
            _ => Err(self.unexpected(&["`)`", "operator"])),
        }
    }
}

/// `x<i>` with `i ≥ 1` and no leading zero.
fn variable_index(name: &str) -> Option<usize> {
    let digits = name.strip_prefix('x')?;
    if digits.is_empty() || digits.starts_with('0') || !digits.bytes().all(|b| b.is_ascii_digit())
    {
        return None;
    }
    digits.parse().ok()
}
