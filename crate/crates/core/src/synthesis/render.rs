//! Expression text for synthesized coefficients.
//!
//! Simulation never goes through here; this only regenerates readable
//! formulas (and hand-entered-style definition files) from `M` and `u`.
//! Simplification is local constant folding and identity elimination, not
//! a canonical form.

use thiserror::Error;

use super::Synthesizer;
use crate::expr::{BinOp, Expr, Func};
use crate::geometry::{chain_vectors, special_vectors, supplemented_vectors, BasisKind};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum RenderError {
    #[error("projected bases are selected point by point and have no single closed form; use basis \"general\" or \"special\"")]
    Projected,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Wrt {
    Time,
    /// 1-based.
    Var(usize),
}

/// Closed-form coefficients of a synthesized system.
#[derive(Clone, Debug, PartialEq)]
pub struct RenderedSystem {
    /// Stratonovich drift `a`.
    pub stratonovich_drift: Vec<Expr>,
    /// Itô drift `f = a + Σ`.
    pub ito_drift: Vec<Expr>,
    pub correction: Vec<Expr>,
    /// One vector per noise column.
    pub diffusion: Vec<Vec<Expr>>,
}

pub fn render(synth: &Synthesizer) -> Result<RenderedSystem, RenderError> {
    let spec = &synth.spec;
    let n = spec.n();
    let m = spec.first_integral();
    let g: Vec<Expr> = (1..=n).map(|i| derivative(m, Wrt::Var(i))).collect();
    let pattern = basis_pattern(spec.kind(), n)?;
    let vectors: Vec<Vec<Expr>> = pattern
        .iter()
        .map(|row| row.iter().map(|e| e.instantiate(&g)).collect())
        .collect();

    let combine = |l: usize, start: Vec<Expr>| {
        let mut out = start;
        for (j, _, u) in synth.choice.entries().filter(|e| e.1 == l) {
            for (o, v) in out.iter_mut().zip(&vectors[j - 1]) {
                *o = add(o.clone(), mul(u.clone(), v.clone()));
            }
        }
        out
    };

    let mut n0 = vec![Expr::Const(0.0); n];
    if spec.time_dependent() {
        let p = spec.pivot();
        n0[p] = neg(div(derivative(m, Wrt::Time), g[p].clone()));
    }
    let a = combine(0, n0);
    let diffusion: Vec<Vec<Expr>> = (1..=synth.s())
        .map(|l| combine(l, vec![Expr::Const(0.0); n]))
        .collect();
    let correction = correction_of(&diffusion, n);
    let ito = a
        .iter()
        .zip(&correction)
        .map(|(a, c)| add(a.clone(), c.clone()))
        .collect();
    Ok(RenderedSystem {
        stratonovich_drift: a,
        ito_drift: ito,
        correction,
        diffusion,
    })
}

/// `½ Σ_l (∂σ_{*l}/∂x) σ_{*l}` as expressions.
pub fn correction_of(diffusion: &[Vec<Expr>], n: usize) -> Vec<Expr> {
    (0..n)
        .map(|i| {
            let mut acc = Expr::Const(0.0);
            for col in diffusion {
                for (k, sk) in col.iter().enumerate() {
                    acc = add(acc, mul(derivative(&col[i], Wrt::Var(k + 1)), sk.clone()));
                }
            }
            mul(Expr::Const(0.5), acc)
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Slot {
    Zero,
    One,
    Grad { index: usize, negative: bool },
}

impl Slot {
    fn instantiate(self, g: &[Expr]) -> Expr {
        match self {
            Slot::Zero => Expr::Const(0.0),
            Slot::One => Expr::Const(1.0),
            Slot::Grad { index, negative: false } => g[index].clone(),
            Slot::Grad { index, negative: true } => neg(g[index].clone()),
        }
    }
}

/// Structure of the basis: every entry is `0`, `1` or `±g_k`. Recovered by
/// running the numeric builder on the probe `g_k = k + 2`.
fn basis_pattern(kind: &BasisKind, n: usize) -> Result<Vec<Vec<Slot>>, RenderError> {
    let probe: Vec<f64> = (0..n).map(|k| k as f64 + 2.0).collect();
    let vectors = match kind {
        BasisKind::General | BasisKind::TimeExtended => chain_vectors(&probe),
        BasisKind::Special2 | BasisKind::Special4 | BasisKind::Special8 => {
            special_vectors(&probe).expect("special dimension")
        }
        BasisKind::Supplemented(layout) => supplemented_vectors(&probe, layout),
        BasisKind::Projected(_) => return Err(RenderError::Projected),
    };
    Ok(vectors
        .iter()
        .map(|v| {
            v.iter()
                .map(|&c| match c {
                    c if c == 0.0 => Slot::Zero,
                    c if c == 1.0 => Slot::One,
                    c => Slot::Grad {
                        index: (c.abs() - 2.0) as usize,
                        negative: c < 0.0,
                    },
                })
                .collect()
        })
        .collect())
}

fn depends_on(e: &Expr, wrt: Wrt) -> bool {
    match e {
        Expr::Const(_) => false,
        Expr::Time => wrt == Wrt::Time,
        Expr::Var(i) => wrt == Wrt::Var(*i),
        Expr::Neg(a) | Expr::Call(_, a) => depends_on(a, wrt),
        Expr::Binary(_, a, b) => depends_on(a, wrt) || depends_on(b, wrt),
    }
}

/// Symbolic partial derivative.
pub fn derivative(e: &Expr, wrt: Wrt) -> Expr {
    if !depends_on(e, wrt) {
        return Expr::Const(0.0);
    }
    let d = |e: &Expr| derivative(e, wrt);
    match e {
        Expr::Const(_) => Expr::Const(0.0),
        Expr::Time | Expr::Var(_) => Expr::Const(1.0),
        Expr::Neg(a) => neg(d(a)),
        Expr::Binary(op, a, b) => {
            let (a, b) = (a.as_ref(), b.as_ref());
            match op {
                BinOp::Add => add(d(a), d(b)),
                BinOp::Sub => sub(d(a), d(b)),
                BinOp::Mul => add(mul(d(a), b.clone()), mul(a.clone(), d(b))),
                BinOp::Div => {
                    if !depends_on(b, wrt) {
                        div(d(a), b.clone())
                    } else {
                        div(
                            sub(mul(d(a), b.clone()), mul(a.clone(), d(b))),
                            pow(b.clone(), Expr::Const(2.0)),
                        )
                    }
                }
                BinOp::Pow => match b.constant_value() {
                    Some(c) => mul(
                        mul(Expr::Const(c), pow(a.clone(), Expr::Const(c - 1.0))),
                        d(a),
                    ),
                    None => mul(
                        e.clone(),
                        add(
                            mul(d(b), call(Func::Ln, a.clone())),
                            div(mul(b.clone(), d(a)), a.clone()),
                        ),
                    ),
                },
            }
        }
        Expr::Call(f, a) => {
            let inner = a.as_ref().clone();
            let outer = match f {
                Func::Sin => call(Func::Cos, inner),
                Func::Cos => neg(call(Func::Sin, inner)),
                Func::Sinh => call(Func::Cosh, inner),
                Func::Cosh => call(Func::Sinh, inner),
                Func::Tanh => sub(Expr::Const(1.0), pow(e.clone(), Expr::Const(2.0))),
                Func::Exp => e.clone(),
                Func::Ln => div(Expr::Const(1.0), inner),
                Func::Sqrt => div(Expr::Const(1.0), mul(Expr::Const(2.0), e.clone())),
                Func::Abs => div(inner, e.clone()),
            };
            mul(outer, d(a))
        }
    }
}

fn bin(op: BinOp, a: Expr, b: Expr) -> Expr {
    Expr::Binary(op, Box::new(a), Box::new(b))
}

fn as_const(e: &Expr) -> Option<f64> {
    match e {
        Expr::Const(c) => Some(*c),
        Expr::Neg(a) => as_const(a).map(|c| -c),
        _ => None,
    }
}

pub fn neg(a: Expr) -> Expr {
    match a {
        Expr::Const(c) => Expr::Const(-c),
        Expr::Neg(inner) => *inner,
        Expr::Binary(BinOp::Sub, x, y) => bin(BinOp::Sub, *y, *x),
        other => Expr::Neg(Box::new(other)),
    }
}

pub fn add(a: Expr, b: Expr) -> Expr {
    match (as_const(&a), as_const(&b)) {
        (Some(x), Some(y)) => Expr::Const(x + y),
        (Some(x), _) if x == 0.0 => b,
        (_, Some(y)) if y == 0.0 => a,
        (_, Some(y)) if y < 0.0 => bin(BinOp::Sub, a, Expr::Const(-y)),
        _ => match b {
            Expr::Neg(inner) => sub(a, *inner),
            b => bin(BinOp::Add, a, b),
        },
    }
}

pub fn sub(a: Expr, b: Expr) -> Expr {
    match (as_const(&a), as_const(&b)) {
        (Some(x), Some(y)) => Expr::Const(x - y),
        (_, Some(y)) if y == 0.0 => a,
        (Some(x), _) if x == 0.0 => neg(b),
        _ if a == b => Expr::Const(0.0),
        _ => match b {
            Expr::Neg(inner) => add(a, *inner),
            b => bin(BinOp::Sub, a, b),
        },
    }
}

pub fn mul(a: Expr, b: Expr) -> Expr {
    match (as_const(&a), as_const(&b)) {
        (Some(x), Some(y)) => Expr::Const(x * y),
        (Some(x), _) | (_, Some(x)) if x == 0.0 => Expr::Const(0.0),
        (Some(x), _) if x == 1.0 => b,
        (_, Some(y)) if y == 1.0 => a,
        (Some(x), _) if x == -1.0 => neg(b),
        (_, Some(y)) if y == -1.0 => neg(a),
        (None, Some(_)) => mul(b, a),
        (Some(x), None) => match b {
            // fold c·(d·e) into (c·d)·e
            Expr::Binary(BinOp::Mul, l, r) if as_const(&l).is_some() => {
                mul(Expr::Const(x * as_const(&l).unwrap()), *r)
            }
            Expr::Neg(inner) => mul(Expr::Const(-x), *inner),
            b => bin(BinOp::Mul, a, b),
        },
        (None, None) => match (a, b) {
            (Expr::Neg(x), y) | (y, Expr::Neg(x)) => neg(mul(*x, y)),
            (a, b) => bin(BinOp::Mul, a, b),
        },
    }
}

pub fn div(a: Expr, b: Expr) -> Expr {
    match (as_const(&a), as_const(&b)) {
        (Some(x), Some(y)) if y != 0.0 => Expr::Const(x / y),
        (Some(x), _) if x == 0.0 => Expr::Const(0.0),
        (_, Some(y)) if y == 1.0 => a,
        (_, Some(y)) if y == -1.0 => neg(a),
        _ => bin(BinOp::Div, a, b),
    }
}

pub fn pow(a: Expr, b: Expr) -> Expr {
    match (as_const(&a), as_const(&b)) {
        (_, Some(y)) if y == 0.0 => Expr::Const(1.0),
        (_, Some(y)) if y == 1.0 => a,
        (Some(x), Some(y)) if x > 0.0 || y.fract() == 0.0 => Expr::Const(x.powf(y)),
        _ => bin(BinOp::Pow, a, b),
    }
}

pub fn call(f: Func, a: Expr) -> Expr {
    match (f, as_const(&a)) {
        (Func::Sin | Func::Sinh | Func::Tanh, Some(x)) if x == 0.0 => Expr::Const(0.0),
        (Func::Cos | Func::Cosh | Func::Exp, Some(x)) if x == 0.0 => Expr::Const(1.0),
        _ => Expr::Call(f, Box::new(a)),
    }
}
