//! Forward-mode automatic differentiation.
//!
//! [`Dual`] carries a value and a single directional tangent. Because
//! `Dual<S>` is itself a [`Scalar`] whenever `S` is, nesting gives higher
//! derivatives: `Dual<Dual<f64>>` is what lets a diffusion column built from
//! the gradient of a first integral be differentiated once more.
//!
//! Gradients take one seeded pass per variable (slot 0 is time); with the
//! dimensions this crate targets (n ≤ 16) that is cheaper than carrying a
//! partials vector through every operation.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use nalgebra::DMatrix;

use crate::expr::{EvalError, Expr};

/// Numeric type an expression can be evaluated over.
pub trait Scalar:
    Copy
    + fmt::Debug
    + PartialEq
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn from_f64(v: f64) -> Self;

    /// Real (innermost value) part; used for domain checks and branching.
    fn re(&self) -> f64;

    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn sinh(self) -> Self;
    fn cosh(self) -> Self;
    fn tanh(self) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sqrt(self) -> Self;
    fn abs(self) -> Self;
    fn powf(self, exponent: f64) -> Self;

    fn zero() -> Self {
        Self::from_f64(0.0)
    }

    fn one() -> Self {
        Self::from_f64(1.0)
    }
}

impl Scalar for f64 {
    #[inline]
    fn from_f64(v: f64) -> Self {
        v
    }
    #[inline]
    fn re(&self) -> f64 {
        *self
    }
    #[inline]
    fn sin(self) -> Self {
        f64::sin(self)
    }
    #[inline]
    fn cos(self) -> Self {
        f64::cos(self)
    }
    #[inline]
    fn sinh(self) -> Self {
        f64::sinh(self)
    }
    #[inline]
    fn cosh(self) -> Self {
        f64::cosh(self)
    }
    #[inline]
    fn tanh(self) -> Self {
        f64::tanh(self)
    }
    #[inline]
    fn exp(self) -> Self {
        f64::exp(self)
    }
    #[inline]
    fn ln(self) -> Self {
        f64::ln(self)
    }
    #[inline]
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    #[inline]
    fn abs(self) -> Self {
        f64::abs(self)
    }
    #[inline]
    fn powf(self, exponent: f64) -> Self {
        f64::powf(self, exponent)
    }
}

/// Dual number `value + tangent·ε` with `ε² = 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dual<S> {
    pub value: S,
    pub tangent: S,
}

impl<S: Scalar> Dual<S> {
    pub fn new(value: S, tangent: S) -> Self {
        Self { value, tangent }
    }

    pub fn constant(value: S) -> Self {
        Self {
            value,
            tangent: S::zero(),
        }
    }

    pub fn variable(value: S) -> Self {
        Self {
            value,
            tangent: S::one(),
        }
    }

    #[inline]
    fn chain(self, value: S, derivative: S) -> Self {
        Self {
            value,
            tangent: derivative * self.tangent,
        }
    }
}

impl<S: Scalar> Add for Dual<S> {
    type Output = Self;
    #[inline]
    fn add(self, rhs: Self) -> Self {
        Self::new(self.value + rhs.value, self.tangent + rhs.tangent)
    }
}

impl<S: Scalar> Sub for Dual<S> {
    type Output = Self;
    #[inline]
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.value - rhs.value, self.tangent - rhs.tangent)
    }
}

impl<S: Scalar> Mul for Dual<S> {
    type Output = Self;
    #[inline]
    fn mul(self, rhs: Self) -> Self {
        Self::new(
            self.value * rhs.value,
            self.tangent * rhs.value + self.value * rhs.tangent,
        )
    }
}

impl<S: Scalar> Div for Dual<S> {
    type Output = Self;
    #[inline]
    fn div(self, rhs: Self) -> Self {
        let value = self.value / rhs.value;
        Self::new(value, (self.tangent - value * rhs.tangent) / rhs.value)
    }
}

impl<S: Scalar> Neg for Dual<S> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self::new(-self.value, -self.tangent)
    }
}

impl<S: Scalar> Scalar for Dual<S> {
    fn from_f64(v: f64) -> Self {
        Self::constant(S::from_f64(v))
    }

    fn re(&self) -> f64 {
        self.value.re()
    }

    fn sin(self) -> Self {
        self.chain(self.value.sin(), self.value.cos())
    }

    fn cos(self) -> Self {
        self.chain(self.value.cos(), -self.value.sin())
    }

    fn sinh(self) -> Self {
        self.chain(self.value.sinh(), self.value.cosh())
    }

    fn cosh(self) -> Self {
        self.chain(self.value.cosh(), self.value.sinh())
    }

    fn tanh(self) -> Self {
        let th = self.value.tanh();
        self.chain(th, S::one() - th * th)
    }

    fn exp(self) -> Self {
        let e = self.value.exp();
        self.chain(e, e)
    }

    fn ln(self) -> Self {
        self.chain(self.value.ln(), S::one() / self.value)
    }

    fn sqrt(self) -> Self {
        let r = self.value.sqrt();
        self.chain(r, S::one() / (S::from_f64(2.0) * r))
    }

    fn abs(self) -> Self {
        let sign = if self.value.re() > 0.0 {
            1.0
        } else if self.value.re() < 0.0 {
            -1.0
        } else {
            0.0
        };
        self.chain(self.value.abs(), S::from_f64(sign))
    }

    fn powf(self, exponent: f64) -> Self {
        self.chain(
            self.value.powf(exponent),
            S::from_f64(exponent) * self.value.powf(exponent - 1.0),
        )
    }
}

/// A scalar function of `(t, x)` that can be evaluated over any [`Scalar`].
pub trait ScalarField {
    fn dim(&self) -> usize;
    fn eval_at<S: Scalar>(&self, t: S, x: &[S]) -> Result<S, EvalError>;
}

/// A vector function of `(t, x)` with `dim()` components.
pub trait VectorField {
    fn dim(&self) -> usize;
    fn eval_at<S: Scalar>(&self, t: S, x: &[S]) -> Result<Vec<S>, EvalError>;
}

impl ScalarField for Expr {
    fn dim(&self) -> usize {
        self.max_index()
    }

    fn eval_at<S: Scalar>(&self, t: S, x: &[S]) -> Result<S, EvalError> {
        self.eval(t, x)
    }
}

impl VectorField for [Expr] {
    fn dim(&self) -> usize {
        self.len()
    }

    fn eval_at<S: Scalar>(&self, t: S, x: &[S]) -> Result<Vec<S>, EvalError> {
        self.iter().map(|e| e.eval(t, x)).collect()
    }
}

impl VectorField for Vec<Expr> {
    fn dim(&self) -> usize {
        self.len()
    }

    fn eval_at<S: Scalar>(&self, t: S, x: &[S]) -> Result<Vec<S>, EvalError> {
        self.as_slice().eval_at(t, x)
    }
}

/// Lifts `(t, x)` to duals with the given tangents.
pub fn seed<S: Scalar>(t: S, dt: S, x: &[S], dx: &[S]) -> (Dual<S>, Vec<Dual<S>>) {
    let xs = x
        .iter()
        .zip(dx)
        .map(|(&v, &d)| Dual::new(v, d))
        .collect();
    (Dual::new(t, dt), xs)
}

/// Directional derivative of a scalar field along `(dt, dx)`.
pub fn directional<F: ScalarField + ?Sized, S: Scalar>(
    f: &F,
    t: S,
    x: &[S],
    dt: S,
    dx: &[S],
) -> Result<Dual<S>, EvalError> {
    let (td, xd) = seed(t, dt, x, dx);
    f.eval_at(td, &xd)
}

/// Time derivative and spatial gradient of `f`, over any scalar type.
///
/// `needed` selects which slots to differentiate (slot 0 = t, slot i = x_i);
/// skipped slots are reported as exact zeros.
pub fn gradient_masked<F: ScalarField + ?Sized, S: Scalar>(
    f: &F,
    t: S,
    x: &[S],
    needed: &[bool],
) -> Result<(S, Vec<S>), EvalError> {
    let n = x.len();
    let mut xd: Vec<Dual<S>> = x.iter().map(|&v| Dual::constant(v)).collect();
    let mut g0 = S::zero();
    if needed.first().copied().unwrap_or(true) {
        g0 = f.eval_at(Dual::variable(t), &xd)?.tangent;
    }
    let mut grad = vec![S::zero(); n];
    for i in 0..n {
        if !needed.get(i + 1).copied().unwrap_or(true) {
            continue;
        }
        xd[i].tangent = S::one();
        grad[i] = f.eval_at(Dual::constant(t), &xd)?.tangent;
        xd[i].tangent = S::zero();
    }
    Ok((g0, grad))
}

/// `(∂f/∂t, ∇ₓf)` at a real point.
pub fn gradient<F: ScalarField + ?Sized>(
    f: &F,
    t: f64,
    x: &[f64],
) -> Result<(f64, Vec<f64>), EvalError> {
    gradient_masked(f, t, x, &[])
}

/// `∂F/∂x` at a point; entry `(i, j)` is `∂F_i/∂x_j`.
#[derive(Clone, Debug, PartialEq)]
pub struct JacobianMatrix(pub DMatrix<f64>);

impl JacobianMatrix {
    pub fn nrows(&self) -> usize {
        self.0.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.0.ncols()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.nrows())
            .map(|i| (0..self.ncols()).map(|j| self.0[(i, j)] * v[j]).sum())
            .collect()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }
}

/// Jacobian of a vector field with respect to `x`, column by column.
pub fn jacobian<F: VectorField + ?Sized>(
    field: &F,
    t: f64,
    x: &[f64],
) -> Result<JacobianMatrix, EvalError> {
    let n = x.len();
    let rows = field.dim();
    let mut m = DMatrix::zeros(rows, n);
    let mut xd: Vec<Dual<f64>> = x.iter().map(|&v| Dual::constant(v)).collect();
    for j in 0..n {
        xd[j].tangent = 1.0;
        let col = field.eval_at(Dual::constant(t), &xd)?;
        xd[j].tangent = 0.0;
        for (i, d) in col.iter().enumerate() {
            m[(i, j)] = d.tangent;
        }
    }
    Ok(JacobianMatrix(m))
}

/// `(∂F/∂x)·v` in a single dual pass seeded with `v`, over any scalar type.
pub fn jacvec_generic<F: VectorField + ?Sized, S: Scalar>(
    field: &F,
    t: S,
    x: &[S],
    v: &[S],
) -> Result<Vec<S>, EvalError> {
    let (td, xd) = seed(t, S::zero(), x, v);
    Ok(field
        .eval_at(td, &xd)?
        .into_iter()
        .map(|d| d.tangent)
        .collect())
}

pub fn jacvec<F: VectorField + ?Sized>(
    field: &F,
    t: f64,
    x: &[f64],
    v: &[f64],
) -> Result<Vec<f64>, EvalError> {
    jacvec_generic(field, t, x, v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn parse(s: &str) -> Expr {
        s.parse().unwrap()
    }

    #[test]
    fn catenoid_gradient() {
        let m = parse("x1^2 + x2^2 - cosh(x3)^2");
        let (g0, g) = gradient(&m, 0.0, &[1.0, 2.0, 0.0]).unwrap();
        assert_eq!(g0, 0.0);
        assert_eq!(g, vec![2.0, 4.0, 0.0]);
        let (_, g) = gradient(&m, 0.0, &[0.3, -0.2, 0.7]).unwrap();
        assert_relative_eq!(g[2], -(1.4f64).sinh(), max_relative = 1e-14);
    }

    #[test]
    fn parabola_generalized_gradient() {
        let m = parse("x1 + x2^2 + cos(2*t)");
        let t = std::f64::consts::FRAC_PI_4;
        let (g0, g) = gradient(&m, t, &[0.5, 1.5]).unwrap();
        assert_relative_eq!(g0, -2.0, max_relative = 1e-14);
        assert_eq!(g, vec![1.0, 3.0]);
    }

    #[test]
    fn stationary_point_has_zero_gradient() {
        let m = parse("(x1^2 + x2^2 + x3^2)/2");
        let (_, g) = gradient(&m, 0.0, &[0.0; 3]).unwrap();
        assert_eq!(g, vec![0.0; 3]);
    }

    fn sphere_sigma() -> Vec<Expr> {
        vec![parse("x2"), parse("-x1 - x3"), parse("x2")]
    }

    #[test]
    fn sphere_sigma_jacobian() {
        let j = jacobian(&sphere_sigma(), 0.0, &[0.3, 0.1, -0.4]).unwrap();
        let expected = [[0.0, 1.0, 0.0], [-1.0, 0.0, -1.0], [0.0, 1.0, 0.0]];
        for (i, row) in expected.iter().enumerate() {
            for (k, v) in row.iter().enumerate() {
                assert_eq!(j.get(i, k), *v);
            }
        }
    }

    #[test]
    fn zero_drift_jacobian() {
        let a = vec![parse("0"), parse("0"), parse("0")];
        let j = jacobian(&a, 1.0, &[1.0, 2.0, 3.0]).unwrap();
        assert!(j.as_matrix().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn identity_field_jacobian() {
        let f = vec![parse("x1"), parse("x2"), parse("x3")];
        let j = jacobian(&f, 0.0, &[4.0, 5.0, 6.0]).unwrap();
        assert_eq!(j.0, DMatrix::identity(3, 3));
    }

    #[test]
    fn sphere_sigma_jacvec_along_itself() {
        let x = [0.3, 0.1, -0.4];
        let s = sphere_sigma();
        let v = s.eval_at(0.0, &x).unwrap();
        let jv = jacvec(&s, 0.0, &x, &v).unwrap();
        assert_relative_eq!(jv[0], -x[0] - x[2], epsilon = 1e-15);
        assert_relative_eq!(jv[1], -2.0 * x[1], epsilon = 1e-15);
        assert_relative_eq!(jv[2], -x[0] - x[2], epsilon = 1e-15);
        assert_eq!(jacvec(&s, 0.0, &x, &[0.0; 3]).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn jacvec_with_unit_seed_is_a_column() {
        let f = vec![parse("sin(x1)*x2"), parse("exp(x2 - x1)"), parse("x1*x2*x3")];
        let x = [0.2, -0.7, 1.3];
        let j = jacobian(&f, 0.0, &x).unwrap();
        for col in 0..3 {
            let mut e = [0.0; 3];
            e[col] = 1.0;
            let v = jacvec(&f, 0.0, &x, &e).unwrap();
            for row in 0..3 {
                assert_eq!(v[row], j.get(row, col));
            }
        }
    }

    #[test]
    fn nested_duals_give_second_derivatives() {
        // d²/dx² sinh(x)^3 = 6 sinh(x) cosh²(x) + 3 sinh³(x)
        let f = parse("sinh(x1)^3");
        let x = 0.4f64;
        let inner = Dual::new(x, 1.0);
        let outer = Dual::new(inner, Dual::new(1.0, 0.0));
        let r = f.eval(Dual::constant(Dual::constant(0.0)), &[outer]).unwrap();
        let expected = 6.0 * x.sinh() * x.cosh().powi(2) + 3.0 * x.sinh().powi(3);
        assert_relative_eq!(r.tangent.tangent, expected, max_relative = 1e-13);
    }

    #[test]
    fn abs_and_sqrt_chain_rule() {
        let f = parse("abs(x1) + sqrt(x2)");
        let (_, g) = gradient(&f, 0.0, &[-2.0, 4.0]).unwrap();
        assert_eq!(g, vec![-1.0, 0.25]);
    }
}
