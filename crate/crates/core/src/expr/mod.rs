//! Scalar expressions over the coordinates of a chart.
//!
//! An [`Expr`] is an immutable tree. Sub-trees are reference counted so
//! cloning is cheap and symbolic derivatives can share structure with the
//! expression they came from. All arithmetic helpers on `Expr` fold constants
//! as they build (`0*u -> 0`, `1*u -> u`, `2*3 -> 6`, ...); the parser does
//! not, so a parsed string maps to exactly the tree written down.

mod diff;
mod display;
mod parser;

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::Arc;

use thiserror::Error;

pub use parser::{parse, ParseError};

/// Unary operators understood by the DSL.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Neg,
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
    Abs,
}

impl UnaryOp {
    pub fn name(self) -> &'static str {
        match self {
            UnaryOp::Neg => "-",
            UnaryOp::Sin => "sin",
            UnaryOp::Cos => "cos",
            UnaryOp::Exp => "exp",
            UnaryOp::Log => "log",
            UnaryOp::Sqrt => "sqrt",
            UnaryOp::Abs => "abs",
        }
    }

    /// Looks up a named function (`sin`, `cos`, ...). `Neg` has no name.
    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "sin" => UnaryOp::Sin,
            "cos" => UnaryOp::Cos,
            "exp" => UnaryOp::Exp,
            "log" => UnaryOp::Log,
            "sqrt" => UnaryOp::Sqrt,
            "abs" => UnaryOp::Abs,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

/// Expression tree node.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Constant(f64),
    /// Index into the chart's coordinate list.
    Variable(usize),
    Unary(UnaryOp, Arc<Expr>),
    Binary(BinaryOp, Arc<Expr>, Arc<Expr>),
}

/// Failure while evaluating an expression at a point.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("point has {got} coordinates, expression needs variable index {index}")]
    Dimension { index: usize, got: usize },
    #[error("{what} at point {point:?}")]
    Domain { what: String, point: Vec<f64> },
}

impl EvalError {
    fn domain(what: impl Into<String>, point: &[f64]) -> Self {
        EvalError::Domain { what: what.into(), point: point.to_vec() }
    }
}

/// Ordered coordinate names of a single global chart.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Chart {
    var_names: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ChartError {
    #[error("chart needs at least one coordinate")]
    Empty,
    #[error("duplicate coordinate name `{0}`")]
    Duplicate(String),
    #[error("`{0}` is not a valid coordinate name")]
    InvalidName(String),
}

impl Chart {
    pub fn new<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Result<Self, ChartError> {
        let var_names: Vec<String> = names.into_iter().map(Into::into).collect();
        if var_names.is_empty() {
            return Err(ChartError::Empty);
        }
        for (i, name) in var_names.iter().enumerate() {
            let mut chars = name.chars();
            let valid = chars.next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
                && chars.all(|c| c.is_ascii_alphanumeric() || c == '_');
            if !valid || UnaryOp::from_name(name).is_some() {
                return Err(ChartError::InvalidName(name.clone()));
            }
            if var_names[..i].contains(name) {
                return Err(ChartError::Duplicate(name.clone()));
            }
        }
        Ok(Chart { var_names })
    }

    /// Default coordinate names: `x`; `x y`; `x y z`; `x1 .. xn` beyond three.
    pub fn with_dim(dim: usize) -> Result<Self, ChartError> {
        match dim {
            0 => Err(ChartError::Empty),
            1..=3 => Chart::new(["x", "y", "z"].into_iter().take(dim)),
            _ => Chart::new((1..=dim).map(|i| format!("x{i}"))),
        }
    }

    pub fn dim(&self) -> usize {
        self.var_names.len()
    }

    pub fn var_names(&self) -> &[String] {
        &self.var_names
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.var_names.iter().position(|v| v == name)
    }
}

impl Expr {
    pub fn constant(value: f64) -> Self {
        Expr::Constant(value)
    }

    pub fn var(index: usize) -> Self {
        Expr::Variable(index)
    }

    pub fn zero() -> Self {
        Expr::Constant(0.0)
    }

    pub fn one() -> Self {
        Expr::Constant(1.0)
    }

    pub fn as_constant(&self) -> Option<f64> {
        match self {
            Expr::Constant(c) => Some(*c),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_constant() == Some(0.0)
    }

    pub fn is_one(&self) -> bool {
        self.as_constant() == Some(1.0)
    }

    /// Number of nodes in the tree, counting shared sub-trees once per use.
    pub fn node_count(&self) -> usize {
        match self {
            Expr::Constant(_) | Expr::Variable(_) => 1,
            Expr::Unary(_, a) => 1 + a.node_count(),
            Expr::Binary(_, a, b) => 1 + a.node_count() + b.node_count(),
        }
    }

    /// Largest variable index referenced, if any.
    pub fn max_var(&self) -> Option<usize> {
        match self {
            Expr::Constant(_) => None,
            Expr::Variable(i) => Some(*i),
            Expr::Unary(_, a) => a.max_var(),
            Expr::Binary(_, a, b) => a.max_var().max(b.max_var()),
        }
    }

    pub fn is_constant_tree(&self) -> bool {
        self.max_var().is_none()
    }

    /// Applies a unary operator, folding constants and double negation.
    pub fn unary(op: UnaryOp, arg: Expr) -> Expr {
        if let Expr::Constant(c) = arg {
            if let Some(v) = fold_unary(op, c) {
                return Expr::Constant(v);
            }
        }
        match (op, &arg) {
            (UnaryOp::Neg, Expr::Unary(UnaryOp::Neg, inner)) => (**inner).clone(),
            (UnaryOp::Abs, Expr::Unary(UnaryOp::Abs, _)) => arg,
            _ => Expr::Unary(op, Arc::new(arg)),
        }
    }

    pub fn sin(self) -> Expr {
        Expr::unary(UnaryOp::Sin, self)
    }

    pub fn cos(self) -> Expr {
        Expr::unary(UnaryOp::Cos, self)
    }

    pub fn exp(self) -> Expr {
        Expr::unary(UnaryOp::Exp, self)
    }

    pub fn ln(self) -> Expr {
        Expr::unary(UnaryOp::Log, self)
    }

    pub fn sqrt(self) -> Expr {
        Expr::unary(UnaryOp::Sqrt, self)
    }

    pub fn abs(self) -> Expr {
        Expr::unary(UnaryOp::Abs, self)
    }

    /// `self ^ exponent` with a constant exponent.
    pub fn powf(self, exponent: f64) -> Expr {
        Expr::binary(BinaryOp::Pow, self, Expr::Constant(exponent))
    }

    /// Builds a binary node with constant folding and unit/zero elimination.
    pub fn binary(op: BinaryOp, lhs: Expr, rhs: Expr) -> Expr {
        use BinaryOp::*;
        if let (Some(a), Some(b)) = (lhs.as_constant(), rhs.as_constant()) {
            if let Some(v) = fold_binary(op, a, b) {
                return Expr::Constant(v);
            }
        }
        match op {
            Add if lhs.is_zero() => rhs,
            Add | Sub if rhs.is_zero() => lhs,
            Add => match rhs {
                Expr::Unary(UnaryOp::Neg, inner) => Expr::Binary(Sub, Arc::new(lhs), inner),
                _ => Expr::Binary(Add, Arc::new(lhs), Arc::new(rhs)),
            },
            Sub if lhs.is_zero() => -rhs,
            Sub => match rhs {
                Expr::Unary(UnaryOp::Neg, inner) => Expr::Binary(Add, Arc::new(lhs), inner),
                _ => Expr::Binary(Sub, Arc::new(lhs), Arc::new(rhs)),
            },
            Mul if lhs.is_zero() || rhs.is_zero() => Expr::zero(),
            Mul if lhs.is_one() => rhs,
            Mul if rhs.is_one() => lhs,
            Mul if lhs.as_constant() == Some(-1.0) => -rhs,
            Mul if rhs.as_constant() == Some(-1.0) => -lhs,
            Mul => fold_mul(lhs, rhs),
            Div if lhs.is_zero() && !rhs.is_zero() => Expr::zero(),
            Div if rhs.is_one() => lhs,
            Div if rhs.as_constant() == Some(-1.0) => -lhs,
            Pow if rhs.is_zero() => Expr::one(),
            Pow if rhs.is_one() => lhs,
            Pow => match (&lhs, rhs.as_constant()) {
                // (u^a)^b = u^(ab) only when no sign information is lost.
                (Expr::Binary(Pow, base, inner), Some(b))
                    if inner.as_constant().is_some_and(|a| a.fract() == 0.0 && b.fract() == 0.0) =>
                {
                    let a = inner.as_constant().unwrap_or(1.0);
                    Expr::binary(Pow, (**base).clone(), Expr::Constant(a * b))
                }
                _ => Expr::Binary(Pow, Arc::new(lhs), Arc::new(rhs)),
            },
            _ => Expr::Binary(op, Arc::new(lhs), Arc::new(rhs)),
        }
    }

    /// Evaluates the expression at `point` (one coordinate per chart variable).
    pub fn eval(&self, point: &[f64]) -> Result<f64, EvalError> {
        let value = self.eval_inner(point)?;
        if value.is_finite() {
            Ok(value)
        } else {
            Err(EvalError::domain("non-finite result", point))
        }
    }

    fn eval_inner(&self, point: &[f64]) -> Result<f64, EvalError> {
        match self {
            Expr::Constant(c) => Ok(*c),
            Expr::Variable(i) => point.get(*i).copied().ok_or(EvalError::Dimension { index: *i, got: point.len() }),
            Expr::Unary(op, a) => {
                let v = a.eval_inner(point)?;
                match op {
                    UnaryOp::Neg => Ok(-v),
                    UnaryOp::Sin => Ok(v.sin()),
                    UnaryOp::Cos => Ok(v.cos()),
                    UnaryOp::Exp => Ok(v.exp()),
                    UnaryOp::Log if v > 0.0 => Ok(v.ln()),
                    UnaryOp::Log => Err(EvalError::domain(format!("log of nonpositive value {v}"), point)),
                    UnaryOp::Sqrt if v >= 0.0 => Ok(v.sqrt()),
                    UnaryOp::Sqrt => Err(EvalError::domain(format!("sqrt of negative value {v}"), point)),
                    UnaryOp::Abs => Ok(v.abs()),
                }
            }
            Expr::Binary(op, a, b) => {
                let x = a.eval_inner(point)?;
                let y = b.eval_inner(point)?;
                match op {
                    BinaryOp::Add => Ok(x + y),
                    BinaryOp::Sub => Ok(x - y),
                    BinaryOp::Mul => Ok(x * y),
                    BinaryOp::Div if y == 0.0 => Err(EvalError::domain("division by zero", point)),
                    BinaryOp::Div => Ok(x / y),
                    BinaryOp::Pow => eval_pow(x, y, point),
                }
            }
        }
    }

    /// Exact partial derivative with respect to coordinate `var`.
    pub fn diff(&self, var: usize) -> Expr {
        diff::derivative(self, var)
    }

    /// Logarithmic derivative `∂_var(u) / u`, built structurally so that
    /// `exp`, powers and products cancel against their own derivatives.
    pub fn log_diff(&self, var: usize) -> Expr {
        diff::log_derivative(self, var)
    }

    /// Renders with the given chart's variable names.
    pub fn display<'a>(&'a self, chart: &'a Chart) -> impl fmt::Display + 'a {
        display::Named { expr: self, names: chart.var_names() }
    }
}

fn fold_unary(op: UnaryOp, c: f64) -> Option<f64> {
    let v = match op {
        UnaryOp::Neg => -c,
        UnaryOp::Sin => c.sin(),
        UnaryOp::Cos => c.cos(),
        UnaryOp::Exp => c.exp(),
        UnaryOp::Log => c.ln(),
        UnaryOp::Sqrt => c.sqrt(),
        UnaryOp::Abs => c.abs(),
    };
    v.is_finite().then_some(v)
}

fn fold_binary(op: BinaryOp, a: f64, b: f64) -> Option<f64> {
    let v = match op {
        BinaryOp::Add => a + b,
        BinaryOp::Sub => a - b,
        BinaryOp::Mul => a * b,
        BinaryOp::Div if b == 0.0 => return None,
        BinaryOp::Div => a / b,
        BinaryOp::Pow => eval_pow(a, b, &[]).ok()?,
    };
    v.is_finite().then_some(v)
}

/// Pulls constant factors to the front: `c1 * (c2 * u) -> (c1 c2) * u`,
/// `u * c -> c * u`, `(-a) * b -> -(a b)`.
fn fold_mul(lhs: Expr, rhs: Expr) -> Expr {
    match (lhs, rhs) {
        (Expr::Unary(UnaryOp::Neg, a), b) => -Expr::binary(BinaryOp::Mul, (*a).clone(), b),
        (a, Expr::Unary(UnaryOp::Neg, b)) => -Expr::binary(BinaryOp::Mul, a, (*b).clone()),
        (Expr::Constant(c1), Expr::Binary(BinaryOp::Mul, a, b)) if a.as_constant().is_some() => {
            let c2 = a.as_constant().unwrap_or(1.0);
            Expr::binary(BinaryOp::Mul, Expr::Constant(c1 * c2), (*b).clone())
        }
        (a, Expr::Constant(c)) => Expr::binary(BinaryOp::Mul, Expr::Constant(c), a),
        (a, b) => Expr::Binary(BinaryOp::Mul, Arc::new(a), Arc::new(b)),
    }
}

fn eval_pow(base: f64, exponent: f64, point: &[f64]) -> Result<f64, EvalError> {
    if base < 0.0 && exponent.fract() != 0.0 {
        return Err(EvalError::domain(format!("negative base {base} raised to fractional power {exponent}"), point));
    }
    if base == 0.0 && exponent < 0.0 {
        return Err(EvalError::domain("zero raised to a negative power", point));
    }
    if exponent.fract() == 0.0 && exponent.abs() <= i32::MAX as f64 {
        Ok(base.powi(exponent as i32))
    } else {
        Ok(base.powf(exponent))
    }
}

impl Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::unary(UnaryOp::Neg, self)
    }
}

macro_rules! binary_ops {
    ($($trait:ident $method:ident $op:ident),*) => {$(
        impl $trait for Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                Expr::binary(BinaryOp::$op, self, rhs)
            }
        }
        impl $trait<f64> for Expr {
            type Output = Expr;
            fn $method(self, rhs: f64) -> Expr {
                Expr::binary(BinaryOp::$op, self, Expr::Constant(rhs))
            }
        }
        impl $trait<Expr> for f64 {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                Expr::binary(BinaryOp::$op, Expr::Constant(self), rhs)
            }
        }
        impl $trait<&Expr> for &Expr {
            type Output = Expr;
            fn $method(self, rhs: &Expr) -> Expr {
                Expr::binary(BinaryOp::$op, self.clone(), rhs.clone())
            }
        }
    )*};
}

binary_ops!(Add add Add, Sub sub Sub, Mul mul Mul, Div div Div);

impl From<f64> for Expr {
    fn from(value: f64) -> Self {
        Expr::Constant(value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x() -> Expr {
        Expr::var(0)
    }

    #[test]
    fn chart_defaults() {
        assert_eq!(Chart::with_dim(1).unwrap().var_names(), ["x"]);
        assert_eq!(Chart::with_dim(3).unwrap().var_names(), ["x", "y", "z"]);
        assert_eq!(Chart::with_dim(4).unwrap().var_names()[3], "x4");
        assert_eq!(Chart::new(["x", "x"]), Err(ChartError::Duplicate("x".into())));
        assert_eq!(Chart::new(["sin"]), Err(ChartError::InvalidName("sin".into())));
        assert!(Chart::with_dim(0).is_err());
    }

    #[test]
    fn folding_rules() {
        assert_eq!(Expr::zero() * x(), Expr::zero());
        assert_eq!(Expr::one() * x(), x());
        assert_eq!(x() * 1.0, x());
        assert_eq!(Expr::constant(2.0) * Expr::constant(3.0), Expr::constant(6.0));
        assert_eq!(-(-x()), x());
        assert_eq!(x() + Expr::zero(), x());
        assert_eq!(Expr::zero() - x(), -x());
        assert_eq!(x().powf(1.0), x());
        assert_eq!(x().powf(0.0), Expr::one());
        assert_eq!(2.0 * (3.0 * x()), 6.0 * x());
        assert_eq!(x() * 2.0, 2.0 * x());
        assert_eq!(x() + (-x().sin()), x() - x().sin());
    }

    #[test]
    fn eval_basics() {
        let e = x().powf(2.0);
        assert_eq!(e.eval(&[3.0]).unwrap(), 9.0);
        let g = (-(x().powf(2.0))).exp();
        assert!((g.eval(&[1.0]).unwrap() - (-1.0f64).exp()).abs() < 1e-16);
    }

    #[test]
    fn eval_domain_errors_carry_point() {
        let e = Expr::one() / x();
        match e.eval(&[0.0]) {
            Err(EvalError::Domain { point, .. }) => assert_eq!(point, vec![0.0]),
            other => panic!("expected domain error, got {other:?}"),
        }
        assert!(x().ln().eval(&[-1.0]).is_err());
        assert!(x().sqrt().eval(&[-1.0]).is_err());
        assert!(x().powf(-0.5).eval(&[-2.0]).is_err());
        assert!(x().powf(-1.0).eval(&[0.0]).is_err());
        assert!(x().exp().exp().eval(&[10.0]).is_err());
        assert!(matches!(Expr::var(1).eval(&[0.0]), Err(EvalError::Dimension { .. })));
    }

    #[test]
    fn negative_base_integer_power() {
        assert_eq!(x().powf(3.0).eval(&[-2.0]).unwrap(), -8.0);
        assert_eq!(x().powf(-2.0).eval(&[-2.0]).unwrap(), 0.25);
    }
}
