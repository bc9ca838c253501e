use std::sync::Arc;

use super::{BinaryOp, Expr, UnaryOp};

pub(super) fn derivative(expr: &Expr, var: usize) -> Expr {
    match expr {
        Expr::Constant(_) => Expr::zero(),
        Expr::Variable(i) if *i == var => Expr::one(),
        Expr::Variable(_) => Expr::zero(),
        Expr::Unary(op, arg) => {
            let du = derivative(arg, var);
            if du.is_zero() {
                return Expr::zero();
            }
            let u = (**arg).clone();
            match op {
                UnaryOp::Neg => -du,
                UnaryOp::Sin => u.cos() * du,
                UnaryOp::Cos => -(u.sin() * du),
                UnaryOp::Exp => expr.clone() * du,
                UnaryOp::Log => du / u,
                UnaryOp::Sqrt => du / (2.0 * expr.clone()),
                // sign(u) = u/|u|, undefined (division by zero) at the kink
                UnaryOp::Abs => (u / expr.clone()) * du,
            }
        }
        Expr::Binary(op, a, b) => {
            let da = derivative(a, var);
            let db = derivative(b, var);
            let (u, v) = ((**a).clone(), (**b).clone());
            match op {
                BinaryOp::Add => da + db,
                BinaryOp::Sub => da - db,
                BinaryOp::Mul => da * v + u * db,
                BinaryOp::Div if db.is_zero() => da / v,
                BinaryOp::Div => (da * v.clone() - u * db) / v.powf(2.0),
                BinaryOp::Pow => match v.as_constant() {
                    Some(c) => {
                        if da.is_zero() {
                            Expr::zero()
                        } else {
                            c * u.powf(c - 1.0) * da
                        }
                    }
                    // u^v (v' ln u + v u'/u); the parser never produces this form
                    None => {
                        let base = Expr::Binary(BinaryOp::Pow, Arc::clone(a), Arc::clone(b));
                        base * (db * u.clone().ln() + v * da / u)
                    }
                },
            }
        }
    }
}

pub(super) fn log_derivative(expr: &Expr, var: usize) -> Expr {
    match expr {
        Expr::Constant(_) => Expr::zero(),
        Expr::Unary(UnaryOp::Exp, arg) => derivative(arg, var),
        Expr::Unary(UnaryOp::Neg | UnaryOp::Abs, arg) => log_derivative(arg, var),
        Expr::Unary(UnaryOp::Sqrt, arg) => 0.5 * log_derivative(arg, var),
        Expr::Binary(BinaryOp::Mul, a, b) => log_derivative(a, var) + log_derivative(b, var),
        Expr::Binary(BinaryOp::Div, a, b) => log_derivative(a, var) - log_derivative(b, var),
        Expr::Binary(BinaryOp::Pow, a, b) if b.as_constant().is_some() => {
            b.as_constant().unwrap_or(1.0) * log_derivative(a, var)
        }
        _ => {
            let d = derivative(expr, var);
            if d.is_zero() {
                Expr::zero()
            } else {
                d / expr.clone()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use crate::expr::{parse, Chart, Expr};

    fn p(s: &str) -> Expr {
        parse(s, &Chart::with_dim(2).unwrap()).unwrap()
    }

    #[test]
    fn textbook_derivatives() {
        assert_eq!(p("x^2").diff(0), p("2*x"));
        assert_eq!(p("x*sin(x)").diff(0), p("sin(x) + x*cos(x)"));
        assert_eq!(p("exp(-x^2)").diff(0), -(p("exp(-x^2)") * p("2*x")));
        assert_eq!(p("x^2*y").diff(1), p("x^2"));
        assert_eq!(p("sin(y)").diff(0), Expr::zero());
    }

    #[test]
    fn abs_derivative_undefined_at_kink() {
        let d = p("abs(x)").diff(0);
        assert_eq!(d.eval(&[-2.0, 0.0]).unwrap(), -1.0);
        assert_eq!(d.eval(&[3.0, 0.0]).unwrap(), 1.0);
        assert!(d.eval(&[0.0, 0.0]).is_err());
    }

    #[test]
    fn log_derivative_cancels_exponentials() {
        assert_eq!(p("exp(-x^2)").log_diff(0), -p("2*x"));
        let ld = p("x^(-1/2)").log_diff(0);
        assert!((ld.eval(&[4.0, 0.0]).unwrap() + 0.125).abs() < 1e-15);
        let ld = p("3*exp(x)*sqrt(1+y^2)").log_diff(1);
        let y = 0.7f64;
        assert!((ld.eval(&[0.0, y]).unwrap() - y / (1.0 + y * y)).abs() < 1e-15);
    }

    #[test]
    fn repeated_derivatives_stay_small() {
        let mut e = p("exp(-x^2)*sin(x)");
        for _ in 0..4 {
            e = e.diff(0);
        }
        assert!(e.node_count() < 2000, "{}", e.node_count());
    }
}
