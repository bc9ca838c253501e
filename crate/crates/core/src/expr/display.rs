use std::fmt;

use super::{BinaryOp, Chart, Expr, UnaryOp};

pub(super) struct Named<'a> {
    pub expr: &'a Expr,
    pub names: &'a [String],
}

const ADD: u8 = 1;
const MUL: u8 = 2;
const NEG: u8 = 3;
const POW: u8 = 4;
const ATOM: u8 = 5;

fn precedence(e: &Expr) -> u8 {
    match e {
        Expr::Constant(c) if *c < 0.0 || c.is_sign_negative() => NEG,
        Expr::Constant(_) | Expr::Variable(_) => ATOM,
        Expr::Unary(UnaryOp::Neg, _) => NEG,
        Expr::Unary(..) => ATOM,
        Expr::Binary(BinaryOp::Add | BinaryOp::Sub, ..) => ADD,
        Expr::Binary(BinaryOp::Mul | BinaryOp::Div, ..) => MUL,
        Expr::Binary(BinaryOp::Pow, ..) => POW,
    }
}

fn write(e: &Expr, names: &[String], f: &mut fmt::Formatter<'_>) -> fmt::Result {
    let sub = |child: &Expr, min: u8, f: &mut fmt::Formatter<'_>| -> fmt::Result {
        if precedence(child) < min {
            f.write_str("(")?;
            write(child, names, f)?;
            f.write_str(")")
        } else {
            write(child, names, f)
        }
    };
    match e {
        Expr::Constant(c) => write!(f, "{c}"),
        Expr::Variable(i) => match names.get(*i) {
            Some(name) => f.write_str(name),
            None => write!(f, "v{i}"),
        },
        Expr::Unary(UnaryOp::Neg, a) => {
            f.write_str("-")?;
            sub(a, NEG, f)
        }
        Expr::Unary(op, a) => {
            write!(f, "{}(", op.name())?;
            write(a, names, f)?;
            f.write_str(")")
        }
        Expr::Binary(op, a, b) => match op {
            BinaryOp::Add | BinaryOp::Sub => {
                sub(a, ADD, f)?;
                f.write_str(if *op == BinaryOp::Add { " + " } else { " - " })?;
                sub(b, MUL, f)
            }
            BinaryOp::Mul | BinaryOp::Div => {
                sub(a, MUL, f)?;
                f.write_str(if *op == BinaryOp::Mul { "*" } else { "/" })?;
                sub(b, NEG, f)
            }
            BinaryOp::Pow => {
                sub(a, ATOM, f)?;
                f.write_str("^")?;
                match b.as_constant() {
                    Some(c) => write!(f, "{c}"),
                    None => {
                        f.write_str("(")?;
                        write(b, names, f)?;
                        f.write_str(")")
                    }
                }
            }
        },
    }
}

impl fmt::Display for Named<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write(self.expr, self.names, f)
    }
}

/// Uses the default chart names for the highest variable referenced.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let dim = self.max_var().map_or(1, |m| m + 1);
        let chart = Chart::with_dim(dim).map_err(|_| fmt::Error)?;
        write(self, chart.var_names(), f)
    }
}
