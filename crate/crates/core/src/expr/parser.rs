//! Recursive-descent parser for the expression DSL.
//!
//! ```text
//! expr   := term (('+'|'-') term)*
//! term   := factor (('*'|'/') factor)*
//! factor := '-' factor | power
//! power  := atom ('^' exponent)?
//! atom   := number | ident | ident '(' expr ')' | '(' expr ')'
//! ```
//!
//! `exponent` is a signed number, optionally a parenthesized constant
//! sub-expression such as `(-1/2)`; exponents are right-associative.

use std::sync::Arc;

use thiserror::Error;

use super::{BinaryOp, Chart, Expr, UnaryOp};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("exponent at byte {offset} is not constant")]
    NonConstantExponent { offset: usize },
}

impl ParseError {
    pub fn offset(&self) -> usize {
        match self {
            ParseError::Syntax { offset, .. }
            | ParseError::UnknownIdentifier { offset, .. }
            | ParseError::NonConstantExponent { offset } => *offset,
        }
    }
}

/// Parses `text` into an expression over `chart`'s coordinates.
///
/// The tree is returned exactly as written, without constant folding.
pub fn parse(text: &str, chart: &Chart) -> Result<Expr, ParseError> {
    let mut parser = Parser { src: text.as_bytes(), pos: 0, chart };
    let expr = parser.expr()?;
    parser.skip_ws();
    if parser.pos < parser.src.len() {
        return Err(parser.syntax("unexpected trailing input"));
    }
    Ok(expr)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    chart: &'a Chart,
}

fn node(op: BinaryOp, a: Expr, b: Expr) -> Expr {
    Expr::Binary(op, Arc::new(a), Arc::new(b))
}

impl Parser<'_> {
    fn syntax(&self, message: &str) -> ParseError {
        ParseError::Syntax { offset: self.pos, message: message.to_string() }
    }

    fn skip_ws(&mut self) {
        while self.src.get(self.pos).is_some_and(u8::is_ascii_whitespace) {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: u8) -> Result<(), ParseError> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.syntax(&format!("expected `{}`", c as char)))
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Some(b'+') => BinaryOp::Add,
                Some(b'-') => BinaryOp::Sub,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            lhs = node(op, lhs, self.term()?);
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.factor()?;
        loop {
            let op = match self.peek() {
                Some(b'*') => BinaryOp::Mul,
                Some(b'/') => BinaryOp::Div,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            lhs = node(op, lhs, self.factor()?);
        }
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        if self.eat(b'-') {
            Ok(Expr::Unary(UnaryOp::Neg, Arc::new(self.factor()?)))
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if self.eat(b'^') {
            let exponent = self.exponent()?;
            Ok(node(BinaryOp::Pow, base, Expr::Constant(exponent)))
        } else {
            Ok(base)
        }
    }

    fn exponent(&mut self) -> Result<f64, ParseError> {
        self.skip_ws();
        let start = self.pos;
        let mut sign = 1.0;
        loop {
            if self.eat(b'-') {
                sign = -sign;
            } else if !self.eat(b'+') {
                break;
            }
        }
        let atom = self.atom()?;
        if !atom.is_constant_tree() {
            return Err(ParseError::NonConstantExponent { offset: start });
        }
        let invalid =
            |offset| ParseError::Syntax { offset, message: "exponent does not evaluate to a finite number".into() };
        let mut value = atom.eval(&[]).map_err(|_| invalid(start))?;
        if self.eat(b'^') {
            let inner = self.exponent()?;
            value = super::eval_pow(value, inner, &[]).map_err(|_| invalid(start))?;
        }
        // -a^b binds as -(a^b)
        Ok(sign * value)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let inner = self.expr()?;
                self.expect(b')')?;
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.ident(),
            Some(_) => Err(self.syntax("expected a number, identifier or `(`")),
            None => Err(self.syntax("unexpected end of input")),
        }
    }

    fn number(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        let digits = |p: &mut Self| {
            let s = p.pos;
            while p.src.get(p.pos).is_some_and(u8::is_ascii_digit) {
                p.pos += 1;
            }
            p.pos - s
        };
        let mut count = digits(self);
        if self.src.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            count += digits(self);
        }
        if count == 0 {
            self.pos = start;
            return Err(self.syntax("malformed number"));
        }
        if matches!(self.src.get(self.pos), Some(b'e' | b'E')) {
            let mark = self.pos;
            self.pos += 1;
            if matches!(self.src.get(self.pos), Some(b'+' | b'-')) {
                self.pos += 1;
            }
            if digits(self) == 0 {
                self.pos = mark;
                return Err(self.syntax("malformed exponent in number"));
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or_default();
        text.parse::<f64>()
            .map(Expr::Constant)
            .map_err(|_| ParseError::Syntax { offset: start, message: "malformed number".into() })
    }

    fn ident(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        while self.src.get(self.pos).is_some_and(|c| c.is_ascii_alphanumeric() || *c == b'_') {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or_default();
        if let Some(op) = UnaryOp::from_name(name) {
            let name = name.to_string();
            if !self.eat(b'(') {
                return Err(self.syntax(&format!("function `{name}` needs a parenthesized argument")));
            }
            let arg = self.expr()?;
            self.expect(b')')?;
            return Ok(Expr::Unary(op, Arc::new(arg)));
        }
        match self.chart.index_of(name) {
            Some(i) => Ok(Expr::Variable(i)),
            None => Err(ParseError::UnknownIdentifier { name: name.to_string(), offset: start }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chart() -> Chart {
        Chart::with_dim(1).unwrap()
    }

    fn p(s: &str) -> Expr {
        parse(s, &chart()).unwrap()
    }

    fn c(v: f64) -> Arc<Expr> {
        Arc::new(Expr::Constant(v))
    }

    fn x() -> Arc<Expr> {
        Arc::new(Expr::Variable(0))
    }

    #[test]
    fn grammar_trees() {
        let expected = Expr::Binary(
            BinaryOp::Add,
            Arc::new(Expr::Binary(BinaryOp::Mul, c(2.0), x())),
            Arc::new(Expr::Binary(BinaryOp::Pow, Arc::new(Expr::Unary(UnaryOp::Sin, x())), c(2.0))),
        );
        assert_eq!(p("2*x + sin(x)^2"), expected);

        let expected = Expr::Unary(
            UnaryOp::Exp,
            Arc::new(Expr::Unary(UnaryOp::Neg, Arc::new(Expr::Binary(BinaryOp::Pow, x(), c(2.0))))),
        );
        assert_eq!(p("exp(-x^2)"), expected);
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(p("1-x-2").eval(&[5.0]).unwrap(), -6.0);
        assert_eq!(p("8/x/2").eval(&[2.0]).unwrap(), 2.0);
        assert_eq!(p("-x^2").eval(&[3.0]).unwrap(), -9.0);
        assert_eq!(p("2^3^2").eval(&[]).unwrap(), 512.0);
        assert_eq!(p("x^-1").eval(&[4.0]).unwrap(), 0.25);
        assert_eq!(p("x^(-1/2)").eval(&[4.0]).unwrap(), 0.5);
        assert_eq!(p("1.5e1 + .5").eval(&[]).unwrap(), 15.5);
        assert_eq!(p(" ( x ) * 2 ").eval(&[1.5]).unwrap(), 3.0);
    }

    #[test]
    fn syntax_errors_report_offsets() {
        assert_eq!(parse("2*", &chart()).unwrap_err().offset(), 2);
        assert!(matches!(parse("2*", &chart()), Err(ParseError::Syntax { .. })));
        assert_eq!(parse("(x", &chart()).unwrap_err().offset(), 2);
        assert_eq!(parse("x y", &chart()).unwrap_err().offset(), 2);
        assert_eq!(parse("", &chart()).unwrap_err().offset(), 0);
        assert!(matches!(parse("sin x", &chart()), Err(ParseError::Syntax { .. })));
        assert!(matches!(parse("1e+", &chart()), Err(ParseError::Syntax { .. })));
    }

    #[test]
    fn unknown_identifiers_and_exponents() {
        assert_eq!(parse("x + tan(x)", &chart()), Err(ParseError::UnknownIdentifier { name: "tan".into(), offset: 4 }));
        assert_eq!(parse("y", &chart()), Err(ParseError::UnknownIdentifier { name: "y".into(), offset: 0 }));
        assert_eq!(parse("2^x", &chart()), Err(ParseError::NonConstantExponent { offset: 2 }));
        assert_eq!(parse("x^(1+x)", &chart()), Err(ParseError::NonConstantExponent { offset: 2 }));
    }

    #[test]
    fn display_round_trips() {
        let chart = chart();
        for s in ["2*x + sin(x)^2", "exp(-x^2)", "x^-0.5", "-(x - 1)/(x + 2)", "1 - (x - 2)", "(-x)^2"] {
            let e = p(s);
            let shown = e.display(&chart).to_string();
            assert_eq!(parse(&shown, &chart).unwrap(), e, "{s} -> {shown}");
        }
    }
}
