//! Gauge functions of `L + q` and the identities they certify.
//!
//! A gauge function `η` is a nonvanishing solution of `(L + q)η = 0`.
//! Equivalently `q = -η⁻¹(Lη)`, and conjugation by `η` strips the
//! potential: `L + q = η L η⁻¹`. The checks in this module evaluate both
//! sides of that identity, and of the derived ones (powers, `|η|^α`
//! rescaling, shifted potentials, eigenfunction transport), symbolically and
//! compare them on sample points.

use num_complex::Complex64;
use thiserror::Error;

use crate::check::{max_over, CheckRecord, MaxResidual, Verdict};
use crate::expr::{Chart, EvalError, Expr};
use crate::manifold::VectorField;

/// Upper bound on expression size for iterated operator powers.
pub const DEFAULT_NODE_CAP: usize = 20_000;

/// Largest power accepted by [`check_power`].
pub const MAX_POWER: u32 = 4;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GaugeError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("operator is {got}-dimensional, this construction needs a 1-D chart")]
    NotOneDimensional { got: usize },
    #[error("field component vanishes near x = {0} (critical point)")]
    CriticalPoint(f64),
    #[error("quadrature on [{lo}, {hi}] did not converge after 24 halvings")]
    QuadratureNonConvergence { lo: f64, hi: f64 },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("point {0} lies outside the tabulated grid")]
    OutOfGrid(f64),
    #[error("gauge function vanishes at {0:?}")]
    ZeroGauge(Vec<f64>),
    #[error("this check needs a closed-form gauge function")]
    NotClosedForm,
    #[error("expression grew to {nodes} nodes, above the cap of {cap}")]
    ExprTooLarge { nodes: usize, cap: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("field has {field} components but the chart has {chart} coordinates")]
    DimensionMismatch { field: usize, chart: usize },
}

/// The operator `L + q`, acting as `(L + q)ψ = Lψ + qψ`.
#[derive(Debug, Clone, PartialEq)]
pub struct FirstOrderOperator {
    pub field: VectorField,
    pub potential: Expr,
    pub chart: Chart,
}

impl FirstOrderOperator {
    pub fn new(chart: Chart, field: VectorField, potential: Expr) -> Result<Self, GaugeError> {
        let dim = chart.dim();
        if field.dim() != dim {
            return Err(GaugeError::DimensionMismatch { field: field.dim(), chart: dim });
        }
        let too_high =
            field.components().iter().chain(std::iter::once(&potential)).any(|e| e.max_var().is_some_and(|v| v >= dim));
        if too_high {
            return Err(GaugeError::InvalidArgument("expression uses a variable outside the chart".into()));
        }
        Ok(FirstOrderOperator { field, potential, chart })
    }

    pub fn dim(&self) -> usize {
        self.chart.dim()
    }

    /// Symbolic `(L + q)ψ`.
    pub fn apply_expr(&self, psi: &Expr) -> Expr {
        self.field.apply(psi) + self.potential.clone() * psi.clone()
    }

    /// Same operator with potential `q + h`.
    pub fn shifted(&self, h: &Expr) -> FirstOrderOperator {
        FirstOrderOperator { potential: self.potential.clone() + h.clone(), ..self.clone() }
    }

    /// Same field with potential `c q`.
    pub fn scaled_potential(&self, c: f64) -> FirstOrderOperator {
        FirstOrderOperator { potential: c * self.potential.clone(), ..self.clone() }
    }

    /// The bare field `L` (potential 0).
    pub fn homogeneous(&self) -> FirstOrderOperator {
        FirstOrderOperator { potential: Expr::zero(), ..self.clone() }
    }
}

/// `(L + q)ψ` evaluated at `p`.
pub fn apply_operator(op: &FirstOrderOperator, psi: &Expr, p: &[f64]) -> Result<f64, EvalError> {
    op.apply_expr(psi).eval(p)
}

/// The potential for which `η` is a gauge function: `q = -η⁻¹(Lη)`.
///
/// Built from the logarithmic derivative of `η`, so exponentials and powers
/// cancel structurally (`η = exp(-x²)`, `L = d/dx` gives exactly `2*x`).
pub fn q_from_eta(field: &VectorField, eta: &Expr) -> Expr {
    let l_log_eta =
        field.components().iter().enumerate().fold(Expr::zero(), |acc, (i, xi)| acc + xi.clone() * eta.log_diff(i));
    -l_log_eta
}

/// Values of `η` on a strictly increasing 1-D grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Tabulated {
    grid: Vec<f64>,
    values: Vec<f64>,
}

impl Tabulated {
    pub fn new(grid: Vec<f64>, values: Vec<f64>) -> Result<Self, GaugeError> {
        if grid.len() < 2 {
            return Err(GaugeError::InvalidGrid("need at least two points".into()));
        }
        if grid.len() != values.len() {
            return Err(GaugeError::InvalidGrid("grid and values differ in length".into()));
        }
        if grid.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(GaugeError::InvalidGrid("grid must be strictly increasing".into()));
        }
        if let Some(k) = values.iter().position(|v| *v == 0.0 || !v.is_finite()) {
            return Err(GaugeError::ZeroGauge(vec![grid[k]]));
        }
        Ok(Tabulated { grid, values })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Value and first derivative at `x` from the Lagrange polynomial through
    /// the (up to) five nodes centred on the nearest node. On a uniform grid
    /// this is the fourth-order central difference at interior nodes.
    pub fn value_and_derivative(&self, x: f64) -> Result<(f64, f64), GaugeError> {
        let n = self.grid.len();
        if !(self.grid[0] <= x && x <= self.grid[n - 1]) {
            return Err(GaugeError::OutOfGrid(x));
        }
        let upper = self.grid.partition_point(|g| *g < x).min(n - 1);
        let nearest = if upper > 0 && (x - self.grid[upper - 1]) <= (self.grid[upper] - x) { upper - 1 } else { upper };
        let width = n.min(5);
        let start = nearest.saturating_sub(width / 2).min(n - width);
        let xs = &self.grid[start..start + width];
        let ys = &self.values[start..start + width];

        let mut value = 0.0;
        let mut deriv = 0.0;
        for j in 0..width {
            let denom: f64 = (0..width).filter(|&k| k != j).map(|k| xs[j] - xs[k]).product();
            let basis: f64 = (0..width).filter(|&k| k != j).map(|k| x - xs[k]).product();
            let dbasis: f64 = (0..width)
                .filter(|&m| m != j)
                .map(|m| (0..width).filter(|&k| k != j && k != m).map(|k| x - xs[k]).product::<f64>())
                .sum();
            value += ys[j] * basis / denom;
            deriv += ys[j] * dbasis / denom;
        }
        Ok((value, deriv))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum GaugeKind {
    ClosedForm(Expr),
    Tabulated(Tabulated),
}

/// A gauge function together with the weight exponent `α` used for `|η|^α`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaugeFunction {
    pub kind: GaugeKind,
    pub alpha: f64,
}

impl GaugeFunction {
    pub fn closed_form(eta: Expr) -> Self {
        GaugeFunction { kind: GaugeKind::ClosedForm(eta), alpha: 1.0 }
    }

    pub fn tabulated(table: Tabulated) -> Self {
        GaugeFunction { kind: GaugeKind::Tabulated(table), alpha: 1.0 }
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn expr(&self) -> Option<&Expr> {
        match &self.kind {
            GaugeKind::ClosedForm(e) => Some(e),
            GaugeKind::Tabulated(_) => None,
        }
    }

    pub fn eval(&self, p: &[f64]) -> Result<f64, GaugeError> {
        match &self.kind {
            GaugeKind::ClosedForm(e) => Ok(e.eval(p)?),
            GaugeKind::Tabulated(t) => {
                if p.len() != 1 {
                    return Err(GaugeError::NotOneDimensional { got: p.len() });
                }
                Ok(t.value_and_derivative(p[0])?.0)
            }
        }
    }

    /// Fails with [`GaugeError::ZeroGauge`] at the first sample where `η = 0`.
    pub fn check_nonvanishing(&self, points: &[Vec<f64>]) -> Result<(), GaugeError> {
        for p in points {
            if self.eval(p)? == 0.0 {
                return Err(GaugeError::ZeroGauge(p.clone()));
            }
        }
        Ok(())
    }
}

/// Relative residual of the kernel equation, `max_p |(L+q)η(p)| / (1 + |η(p)|)`.
pub fn residual_eta(
    op: &FirstOrderOperator,
    eta: &GaugeFunction,
    sample_points: &[Vec<f64>],
) -> Result<MaxResidual, GaugeError> {
    match &eta.kind {
        GaugeKind::ClosedForm(e) => {
            let image = op.apply_expr(e);
            Ok(max_over(sample_points, |p| -> Result<f64, EvalError> {
                Ok(image.eval(p)?.abs() / (1.0 + e.eval(p)?.abs()))
            })?)
        }
        GaugeKind::Tabulated(t) => {
            if op.dim() != 1 {
                return Err(GaugeError::NotOneDimensional { got: op.dim() });
            }
            let xi = &op.field.components()[0];
            max_over(sample_points, |p| {
                let (value, deriv) = t.value_and_derivative(p[0])?;
                let image = xi.eval(p)? * deriv + op.potential.eval(p)? * value;
                Ok(image.abs() / (1.0 + value.abs()))
            })
        }
    }
}

pub fn check_residual_eta(
    op: &FirstOrderOperator,
    eta: &GaugeFunction,
    sample_points: &[Vec<f64>],
    tol: f64,
) -> CheckRecord {
    const NAME: &str = "residual_eta";
    match residual_eta(op, eta, sample_points) {
        Ok(worst) => worst.into_record(NAME, tol),
        Err(e) => CheckRecord::failed(NAME, tol, e),
    }
}

/// Solves `(L + q)η = 0` on a 1-D chart as `η(x) = exp(-∫_anchor^x q/ξ ds)`.
///
/// `η(anchor) = 1`. Each grid segment is integrated by composite Simpson with
/// interval halving until two successive estimates agree to `1e-10` relative.
pub fn solve_eta_1d(op: &FirstOrderOperator, anchor: f64, grid: &[f64]) -> Result<GaugeFunction, GaugeError> {
    if op.dim() != 1 {
        return Err(GaugeError::NotOneDimensional { got: op.dim() });
    }
    if grid.len() < 2 || grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(GaugeError::InvalidGrid("need at least two strictly increasing points".into()));
    }
    if !anchor.is_finite() {
        return Err(GaugeError::InvalidArgument(format!("anchor {anchor}")));
    }
    let xi = &op.field.components()[0];
    let lo = grid[0].min(anchor);
    let hi = grid[grid.len() - 1].max(anchor);
    scan_critical_points(xi, lo, hi)?;

    let integrand = |s: f64| -> Result<f64, GaugeError> {
        let v = xi.eval(&[s])?;
        if v.abs() < CRITICAL_XI {
            return Err(GaugeError::CriticalPoint(s));
        }
        Ok(op.potential.eval(&[s])? / v)
    };

    let split = grid.partition_point(|g| *g < anchor);
    let mut exponent = vec![0.0; grid.len()];
    let (mut acc, mut from) = (0.0, anchor);
    for k in split..grid.len() {
        acc += adaptive_simpson(&integrand, from, grid[k], SIMPSON_REL_TOL)?;
        exponent[k] = acc;
        from = grid[k];
    }
    let (mut acc, mut from) = (0.0, anchor);
    for k in (0..split).rev() {
        acc += adaptive_simpson(&integrand, from, grid[k], SIMPSON_REL_TOL)?;
        exponent[k] = acc;
        from = grid[k];
    }
    let values = exponent.iter().map(|i| (-i).exp()).collect();
    Ok(GaugeFunction::tabulated(Tabulated::new(grid.to_vec(), values)?))
}

const CRITICAL_XI: f64 = 1e-12;
const SIMPSON_REL_TOL: f64 = 1e-10;
const MAX_HALVINGS: u32 = 24;

fn scan_critical_points(xi: &Expr, lo: f64, hi: f64) -> Result<(), GaugeError> {
    const SCAN: usize = 2000;
    let mut previous: Option<f64> = None;
    for k in 0..=SCAN {
        let s = lo + (hi - lo) * k as f64 / SCAN as f64;
        let v = xi.eval(&[s])?;
        if v.abs() < CRITICAL_XI || previous.is_some_and(|p| p.signum() != v.signum()) {
            return Err(GaugeError::CriticalPoint(s));
        }
        previous = Some(v);
    }
    Ok(())
}

/// Composite Simpson on `[a, b]`, doubling the panel count until successive
/// estimates differ by less than `rel_tol` relative. Estimates that agree to
/// round-off of `∫|f|` also count as converged, so integrals that cancel to
/// zero terminate.
pub(crate) fn adaptive_simpson(
    f: &impl Fn(f64) -> Result<f64, GaugeError>,
    a: f64,
    b: f64,
    rel_tol: f64,
) -> Result<f64, GaugeError> {
    if a == b {
        return Ok(0.0);
    }
    let mut n = 2usize;
    let mut h = (b - a) / n as f64;
    let (fa, fb) = (f(a)?, f(b)?);
    let ends = fa + fb;
    let ends_abs = fa.abs() + fb.abs();
    let mid = f(a + h)?;
    let (mut odd, mut odd_abs) = (mid, mid.abs());
    let (mut even, mut even_abs) = (0.0, 0.0);
    let mut estimate = h / 3.0 * (ends + 4.0 * odd + 2.0 * even);

    for halving in 1..=MAX_HALVINGS {
        even += odd;
        even_abs += odd_abs;
        n *= 2;
        h = (b - a) / n as f64;
        odd = 0.0;
        odd_abs = 0.0;
        for k in (1..n).step_by(2) {
            let v = f(a + k as f64 * h)?;
            odd += v;
            odd_abs += v.abs();
        }
        let next = h / 3.0 * (ends + 4.0 * odd + 2.0 * even);
        let magnitude = (h / 3.0 * (ends_abs + 4.0 * odd_abs + 2.0 * even_abs)).abs();
        let change = (next - estimate).abs();
        if halving >= 2 && (change <= rel_tol * next.abs() || change <= 1e-15 * magnitude) {
            return Ok(next);
        }
        estimate = next;
    }
    Err(GaugeError::QuadratureNonConvergence { lo: a.min(b), hi: a.max(b) })
}

fn closed_form_check(
    name: &str,
    sample_points: &[Vec<f64>],
    tol: f64,
    residual: impl FnMut(&[f64]) -> Result<f64, EvalError>,
) -> CheckRecord {
    match max_over(sample_points, residual) {
        Ok(worst) => worst.into_record(name, tol),
        Err(e) => CheckRecord::failed(name, tol, e),
    }
}

fn diff_check(name: &str, lhs: &Expr, rhs: &Expr, sample_points: &[Vec<f64>], tol: f64) -> CheckRecord {
    closed_form_check(name, sample_points, tol, |p| Ok((lhs.eval(p)? - rhs.eval(p)?).abs()))
}

/// `η L η⁻¹ ψ`, the conjugated bare field applied to `ψ`.
fn conjugated(field: &VectorField, eta: &Expr, psi: &Expr) -> Expr {
    eta.clone() * field.apply(&(psi.clone() / eta.clone()))
}

/// `(L + q)ψ = η L (η⁻¹ψ)` on the samples.
pub fn check_factorization(
    op: &FirstOrderOperator,
    eta: &Expr,
    psi: &Expr,
    sample_points: &[Vec<f64>],
    tol: f64,
) -> CheckRecord {
    let lhs = op.apply_expr(psi);
    let rhs = conjugated(&op.field, eta, psi);
    diff_check("factorization", &lhs, &rhs, sample_points, tol)
}

/// `(L + q)ⁿψ = η Lⁿ(η⁻¹ψ)` for `1 <= n <= 4`, failing if either side
/// exceeds `node_cap` nodes.
pub fn check_power(
    op: &FirstOrderOperator,
    eta: &Expr,
    psi: &Expr,
    n: u32,
    sample_points: &[Vec<f64>],
    tol: f64,
    node_cap: usize,
) -> CheckRecord {
    let name = format!("power[n={n}]");
    match power_sides(op, eta, psi, n, node_cap) {
        Ok((lhs, rhs)) => diff_check(&name, &lhs, &rhs, sample_points, tol),
        Err(e) => CheckRecord::failed(name, tol, e),
    }
}

fn power_sides(
    op: &FirstOrderOperator,
    eta: &Expr,
    psi: &Expr,
    n: u32,
    node_cap: usize,
) -> Result<(Expr, Expr), GaugeError> {
    if n == 0 || n > MAX_POWER {
        return Err(GaugeError::InvalidArgument(format!("power {n} outside 1..={MAX_POWER}")));
    }
    let guard = |e: Expr| {
        let nodes = e.node_count();
        if nodes > node_cap {
            Err(GaugeError::ExprTooLarge { nodes, cap: node_cap })
        } else {
            Ok(e)
        }
    };
    let mut lhs = psi.clone();
    let mut inner = psi.clone() / eta.clone();
    for _ in 0..n {
        lhs = guard(op.apply_expr(&lhs))?;
        inner = guard(op.field.apply(&inner))?;
    }
    Ok((lhs, guard(eta.clone() * inner)?))
}

/// `Lψ = |η|^{-α}(L + αq)(|η|^α ψ)`; for integer `α = n` also `(L + nq)ηⁿ = 0`.
pub fn check_alpha_gauge(
    op: &FirstOrderOperator,
    eta: &Expr,
    alpha: f64,
    psi: &Expr,
    sample_points: &[Vec<f64>],
    tol: f64,
) -> CheckRecord {
    let name = format!("alpha_gauge[alpha={alpha}]");
    let scaled = op.scaled_potential(alpha);
    let lhs = op.field.apply(psi);
    let abs_eta = eta.clone().abs();
    let rhs = abs_eta.clone().powf(-alpha) * scaled.apply_expr(&(abs_eta.powf(alpha) * psi.clone()));
    let integer_kernel = (alpha.fract() == 0.0).then(|| scaled.apply_expr(&eta.clone().powf(alpha)));
    closed_form_check(&name, sample_points, tol, |p| {
        let mut r = (lhs.eval(p)? - rhs.eval(p)?).abs();
        if let Some(k) = &integer_kernel {
            r = r.max(k.eval(p)?.abs());
        }
        Ok(r)
    })
}

/// Residual `|(L + nq)ηⁿ|` of the integer-power kernel identity.
pub fn integer_power_residual(
    op: &FirstOrderOperator,
    eta: &Expr,
    n: i32,
    sample_points: &[Vec<f64>],
) -> Result<MaxResidual, EvalError> {
    let image = op.scaled_potential(n as f64).apply_expr(&eta.clone().powf(n as f64));
    max_over(sample_points, |p| Ok(image.eval(p)?.abs()))
}

/// `η⁻¹(L + q + h)(ηψ) = (L + h)ψ`.
pub fn check_shift(
    op: &FirstOrderOperator,
    eta: &Expr,
    h: &Expr,
    psi: &Expr,
    sample_points: &[Vec<f64>],
    tol: f64,
) -> CheckRecord {
    let name = format!("shift[h={}]", h.display(&op.chart));
    let lhs = op.shifted(h).apply_expr(&(eta.clone() * psi.clone())) / eta.clone();
    let rhs = op.homogeneous().shifted(h).apply_expr(psi);
    diff_check(&name, &lhs, &rhs, sample_points, tol)
}

/// Complex function `re + i im` represented by two real expressions.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexExpr {
    pub re: Expr,
    pub im: Expr,
}

impl ComplexExpr {
    pub fn new(re: Expr, im: Expr) -> Self {
        ComplexExpr { re, im }
    }

    /// `exp(λ τ)` for a real expression `τ`.
    pub fn exp_of(lambda: Complex64, tau: &Expr) -> Self {
        let modulus = (lambda.re * tau.clone()).exp();
        let phase = lambda.im * tau.clone();
        ComplexExpr { re: modulus.clone() * phase.clone().cos(), im: modulus * phase.sin() }
    }

    fn scaled(&self, factor: &Expr) -> Self {
        ComplexExpr { re: factor.clone() * self.re.clone(), im: factor.clone() * self.im.clone() }
    }
}

/// Symbolic `(L + q - λ)ψ` for complex `ψ`, as (re, im).
fn eigen_image(op: &FirstOrderOperator, lambda: Complex64, psi: &ComplexExpr) -> (Expr, Expr) {
    let (a, b) = (&psi.re, &psi.im);
    let re = op.apply_expr(a) - (lambda.re * a.clone() - lambda.im * b.clone());
    let im = op.apply_expr(b) - (lambda.re * b.clone() + lambda.im * a.clone());
    (re, im)
}

fn modulus_residual(image: &(Expr, Expr), sample_points: &[Vec<f64>]) -> Result<MaxResidual, EvalError> {
    max_over(sample_points, |p| Ok(image.0.eval(p)?.hypot(image.1.eval(p)?)))
}

/// Eigenfunction transport: if `(L - λ)ψ = 0` then `(L + q - λ)(ηψ) = 0`.
///
/// The premise is verified first; if it already fails at `tol` the record
/// carries a "premise violated" error.
pub fn eigen_transport(
    op: &FirstOrderOperator,
    eta: &Expr,
    lambda: Complex64,
    psi_lambda: &ComplexExpr,
    sample_points: &[Vec<f64>],
    tol: f64,
) -> CheckRecord {
    let name = format!("eigen_transport[lambda={}]", format_complex(lambda));
    let premise = eigen_image(&op.homogeneous(), lambda, psi_lambda);
    match modulus_residual(&premise, sample_points) {
        Ok(worst) if worst.value <= tol => {}
        Ok(worst) => {
            let residual = worst.value;
            let mut record = worst.into_record(name, tol);
            record.verdict = Verdict::Fail;
            record.error = Some(format!("premise violated: |(L - lambda)psi| = {residual:e}"));
            return record;
        }
        Err(e) => return CheckRecord::failed(name, tol, e),
    }
    let image = eigen_image(op, lambda, &psi_lambda.scaled(eta));
    match modulus_residual(&image, sample_points) {
        Ok(worst) => worst.into_record(name, tol),
        Err(e) => CheckRecord::failed(name, tol, e),
    }
}

/// `a`, `bi`, `a+bi` or `a-bi`, shortest float formatting.
pub fn format_complex(z: Complex64) -> String {
    match (z.re, z.im) {
        (re, 0.0) => format!("{re}"),
        (0.0, im) => match im {
            1.0 => "i".to_string(),
            -1.0 => "-i".to_string(),
            _ => format!("{im}i"),
        },
        (re, im) if im < 0.0 => format!("{re}-{}i", -im),
        (re, im) => format!("{re}+{im}i"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn chart() -> Chart {
        Chart::with_dim(1).unwrap()
    }

    fn p(s: &str) -> Expr {
        parse(s, &chart()).unwrap()
    }

    fn op(xi: &str, q: &str) -> FirstOrderOperator {
        FirstOrderOperator::new(chart(), VectorField::new(vec![p(xi)]), p(q)).unwrap()
    }

    fn line(lo: f64, hi: f64, n: usize) -> Vec<Vec<f64>> {
        (0..n).map(|k| vec![lo + (hi - lo) * k as f64 / (n - 1) as f64]).collect()
    }

    fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn operator_application() {
        let ex1 = op("1", "2*x");
        assert_eq!(apply_operator(&ex1, &p("1"), &[1.0]).unwrap(), 2.0);
        assert!(apply_operator(&ex1, &p("exp(-x^2)"), &[0.7]).unwrap().abs() < 1e-15);
        let ex2 = op("x", "1/2");
        assert!(apply_operator(&ex2, &p("x^(-1/2)"), &[2.0]).unwrap().abs() < 1e-15);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let r = FirstOrderOperator::new(chart(), VectorField::new(vec![p("1"), p("x")]), p("0"));
        assert!(matches!(r, Err(GaugeError::DimensionMismatch { .. })));
    }

    #[test]
    fn potential_from_gauge() {
        let unit = VectorField::new(vec![p("1")]);
        assert_eq!(q_from_eta(&unit, &p("exp(-x^2)")), p("2*x"));
        let q = q_from_eta(&VectorField::new(vec![p("x")]), &p("x^(-1/2)"));
        for x in [0.5, 1.0, 3.7] {
            assert!((q.eval(&[x]).unwrap() - 0.5).abs() < 1e-15);
        }
        assert_eq!(q_from_eta(&VectorField::new(vec![p("x^3 + 1")]), &Expr::one()), Expr::zero());
    }

    #[test]
    fn solver_matches_closed_forms() {
        let grid = linspace(-3.0, 3.0, 121);
        let eta = solve_eta_1d(&op("1", "2*x"), 0.0, &grid).unwrap();
        // closed-form oracle e^{-x²}
        for x in &grid {
            let expected = (-x * x).exp();
            let got = eta.eval(&[*x]).unwrap();
            assert!(((got - expected) / expected).abs() < 1e-8, "x={x}: {got} vs {expected}");
        }
        assert!((eta.eval(&[1.0]).unwrap() - 0.3678794412).abs() < 1e-8);

        let grid = linspace(0.5, 4.0, 101);
        let eta = solve_eta_1d(&op("x", "1/2"), 1.0, &grid).unwrap();
        assert!((eta.eval(&[4.0]).unwrap() - 0.5).abs() < 1e-8);

        let eta = solve_eta_1d(&op("x^2 + 1", "0"), 0.3, &grid).unwrap();
        let GaugeKind::Tabulated(t) = &eta.kind else { panic!() };
        assert!(t.values().iter().all(|v| *v == 1.0));
    }

    #[test]
    fn solver_rejects_critical_points_and_bad_input() {
        let grid = linspace(-1.0, 1.0, 11);
        assert!(matches!(solve_eta_1d(&op("x", "1"), 0.5, &grid), Err(GaugeError::CriticalPoint(_))));
        assert!(matches!(solve_eta_1d(&op("0", "1"), 0.5, &grid), Err(GaugeError::CriticalPoint(_))));
        assert!(matches!(solve_eta_1d(&op("1", "1"), 0.0, &[1.0, 0.0]), Err(GaugeError::InvalidGrid(_))));
        assert!(matches!(solve_eta_1d(&op("1", "1"), 0.0, &[1.0]), Err(GaugeError::InvalidGrid(_))));
    }

    #[test]
    fn simpson_converges_and_reports_failure() {
        let f = |s: f64| -> Result<f64, GaugeError> { Ok(s.cos()) };
        let v = adaptive_simpson(&f, 0.0, 1.0, 1e-10).unwrap();
        assert!((v - 1f64.sin()).abs() < 1e-11);
        let odd = |s: f64| -> Result<f64, GaugeError> { Ok(2.0 * s) };
        assert!(adaptive_simpson(&odd, -0.03, 0.03, 1e-10).unwrap().abs() < 1e-15);
        // oscillation far below the grid spacing never settles
        let wild = |s: f64| -> Result<f64, GaugeError> { Ok((1e9 * s).sin() + (3.3e8 * s * s).cos()) };
        assert!(matches!(adaptive_simpson(&wild, 0.0, 1.0, 1e-10), Err(GaugeError::QuadratureNonConvergence { .. })));
    }

    #[test]
    fn tabulated_interpolation_is_fourth_order() {
        let grid = linspace(0.0, 2.0, 81);
        let values: Vec<f64> = grid.iter().map(|x| x.exp()).collect();
        let t = Tabulated::new(grid, values).unwrap();
        for x in [0.0, 0.013, 1.0, 1.37, 2.0] {
            let (v, d) = t.value_and_derivative(x).unwrap();
            assert!((v - x.exp()).abs() < 1e-8, "value at {x}");
            assert!((d - x.exp()).abs() < 1e-6, "derivative at {x}");
        }
        assert!(matches!(t.value_and_derivative(2.5), Err(GaugeError::OutOfGrid(_))));
        assert!(Tabulated::new(vec![0.0, 1.0], vec![1.0, 0.0]).is_err());
    }

    #[test]
    fn residuals() {
        let pts = line(-3.0, 3.0, 201);
        let ex1 = op("1", "2*x");
        let r = residual_eta(&ex1, &GaugeFunction::closed_form(p("exp(-x^2)")), &pts).unwrap();
        assert!(r.value <= 1e-12);
        let ex2 = op("x", "1/2");
        let r = residual_eta(&ex2, &GaugeFunction::closed_form(p("x^(-1/2)")), &line(0.5, 4.0, 200)).unwrap();
        assert!(r.value <= 1e-12);
        // η = 1 leaves |q|/2 = |x|
        let r = residual_eta(&ex1, &GaugeFunction::closed_form(Expr::one()), &pts).unwrap();
        assert!((r.value - 3.0).abs() < 1e-12);
        assert_eq!(r.point, Some(vec![-3.0]));
    }

    #[test]
    fn tabulated_residual_is_small() {
        let grid = linspace(-3.0, 3.0, 601);
        let ex1 = op("1", "2*x");
        let eta = solve_eta_1d(&ex1, 0.0, &grid).unwrap();
        let r = residual_eta(&ex1, &eta, &line(-2.9, 2.9, 57)).unwrap();
        assert!(r.value < 1e-6, "{}", r.value);
    }

    #[test]
    fn factorization_cases() {
        let pts = line(-3.0, 3.0, 200);
        let ex1 = op("1", "2*x");
        let eta = p("exp(-x^2)");
        assert!(check_factorization(&ex1, &eta, &p("sin(x)"), &pts, 1e-9).passed());
        assert!(check_factorization(&ex1, &eta, &eta, &pts, 1e-9).passed());
        // η = e^{-x}: η L η⁻¹ ψ = ψ' + ψ, residual |(2x - 1) ψ|
        let rec = check_factorization(&ex1, &p("exp(-x)"), &Expr::one(), &pts, 1e-9);
        assert!(!rec.passed());
        assert!((rec.max_residual - 7.0).abs() < 1e-12);
    }

    #[test]
    fn power_and_shift_reduce_to_factorization() {
        let pts = line(0.5, 4.0, 100);
        let ex2 = op("x", "1/2");
        let eta = p("x^(-1/2)");
        for psi in ["x", "x*exp(-x)", "sin(x)"] {
            let psi = p(psi);
            let f = check_factorization(&ex2, &eta, &psi, &pts, 1e-9);
            let n1 = check_power(&ex2, &eta, &psi, 1, &pts, 1e-9, DEFAULT_NODE_CAP);
            let h0 = check_shift(&ex2, &eta, &Expr::zero(), &psi, &pts, 1e-9);
            assert_eq!(f.verdict, n1.verdict);
            assert_eq!(f.verdict, h0.verdict);
        }
        assert!(check_power(&ex2, &eta, &p("x"), 2, &pts, 1e-9, DEFAULT_NODE_CAP).passed());
        assert!(check_power(&op("1", "2*x"), &p("exp(-x^2)"), &Expr::one(), 2, &pts, 1e-8, DEFAULT_NODE_CAP).passed());
    }

    #[test]
    fn power_guards() {
        let pts = line(0.5, 4.0, 10);
        let ex2 = op("x", "1/2");
        let eta = p("x^(-1/2)");
        let rec = check_power(&ex2, &eta, &p("sin(x)"), 4, &pts, 1e-9, 50);
        assert!(rec.error.as_deref().is_some_and(|e| e.contains("cap")));
        assert!(!check_power(&ex2, &eta, &p("x"), 5, &pts, 1e-9, DEFAULT_NODE_CAP).passed());
    }

    #[test]
    fn alpha_gauge_and_shift() {
        let ex1 = op("1", "2*x");
        let pts = line(-3.0, 3.0, 200);
        let eta = p("exp(-x^2)");
        assert!(check_alpha_gauge(&ex1, &eta, 2.0, &p("sin(x)"), &pts, 1e-9).passed());
        assert!(check_alpha_gauge(&ex1, &eta, 0.0, &p("sin(x)"), &pts, 1e-12).passed());
        assert!(integer_power_residual(&ex1, &eta, 2, &pts).unwrap().value <= 1e-10);
        assert!(check_shift(&ex1, &eta, &p("3"), &Expr::one(), &pts, 1e-12).passed());

        let ex2 = op("x", "1/2");
        let pts2 = line(0.5, 4.0, 100);
        let eta2 = p("x^(-1/2)");
        assert!(check_alpha_gauge(&ex2, &eta2, -1.0, &p("exp(-(x-2)^2)"), &pts2, 1e-9).passed());
        assert!(check_shift(&ex2, &eta2, &p("sin(x)"), &p("x*exp(-x)"), &pts2, 1e-9).passed());
        // wrong gauge breaks the α identity
        assert!(!check_alpha_gauge(&ex2, &Expr::one(), 2.0, &p("x"), &pts2, 1e-9).passed());
    }

    #[test]
    fn eigenfunctions_transport() {
        let ex1 = op("1", "2*x");
        let pts = line(-3.0, 3.0, 200);
        let eta = p("exp(-x^2)");
        let clock = p("x");
        for lambda in [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0), Complex64::new(-2.0, 0.0), Complex64::i()] {
            let psi = ComplexExpr::exp_of(lambda, &clock);
            let rec = eigen_transport(&ex1, &eta, lambda, &psi, &pts, 1e-9);
            assert!(rec.passed(), "{rec:?}");
        }
        let psi = ComplexExpr::new(p("cos(x)"), p("sin(x)"));
        assert!(eigen_transport(&ex1, &eta, Complex64::i(), &psi, &pts, 1e-9).passed());
        // e^{2x} is not an eigenfunction for λ = 1
        let bad = ComplexExpr::new(p("exp(2*x)"), Expr::zero());
        let rec = eigen_transport(&ex1, &eta, Complex64::new(1.0, 0.0), &bad, &pts, 1e-9);
        assert!(!rec.passed());
        assert!(rec.error.unwrap().starts_with("premise violated"));
    }

    #[test]
    fn complex_formatting() {
        assert_eq!(format_complex(Complex64::new(0.0, 1.0)), "i");
        assert_eq!(format_complex(Complex64::new(-2.0, 0.0)), "-2");
        assert_eq!(format_complex(Complex64::new(1.0, -0.5)), "1-0.5i");
        assert_eq!(format_complex(Complex64::new(0.0, 3.0)), "3i");
    }
}
