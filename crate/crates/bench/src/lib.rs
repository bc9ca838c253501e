//! Shared fixtures for the benchmarks.

use gaugeops::{parse, BoxDomain, Chart, Expr, GaugeFunction, Metric, QuadratureRule, WeightedSpace};

pub fn expr(text: &str) -> Expr {
    parse(text, &Chart::with_dim(1).unwrap()).expect("benchmark expression")
}

/// `(L², x^{-1} dx)` on `[1e-3, 60]` with `points` Gauss–Legendre nodes.
pub fn half_line_space(points: usize) -> WeightedSpace {
    let rule = QuadratureRule::gauss_legendre(BoxDomain::interval(1e-3, 60.0).unwrap(), points).unwrap();
    WeightedSpace::new(rule, Metric::Identity, GaugeFunction::closed_form(expr("x^(-1/2)"))).unwrap()
}
