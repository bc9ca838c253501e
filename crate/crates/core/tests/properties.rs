use approx::assert_relative_eq;
use gaugeops::gauge::{q_from_eta, residual_eta};
use gaugeops::{
    parse, BoxDomain, Chart, Expr, FirstOrderOperator, FlowIntegrator, FlowSolver, GaugeFunction, Metric,
    QuadratureRule, VectorField, WeightedSpace,
};
use proptest::prelude::*;

fn leaf() -> impl Strategy<Value = Expr> {
    prop_oneof![
        3 => Just(Expr::var(0)),
        1 => Just(Expr::var(1)),
        1 => (-3i32..=3).prop_map(|k| Expr::constant(k as f64 / 2.0)),
    ]
}

/// Two-variable expressions that are smooth and moderate on [-1, 1]².
fn smooth_expr() -> impl Strategy<Value = Expr> {
    leaf().prop_recursive(4, 32, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a + b),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a * b),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a / (2.0 + b.cos())),
            inner.clone().prop_map(Expr::sin),
            inner.clone().prop_map(|a| a.sin().exp()),
            inner.clone().prop_map(|a| (1.0 + a.clone() * a).ln()),
            inner.clone().prop_map(|a| (1.0 + a.clone() * a).sqrt()),
            inner.prop_map(|a| a.powf(2.0)),
        ]
    })
}

fn chart2() -> Chart {
    Chart::with_dim(2).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn derivative_matches_central_difference(e in smooth_expr(), x in -1.0..1.0f64, y in -1.0..1.0f64) {
        let h = 1e-5;
        for var in 0..2 {
            let mut plus = [x, y];
            let mut minus = [x, y];
            plus[var] += h;
            minus[var] -= h;
            let fd = (e.eval(&plus).unwrap() - e.eval(&minus).unwrap()) / (2.0 * h);
            let sym = e.diff(var).eval(&[x, y]).unwrap();
            prop_assert!((sym - fd).abs() <= 1e-6 * (1.0 + sym.abs()), "{} d/dx{}: {} vs {}", e, var, sym, fd);
        }
    }

    #[test]
    fn mixed_partials_commute(e in smooth_expr(), x in -1.0..1.0f64, y in -1.0..1.0f64) {
        let xy = e.diff(0).diff(1).eval(&[x, y]).unwrap();
        let yx = e.diff(1).diff(0).eval(&[x, y]).unwrap();
        prop_assert!((xy - yx).abs() <= 1e-9 * (1.0 + xy.abs()));
    }

    #[test]
    fn display_round_trips(e in smooth_expr(), x in -1.0..1.0f64, y in -1.0..1.0f64) {
        let text = e.display(&chart2()).to_string();
        let back = parse(&text, &chart2()).unwrap();
        let (a, b) = (e.eval(&[x, y]).unwrap(), back.eval(&[x, y]).unwrap());
        prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()), "{}: {} vs {}", text, a, b);
    }

    #[test]
    fn gauge_of_derived_potential_is_a_kernel(u in smooth_expr(), xi0 in smooth_expr(), xi1 in smooth_expr()) {
        let eta = u.exp();
        let field = VectorField::new(vec![xi0, xi1]);
        let q = q_from_eta(&field, &eta);
        let op = FirstOrderOperator::new(chart2(), field, q).unwrap();
        let pts = BoxDomain::new(vec![(-1.0, 1.0), (-1.0, 1.0)]).unwrap().uniform_grid(7);
        let r = residual_eta(&op, &GaugeFunction::closed_form(eta), &pts).unwrap();
        prop_assert!(r.value <= 1e-10);
    }

    #[test]
    fn flow_is_invertible(x in -2.0..2.0f64, t in -1.0..1.0f64, k in 0usize..3) {
        let field = ["1", "x", "2 + sin(x)"][k];
        let c = Chart::with_dim(1).unwrap();
        let solver = FlowSolver::new(VectorField::new(vec![parse(field, &c).unwrap()]), FlowIntegrator::default(), None).unwrap();
        let back = solver.flow(&solver.flow(&[x], t).unwrap(), -t).unwrap()[0];
        prop_assert!((back - x).abs() <= 1e-8);
    }

    #[test]
    fn weighted_inner_product_is_symmetric_and_bilinear(a in smooth_expr(), b in smooth_expr(), c in -2.0..2.0f64) {
        let rule = QuadratureRule::gauss_legendre(BoxDomain::new(vec![(-1.0, 1.0), (-1.0, 1.0)]).unwrap(), 12).unwrap();
        let eta = GaugeFunction::closed_form(parse("exp(-x^2 - y^2)", &chart2()).unwrap());
        let space = WeightedSpace::new(rule, Metric::Identity, eta).unwrap();
        let ab = space.inner_product(&a, &b).unwrap();
        prop_assert_eq!(ab, space.inner_product(&b, &a).unwrap());
        let scaled = space.inner_product(&(c * a.clone()), &b).unwrap();
        prop_assert!((scaled - c * ab).abs() <= 1e-12 * (1.0 + ab.abs()));
        prop_assert!(space.inner_product(&a, &a).unwrap() >= 0.0);
    }
}

#[test]
fn polar_metric_weights_area() {
    // disc of radius 2 in polar coordinates (r, θ)
    let c = Chart::new(["r", "t"]).unwrap();
    let metric = Metric::Diagonal(vec![Expr::one(), parse("r^2", &c).unwrap()]);
    let rule = QuadratureRule::gauss_legendre(
        BoxDomain::new(vec![(0.0, 2.0), (0.0, 2.0 * std::f64::consts::PI)]).unwrap(),
        16,
    )
    .unwrap();
    let space = WeightedSpace::new(rule, metric, GaugeFunction::closed_form(Expr::one())).unwrap();
    let area = space.inner_product(&Expr::one(), &Expr::one()).unwrap();
    assert_relative_eq!(area, 4.0 * std::f64::consts::PI, max_relative = 1e-12);
}
