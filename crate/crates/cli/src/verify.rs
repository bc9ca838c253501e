//! Runs the full check sequence for a scenario and renders the report.

use std::fmt::Write as _;
use std::time::Instant;

use gaugeops::flow::{check_generator, check_group_law, check_intertwine, check_unitarity};
use gaugeops::gauge::{
    check_alpha_gauge, check_factorization, check_power, check_residual_eta, check_shift, eigen_transport,
    solve_eta_1d, ComplexExpr, DEFAULT_NODE_CAP,
};
use gaugeops::hilbert::{check_isometry, check_membership_transport};
use gaugeops::manifold::check_incompressible;
use gaugeops::{
    BoxDomain, CheckRecord, Expr, FirstOrderOperator, FlowError, FlowSolver, GaugeError, GaugeFunction, QuadratureRule,
    Verdict, WeightedSpace,
};
use thiserror::Error;

use crate::format::fmt_num;
use crate::scenario::Scenario;

/// Grid resolution used when the gauge function has to be solved for.
pub const SOLVER_GRID: usize = 2001;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("operator: {0}")]
    Operator(GaugeError),
    #[error("gauge function: {0}")]
    Gauge(GaugeError),
    #[error("flow: {0}")]
    Flow(FlowError),
}

/// Ordered check records of one run.
#[derive(Debug, Clone)]
pub struct CheckReport {
    pub scenario: String,
    pub records: Vec<CheckRecord>,
}

impl CheckReport {
    pub fn all_passed(&self) -> bool {
        self.records.iter().all(CheckRecord::passed)
    }

    /// 0 when every record passes, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.all_passed() {
            0
        } else {
            1
        }
    }

    pub fn count(&self, verdict: Verdict) -> usize {
        self.records.iter().filter(|r| r.verdict == verdict).count()
    }

    pub fn get(&self, name: &str) -> Option<&CheckRecord> {
        self.records.iter().find(|r| r.name == name)
    }

    /// Plain-text report. Wall times are included only on request so that
    /// report files are reproducible byte for byte.
    pub fn render(&self, with_times: bool) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "scenario: {}", self.scenario);
        let _ = writeln!(
            out,
            "checks: {}  pass: {}  fail: {}  indeterminate: {}",
            self.records.len(),
            self.count(Verdict::Pass),
            self.count(Verdict::Fail),
            self.count(Verdict::Indeterminate)
        );
        for r in &self.records {
            let _ = write!(
                out,
                "{:<13} {}  max_residual={}  tolerance={}",
                r.verdict.to_string(),
                r.name,
                fmt_num(r.max_residual),
                fmt_num(r.tolerance)
            );
            if let Some(p) = &r.worst_point {
                let coords: Vec<String> = p.iter().map(|x| fmt_num(*x)).collect();
                let _ = write!(out, "  worst_point=({})", coords.join(", "));
            }
            if with_times {
                let _ = write!(out, "  time={:.3}ms", r.wall_time.as_secs_f64() * 1e3);
            }
            out.push('\n');
            if let Some(e) = &r.error {
                let _ = writeln!(out, "    error: {e}");
            }
            if let Some(n) = &r.note {
                let _ = writeln!(out, "    note: {n}");
            }
        }
        let _ = writeln!(out, "result: {}", if self.all_passed() { "PASS" } else { "FAIL" });
        out
    }
}

fn timed(f: impl FnOnce() -> CheckRecord) -> CheckRecord {
    let start = Instant::now();
    let record = f();
    let elapsed = start.elapsed();
    record.with_wall_time(elapsed)
}

/// `name[args]` becomes `name[args,label]`, `name` becomes `name[label]`.
fn qualify(mut record: CheckRecord, label: &str) -> CheckRecord {
    record.name = match record.name.strip_suffix(']') {
        Some(head) => format!("{head},{label}]"),
        None => format!("{}[{label}]", record.name),
    };
    record
}

/// Smallest box containing both.
fn hull(a: &BoxDomain, b: &BoxDomain) -> BoxDomain {
    let bounds = a.bounds().iter().zip(b.bounds()).map(|(x, y)| (x.0.min(y.0), x.1.max(y.1))).collect();
    BoxDomain::new(bounds).expect("hull of valid boxes")
}

/// The scenario's gauge function: the closed form if given, otherwise the
/// tabulated solution over the quadrature and sample boxes.
pub fn gauge_for(s: &Scenario, op: &FirstOrderOperator) -> Result<GaugeFunction, RunError> {
    let eta = match &s.eta {
        Some(e) => GaugeFunction::closed_form(e.clone()),
        None => {
            let span = hull(&s.quad_box, &s.sample_box);
            let grid: Vec<f64> = span.uniform_grid(SOLVER_GRID).into_iter().map(|p| p[0]).collect();
            let (lo, hi) = s.sample_box.bounds()[0];
            let anchor = s.anchor.unwrap_or(0.5 * (lo + hi));
            solve_eta_1d(op, anchor, &grid).map_err(RunError::Gauge)?
        }
    };
    Ok(eta.with_alpha(s.alpha))
}

pub fn operator_for(s: &Scenario) -> Result<FirstOrderOperator, RunError> {
    FirstOrderOperator::new(s.chart.clone(), s.field.clone(), s.potential.clone()).map_err(RunError::Operator)
}

pub fn flow_solver_for(s: &Scenario) -> Result<FlowSolver, RunError> {
    FlowSolver::new(s.field.clone(), s.integrator, Some(s.flow_box.clone())).map_err(RunError::Flow)
}

pub fn space_for(s: &Scenario, eta: &GaugeFunction) -> Result<WeightedSpace, String> {
    let rule = QuadratureRule::new(s.quad_box.clone(), s.quad_points, s.quad_scheme).map_err(|e| e.to_string())?;
    WeightedSpace::new(rule, s.metric.clone(), eta.clone()).map_err(|e| e.to_string())
}

/// Runs every applicable check in the fixed order:
/// residual_eta, factorization, power, alpha_gauge, shift, eigen_transport,
/// isometry, membership, incompressible, group_law, generator, unitarity,
/// intertwine. Identity checks and intertwining need a closed-form gauge
/// function and are skipped for a tabulated one.
pub fn run_verify(s: &Scenario) -> Result<CheckReport, RunError> {
    let op = operator_for(s)?;
    let samples = s.sample_box.sample_points(s.sample_count);
    let gauge = gauge_for(s, &op)?;
    let closed = gauge.expr().cloned();
    let tol = s.tolerances;
    let label = |psi: &Expr| format!("psi={}", psi.display(&s.chart));
    let mut records = Vec::new();

    records.push(timed(|| check_residual_eta(&op, &gauge, &samples, tol.residual)));

    if let Some(eta) = &closed {
        for psi in &s.test_functions {
            records.push(qualify(timed(|| check_factorization(&op, eta, psi, &samples, tol.identity)), &label(psi)));
        }
        for psi in &s.test_functions {
            let rec = timed(|| check_power(&op, eta, psi, 2, &samples, tol.identity, DEFAULT_NODE_CAP));
            records.push(qualify(rec, &label(psi)));
        }
        for alpha in [-1.0, 2.0] {
            for psi in &s.test_functions {
                let rec = timed(|| check_alpha_gauge(&op, eta, alpha, psi, &samples, tol.identity));
                records.push(qualify(rec, &label(psi)));
            }
        }
        for h in [Expr::constant(3.0), Expr::var(0).sin()] {
            for psi in &s.test_functions {
                records.push(qualify(timed(|| check_shift(&op, eta, &h, psi, &samples, tol.identity)), &label(psi)));
            }
        }
        if let Some(clock) = &s.clock {
            for &lambda in &s.eigenvalues {
                let psi = ComplexExpr::exp_of(lambda, clock);
                records.push(timed(|| eigen_transport(&op, eta, lambda, &psi, &samples, tol.identity)));
            }
        }
    }

    let space = space_for(s, &gauge);
    let tf = &s.test_functions;
    let pairs: Vec<(usize, usize)> = (0..tf.len().min(3)).map(|k| (k, (k + 1) % tf.len())).collect();
    for (k, &(i, j)) in pairs.iter().enumerate() {
        let rec = match &space {
            Ok(space) => timed(|| check_isometry(space, &tf[i], &tf[j], tol.isometry)),
            Err(e) => CheckRecord::failed("isometry", tol.isometry, e),
        };
        records.push(qualify(rec, &format!("pair={}", k + 1)));
    }
    for psi in tf {
        let rec = match &space {
            Ok(space) => timed(|| check_membership_transport(space, psi)),
            Err(e) => CheckRecord::failed("membership", gaugeops::hilbert::CONVERGENCE_REL, e),
        };
        records.push(qualify(rec, &label(psi)));
    }

    if s.incompressibility {
        if let Some(eta) = &closed {
            records.push(timed(|| check_incompressible(&s.field, &s.metric, eta, &samples, tol.incompressible)));
        }
    }

    let solver = flow_solver_for(s)?;
    let (t0, t1) = (s.times[0], s.times[s.times.len() - 1]);
    records.push(timed(|| check_group_law(&solver, Some(&s.potential), tf, t0, t1, &samples, tol.group)));
    for psi in tf {
        let rec = timed(|| check_generator(&solver, &s.potential, psi, s.generator_step, &samples, tol.generator));
        records.push(qualify(rec, &label(psi)));
    }
    if s.unitarity {
        let rec =
            match space.as_ref().map_err(Clone::clone).and_then(|sp| sp.with_alpha(1.0).map_err(|e| e.to_string())) {
                Ok(unit) => timed(|| check_unitarity(&solver, &s.potential, &unit, &tf[0], &s.times, tol.unitarity)),
                Err(e) => CheckRecord::failed("unitarity", tol.unitarity, e),
            };
        records.push(qualify(rec, &label(&tf[0])));
    }
    if let Some(eta) = &closed {
        for psi in tf {
            let rec = timed(|| check_intertwine(&solver, &s.potential, eta, psi, &s.times, &samples, tol.intertwine));
            records.push(qualify(rec, &label(psi)));
        }
    }

    Ok(CheckReport { scenario: s.name.clone(), records })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{load_scenario, parse_scenario};

    #[test]
    fn qualify_names() {
        let r = CheckRecord::from_residual("power[n=2]", 0.0, None, 1.0);
        assert_eq!(qualify(r, "psi=x").name, "power[n=2,psi=x]");
        let r = CheckRecord::from_residual("isometry", 0.0, None, 1.0);
        assert_eq!(qualify(r, "pair=1").name, "isometry[pair=1]");
    }

    #[test]
    fn tabulated_gauge_runs_reduced_sequence() {
        let text = "[manifold]\ndim = 1\nbox = -2, 2\n[operator]\nfield = 1\npotential = 2*x\n[checks]\ntest_functions = exp(-x^2)\n";
        let s = parse_scenario(text, "tab").unwrap();
        let report = run_verify(&s).unwrap();
        let names: Vec<&str> = report.records.iter().map(|r| r.name.as_str()).collect();
        assert_eq!(
            names,
            [
                "residual_eta",
                "isometry[pair=1]",
                "membership[psi=exp(-x^2)]",
                "group_law[s=0.25,t=1]",
                "generator[psi=exp(-x^2)]"
            ]
        );
        assert!(report.get("residual_eta").unwrap().max_residual < 1e-8);
    }

    #[test]
    fn critical_point_is_a_run_error() {
        let text = "[manifold]\ndim = 1\nbox = -1, 1\n[operator]\nfield = x\npotential = 1\n";
        let s = parse_scenario(text, "crit").unwrap();
        assert!(matches!(run_verify(&s), Err(RunError::Gauge(GaugeError::CriticalPoint(_)))));
    }

    #[test]
    fn report_render_has_one_line_per_record() {
        let s = load_scenario("example1").unwrap();
        let report = run_verify(&s).unwrap();
        let text = report.render(false);
        let lines =
            text.lines().filter(|l| l.starts_with("PASS") || l.starts_with("FAIL") || l.starts_with("INDET")).count();
        assert_eq!(lines, report.records.len());
        assert!(!text.contains("time="));
        assert!(report.render(true).contains("time="));
    }
}
