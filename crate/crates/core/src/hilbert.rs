//! Weighted `L²` spaces `H_η = (L², |η|^{2α} dτ)` on a truncated box.
//!
//! Multiplication by `|η|^α` maps `H_η` isometrically onto the plain space
//! `(L², dτ)`. Both inner products are computed here by quadrature over the
//! same node set, so the isometry check compares two regroupings of the
//! same integrand.

use thiserror::Error;

use crate::check::CheckRecord;
use crate::expr::{EvalError, Expr};
use crate::gauge::{GaugeError, GaugeFunction};
use crate::manifold::{volume_weight, GeometryError, Metric};
use crate::quadrature::pairwise_sum;

pub use crate::quadrature::{QuadratureRule, QuadratureScheme};

/// Relative change below which a norm counts as converged under refinement.
pub const CONVERGENCE_REL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HilbertError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Gauge(#[from] GaugeError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("weight |eta|^(2 alpha) sqrt(g) = {value} is not finite and positive at {point:?}")]
    BadWeight { value: f64, point: Vec<f64> },
}

#[derive(Debug, Clone)]
struct Node {
    point: Vec<f64>,
    /// quadrature weight × √g
    plain: f64,
    /// |η|^α at the node
    eta_alpha: f64,
}

/// `(L², |η|^{2α} dτ)` truncated to the rule's box.
#[derive(Debug, Clone)]
pub struct WeightedSpace {
    rule: QuadratureRule,
    metric: Metric,
    eta: GaugeFunction,
    nodes: Vec<Node>,
}

impl WeightedSpace {
    pub fn new(rule: QuadratureRule, metric: Metric, eta: GaugeFunction) -> Result<Self, HilbertError> {
        let mut nodes = Vec::new();
        for (point, w) in rule.nodes() {
            let sqrt_g = volume_weight(&metric, &point)?;
            let eta_alpha = eta.eval(&point)?.abs().powf(eta.alpha);
            let weight = eta_alpha * eta_alpha * sqrt_g;
            if !(weight.is_finite() && weight > 0.0) {
                return Err(HilbertError::BadWeight { value: weight, point });
            }
            nodes.push(Node { point, plain: w * sqrt_g, eta_alpha });
        }
        Ok(WeightedSpace { rule, metric, eta, nodes })
    }

    pub fn rule(&self) -> &QuadratureRule {
        &self.rule
    }

    pub fn metric(&self) -> &Metric {
        &self.metric
    }

    pub fn eta(&self) -> &GaugeFunction {
        &self.eta
    }

    pub fn alpha(&self) -> f64 {
        self.eta.alpha
    }

    /// The same space with twice the quadrature points per axis.
    pub fn refined(&self) -> Result<Self, HilbertError> {
        WeightedSpace::new(self.rule.refined(), self.metric.clone(), self.eta.clone())
    }

    /// The same space with a different weight exponent.
    pub fn with_alpha(&self, alpha: f64) -> Result<Self, HilbertError> {
        WeightedSpace::new(self.rule.clone(), self.metric.clone(), self.eta.clone().with_alpha(alpha))
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.nodes.iter().map(|n| n.point.as_slice())
    }

    fn sum<E>(&self, mut term: impl FnMut(&Node) -> Result<f64, E>) -> Result<f64, E> {
        let terms = self.nodes.iter().map(&mut term).collect::<Result<Vec<_>, E>>()?;
        Ok(pairwise_sum(&terms))
    }

    /// `⟨ψ, φ⟩_η = ∫ ψ φ |η|^{2α} dτ`.
    pub fn inner_product(&self, psi: &Expr, phi: &Expr) -> Result<f64, HilbertError> {
        self.sum(|n| Ok(psi.eval(&n.point)? * phi.eval(&n.point)? * (n.eta_alpha * n.eta_alpha) * n.plain))
    }

    /// `⟨ψ, φ⟩ = ∫ ψ φ dτ` in the unweighted space.
    pub fn plain_inner_product(&self, psi: &Expr, phi: &Expr) -> Result<f64, HilbertError> {
        self.sum(|n| Ok(psi.eval(&n.point)? * phi.eval(&n.point)? * n.plain))
    }

    /// `⟨|η|^α ψ, |η|^α φ⟩` in the unweighted space.
    pub fn transported_inner_product(&self, psi: &Expr, phi: &Expr) -> Result<f64, HilbertError> {
        self.sum(|n| Ok((n.eta_alpha * psi.eval(&n.point)?) * (n.eta_alpha * phi.eval(&n.point)?) * n.plain))
    }

    /// `‖f‖²_η` from values of `f` at [`points`](Self::points), in order.
    pub fn weighted_norm_sq_of(&self, values: &[f64]) -> f64 {
        assert_eq!(values.len(), self.nodes.len(), "one value per quadrature node");
        let terms: Vec<f64> =
            self.nodes.iter().zip(values).map(|(n, v)| (n.eta_alpha * v) * (n.eta_alpha * v) * n.plain).collect();
        pairwise_sum(&terms)
    }

    /// `‖f‖²` in the unweighted space from node values of `f`.
    pub fn plain_norm_sq_of(&self, values: &[f64]) -> f64 {
        assert_eq!(values.len(), self.nodes.len(), "one value per quadrature node");
        let terms: Vec<f64> = self.nodes.iter().zip(values).map(|(n, v)| v * v * n.plain).collect();
        pairwise_sum(&terms)
    }
}

/// `⟨ψ, φ⟩_η = ⟨|η|^α ψ, |η|^α φ⟩`, compared relative to `1 + |⟨ψ, φ⟩_η|`.
pub fn check_isometry(space: &WeightedSpace, psi: &Expr, phi: &Expr, tol: f64) -> CheckRecord {
    let name = "isometry";
    let sides = space.inner_product(psi, phi).and_then(|lhs| Ok((lhs, space.transported_inner_product(psi, phi)?)));
    match sides {
        Ok((lhs, rhs)) => CheckRecord::from_residual(name, (lhs - rhs).abs() / (1.0 + lhs.abs()), None, tol)
            .with_note(format!("<psi,phi>_eta = {lhs:.11e}, <|eta|^a psi,|eta|^a phi> = {rhs:.11e}")),
        Err(e) => CheckRecord::failed(name, tol, e),
    }
}

fn converged(coarse: f64, fine: f64) -> bool {
    (coarse - fine).abs() <= CONVERGENCE_REL * coarse.abs().max(fine.abs())
}

/// Finiteness of `‖ψ‖_η` and of `‖|η|^α ψ‖`, judged by quadrature
/// convergence when the points per axis double. Passes when both converge,
/// fails when exactly one does, and is indeterminate when neither does.
pub fn check_membership_transport(space: &WeightedSpace, psi: &Expr) -> CheckRecord {
    let name = "membership";
    let norms = || -> Result<[f64; 4], HilbertError> {
        let fine = space.refined()?;
        Ok([
            space.inner_product(psi, psi)?,
            fine.inner_product(psi, psi)?,
            space.transported_inner_product(psi, psi)?,
            fine.transported_inner_product(psi, psi)?,
        ])
    };
    let [w0, w1, p0, p1] = match norms() {
        Ok(n) => n,
        Err(e) => return CheckRecord::failed(name, CONVERGENCE_REL, e),
    };
    let change = |a: f64, b: f64| if a == b { 0.0 } else { (a - b).abs() / a.abs().max(b.abs()) };
    let residual = change(w0, w1).max(change(p0, p1));
    let note = format!("|psi|_eta^2 = {w1:.11e}, ||eta|^a psi|^2 = {p1:.11e}");
    match (converged(w0, w1), converged(p0, p1)) {
        (true, true) => CheckRecord::from_residual(name, residual, None, CONVERGENCE_REL).with_note(note),
        (false, false) => CheckRecord::indeterminate(name, CONVERGENCE_REL, "neither norm converges under refinement"),
        _ => {
            let mut record = CheckRecord::from_residual(name, residual, None, CONVERGENCE_REL).with_note(note);
            record.verdict = crate::check::Verdict::Fail;
            record
        }
    }
}
