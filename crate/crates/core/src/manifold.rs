//! Metric-aware geometry on a chart: volume weight, divergence and the
//! divergence with respect to the weighted volume `η² dτ`.

use thiserror::Error;

use crate::check::{max_over, CheckRecord};
use crate::expr::{EvalError, Expr};

/// Diagonal metric `ds² = Σ g_ii (dx^i)²`.
#[derive(Debug, Clone, PartialEq)]
pub enum Metric {
    Identity,
    Diagonal(Vec<Expr>),
}

/// Vector field `L = ξ^i ∂_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    xi: Vec<Expr>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("metric component g_{index}{index} = {value} is not positive at {point:?}")]
    NonPositiveMetric { index: usize, value: f64, point: Vec<f64> },
    #[error("gauge function vanishes at {0:?}")]
    ZeroGauge(Vec<f64>),
    #[error("weighted divergence forms disagree at {point:?}: direct {direct}, expanded {expanded}")]
    Inconsistent { point: Vec<f64>, direct: f64, expanded: f64 },
}

impl VectorField {
    pub fn new(xi: Vec<Expr>) -> Self {
        VectorField { xi }
    }

    pub fn dim(&self) -> usize {
        self.xi.len()
    }

    pub fn components(&self) -> &[Expr] {
        &self.xi
    }

    /// Lie derivative of a scalar: `Σ ξ^i ∂_i ψ`.
    pub fn apply(&self, psi: &Expr) -> Expr {
        self.xi.iter().enumerate().fold(Expr::zero(), |acc, (i, xi)| acc + xi.clone() * psi.diff(i))
    }

    /// `ξ(p)` as a vector.
    pub fn eval(&self, p: &[f64]) -> Result<Vec<f64>, EvalError> {
        self.xi.iter().map(|c| c.eval(p)).collect()
    }

    pub fn eval_into(&self, p: &[f64], out: &mut [f64]) -> Result<(), EvalError> {
        for (o, c) in out.iter_mut().zip(&self.xi) {
            *o = c.eval(p)?;
        }
        Ok(())
    }
}

impl Metric {
    /// `√g = √(Π g_ii)` as an expression.
    pub fn sqrt_det(&self) -> Expr {
        match self {
            Metric::Identity => Expr::one(),
            Metric::Diagonal(g) => g.iter().fold(Expr::one(), |acc, gi| acc * gi.clone()).sqrt(),
        }
    }

    pub fn is_identity(&self) -> bool {
        match self {
            Metric::Identity => true,
            Metric::Diagonal(g) => g.iter().all(Expr::is_one),
        }
    }

    /// Fails unless every `g_ii` is strictly positive at every point.
    pub fn check_positive(&self, points: &[Vec<f64>]) -> Result<(), GeometryError> {
        if let Metric::Diagonal(g) = self {
            for p in points {
                for (index, gi) in g.iter().enumerate() {
                    let value = gi.eval(p)?;
                    if value <= 0.0 {
                        return Err(GeometryError::NonPositiveMetric { index, value, point: p.clone() });
                    }
                }
            }
        }
        Ok(())
    }
}

/// Volume weight `√g(p)` of `dτ = √g dx¹…dxⁿ`.
pub fn volume_weight(metric: &Metric, p: &[f64]) -> Result<f64, GeometryError> {
    match metric {
        Metric::Identity => Ok(1.0),
        Metric::Diagonal(g) => {
            let mut det = 1.0;
            for (index, gi) in g.iter().enumerate() {
                let value = gi.eval(p)?;
                if value <= 0.0 {
                    return Err(GeometryError::NonPositiveMetric { index, value, point: p.to_vec() });
                }
                det *= value;
            }
            Ok(det.sqrt())
        }
    }
}

/// Symbolic `div L = g^{-1/2} Σ_i ∂_i(g^{1/2} ξ^i)`.
pub fn divergence_expr(field: &VectorField, metric: &Metric) -> Expr {
    weighted_flux_divergence(field, &metric.sqrt_det())
}

/// `w⁻¹ Σ_i ∂_i(w ξ^i)` for a density `w`.
fn weighted_flux_divergence(field: &VectorField, density: &Expr) -> Expr {
    let flux = field
        .components()
        .iter()
        .enumerate()
        .fold(Expr::zero(), |acc, (i, xi)| acc + (density.clone() * xi.clone()).diff(i));
    flux / density.clone()
}

pub fn divergence(field: &VectorField, metric: &Metric, p: &[f64]) -> Result<f64, GeometryError> {
    Ok(divergence_expr(field, metric).eval(p)?)
}

/// Divergence with respect to `η² dτ`, in the direct form
/// `(η⁻² g^{-1/2}) Σ_i ∂_i(η² g^{1/2} ξ^i)`.
pub fn weighted_divergence_expr(field: &VectorField, metric: &Metric, eta: &Expr) -> Expr {
    weighted_flux_divergence(field, &(eta.clone().powf(2.0) * metric.sqrt_det()))
}

/// Expanded form `div L + 2 η⁻¹ (Lη)`.
pub fn weighted_divergence_expanded(field: &VectorField, metric: &Metric, eta: &Expr) -> Expr {
    divergence_expr(field, metric) + 2.0 * field.apply(eta) / eta.clone()
}

/// Weighted divergence at `p`. Both algebraic forms are evaluated; a
/// discrepancy above `1e-10 (1 + |value|)` is reported as an error.
pub fn weighted_divergence(field: &VectorField, metric: &Metric, eta: &Expr, p: &[f64]) -> Result<f64, GeometryError> {
    WeightedDivergence::new(field, metric, eta).eval(p)
}

/// Both forms of the weighted divergence, built once for repeated evaluation.
pub struct WeightedDivergence {
    eta: Expr,
    direct: Expr,
    expanded: Expr,
}

impl WeightedDivergence {
    pub fn new(field: &VectorField, metric: &Metric, eta: &Expr) -> Self {
        WeightedDivergence {
            eta: eta.clone(),
            direct: weighted_divergence_expr(field, metric, eta),
            expanded: weighted_divergence_expanded(field, metric, eta),
        }
    }

    pub fn eval(&self, p: &[f64]) -> Result<f64, GeometryError> {
        if self.eta.eval(p)? == 0.0 {
            return Err(GeometryError::ZeroGauge(p.to_vec()));
        }
        let direct = self.direct.eval(p)?;
        let expanded = self.expanded.eval(p)?;
        if (direct - expanded).abs() > 1e-10 * (1.0 + direct.abs().max(expanded.abs())) {
            return Err(GeometryError::Inconsistent { point: p.to_vec(), direct, expanded });
        }
        Ok(direct)
    }
}

/// Incompressibility of `L` in `(M, η² dτ)`: passes iff the weighted
/// divergence stays within `tol` on every sample point.
pub fn check_incompressible(
    field: &VectorField,
    metric: &Metric,
    eta: &Expr,
    sample_points: &[Vec<f64>],
    tol: f64,
) -> CheckRecord {
    const NAME: &str = "incompressible";
    let div = WeightedDivergence::new(field, metric, eta);
    match max_over(sample_points, |p| div.eval(p).map(f64::abs)) {
        Ok(worst) => worst.into_record(NAME, tol),
        Err(e) => CheckRecord::failed(NAME, tol, e),
    }
}
