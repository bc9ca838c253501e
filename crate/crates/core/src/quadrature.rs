//! Tensor-product quadrature on boxes.

use rayon::prelude::*;
use thiserror::Error;

use crate::domain::{tensor, BoxDomain};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuadratureScheme {
    GaussLegendre,
    Simpson,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid quadrature rule: {0}")]
pub struct RuleError(String);

/// Quadrature over a box with `points_per_axis` nodes per axis.
///
/// For Simpson the count is the number of panels, so each axis carries
/// `points_per_axis + 1` nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    domain: BoxDomain,
    points_per_axis: usize,
    scheme: QuadratureScheme,
}

impl QuadratureRule {
    pub fn new(domain: BoxDomain, points_per_axis: usize, scheme: QuadratureScheme) -> Result<Self, RuleError> {
        if points_per_axis < 8 {
            return Err(RuleError(format!("{points_per_axis} points per axis, need at least 8")));
        }
        if scheme == QuadratureScheme::Simpson && !points_per_axis.is_multiple_of(2) {
            return Err(RuleError(format!("Simpson needs an even panel count, got {points_per_axis}")));
        }
        Ok(QuadratureRule { domain, points_per_axis, scheme })
    }

    pub fn gauss_legendre(domain: BoxDomain, points_per_axis: usize) -> Result<Self, RuleError> {
        QuadratureRule::new(domain, points_per_axis, QuadratureScheme::GaussLegendre)
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    pub fn points_per_axis(&self) -> usize {
        self.points_per_axis
    }

    pub fn scheme(&self) -> QuadratureScheme {
        self.scheme
    }

    /// Same box and scheme with twice the points per axis.
    pub fn refined(&self) -> QuadratureRule {
        QuadratureRule { points_per_axis: 2 * self.points_per_axis, ..self.clone() }
    }

    pub fn with_scheme(&self, scheme: QuadratureScheme) -> Result<Self, RuleError> {
        QuadratureRule::new(self.domain.clone(), self.points_per_axis, scheme)
    }

    /// Nodes and weights, first axis varying slowest.
    pub fn nodes(&self) -> Vec<(Vec<f64>, f64)> {
        let per_axis: Vec<(Vec<f64>, Vec<f64>)> = self
            .domain
            .bounds()
            .iter()
            .map(|&(lo, hi)| match self.scheme {
                QuadratureScheme::GaussLegendre => {
                    let (x, w) = gauss_legendre(self.points_per_axis);
                    let (c, r) = (0.5 * (hi + lo), 0.5 * (hi - lo));
                    (x.iter().map(|t| c + r * t).collect(), w.iter().map(|w| r * w).collect())
                }
                QuadratureScheme::Simpson => simpson(lo, hi, self.points_per_axis),
            })
            .collect();
        let points = tensor(&per_axis.iter().map(|(x, _)| x.clone()).collect::<Vec<_>>());
        let weights = tensor(&per_axis.iter().map(|(_, w)| w.clone()).collect::<Vec<_>>());
        points.into_iter().zip(weights).map(|(p, w)| (p, w.iter().product())).collect()
    }

    /// `Σ_k w_k f(x_k)`, nodes evaluated in parallel and summed in a fixed
    /// pairwise order so the result does not depend on scheduling.
    pub fn integrate<E, F>(&self, f: F) -> Result<f64, E>
    where
        E: Send,
        F: Fn(&[f64]) -> Result<f64, E> + Sync,
    {
        let terms: Vec<f64> = self.nodes().par_iter().map(|(p, w)| f(p).map(|v| w * v)).collect::<Result<_, E>>()?;
        Ok(pairwise_sum(&terms))
    }
}

/// Deterministic pairwise summation.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= 8 {
        values.iter().sum()
    } else {
        let mid = values.len() / 2;
        pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`, ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let half = n.div_ceil(2);
    for i in 0..half {
        // Newton iteration on P_n from the usual cosine guess
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() <= 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let n = n as f64;
    (p1, n * (x * p1 - p0) / (x * x - 1.0))
}

fn simpson(lo: f64, hi: f64, panels: usize) -> (Vec<f64>, Vec<f64>) {
    let h = (hi - lo) / panels as f64;
    let nodes = (0..=panels).map(|k| lo + k as f64 * h).collect();
    let weights = (0..=panels)
        .map(|k| {
            let c = if k == 0 || k == panels {
                1.0
            } else if k % 2 == 1 {
                4.0
            } else {
                2.0
            };
            c * h / 3.0
        })
        .collect();
    (nodes, weights)
}
