//! Characteristic flows of a vector field and the evolution groups they carry.
//!
//! `Φ_t` solves `dX/ds = ξ(X)`, `X(0) = x`. The homogeneous group acts by
//! pullback, `(V_t ψ)(x) = ψ(Φ_t(x))`, and the group generated by `L + q`
//! multiplies in the cocycle `exp(∫₀ᵗ q(Φ_s(x)) ds)`:
//!
//! ```text
//! (U_t ψ)(x) = ψ(Φ_t(x)) · exp(∫₀ᵗ q(Φ_s(x)) ds)
//! ```
//!
//! The cocycle is integrated alongside the trajectory as an extra state
//! component. Trajectories that leave the solver's evaluation box abort
//! with [`FlowError::Escaped`].

use rayon::prelude::*;
use thiserror::Error;

use crate::check::{CheckRecord, MaxResidual};
use crate::domain::BoxDomain;
use crate::expr::{EvalError, Expr};
use crate::hilbert::WeightedSpace;
use crate::manifold::VectorField;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FlowIntegrator {
    /// Classical RK4 with `ceil(|t| · steps_per_unit_time)` equal steps.
    Rk4 { steps_per_unit_time: u32 },
    /// Dormand–Prince 5(4) with error control.
    Rk45 { rel_tol: f64, abs_tol: f64 },
}

impl Default for FlowIntegrator {
    fn default() -> Self {
        FlowIntegrator::Rk4 { steps_per_unit_time: 1000 }
    }
}

impl FlowIntegrator {
    pub fn rk45() -> Self {
        FlowIntegrator::Rk45 { rel_tol: 1e-9, abs_tol: 1e-12 }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FlowError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("trajectory from {start:?} left the evaluation box at {point:?} (s = {s})")]
    Escaped { start: Vec<f64>, point: Vec<f64>, s: f64 },
    #[error("adaptive step size underflow at s = {s} (stiff or singular field)")]
    StepUnderflow { s: f64 },
    #[error("invalid integrator settings: {0}")]
    InvalidIntegrator(String),
    #[error("point has {got} coordinates, field has {expected}")]
    Dimension { expected: usize, got: usize },
}

/// Integrates the flow of one vector field inside an optional evaluation box.
#[derive(Debug, Clone)]
pub struct FlowSolver {
    field: VectorField,
    integrator: FlowIntegrator,
    bounds: Option<BoxDomain>,
}

/// End point of a trajectory and the integral of the potential along it.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub end: Vec<f64>,
    pub log_cocycle: f64,
}

impl FlowSolver {
    pub fn new(field: VectorField, integrator: FlowIntegrator, bounds: Option<BoxDomain>) -> Result<Self, FlowError> {
        match integrator {
            FlowIntegrator::Rk4 { steps_per_unit_time: 0 } => {
                return Err(FlowError::InvalidIntegrator("steps_per_unit_time must be positive".into()))
            }
            FlowIntegrator::Rk45 { rel_tol, abs_tol } if !(rel_tol > 0.0 && abs_tol > 0.0) => {
                return Err(FlowError::InvalidIntegrator("tolerances must be positive".into()))
            }
            _ => {}
        }
        Ok(FlowSolver { field, integrator, bounds })
    }

    pub fn field(&self) -> &VectorField {
        &self.field
    }

    pub fn bounds(&self) -> Option<&BoxDomain> {
        self.bounds.as_ref()
    }

    /// `Φ_t(x)`.
    pub fn flow(&self, x: &[f64], t: f64) -> Result<Vec<f64>, FlowError> {
        Ok(self.trajectory(x, t, None)?.end)
    }

    /// `exp(∫₀ᵗ q(Φ_s(x)) ds)`.
    pub fn cocycle(&self, q: &Expr, x: &[f64], t: f64) -> Result<f64, FlowError> {
        Ok(self.trajectory(x, t, Some(q))?.log_cocycle.exp())
    }

    /// Integrates `Φ_s(x)` for `s` from 0 to `t`, and `∫ q` along it when a
    /// potential is given. `t = 0` returns `x` unchanged.
    pub fn trajectory(&self, x: &[f64], t: f64, potential: Option<&Expr>) -> Result<Trajectory, FlowError> {
        let dim = self.field.dim();
        if x.len() != dim {
            return Err(FlowError::Dimension { expected: dim, got: x.len() });
        }
        if t == 0.0 {
            return Ok(Trajectory { end: x.to_vec(), log_cocycle: 0.0 });
        }
        let mut state = x.to_vec();
        state.push(0.0);
        let rhs = |y: &[f64], out: &mut [f64]| -> Result<(), FlowError> {
            let point = &y[..dim];
            self.field.eval_into(point, &mut out[..dim])?;
            out[dim] = match potential {
                Some(q) => q.eval(point)?,
                None => 0.0,
            };
            Ok(())
        };
        let inside = |y: &[f64], s: f64| -> Result<(), FlowError> {
            match &self.bounds {
                Some(b) if !b.contains(&y[..dim]) => {
                    Err(FlowError::Escaped { start: x.to_vec(), point: y[..dim].to_vec(), s })
                }
                _ => Ok(()),
            }
        };
        match self.integrator {
            FlowIntegrator::Rk4 { steps_per_unit_time } => rk4(&rhs, &inside, &mut state, t, steps_per_unit_time)?,
            FlowIntegrator::Rk45 { rel_tol, abs_tol } => dopri5(&rhs, &inside, &mut state, t, rel_tol, abs_tol)?,
        }
        let log_cocycle = state.pop().unwrap_or(0.0);
        Ok(Trajectory { end: state, log_cocycle })
    }

    /// `p ↦ ψ(Φ_t(p))`, the homogeneous group `V_t` applied to `ψ`.
    pub fn evolve_hom<'a>(&'a self, psi: &'a Expr, t: f64) -> Evolution<'a> {
        Evolution { solver: self, psi, potential: None, t }
    }

    /// `p ↦ ψ(Φ_t(p)) · exp(∫₀ᵗ q(Φ_s(p)) ds)`, the group `U_t` of `L + q`.
    pub fn evolve_nonhom<'a>(&'a self, potential: &'a Expr, psi: &'a Expr, t: f64) -> Evolution<'a> {
        Evolution { solver: self, psi, potential: Some(potential), t }
    }

    /// `p ↦ η(p) · (η⁻¹ψ)(Φ_t(p))`, i.e. `η V_t η⁻¹` applied to `ψ`.
    pub fn gauge_conjugated(&self, eta: &Expr, psi: &Expr, t: f64, p: &[f64]) -> Result<f64, FlowError> {
        let end = self.flow(p, t)?;
        Ok(eta.eval(p)? * (psi.eval(&end)? / eta.eval(&end)?))
    }
}

/// `V_t ψ` or `U_t ψ` as a function of the evaluation point.
#[derive(Debug, Clone, Copy)]
pub struct Evolution<'a> {
    solver: &'a FlowSolver,
    psi: &'a Expr,
    potential: Option<&'a Expr>,
    t: f64,
}

impl Evolution<'_> {
    pub fn eval(&self, p: &[f64]) -> Result<f64, FlowError> {
        let traj = self.solver.trajectory(p, self.t, self.potential)?;
        Ok(self.psi.eval(&traj.end)? * traj.log_cocycle.exp())
    }
}

fn rk4(
    rhs: &impl Fn(&[f64], &mut [f64]) -> Result<(), FlowError>,
    inside: &impl Fn(&[f64], f64) -> Result<(), FlowError>,
    y: &mut [f64],
    t: f64,
    steps_per_unit_time: u32,
) -> Result<(), FlowError> {
    let n = ((t.abs() * steps_per_unit_time as f64).ceil() as usize).max(1);
    let h = t / n as f64;
    let m = y.len();
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) =
        (vec![0.0; m], vec![0.0; m], vec![0.0; m], vec![0.0; m], vec![0.0; m]);
    for step in 0..n {
        rhs(y, &mut k1)?;
        for i in 0..m {
            tmp[i] = y[i] + 0.5 * h * k1[i];
        }
        rhs(&tmp, &mut k2)?;
        for i in 0..m {
            tmp[i] = y[i] + 0.5 * h * k2[i];
        }
        rhs(&tmp, &mut k3)?;
        for i in 0..m {
            tmp[i] = y[i] + h * k3[i];
        }
        rhs(&tmp, &mut k4)?;
        for i in 0..m {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        inside(y, h * (step + 1) as f64)?;
    }
    Ok(())
}

// Dormand–Prince 5(4) tableau; the fields are autonomous so the nodes c_i are not needed
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] =
    [5179.0 / 57600.0, 0.0, 7571.0 / 16695.0, 393.0 / 640.0, -92097.0 / 339200.0, 187.0 / 2100.0, 1.0 / 40.0];

fn dopri5(
    rhs: &impl Fn(&[f64], &mut [f64]) -> Result<(), FlowError>,
    inside: &impl Fn(&[f64], f64) -> Result<(), FlowError>,
    y: &mut [f64],
    t: f64,
    rel_tol: f64,
    abs_tol: f64,
) -> Result<(), FlowError> {
    let m = y.len();
    let dir = t.signum();
    let mut s = 0.0f64;
    let mut h = (0.01 * t.abs()).clamp(1e-6_f64.min(t.abs()), 0.1) * dir;
    let mut k = vec![vec![0.0; m]; 7];
    let mut tmp = vec![0.0; m];
    let mut y5 = vec![0.0; m];
    let min_step = 1e-14 * t.abs().max(1.0);
    while (t - s) * dir > 0.0 {
        if (s + h - t) * dir > 0.0 {
            h = t - s;
        }
        rhs(y, &mut k[0])?;
        for stage in 1..7 {
            for i in 0..m {
                tmp[i] = y[i] + h * (0..stage).map(|j| A[stage][j] * k[j][i]).sum::<f64>();
            }
            rhs(&tmp, &mut k[stage])?;
        }
        let mut err: f64 = 0.0;
        for i in 0..m {
            y5[i] = y[i] + h * (0..7).map(|j| B5[j] * k[j][i]).sum::<f64>();
            let y4 = y[i] + h * (0..7).map(|j| B4[j] * k[j][i]).sum::<f64>();
            let scale = abs_tol + rel_tol * y[i].abs().max(y5[i].abs());
            err = err.max((y5[i] - y4).abs() / scale);
        }
        if err <= 1.0 {
            s = if (s + h - t) * dir >= 0.0 { t } else { s + h };
            y.copy_from_slice(&y5);
            inside(y, s)?;
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h *= factor;
        if h.abs() < min_step && (t - s) * dir > min_step {
            return Err(FlowError::StepUnderflow { s });
        }
    }
    Ok(())
}

fn flow_record(name: &str, tol: f64, result: Result<MaxResidual, FlowError>) -> CheckRecord {
    match result {
        Ok(worst) => worst.into_record(name, tol),
        Err(e @ FlowError::Escaped { .. }) => CheckRecord::indeterminate(name, tol, e),
        Err(e) => CheckRecord::failed(name, tol, e),
    }
}

fn max_over_parallel(
    points: &[Vec<f64>],
    residual: impl Fn(&[f64]) -> Result<f64, FlowError> + Sync,
) -> Result<MaxResidual, FlowError> {
    let values: Vec<f64> = points.par_iter().map(|p| residual(p)).collect::<Result<_, _>>()?;
    let mut worst = MaxResidual::new();
    for (p, v) in points.iter().zip(values) {
        worst.observe(v, p);
    }
    Ok(worst)
}

/// `Φ_s ∘ Φ_t = Φ_{s+t}` on the samples and, when a potential is given,
/// `U_s U_t ψ = U_{s+t} ψ` for each test function.
pub fn check_group_law(
    solver: &FlowSolver,
    potential: Option<&Expr>,
    test_functions: &[Expr],
    s: f64,
    t: f64,
    sample_points: &[Vec<f64>],
    tol: f64,
) -> CheckRecord {
    let name = format!("group_law[s={s},t={t}]");
    let result = max_over_parallel(sample_points, |p| {
        let composed = solver.flow(&solver.flow(p, t)?, s)?;
        let direct = solver.flow(p, s + t)?;
        let mut r = composed.iter().zip(&direct).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if let Some(q) = potential {
            // (U_s U_t ψ)(p) = (U_t ψ)(Φ_s p) · c_s(p)
            let first = solver.trajectory(p, s, Some(q))?;
            for psi in test_functions {
                let inner = solver.evolve_nonhom(q, psi, t).eval(&first.end)?;
                let lhs = inner * first.log_cocycle.exp();
                let rhs = solver.evolve_nonhom(q, psi, s + t).eval(p)?;
                r = r.max((lhs - rhs).abs());
            }
        }
        Ok(r)
    });
    flow_record(&name, tol, result)
}

/// Norms of `ψ`, `U_t ψ` in `(L², dτ)` and of `ψ`, `V_t ψ` in `(L², η² dτ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitaritySample {
    pub t: f64,
    pub norm: f64,
    pub norm_evolved: f64,
    pub weighted_norm: f64,
    pub weighted_norm_evolved: f64,
}

impl UnitaritySample {
    pub fn ratio(&self) -> f64 {
        self.norm_evolved / self.norm
    }

    pub fn weighted_ratio(&self) -> f64 {
        self.weighted_norm_evolved / self.weighted_norm
    }

    /// Worst of the two relative norm deviations.
    pub fn deviation(&self) -> f64 {
        let plain = (self.norm_evolved - self.norm).abs() / (1.0 + self.norm);
        let weighted = (self.weighted_norm_evolved - self.weighted_norm).abs() / (1.0 + self.weighted_norm);
        plain.max(weighted)
    }
}

/// Quadrature norms before and after evolution, one sample per time.
///
/// `space` must carry weight exponent `α = 1` (weight `η² dτ`).
pub fn unitarity_norms(
    solver: &FlowSolver,
    potential: &Expr,
    space: &WeightedSpace,
    psi: &Expr,
    times: &[f64],
) -> Result<Vec<UnitaritySample>, FlowError> {
    if space.alpha() != 1.0 {
        return Err(FlowError::InvalidIntegrator(format!(
            "group norms use the weight eta^2, got alpha = {}",
            space.alpha()
        )));
    }
    let points: Vec<Vec<f64>> = space.points().map(<[f64]>::to_vec).collect();
    let initial: Vec<f64> = points.iter().map(|p| psi.eval(p)).collect::<Result<_, _>>()?;
    let norm = space.plain_norm_sq_of(&initial).sqrt();
    let weighted_norm = space.weighted_norm_sq_of(&initial).sqrt();
    times
        .iter()
        .map(|&t| {
            let evolved: Vec<(f64, f64)> = points
                .par_iter()
                .map(|p| {
                    let traj = solver.trajectory(p, t, Some(potential))?;
                    let v = psi.eval(&traj.end)?;
                    Ok((v * traj.log_cocycle.exp(), v))
                })
                .collect::<Result<_, FlowError>>()?;
            let (u, v): (Vec<f64>, Vec<f64>) = evolved.into_iter().unzip();
            Ok(UnitaritySample {
                t,
                norm,
                norm_evolved: space.plain_norm_sq_of(&u).sqrt(),
                weighted_norm,
                weighted_norm_evolved: space.weighted_norm_sq_of(&v).sqrt(),
            })
        })
        .collect()
}

/// For every `t`: `|‖U_t ψ‖ - ‖ψ‖| <= tol (1 + ‖ψ‖)` in `(L², dτ)` and
/// `|‖V_t ψ‖_η - ‖ψ‖_η| <= tol (1 + ‖ψ‖_η)` in `(L², η² dτ)`.
pub fn check_unitarity(
    solver: &FlowSolver,
    potential: &Expr,
    space: &WeightedSpace,
    psi: &Expr,
    times: &[f64],
    tol: f64,
) -> CheckRecord {
    const NAME: &str = "unitarity";
    match unitarity_norms(solver, potential, space, psi, times) {
        Ok(samples) => {
            let worst = samples.iter().map(UnitaritySample::deviation).fold(0.0, f64::max);
            let note = samples
                .iter()
                .map(|s| {
                    format!(
                        "t={}: |U_t psi|/|psi| = {:.11e}, |V_t psi|_eta/|psi|_eta = {:.11e}",
                        s.t,
                        s.ratio(),
                        s.weighted_ratio()
                    )
                })
                .collect::<Vec<_>>()
                .join("; ");
            CheckRecord::from_residual(NAME, worst, None, tol).with_note(note)
        }
        Err(e @ FlowError::Escaped { .. }) => CheckRecord::indeterminate(NAME, tol, e),
        Err(e) => CheckRecord::failed(NAME, tol, e),
    }
}

/// Central difference of the groups at `t = 0` against the generators:
/// `(U_h ψ - U_{-h} ψ)/2h ≈ (L + q)ψ` and `(V_h ψ - V_{-h} ψ)/2h ≈ Lψ`,
/// with residuals relative to `1 + |generator image|`.
pub fn check_generator(
    solver: &FlowSolver,
    potential: &Expr,
    psi: &Expr,
    h: f64,
    sample_points: &[Vec<f64>],
    tol: f64,
) -> CheckRecord {
    let name = "generator";
    if !(h > 0.0) {
        return CheckRecord::failed(name, tol, format!("step h = {h} must be positive"));
    }
    let l_psi = solver.field().apply(psi);
    let lq_psi = l_psi.clone() + potential.clone() * psi.clone();
    let result = max_over_parallel(sample_points, |p| {
        let u = (solver.evolve_nonhom(potential, psi, h).eval(p)?
            - solver.evolve_nonhom(potential, psi, -h).eval(p)?)
            / (2.0 * h);
        let v = (solver.evolve_hom(psi, h).eval(p)? - solver.evolve_hom(psi, -h).eval(p)?) / (2.0 * h);
        let (gu, gv) = (lq_psi.eval(p)?, l_psi.eval(p)?);
        Ok(((u - gu).abs() / (1.0 + gu.abs())).max((v - gv).abs() / (1.0 + gv.abs())))
    });
    flow_record(name, tol, result)
}

/// `U_t ψ = η V_t η⁻¹ ψ`: the cocycle path against the gauge path.
pub fn check_intertwine(
    solver: &FlowSolver,
    potential: &Expr,
    eta: &Expr,
    psi: &Expr,
    times: &[f64],
    sample_points: &[Vec<f64>],
    tol: f64,
) -> CheckRecord {
    let name = "intertwine";
    let result = max_over_parallel(sample_points, |p| {
        let mut r: f64 = 0.0;
        for &t in times {
            let cocycle_path = solver.evolve_nonhom(potential, psi, t).eval(p)?;
            let gauge_path = solver.gauge_conjugated(eta, psi, t, p)?;
            r = r.max((cocycle_path - gauge_path).abs());
        }
        Ok(r)
    });
    flow_record(name, tol, result)
}

/// `max_p |U_t η(p) - η(p)|` over all `t`: a gauge function is invariant.
pub fn kernel_invariance(
    solver: &FlowSolver,
    potential: &Expr,
    eta: &Expr,
    times: &[f64],
    sample_points: &[Vec<f64>],
) -> Result<MaxResidual, FlowError> {
    max_over_parallel(sample_points, |p| {
        let base = eta.eval(p)?;
        times
            .iter()
            .try_fold(0.0f64, |acc, &t| Ok(acc.max((solver.evolve_nonhom(potential, eta, t).eval(p)? - base).abs())))
    })
}
