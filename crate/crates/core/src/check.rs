//! Outcome records produced by every verification routine.

use std::fmt;
use std::time::Duration;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
    Indeterminate,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Indeterminate => "INDETERMINATE",
        })
    }
}

/// Result of one named check.
///
/// `error` is set when evaluation itself failed (domain error, escaped
/// trajectory, oversized expression); such records never pass.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckRecord {
    pub name: String,
    pub verdict: Verdict,
    pub max_residual: f64,
    pub worst_point: Option<Vec<f64>>,
    pub tolerance: f64,
    pub wall_time: Duration,
    pub error: Option<String>,
    pub note: Option<String>,
}

impl CheckRecord {
    /// Pass iff `max_residual <= tolerance` (a NaN residual fails).
    pub fn from_residual(
        name: impl Into<String>,
        max_residual: f64,
        worst_point: Option<Vec<f64>>,
        tolerance: f64,
    ) -> Self {
        let verdict = if max_residual <= tolerance { Verdict::Pass } else { Verdict::Fail };
        CheckRecord {
            name: name.into(),
            verdict,
            max_residual,
            worst_point,
            tolerance,
            wall_time: Duration::ZERO,
            error: None,
            note: None,
        }
    }

    pub fn failed(name: impl Into<String>, tolerance: f64, error: impl fmt::Display) -> Self {
        CheckRecord {
            name: name.into(),
            verdict: Verdict::Fail,
            max_residual: f64::NAN,
            worst_point: None,
            tolerance,
            wall_time: Duration::ZERO,
            error: Some(error.to_string()),
            note: None,
        }
    }

    pub fn indeterminate(name: impl Into<String>, tolerance: f64, reason: impl fmt::Display) -> Self {
        CheckRecord {
            verdict: Verdict::Indeterminate,
            error: None,
            note: Some(reason.to_string()),
            ..CheckRecord::failed(name, tolerance, "")
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    pub fn with_wall_time(mut self, wall_time: Duration) -> Self {
        self.wall_time = wall_time;
        self
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }
}

/// Running maximum of a residual over sample points.
#[derive(Debug, Clone, Default)]
pub struct MaxResidual {
    pub value: f64,
    pub point: Option<Vec<f64>>,
}

impl MaxResidual {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn observe(&mut self, residual: f64, point: &[f64]) {
        // NaN must win so that it surfaces as a failure
        if !self.value.is_nan() && (residual.is_nan() || residual > self.value || self.point.is_none()) {
            self.value = residual;
            self.point = Some(point.to_vec());
        }
    }

    pub fn merge(&mut self, other: MaxResidual) {
        if let Some(p) = other.point {
            self.observe(other.value, &p);
        }
    }

    pub fn into_record(self, name: impl Into<String>, tolerance: f64) -> CheckRecord {
        CheckRecord::from_residual(name, self.value, self.point, tolerance)
    }
}

/// Evaluates `residual` at every point and keeps the worst; the first error aborts.
pub fn max_over<E>(points: &[Vec<f64>], mut residual: impl FnMut(&[f64]) -> Result<f64, E>) -> Result<MaxResidual, E> {
    let mut worst = MaxResidual::new();
    for p in points {
        worst.observe(residual(p)?, p);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verdict_from_residual() {
        assert!(CheckRecord::from_residual("a", 1e-13, None, 1e-12).passed());
        assert!(!CheckRecord::from_residual("a", 2e-12, None, 1e-12).passed());
        assert!(!CheckRecord::from_residual("a", f64::NAN, None, 1.0).passed());
    }

    #[test]
    fn max_residual_tracks_worst_and_nan() {
        let pts = vec![vec![0.0], vec![1.0], vec![2.0]];
        let m = max_over::<()>(&pts, |p| Ok(p[0] * (2.0 - p[0]))).unwrap();
        assert_eq!(m.value, 1.0);
        assert_eq!(m.point, Some(vec![1.0]));
        let m = max_over::<()>(&pts, |p| Ok(if p[0] == 1.0 { f64::NAN } else { 5.0 })).unwrap();
        assert!(m.value.is_nan());
        assert_eq!(m.point, Some(vec![1.0]));
    }
}
