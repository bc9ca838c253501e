use thiserror::Error;

/// Axis-aligned box `[lo_i, hi_i]` in chart coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxDomain {
    bounds: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid box: {0}")]
pub struct BoxError(String);

impl BoxDomain {
    pub fn new(bounds: Vec<(f64, f64)>) -> Result<Self, BoxError> {
        if bounds.is_empty() {
            return Err(BoxError("no axes".into()));
        }
        for (i, &(lo, hi)) in bounds.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(BoxError(format!("axis {i} has bounds [{lo}, {hi}]")));
            }
        }
        Ok(BoxDomain { bounds })
    }

    pub fn interval(lo: f64, hi: f64) -> Result<Self, BoxError> {
        BoxDomain::new(vec![(lo, hi)])
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.bounds.len() && p.iter().zip(&self.bounds).all(|(x, &(lo, hi))| lo <= *x && *x <= hi)
    }

    /// Same center, every half-width multiplied by `factor`.
    pub fn inflated(&self, factor: f64) -> BoxDomain {
        let bounds = self
            .bounds
            .iter()
            .map(|&(lo, hi)| {
                let (c, r) = (0.5 * (lo + hi), 0.5 * (hi - lo) * factor);
                (c - r, c + r)
            })
            .collect();
        BoxDomain { bounds }
    }

    /// Tensor grid with `n` equally spaced points per axis (endpoints included),
    /// first axis varying slowest.
    pub fn uniform_grid(&self, n: usize) -> Vec<Vec<f64>> {
        let axes: Vec<Vec<f64>> = self
            .bounds
            .iter()
            .map(|&(lo, hi)| match n {
                0 => Vec::new(),
                1 => vec![0.5 * (lo + hi)],
                _ => (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect(),
            })
            .collect();
        tensor(&axes)
    }

    /// About `count` sample points spread over the box: `count` points on a
    /// line in 1-D, a `ceil(count^(1/d))`-per-axis grid otherwise.
    pub fn sample_points(&self, count: usize) -> Vec<Vec<f64>> {
        let d = self.dim() as i32;
        let mut per_axis = (count as f64).powf(1.0 / d as f64).round() as usize;
        while per_axis.pow(d as u32) < count {
            per_axis += 1;
        }
        self.uniform_grid(per_axis.max(1))
    }
}

/// Cartesian product of per-axis coordinates, first axis slowest.
pub(crate) fn tensor(axes: &[Vec<f64>]) -> Vec<Vec<f64>> {
    axes.iter().fold(vec![Vec::new()], |acc, axis| {
        acc.iter()
            .flat_map(|prefix| {
                axis.iter().map(move |&x| {
                    let mut p = prefix.clone();
                    p.push(x);
                    p
                })
            })
            .collect()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_degenerate_boxes() {
        assert!(BoxDomain::interval(1.0, 1.0).is_err());
        assert!(BoxDomain::interval(2.0, 1.0).is_err());
        assert!(BoxDomain::new(vec![]).is_err());
        assert!(BoxDomain::interval(f64::NEG_INFINITY, 0.0).is_err());
    }

    #[test]
    fn grids_and_inflation() {
        let b = BoxDomain::new(vec![(0.0, 1.0), (-1.0, 1.0)]).unwrap();
        let g = b.uniform_grid(3);
        assert_eq!(g.len(), 9);
        assert_eq!(g[1], vec![0.0, 0.0]);
        assert_eq!(g[8], vec![1.0, 1.0]);
        assert_eq!(b.inflated(2.0).bounds(), &[(-0.5, 1.5), (-2.0, 2.0)]);
        assert_eq!(BoxDomain::interval(-3.0, 3.0).unwrap().sample_points(200).len(), 200);
        assert!(b.sample_points(200).len() >= 200);
    }
}
