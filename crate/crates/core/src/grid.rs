use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Relative tolerance for matching a requested time to a grid node.
pub const GRID_MATCH_TOL: f64 = 1e-9;

/// Uniform grid `0, dt, 2dt, …` ending exactly at `horizon`; the last step is
/// shortened when `horizon` is not a multiple of `dt`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub dt: f64,
    pub horizon: f64,
    pub steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
        }
        if !(horizon >= 0.0) || !horizon.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "horizon must be non-negative, got {horizon}"
            )));
        }
        let ratio = horizon / dt;
        let nearest = ratio.round();
        let steps = if (ratio - nearest).abs() <= GRID_MATCH_TOL * nearest.max(1.0) {
            nearest as usize
        } else {
            ratio.ceil() as usize
        };
        Ok(Self { dt, horizon, steps })
    }

    pub fn len(&self) -> usize {
        self.steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn time(&self, k: usize) -> f64 {
        if k >= self.steps {
            self.horizon
        } else {
            k as f64 * self.dt
        }
    }

    pub fn time_as<T: Real>(&self, k: usize) -> T {
        T::of(self.time(k))
    }

    pub fn times<T: Real>(&self) -> Vec<T> {
        (0..self.len()).map(|k| self.time_as(k)).collect()
    }

    /// Grid index of `t`, if `t` is a node.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let k = (t / self.dt).round();
        if k < 0.0 {
            return None;
        }
        let k = (k as usize).min(self.steps);
        let tol = GRID_MATCH_TOL * t.abs().max(1.0);
        ((self.time(k) - t).abs() <= tol).then_some(k)
    }

    pub fn require_index(&self, t: f64, grid: &'static str) -> Result<usize> {
        self.index_of(t).ok_or(Error::GridMismatch { time: t, grid })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn commensurate_horizon() {
        let g = TimeGrid::new(1.0, 0.1).unwrap();
        assert_eq!(g.steps, 10);
        assert_eq!(g.time(10), 1.0);
        assert_eq!(g.index_of(0.5), Some(5));
        assert_eq!(g.index_of(0.55), None);
    }

    #[test]
    fn incommensurate_horizon_shortens_last_step() {
        let g = TimeGrid::new(1.05, 0.1).unwrap();
        assert_eq!(g.steps, 11);
        assert_eq!(g.time(11), 1.05);
        assert_eq!(g.index_of(1.05), Some(11));
    }

    #[test]
    fn rejects_bad_steps() {
        assert!(TimeGrid::new(1.0, 0.0).is_err());
        assert!(TimeGrid::new(-1.0, 0.1).is_err());
        assert_eq!(TimeGrid::new(0.0, 0.1).unwrap().len(), 1);
    }
}
