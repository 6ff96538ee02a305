use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{locate, FactorModel};

/// Uniform `(x, t)` lattice on `[x_min, x_max] x [0, T]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimeGrid {
    pub x_min: f64,
    pub x_max: f64,
    /// Number of space nodes.
    pub nx: usize,
    /// Number of time steps; there are `nt + 1` time levels.
    pub nt: usize,
    pub horizon: f64,
}

impl SpaceTimeGrid {
    pub fn new(x_min: f64, x_max: f64, nx: usize, nt: usize, horizon: f64) -> Result<Self> {
        let g = SpaceTimeGrid {
            x_min,
            x_max,
            nx,
            nt,
            horizon,
        };
        g.check()?;
        Ok(g)
    }

    /// Default domain `f0 ± 6 sigma sqrt(T)`.
    pub fn around(model: &FactorModel, nx: usize, nt: usize) -> Result<Self> {
        let half = 6.0 * model.vol_scale().max(f64::EPSILON) * model.horizon.sqrt();
        Self::new(model.f0 - half, model.f0 + half, nx, nt, model.horizon)
    }

    pub fn validate(&self, field: &str, issues: &mut Vec<Error>) {
        if !(self.x_min.is_finite() && self.x_max.is_finite() && self.x_min < self.x_max) {
            issues.push(Error::invalid(
                format!("{field}.x_min"),
                format!("need finite x_min < x_max, got [{}, {}]", self.x_min, self.x_max),
            ));
        }
        // The zero-curvature boundary rows need two interior neighbours.
        if self.nx < 4 {
            issues.push(Error::invalid(
                format!("{field}.nx"),
                format!("need at least 4 space nodes, got {}", self.nx),
            ));
        }
        if self.nt < 1 {
            issues.push(Error::invalid(format!("{field}.nt"), "need at least one time step"));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            issues.push(Error::invalid(format!("{field}.horizon"), "must be positive"));
        }
    }

    pub fn check(&self) -> Result<()> {
        let mut issues = Vec::new();
        self.validate("grid", &mut issues);
        issues.into_iter().next().map_or(Ok(()), Err)
    }

    #[inline]
    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / (self.nx - 1) as f64
    }

    #[inline]
    pub fn dt(&self) -> f64 {
        self.horizon / self.nt as f64
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        if i == self.nx - 1 {
            self.x_max
        } else {
            self.x_min + i as f64 * self.dx()
        }
    }

    #[inline]
    pub fn t(&self, n: usize) -> f64 {
        if n == self.nt {
            self.horizon
        } else {
            n as f64 * self.dt()
        }
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.nx).map(|i| self.x(i)).collect()
    }

    pub fn ts(&self) -> Vec<f64> {
        (0..=self.nt).map(|n| self.t(n)).collect()
    }

    pub fn contains(&self, x: f64, t: f64) -> bool {
        let slack = 1e-12 * (1.0 + self.horizon);
        x >= self.x_min && x <= self.x_max && t >= -slack && t <= self.horizon + slack
    }

    /// Cell and weights of `(x, t)`: `(i, wx, n, wt)`.
    pub(crate) fn cell(&self, x: f64, t: f64) -> Result<(usize, f64, usize, f64)> {
        if !(x >= self.x_min && x <= self.x_max) {
            return Err(Error::OutOfDomain {
                axis: "x",
                value: x,
                lo: self.x_min,
                hi: self.x_max,
            });
        }
        let slack = 1e-12 * (1.0 + self.horizon);
        if !(t >= -slack && t <= self.horizon + slack) {
            return Err(Error::OutOfDomain {
                axis: "t",
                value: t,
                lo: 0.0,
                hi: self.horizon,
            });
        }
        let (i, wx) = uniform_cell(self.x_min, self.dx(), self.nx, x);
        let (n, wt) = uniform_cell(0.0, self.dt(), self.nt + 1, t.clamp(0.0, self.horizon));
        Ok((i, wx, n, wt))
    }
}

/// Cell of `x` on `lo + k h`, `k < count`, clamped to the last cell.
#[inline]
fn uniform_cell(lo: f64, h: f64, count: usize, x: f64) -> (usize, f64) {
    let s = (x - lo) / h;
    let i = (s.floor().max(0.0) as usize).min(count - 2);
    (i, (s - i as f64).clamp(0.0, 1.0))
}

/// Index and weight of `y` in a strictly increasing volume grid, or `None`
/// when it lies outside.
pub(crate) fn volume_cell(ys: &[f64], y: f64) -> Option<(usize, f64)> {
    let n = ys.len();
    if !(y >= ys[0] && y <= ys[n - 1]) {
        return None;
    }
    if n == 1 {
        return Some((0, 0.0));
    }
    Some(locate(ys, y))
}
