use crate::error::{Error, Result};
use crate::pde::{InversionResult, Saturation};

/// A position process sampled on the simulation grid. `position(j, t, x)` is
/// the holding over `(t_j, t_{j+1}]`, decided from `F_{t_j} = x`.
pub trait Strategy: Sync {
    fn position(&self, j: usize, t: f64, x: f64) -> Result<InversionResult>;
}

/// Deterministic piecewise-constant position: `values[k]` from
/// `jump_times[k]` on, zero before the first jump.
#[derive(Debug, Clone, PartialEq)]
pub struct SimpleStrategy {
    jump_times: Vec<f64>,
    values: Vec<f64>,
}

impl SimpleStrategy {
    pub fn new(jump_times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if jump_times.len() != values.len() {
            return Err(Error::Dimension {
                expected: jump_times.len(),
                got: values.len(),
            });
        }
        if jump_times.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::invalid(
                "strategy.jump_times",
                "must be strictly increasing",
            ));
        }
        if jump_times.iter().chain(&values).any(|v| !v.is_finite()) {
            return Err(Error::invalid("strategy", "non-finite entry"));
        }
        Ok(SimpleStrategy { jump_times, values })
    }

    /// Buy `y` units at time zero and hold.
    pub fn buy_and_hold(y: f64) -> Self {
        SimpleStrategy {
            jump_times: vec![0.0],
            values: vec![y],
        }
    }

    pub fn jump_times(&self) -> &[f64] {
        &self.jump_times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Jumps are matched to grid times with a relative slack of `1e-12`.
    pub fn value_at(&self, t: f64) -> f64 {
        let slack = 1e-12 * (1.0 + t.abs());
        let count = self.jump_times.partition_point(|&tau| tau <= t + slack);
        if count == 0 {
            0.0
        } else {
            self.values[count - 1]
        }
    }
}

impl Strategy for SimpleStrategy {
    fn position(&self, _j: usize, t: f64, _x: f64) -> Result<InversionResult> {
        Ok(InversionResult {
            y: self.value_at(t),
            saturated: Saturation::None,
        })
    }
}
