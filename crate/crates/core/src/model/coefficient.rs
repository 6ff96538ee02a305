use serde::{Deserialize, Serialize};

use crate::error::Error;

/// A deterministic function of time: a constant or a piecewise-linear table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TimeFunction {
    Constant(f64),
    Table { times: Vec<f64>, values: Vec<f64> },
}

impl Default for TimeFunction {
    fn default() -> Self {
        TimeFunction::Constant(0.0)
    }
}

impl From<f64> for TimeFunction {
    fn from(value: f64) -> Self {
        TimeFunction::Constant(value)
    }
}

impl TimeFunction {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            TimeFunction::Constant(v) => *v,
            TimeFunction::Table { times, values } => interp1(times, values, t),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            TimeFunction::Constant(v) => *v == 0.0,
            TimeFunction::Table { values, .. } => values.iter().all(|v| *v == 0.0),
        }
    }

    /// Table nodes strictly inside `(a, b)`, used to split integrals at kinks.
    pub(crate) fn breakpoints(&self, a: f64, b: f64) -> Vec<f64> {
        match self {
            TimeFunction::Constant(_) => Vec::new(),
            TimeFunction::Table { times, .. } => {
                times.iter().copied().filter(|&s| s > a && s < b).collect()
            }
        }
    }

    pub fn validate(&self, field: &str, issues: &mut Vec<Error>) {
        match self {
            TimeFunction::Constant(v) => {
                if !v.is_finite() {
                    issues.push(Error::invalid(field, "value must be finite"));
                }
            }
            TimeFunction::Table { times, values } => validate_table(field, times, values, issues),
        }
    }
}

/// Coefficient of the factor diffusion, `mu(x, t)` or `sigma(x, t)`.
///
/// Tables interpolate linearly inside the grid and extrapolate by the nearest
/// value outside it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CoefficientSpec {
    Constant {
        value: f64,
    },
    /// `intercept + slope * x`.
    Affine {
        intercept: f64,
        slope: f64,
    },
    TimeTable {
        times: Vec<f64>,
        values: Vec<f64>,
    },
    /// Bilinear table, `values[i][j]` at `(xs[i], times[j])`.
    XyTable {
        xs: Vec<f64>,
        times: Vec<f64>,
        values: Vec<Vec<f64>>,
    },
}

impl CoefficientSpec {
    pub fn constant(value: f64) -> Self {
        CoefficientSpec::Constant { value }
    }

    pub fn eval(&self, x: f64, t: f64) -> f64 {
        match self {
            CoefficientSpec::Constant { value } => *value,
            CoefficientSpec::Affine { intercept, slope } => intercept + slope * x,
            CoefficientSpec::TimeTable { times, values } => interp1(times, values, t),
            CoefficientSpec::XyTable { xs, times, values } => {
                let (i, wx) = locate(xs, x);
                let (j, wt) = locate(times, t);
                let i1 = (i + 1).min(xs.len() - 1);
                let j1 = (j + 1).min(times.len() - 1);
                let lo = values[i][j] * (1.0 - wt) + values[i][j1] * wt;
                let hi = values[i1][j] * (1.0 - wt) + values[i1][j1] * wt;
                lo * (1.0 - wx) + hi * wx
            }
        }
    }

    /// True when the coefficient does not depend on `x`.
    pub fn is_x_independent(&self) -> bool {
        match self {
            CoefficientSpec::Constant { .. } | CoefficientSpec::TimeTable { .. } => true,
            CoefficientSpec::Affine { slope, .. } => *slope == 0.0,
            CoefficientSpec::XyTable { xs, .. } => xs.len() == 1,
        }
    }

    /// Time function view, when the coefficient does not depend on `x`.
    pub fn as_time_function(&self) -> Option<TimeFunction> {
        match self {
            CoefficientSpec::Constant { value } => Some(TimeFunction::Constant(*value)),
            CoefficientSpec::Affine { intercept, slope } if *slope == 0.0 => {
                Some(TimeFunction::Constant(*intercept))
            }
            CoefficientSpec::TimeTable { times, values } => Some(TimeFunction::Table {
                times: times.clone(),
                values: values.clone(),
            }),
            _ => None,
        }
    }

    /// Largest finite-difference slope in `x`, the quantity screened against
    /// the declared Lipschitz constant.
    pub fn x_lipschitz(&self) -> f64 {
        match self {
            CoefficientSpec::Constant { .. } | CoefficientSpec::TimeTable { .. } => 0.0,
            CoefficientSpec::Affine { slope, .. } => slope.abs(),
            CoefficientSpec::XyTable { xs, times, values } => {
                let mut worst: f64 = 0.0;
                for j in 0..times.len() {
                    for i in 1..xs.len() {
                        let d = (values[i][j] - values[i - 1][j]) / (xs[i] - xs[i - 1]);
                        worst = worst.max(d.abs());
                    }
                }
                worst
            }
        }
    }

    /// Largest absolute table value, or the value at `x` for untabulated kinds.
    pub(crate) fn magnitude_near(&self, x: f64, horizon: f64) -> f64 {
        match self {
            CoefficientSpec::Constant { value } => value.abs(),
            CoefficientSpec::Affine { .. } => self.eval(x, 0.0).abs(),
            CoefficientSpec::TimeTable { values, .. } => {
                values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
            }
            CoefficientSpec::XyTable { .. } => {
                (0..=16).fold(0.0_f64, |m, k| m.max(self.eval(x, horizon * k as f64 / 16.0).abs()))
            }
        }
    }

    pub fn validate(&self, field: &str, issues: &mut Vec<Error>) {
        match self {
            CoefficientSpec::Constant { value } => {
                if !value.is_finite() {
                    issues.push(Error::invalid(format!("{field}.value"), "must be finite"));
                }
            }
            CoefficientSpec::Affine { intercept, slope } => {
                if !intercept.is_finite() || !slope.is_finite() {
                    issues.push(Error::invalid(field, "intercept and slope must be finite"));
                }
            }
            CoefficientSpec::TimeTable { times, values } => {
                validate_table(field, times, values, issues)
            }
            CoefficientSpec::XyTable { xs, times, values } => {
                check_increasing(&format!("{field}.xs"), xs, issues);
                check_increasing(&format!("{field}.times"), times, issues);
                if values.len() != xs.len() || values.iter().any(|row| row.len() != times.len()) {
                    issues.push(Error::invalid(
                        format!("{field}.values"),
                        format!("expected {} rows of {} values", xs.len(), times.len()),
                    ));
                } else if values.iter().flatten().any(|v| !v.is_finite()) {
                    issues.push(Error::invalid(format!("{field}.values"), "must be finite"));
                }
            }
        }
    }
}

fn validate_table(field: &str, times: &[f64], values: &[f64], issues: &mut Vec<Error>) {
    check_increasing(&format!("{field}.times"), times, issues);
    if times.len() != values.len() {
        issues.push(Error::invalid(
            format!("{field}.values"),
            format!("expected {} values, got {}", times.len(), values.len()),
        ));
    }
    if values.iter().any(|v| !v.is_finite()) {
        issues.push(Error::invalid(format!("{field}.values"), "must be finite"));
    }
}

pub(crate) fn check_increasing(field: &str, grid: &[f64], issues: &mut Vec<Error>) {
    if grid.is_empty() {
        issues.push(Error::invalid(field, "grid must not be empty"));
    } else if grid.iter().any(|v| !v.is_finite()) {
        issues.push(Error::invalid(field, "grid must be finite"));
    } else if grid.windows(2).any(|w| w[1] <= w[0]) {
        issues.push(Error::invalid(field, "grid must be strictly increasing"));
    }
}

/// Cell index and fractional weight of `x` in a strictly increasing grid,
/// clamped to the end cells.
pub(crate) fn locate(grid: &[f64], x: f64) -> (usize, f64) {
    let n = grid.len();
    if n == 1 || x <= grid[0] {
        return (0, 0.0);
    }
    if x >= grid[n - 1] {
        return (n - 2, 1.0);
    }
    let i = grid.partition_point(|&g| g <= x) - 1;
    let w = (x - grid[i]) / (grid[i + 1] - grid[i]);
    (i, w)
}

/// Piecewise-linear interpolation with constant extrapolation.
pub(crate) fn interp1(grid: &[f64], values: &[f64], x: f64) -> f64 {
    if grid.len() == 1 {
        return values[0];
    }
    let (i, w) = locate(grid, x);
    values[i] * (1.0 - w) + values[i + 1] * w
}
