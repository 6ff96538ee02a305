use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::coefficient::TimeFunction;
use super::projection::{project_kernel, project_min_norm};
use crate::error::{Error, Result};

/// The driver `g(z, t)` of the g-expectation used by the Market.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DriverSpec {
    /// Risk-neutral evaluation, `g = 0`.
    Zero,
    /// `g(z, t) = G(t) z`: expectation under a tilted measure.
    Linear {
        #[serde(rename = "g", default)]
        tilt: TimeFunction,
    },
    /// `g(z, t) = beta(t) z + gamma z² / 2`: exponential utility.
    Quadratic {
        #[serde(default)]
        beta: TimeFunction,
        gamma: f64,
    },
    /// Good-deal bound driver on a `d`-dimensional noise with `k` assets.
    GoodDeal {
        /// `k` rows of length `d` (the asset volatility vectors).
        a: Vec<Vec<f64>>,
        /// `-mu`, one entry per asset.
        b: Vec<f64>,
        lambda: f64,
    },
}

impl DriverSpec {
    pub fn quadratic(gamma: f64) -> Self {
        DriverSpec::Quadratic {
            beta: TimeFunction::Constant(0.0),
            gamma,
        }
    }

    /// Noise dimension the driver expects.
    pub fn dimension(&self) -> usize {
        match self {
            DriverSpec::GoodDeal { a, .. } => a.first().map_or(0, Vec::len),
            _ => 1,
        }
    }

    pub fn validate(&self, field: &str, issues: &mut Vec<Error>) {
        match self {
            DriverSpec::Zero => {}
            DriverSpec::Linear { tilt } => tilt.validate(&format!("{field}.g"), issues),
            DriverSpec::Quadratic { beta, gamma } => {
                beta.validate(&format!("{field}.beta"), issues);
                if !(gamma.is_finite() && *gamma > 0.0) {
                    issues.push(Error::invalid(
                        format!("{field}.gamma"),
                        format!("must be positive and finite, got {gamma}"),
                    ));
                }
            }
            DriverSpec::GoodDeal { .. } => {
                if let Err(e) = self.compile() {
                    issues.push(match e {
                        Error::Invalid { .. } => e,
                        other => Error::invalid(format!("{field}.a"), other.to_string()),
                    });
                }
            }
        }
    }

    pub fn check(&self) -> Result<()> {
        let mut issues = Vec::new();
        self.validate("driver", &mut issues);
        issues.into_iter().next().map_or(Ok(()), Err)
    }

    /// Precomputes projections; the result evaluates `g` without allocation.
    pub fn compile(&self) -> Result<Driver> {
        Ok(match self {
            DriverSpec::Zero => Driver::Zero,
            DriverSpec::Linear { tilt } => Driver::Linear(tilt.clone()),
            DriverSpec::Quadratic { beta, gamma } => {
                if !(*gamma > 0.0) {
                    return Err(Error::invalid("driver.gamma", "must be positive"));
                }
                Driver::Quadratic {
                    beta: beta.clone(),
                    gamma: *gamma,
                }
            }
            DriverSpec::GoodDeal { a, b, lambda } => {
                let k = a.len();
                let d = a.first().map_or(0, Vec::len);
                if k == 0 || d == 0 || a.iter().any(|r| r.len() != d) {
                    return Err(Error::invalid("driver.a", "must be a non-empty k x d matrix"));
                }
                if b.len() != k {
                    return Err(Error::invalid(
                        "driver.b",
                        format!("expected {k} entries, got {}", b.len()),
                    ));
                }
                let am = DMatrix::from_fn(k, d, |i, j| a[i][j]);
                let center = project_min_norm(&am, &DVector::from_column_slice(b))?;
                let radius2 = lambda - center.norm_squared();
                if !(radius2 > 0.0) {
                    return Err(Error::invalid(
                        "driver.lambda",
                        format!(
                            "must exceed |P_B(0)|^2 = {}, got {lambda}",
                            center.norm_squared()
                        ),
                    ));
                }
                Driver::GoodDeal(GoodDeal {
                    a: am,
                    center,
                    radius: radius2.sqrt(),
                })
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GoodDeal {
    a: DMatrix<f64>,
    center: DVector<f64>,
    radius: f64,
}

impl GoodDeal {
    /// `P_B(0)`.
    pub fn center(&self) -> &DVector<f64> {
        &self.center
    }

    /// `sqrt(Lambda - |P_B(0)|²)`.
    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn eval(&self, z: &DVector<f64>) -> Result<f64> {
        let kernel = project_kernel(&self.a, z)?;
        Ok(-self.radius * kernel.norm() + z.dot(&self.center))
    }
}

/// A driver ready for evaluation.
#[derive(Debug, Clone, PartialEq)]
pub enum Driver {
    Zero,
    Linear(TimeFunction),
    Quadratic { beta: TimeFunction, gamma: f64 },
    GoodDeal(GoodDeal),
}

impl Driver {
    pub fn dimension(&self) -> usize {
        match self {
            Driver::GoodDeal(gd) => gd.a.ncols(),
            _ => 1,
        }
    }

    /// `g(z, t)` for a vector argument.
    pub fn eval(&self, z: &[f64], t: f64) -> Result<f64> {
        if z.len() != self.dimension() {
            return Err(Error::Dimension {
                expected: self.dimension(),
                got: z.len(),
            });
        }
        match self {
            Driver::GoodDeal(gd) => gd.eval(&DVector::from_column_slice(z)),
            _ => Ok(self.eval_scalar(z[0], t)),
        }
    }

    /// Scalar evaluation used on the one-dimensional factor grid. For the
    /// good-deal driver only `d = 1` reaches here.
    #[inline]
    pub fn eval_scalar(&self, z: f64, t: f64) -> f64 {
        match self {
            Driver::Zero => 0.0,
            Driver::Linear(g) => g.eval(t) * z,
            Driver::Quadratic { beta, gamma } => beta.eval(t) * z + 0.5 * gamma * z * z,
            Driver::GoodDeal(gd) => {
                // d = 1: Kernel(A) is {0} unless the constraint column vanishes.
                let a_col = gd.a.column(0);
                let kernel = if a_col.iter().all(|v| *v == 0.0) { z.abs() } else { 0.0 };
                -gd.radius * kernel + z * gd.center[0]
            }
        }
    }

    /// True when the scalar driver is linear in `z`.
    pub fn is_linear(&self) -> bool {
        self.linear_tilt(0.0).is_some()
    }

    /// Scalar drivers that are linear in `z` reduce to a drift tilt `G(t)`.
    pub fn linear_tilt(&self, t: f64) -> Option<f64> {
        match self {
            Driver::Zero => Some(0.0),
            Driver::Linear(g) => Some(g.eval(t)),
            Driver::GoodDeal(gd) if gd.a.ncols() == 1 && gd.a.column(0).iter().any(|v| *v != 0.0) => {
                Some(gd.center[0])
            }
            _ => None,
        }
    }
}

/// `g(z, t)` straight from a specification.
pub fn eval_driver(driver: &DriverSpec, z: &[f64], t: f64) -> Result<f64> {
    driver.compile()?.eval(z, t)
}
