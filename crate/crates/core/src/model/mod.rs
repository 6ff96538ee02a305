//! Factor dynamics, drivers and payoffs.

mod coefficient;
mod driver;
mod payoff;
mod projection;

pub use coefficient::{CoefficientSpec, TimeFunction};
pub(crate) use coefficient::{check_increasing, locate};
pub use driver::{eval_driver, Driver, DriverSpec, GoodDeal};
pub use payoff::{eval_payoff, log_cosh, PayoffSpec};
pub use projection::{project_kernel, project_min_norm};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Economic factor `dF = mu(F, t) dt + sigma(F, t) dW` on `[0, T]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorModel {
    pub f0: f64,
    pub drift: CoefficientSpec,
    pub vol: CoefficientSpec,
    pub horizon: f64,
    /// Declared Lipschitz constant screened against tabulated coefficients.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lipschitz: Option<f64>,
}

impl FactorModel {
    /// Driftless factor with constant volatility.
    pub fn brownian(f0: f64, sigma: f64, horizon: f64) -> Self {
        Self::constant(f0, 0.0, sigma, horizon)
    }

    pub fn constant(f0: f64, mu: f64, sigma: f64, horizon: f64) -> Self {
        FactorModel {
            f0,
            drift: CoefficientSpec::constant(mu),
            vol: CoefficientSpec::constant(sigma),
            horizon,
            lipschitz: None,
        }
    }

    #[inline]
    pub fn mu(&self, x: f64, t: f64) -> f64 {
        self.drift.eval(x, t)
    }

    #[inline]
    pub fn sigma(&self, x: f64, t: f64) -> f64 {
        self.vol.eval(x, t)
    }

    /// Volatility scale near `f0`, used to size default domains.
    pub fn vol_scale(&self) -> f64 {
        self.vol.magnitude_near(self.f0, self.horizon)
    }

    pub fn validate(&self, field: &str, issues: &mut Vec<Error>) {
        if !self.f0.is_finite() {
            issues.push(Error::invalid(format!("{field}.f0"), "must be finite"));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            issues.push(Error::invalid(
                format!("{field}.horizon"),
                format!("must be positive, got {}", self.horizon),
            ));
        }
        self.drift.validate(&format!("{field}.drift"), issues);
        self.vol.validate(&format!("{field}.vol"), issues);
        if let Some(l) = self.lipschitz {
            if !(l.is_finite() && l > 0.0) {
                issues.push(Error::invalid(format!("{field}.lipschitz"), "must be positive"));
            } else if issues.is_empty() {
                for (name, c) in [("drift", &self.drift), ("vol", &self.vol)] {
                    let slope = c.x_lipschitz();
                    if slope > l {
                        issues.push(Error::invalid(
                            format!("{field}.{name}"),
                            format!("x-slope {slope} exceeds the Lipschitz bound {l}"),
                        ));
                    }
                }
            }
        }
    }

    pub fn check(&self) -> Result<()> {
        let mut issues = Vec::new();
        self.validate("model", &mut issues);
        issues.into_iter().next().map_or(Ok(()), Err)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lipschitz_screen() {
        let mut m = FactorModel::brownian(0.0, 1.0, 1.0);
        m.vol = CoefficientSpec::XyTable {
            xs: vec![0.0, 0.1],
            times: vec![0.0],
            values: vec![vec![1.0], vec![2.0]],
        };
        m.lipschitz = Some(5.0);
        let err = m.check().unwrap_err();
        assert!(err.to_string().contains("model.vol"), "{err}");
        m.lipschitz = Some(20.0);
        assert!(m.check().is_ok());
    }

    #[test]
    fn horizon_must_be_positive() {
        let m = FactorModel::brownian(0.0, 1.0, 0.0);
        assert!(m.check().unwrap_err().to_string().contains("model.horizon"));
    }
}
