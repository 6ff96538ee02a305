use serde::{Deserialize, Serialize};

use super::normal::{cdf_over_pdf, norm_cdf, norm_pdf};
use crate::error::{Error, Result};
use crate::model::log_cosh;

/// Quadratic driver with the Market holding `a` units of `S = b + c W_T`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineCase {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub gamma: f64,
    pub horizon: f64,
}

impl AffineCase {
    /// `p(x, t, y) = (a - y)(b + c x) - (T - t) gamma (a - y)² c² / 2`.
    pub fn p(&self, x: f64, t: f64, y: f64) -> f64 {
        let q = self.a - y;
        q * (self.b + self.c * x) - (self.horizon - t) * self.gamma * q * q * self.c * self.c / 2.0
    }

    /// `Z^y = -(a - y) c`, constant in `(x, t)`.
    pub fn z(&self, y: f64) -> f64 {
        -(self.a - y) * self.c
    }

    /// `Z⁻(z) = a + z / c`.
    pub fn z_inverse(&self, z: f64) -> f64 {
        self.a + z / self.c
    }
}

/// `{p, Z, Z⁻}` of the affine case at one point; see [`AffineCase`].
pub fn affine_case(spec: &AffineCase, x: f64, t: f64, y: f64) -> (f64, f64, impl Fn(f64) -> f64) {
    let s = *spec;
    (spec.p(x, t, y), spec.z(y), move |z| s.z_inverse(z))
}

/// Travelling wave `u = 1 - tanh(gamma x + gamma² t + delta)` of
/// `u_t + u_xx / 2 - gamma u u_x = 0`.
#[inline]
pub fn burgers_tanh(gamma: f64, delta: f64, x: f64, t: f64) -> f64 {
    1.0 - (gamma * x + gamma * gamma * t + delta).tanh()
}

/// `u_lambda(x, t) = lambda u(lambda x, lambda² t)`, again a solution.
pub fn scaling_transform<F: Fn(f64, f64) -> f64>(lambda: f64, u: F) -> impl Fn(f64, f64) -> f64 {
    move |x, t| lambda * u(lambda * x, lambda * lambda * t)
}

/// A block of `lambda` smoothed puts written on `S = b + c W_T`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PutBlockSpec {
    pub lambda: f64,
    pub gamma: f64,
    /// Market endowment in units of `S`; the closed forms need `a = 0`.
    #[serde(default)]
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub strike: f64,
    pub horizon: f64,
    /// Initial Brownian value, so `S_0 = b + c w0`.
    #[serde(default)]
    pub w0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PutHedges {
    pub y_impact: f64,
    pub y_bachelier: f64,
    pub bachelier_price: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplicationCost {
    pub exact: f64,
    pub approx: f64,
}

impl PutBlockSpec {
    pub fn validate(&self, field: &str, issues: &mut Vec<Error>) {
        let vals = [
            ("lambda", self.lambda),
            ("gamma", self.gamma),
            ("a", self.a),
            ("b", self.b),
            ("c", self.c),
            ("strike", self.strike),
            ("horizon", self.horizon),
            ("w0", self.w0),
        ];
        for (name, v) in vals {
            if !v.is_finite() {
                issues.push(Error::invalid(format!("{field}.{name}"), "must be finite"));
            }
        }
        if !(self.c > 0.0) {
            issues.push(Error::invalid(format!("{field}.c"), "must be positive"));
        }
        if !(self.lambda > 0.0) {
            issues.push(Error::invalid(format!("{field}.lambda"), "must be positive"));
        }
        if !(self.gamma >= 0.0) {
            issues.push(Error::invalid(format!("{field}.gamma"), "must be nonnegative"));
        }
        if !(self.horizon > 0.0) {
            issues.push(Error::invalid(format!("{field}.horizon"), "must be positive"));
        }
        if self.a != 0.0 {
            issues.push(Error::invalid(
                format!("{field}.a"),
                "the put-block closed forms assume a zero Market endowment",
            ));
        }
    }

    pub fn check(&self) -> Result<()> {
        let mut issues = Vec::new();
        self.validate("put_block", &mut issues);
        issues.into_iter().next().map_or(Ok(()), Err)
    }

    pub fn s0(&self) -> f64 {
        self.b + self.c * self.w0
    }

    /// `delta = lambda gamma (b - K) - gamma² lambda² c² T`.
    pub fn delta(&self) -> f64 {
        let lg = self.lambda * self.gamma;
        lg * (self.b - self.strike) - lg * lg * self.c * self.c * self.horizon
    }

    /// `lambda gamma (b + c w - K) - lambda² gamma² c² (T - t)`.
    fn phase(&self, w: f64, t: f64) -> f64 {
        let lg = self.lambda * self.gamma;
        lg * (self.b + self.c * w - self.strike) - lg * lg * self.c * self.c * (self.horizon - t)
    }

    /// Hedge value `v(w, t)` for the short block, terminal `-LogCoshPut(S)`.
    pub fn value(&self, w: f64, t: f64) -> f64 {
        let lg = self.lambda * self.gamma;
        let s = self.b + self.c * w;
        self.lambda
            * (s - self.strike - lg * self.c * self.c * (self.horizon - t)
                - log_cosh(self.phase(w, t)) / lg)
    }

    /// `u = d/dw v = lambda c (1 - tanh(...))`, the Burgers field.
    pub fn field(&self, w: f64, t: f64) -> f64 {
        self.lambda * self.c * (1.0 - self.phase(w, t).tanh())
    }

    /// The same field written as a rescaled travelling wave.
    pub fn field_as_wave(&self, w: f64, t: f64) -> f64 {
        let lc = self.lambda * self.c;
        scaling_transform(lc, |x, s| burgers_tanh(self.gamma, self.delta(), x, s))(w, t)
    }
}

/// Impact hedge, Bachelier hedge and Bachelier price of the put block.
pub fn put_hedges(spec: &PutBlockSpec, w: f64, t: f64) -> PutHedges {
    let lambda = spec.lambda;
    let y_impact = -lambda * (1.0 - spec.phase(w, t).tanh());
    let s = spec.b + spec.c * w;
    let tau = spec.horizon - t;
    if !(tau > 0.0) {
        let itm = spec.strike > s;
        return PutHedges {
            y_impact,
            y_bachelier: if itm { -2.0 * lambda } else { 0.0 },
            bachelier_price: 2.0 * lambda * (spec.strike - s).max(0.0),
        };
    }
    let vol = spec.c * tau.sqrt();
    let d = (spec.strike - s) / vol;
    PutHedges {
        y_impact,
        y_bachelier: -2.0 * lambda * norm_cdf(d),
        bachelier_price: 2.0 * lambda * ((spec.strike - s) * norm_cdf(d) + vol * norm_pdf(d)),
    }
}

/// Initial capital of the perfect hedge and its piecewise-linear proxy.
pub fn replication_cost(spec: &PutBlockSpec) -> Result<ReplicationCost> {
    if !(spec.gamma > 0.0) {
        return Err(Error::invalid("put_block.gamma", "replication cost needs gamma > 0"));
    }
    let (lambda, lg) = (spec.lambda, spec.lambda * spec.gamma);
    let m = spec.strike - spec.s0();
    let drift = lg * spec.c * spec.c * spec.horizon;
    let exact = lambda * (m + drift + log_cosh(-lg * m - lg * lg * spec.c * spec.c * spec.horizon) / lg);
    let approx = 2.0 * lambda * (m + drift).max(0.0);
    Ok(ReplicationCost { exact, approx })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CallZLimits {
    /// `lim_{y -> -inf} Z^y`.
    pub lower: f64,
    /// `Z^y` grows without bound as `y -> +inf`.
    pub upper_unbounded: bool,
}

/// Saturation levels of `Z^y` for `s = (W_T - k)+` under exponential utility.
pub fn call_z_limits(gamma: f64, k: f64, w: f64, tau: f64) -> Result<CallZLimits> {
    if !(gamma > 0.0 && tau > 0.0) {
        return Err(Error::invalid("call_z_limits", "need gamma > 0 and T - t > 0"));
    }
    let d = (k - w) / tau.sqrt();
    Ok(CallZLimits {
        lower: -1.0 / (gamma * tau.sqrt() * cdf_over_pdf(d)),
        upper_unbounded: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn block(lambda: f64) -> PutBlockSpec {
        PutBlockSpec {
            lambda,
            gamma: 0.1,
            a: 0.0,
            b: 100.0,
            c: 1.0,
            strike: 100.0,
            horizon: 1.0,
            w0: 0.0,
        }
    }

    #[test]
    fn value_terminal_is_minus_smoothed_put() {
        let spec = block(10.0);
        let put = crate::model::PayoffSpec::LogCoshPut {
            lambda: 10.0,
            gamma: 0.1,
            strike: 100.0,
        };
        for w in [-3.0, -0.2, 0.0, 1.7] {
            let v = spec.value(w, 1.0);
            assert!((v + put.eval(100.0 + w).unwrap()).abs() < 1e-10);
        }
    }

    #[test]
    fn field_forms_agree() {
        let spec = block(10.0);
        for (w, t) in [(0.0, 0.0), (-1.3, 0.4), (2.0, 0.99)] {
            assert!((spec.field(w, t) - spec.field_as_wave(w, t)).abs() < 1e-12);
        }
    }

    #[test]
    fn deep_moneyness_limits() {
        let lim = call_z_limits(1.0, 0.0, 8.0, 1.0).unwrap();
        assert!((lim.lower + 8.0).abs() < 0.2, "{}", lim.lower);
        let lim = call_z_limits(1e9, 0.0, 0.0, 1.0).unwrap();
        assert!(lim.lower < 0.0 && lim.lower > -1e-8);
    }
}
