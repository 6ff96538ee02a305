use serde::{Deserialize, Serialize};

use super::coefficient::{check_increasing, interp1};
use crate::error::{Error, Result};

/// Terminal cash-flow as a function of the factor (or of the security value
/// when used as `h_L`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PayoffSpec {
    /// `a0 + a1 x`.
    Affine {
        #[serde(default)]
        a0: f64,
        #[serde(default)]
        a1: f64,
    },
    Call {
        strike: f64,
    },
    Put {
        strike: f64,
    },
    /// Smoothed put block `lambda (K - x + log cosh(lambda gamma (K - x)) / (lambda gamma))`,
    /// which approaches `2 lambda (K - x)+` as `lambda gamma |K - x|` grows.
    LogCoshPut {
        lambda: f64,
        gamma: f64,
        strike: f64,
    },
    /// Piecewise-linear table; evaluation outside `[xs[0], xs[n-1]]` fails.
    Table {
        xs: Vec<f64>,
        values: Vec<f64>,
    },
    Scaled {
        factor: f64,
        inner: Box<PayoffSpec>,
    },
    Sum {
        terms: Vec<PayoffSpec>,
    },
    /// `outer(inner(x))`.
    Compose {
        outer: Box<PayoffSpec>,
        inner: Box<PayoffSpec>,
    },
}

/// `log cosh(u)` without overflow: `|u| + ln(1 + e^{-2|u|}) - ln 2`.
#[inline]
pub fn log_cosh(u: f64) -> f64 {
    let a = u.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

impl PayoffSpec {
    pub fn zero() -> Self {
        PayoffSpec::Affine { a0: 0.0, a1: 0.0 }
    }

    pub fn affine(a0: f64, a1: f64) -> Self {
        PayoffSpec::Affine { a0, a1 }
    }

    pub fn scaled(self, factor: f64) -> Self {
        PayoffSpec::Scaled {
            factor,
            inner: Box::new(self),
        }
    }

    /// `self(inner(x))`.
    pub fn after(self, inner: PayoffSpec) -> Self {
        PayoffSpec::Compose {
            outer: Box::new(self),
            inner: Box::new(inner),
        }
    }

    pub fn plus(self, other: PayoffSpec) -> Self {
        PayoffSpec::Sum {
            terms: vec![self, other],
        }
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        Ok(match self {
            PayoffSpec::Affine { a0, a1 } => a0 + a1 * x,
            PayoffSpec::Call { strike } => (x - strike).max(0.0),
            PayoffSpec::Put { strike } => (strike - x).max(0.0),
            PayoffSpec::LogCoshPut {
                lambda,
                gamma,
                strike,
            } => {
                let lg = lambda * gamma;
                lambda * (strike - x + log_cosh(lg * (strike - x)) / lg)
            }
            PayoffSpec::Table { xs, values } => {
                let (lo, hi) = (xs[0], xs[xs.len() - 1]);
                if !(x >= lo && x <= hi) {
                    return Err(Error::OutOfDomain {
                        axis: "payoff table",
                        value: x,
                        lo,
                        hi,
                    });
                }
                interp1(xs, values, x)
            }
            PayoffSpec::Scaled { factor, inner } => factor * inner.eval(x)?,
            PayoffSpec::Sum { terms } => {
                let mut acc = 0.0;
                for t in terms {
                    acc += t.eval(x)?;
                }
                acc
            }
            PayoffSpec::Compose { outer, inner } => outer.eval(inner.eval(x)?)?,
        })
    }

    /// Coefficients `(a0, a1)` when the payoff is affine in `x`.
    pub fn as_affine(&self) -> Option<(f64, f64)> {
        match self {
            PayoffSpec::Affine { a0, a1 } => Some((*a0, *a1)),
            PayoffSpec::Scaled { factor, inner } => {
                inner.as_affine().map(|(a, b)| (factor * a, factor * b))
            }
            PayoffSpec::Sum { terms } => terms.iter().try_fold((0.0, 0.0), |(a, b), t| {
                t.as_affine().map(|(c, d)| (a + c, b + d))
            }),
            PayoffSpec::Compose { outer, inner } => {
                let (c0, c1) = outer.as_affine()?;
                let (i0, i1) = inner.as_affine()?;
                Some((c0 + c1 * i0, c1 * i1))
            }
            _ => None,
        }
    }

    /// Locations of derivative discontinuities. `None` when they cannot be
    /// located (composition through a non-affine inner map).
    pub fn kinks(&self) -> Option<Vec<f64>> {
        let mut out = match self {
            PayoffSpec::Affine { .. } | PayoffSpec::LogCoshPut { .. } => Vec::new(),
            PayoffSpec::Call { strike } | PayoffSpec::Put { strike } => vec![*strike],
            PayoffSpec::Table { xs, .. } => xs.clone(),
            PayoffSpec::Scaled { factor, inner } => {
                if *factor == 0.0 {
                    Vec::new()
                } else {
                    inner.kinks()?
                }
            }
            PayoffSpec::Sum { terms } => {
                let mut all = Vec::new();
                for t in terms {
                    all.extend(t.kinks()?);
                }
                all
            }
            PayoffSpec::Compose { outer, inner } => {
                let outer_kinks = outer.kinks()?;
                if outer_kinks.is_empty() {
                    inner.kinks()?
                } else {
                    let (i0, i1) = inner.as_affine()?;
                    if i1 == 0.0 {
                        Vec::new()
                    } else {
                        outer_kinks.iter().map(|k| (k - i0) / i1).collect()
                    }
                }
            }
        };
        out.sort_by(f64::total_cmp);
        out.dedup();
        Some(out)
    }

    /// True when the payoff is known to be continuously differentiable.
    pub fn is_smooth(&self) -> bool {
        matches!(self.kinks(), Some(k) if k.is_empty())
    }

    /// Monotonicity screen on the breakpoints of a table payoff: `Some(true)`
    /// when the tabulated values are nondecreasing, `None` for other kinds.
    pub fn table_nondecreasing(&self) -> Option<bool> {
        match self {
            PayoffSpec::Table { values, .. } => Some(values.windows(2).all(|w| w[1] >= w[0])),
            _ => None,
        }
    }

    pub fn validate(&self, field: &str, issues: &mut Vec<Error>) {
        let finite = |name: &str, v: f64, issues: &mut Vec<Error>| {
            if !v.is_finite() {
                issues.push(Error::invalid(format!("{field}.{name}"), "must be finite"));
            }
        };
        match self {
            PayoffSpec::Affine { a0, a1 } => {
                finite("a0", *a0, issues);
                finite("a1", *a1, issues);
            }
            PayoffSpec::Call { strike } | PayoffSpec::Put { strike } => {
                finite("strike", *strike, issues)
            }
            PayoffSpec::LogCoshPut {
                lambda,
                gamma,
                strike,
            } => {
                finite("strike", *strike, issues);
                for (name, v) in [("lambda", lambda), ("gamma", gamma)] {
                    if !(v.is_finite() && *v > 0.0) {
                        issues.push(Error::invalid(
                            format!("{field}.{name}"),
                            format!("must be positive and finite, got {v}"),
                        ));
                    }
                }
            }
            PayoffSpec::Table { xs, values } => {
                check_increasing(&format!("{field}.xs"), xs, issues);
                if xs.len() != values.len() {
                    issues.push(Error::invalid(
                        format!("{field}.values"),
                        format!("expected {} values, got {}", xs.len(), values.len()),
                    ));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    issues.push(Error::invalid(format!("{field}.values"), "must be finite"));
                }
            }
            PayoffSpec::Scaled { factor, inner } => {
                finite("factor", *factor, issues);
                inner.validate(&format!("{field}.inner"), issues);
            }
            PayoffSpec::Sum { terms } => {
                for (i, t) in terms.iter().enumerate() {
                    t.validate(&format!("{field}.terms[{i}]"), issues);
                }
            }
            PayoffSpec::Compose { outer, inner } => {
                outer.validate(&format!("{field}.outer"), issues);
                inner.validate(&format!("{field}.inner"), issues);
            }
        }
    }

    pub fn check(&self, field: &str) -> Result<()> {
        let mut issues = Vec::new();
        self.validate(field, &mut issues);
        issues.into_iter().next().map_or(Ok(()), Err)
    }
}

/// `payoff(x)`.
pub fn eval_payoff(payoff: &PayoffSpec, x: f64) -> Result<f64> {
    payoff.eval(x)
}
