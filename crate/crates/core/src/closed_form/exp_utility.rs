//! Indifference surfaces under the quadratic driver `beta(t) z + gamma z² / 2`
//! with a Gaussian factor, by quadrature of the exponential-utility integral
//!
//! `p(x, t, y) = -(1/gamma) log E[exp(-gamma (h_M(U) - y s(U)))]`,
//! `U ~ N(x + ∫_t^T (b + sigma beta) ds, ∫_t^T sigma² ds)`.

use std::cell::RefCell;

use serde::{Deserialize, Serialize};

use super::quadrature::{adaptive_pair, HermiteRule};
use crate::error::{Error, Result};
use crate::model::{PayoffSpec, TimeFunction};

/// Log-integrand mass below `max - LOG_WINDOW` is dropped.
const LOG_WINDOW: f64 = 60.0;
const MAX_SCAN_STEPS: usize = 4_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpUtilitySpec {
    pub gamma: f64,
    /// Factor drift `b(t)`.
    #[serde(default)]
    pub b: TimeFunction,
    /// Linear part of the driver.
    #[serde(default)]
    pub beta: TimeFunction,
    pub sigma: TimeFunction,
    pub h_m: PayoffSpec,
    pub s: PayoffSpec,
    pub horizon: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureOptions {
    /// Gauss–Hermite nodes for smooth integrands.
    pub nodes: usize,
    /// Agreement required between `nodes` and `2 nodes`.
    pub tolerance: f64,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        QuadratureOptions {
            nodes: 201,
            tolerance: 1e-9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpUtilityPoint {
    pub p: f64,
    /// `-sigma(t) d/dx p`.
    pub z: f64,
}

impl ExpUtilitySpec {
    pub fn validate(&self, field: &str, issues: &mut Vec<Error>) {
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            issues.push(Error::invalid(format!("{field}.gamma"), "must be positive"));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            issues.push(Error::invalid(format!("{field}.horizon"), "must be positive"));
        }
        self.b.validate(&format!("{field}.b"), issues);
        self.beta.validate(&format!("{field}.beta"), issues);
        self.sigma.validate(&format!("{field}.sigma"), issues);
        self.h_m.validate(&format!("{field}.h_m"), issues);
        self.s.validate(&format!("{field}.s"), issues);
    }

    pub fn check(&self) -> Result<()> {
        let mut issues = Vec::new();
        self.validate("exp_utility", &mut issues);
        issues.into_iter().next().map_or(Ok(()), Err)
    }

    /// `(∫_t^T sigma² ds, ∫_t^T (b + sigma beta) ds)`.
    pub fn moments(&self, t: f64) -> (f64, f64) {
        let big_t = self.horizon;
        let mut cuts = vec![t];
        for f in [&self.b, &self.beta, &self.sigma] {
            cuts.extend(f.breakpoints(t, big_t));
        }
        cuts.push(big_t);
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let var_rate = |s: f64| self.sigma.eval(s).powi(2);
        let drift_rate = |s: f64| self.b.eval(s) + self.sigma.eval(s) * self.beta.eval(s);
        let (mut var, mut drift) = (0.0, 0.0);
        // Integrands are at most quadratic between breakpoints: Simpson is exact.
        for w in cuts.windows(2) {
            let (a, c) = (w[0], w[1]);
            let m = 0.5 * (a + c);
            let h = (c - a) / 6.0;
            var += h * (var_rate(a) + 4.0 * var_rate(m) + var_rate(c));
            drift += h * (drift_rate(a) + 4.0 * drift_rate(m) + drift_rate(c));
        }
        (var, drift)
    }
}

/// `p(x, t, y)` with default quadrature settings.
pub fn exp_utility_surface(spec: &ExpUtilitySpec, x: f64, t: f64, y: f64) -> Result<f64> {
    Ok(exp_utility_point(spec, x, t, y, &QuadratureOptions::default())?.p)
}

/// `Z^y = -sigma(t) d/dx p(x, t, y)` with default quadrature settings.
pub fn exp_utility_z(spec: &ExpUtilitySpec, x: f64, t: f64, y: f64) -> Result<f64> {
    Ok(exp_utility_point(spec, x, t, y, &QuadratureOptions::default())?.z)
}

/// `p` and `Z` together. Smooth payoffs use a mode-centred Gauss–Hermite
/// rule checked by node doubling; payoffs with kinks are integrated by
/// adaptive Gauss–Legendre split at the kinks.
pub fn exp_utility_point(
    spec: &ExpUtilitySpec,
    x: f64,
    t: f64,
    y: f64,
    options: &QuadratureOptions,
) -> Result<ExpUtilityPoint> {
    spec.check()?;
    if !(t < spec.horizon) {
        return Err(Error::invalid("t", format!("need t < T = {}, got {t}", spec.horizon)));
    }
    let (var, drift) = spec.moments(t);
    if !(var > 0.0) {
        return Err(Error::invalid("exp_utility.sigma", "integrated variance must be positive"));
    }
    if y == 0.0 && spec.h_m.as_affine() == Some((0.0, 0.0)) {
        return Ok(ExpUtilityPoint { p: 0.0, z: 0.0 });
    }
    let m = x + drift;
    let gamma = spec.gamma;
    let failure: RefCell<Option<Error>> = RefCell::new(None);
    let log_f = |u: f64| -> f64 {
        let h = spec.h_m.eval(u).and_then(|h| Ok(h - y * spec.s.eval(u)?));
        match h {
            Ok(h) => -gamma * h - (u - m) * (u - m) / (2.0 * var),
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                f64::NAN
            }
        }
    };
    let kinks = match (spec.h_m.kinks(), spec.s.kinks()) {
        (Some(mut a), Some(b)) => {
            a.extend(b);
            a.sort_by(f64::total_cmp);
            a.dedup();
            Some(a)
        }
        _ => None,
    };
    let sd = var.sqrt();
    let (log_mass, mean) = match kinks {
        Some(k) if k.is_empty() => {
            let (lm, mean) = hermite(&log_f, m, sd, options.nodes);
            let (lm2, mean2) = hermite(&log_f, m, sd, 2 * options.nodes);
            if let Some(e) = failure.borrow_mut().take() {
                return Err(e);
            }
            let dp = (lm - lm2).abs() / gamma;
            let dz = (mean - mean2).abs() / (gamma * var);
            let p_scale = 1.0 + (lm2 / gamma).abs();
            let z_scale = 1.0 + (mean2 / (gamma * var)).abs();
            let disagreement = (dp / p_scale).max(dz / z_scale);
            if !(disagreement <= options.tolerance) {
                return Err(Error::Quadrature {
                    disagreement,
                    tolerance: options.tolerance,
                });
            }
            (lm, mean)
        }
        k => {
            let out = windowed(&log_f, m, sd, &k.unwrap_or_default());
            if let Some(e) = failure.borrow_mut().take() {
                return Err(e);
            }
            out?
        }
    };
    let p = -(log_mass - 0.5 * (2.0 * std::f64::consts::PI * var).ln()) / gamma;
    let z = spec.sigma.eval(t) * mean / (gamma * var);
    Ok(ExpUtilityPoint { p, z })
}

/// `(log ∫ e^L, mean of u - m under e^L)` by Gauss–Hermite around the mode.
fn hermite(log_f: &impl Fn(f64) -> f64, m: f64, sd: f64, n: usize) -> (f64, f64) {
    let (mode, scale) = laplace(log_f, m, sd);
    let rule = HermiteRule::cached(n);
    let s2 = std::f64::consts::SQRT_2 * scale;
    let terms: Vec<(f64, f64)> = rule
        .nodes
        .iter()
        .zip(&rule.log_weights)
        .map(|(&xi, &lw)| {
            let u = mode + s2 * xi;
            (lw + xi * xi + log_f(u), u - m)
        })
        .collect();
    let top = terms.iter().fold(f64::NEG_INFINITY, |a, t| a.max(t.0));
    let (mut mass, mut first) = (0.0, 0.0);
    for (l, d) in &terms {
        let w = (l - top).exp();
        mass += w;
        first += w * d;
    }
    (top + mass.ln() + s2.ln(), first / mass)
}

/// Mode and curvature scale of `log_f` by damped Newton steps on finite
/// differences, starting from the prior mean.
fn laplace(log_f: &impl Fn(f64) -> f64, m: f64, sd: f64) -> (f64, f64) {
    let h = 1e-3 * sd;
    let mut u = m;
    let mut curvature = -1.0 / (sd * sd);
    for _ in 0..200 {
        let (l0, lp, lm) = (log_f(u), log_f(u + h), log_f(u - h));
        let d1 = (lp - lm) / (2.0 * h);
        let d2 = (lp - 2.0 * l0 + lm) / (h * h);
        let mut step = if d2 < 0.0 {
            curvature = d2;
            -d1 / d2
        } else {
            d1.signum() * sd
        };
        let mut moved = false;
        for _ in 0..60 {
            if log_f(u + step) >= l0 {
                moved = true;
                break;
            }
            step *= 0.5;
        }
        if !moved || step.abs() <= 1e-13 * (sd + u.abs()) {
            break;
        }
        u += step;
    }
    let scale = (-1.0 / curvature).sqrt();
    (u, if scale.is_finite() { scale } else { sd })
}

/// Adaptive integration over the window where `log_f >= max - LOG_WINDOW`.
fn windowed(log_f: &impl Fn(f64) -> f64, m: f64, sd: f64, kinks: &[f64]) -> Result<(f64, f64)> {
    let h = 0.25 * sd;
    let last_kink = kinks.last().copied().unwrap_or(f64::NEG_INFINITY);
    let first_kink = kinks.first().copied().unwrap_or(f64::INFINITY);
    let mut top = log_f(m);
    let scan_failed = || Error::Quadrature {
        disagreement: f64::INFINITY,
        tolerance: 0.0,
    };

    let mut hi = m;
    let mut prev = top;
    let mut steps = 0;
    loop {
        let u = hi + h;
        let l = log_f(u);
        if !l.is_finite() {
            return Err(scan_failed());
        }
        top = top.max(l);
        hi = u;
        if l < top - LOG_WINDOW && u > last_kink && l < prev {
            break;
        }
        prev = l;
        steps += 1;
        if steps > MAX_SCAN_STEPS {
            return Err(scan_failed());
        }
    }
    let mut lo = m;
    prev = log_f(m);
    loop {
        let u = lo - h;
        let l = log_f(u);
        if !l.is_finite() {
            return Err(scan_failed());
        }
        top = top.max(l);
        lo = u;
        if l < top - LOG_WINDOW && u < first_kink && l < prev {
            break;
        }
        prev = l;
        steps += 1;
        if steps > MAX_SCAN_STEPS {
            return Err(scan_failed());
        }
    }

    let mut cuts = vec![lo];
    cuts.extend(kinks.iter().copied().filter(|k| *k > lo && *k < hi));
    cuts.push(hi);
    // Panels no wider than one prior standard deviation.
    let mut pieces = Vec::new();
    for w in cuts.windows(2) {
        let count = ((w[1] - w[0]) / sd).ceil().max(1.0) as usize;
        let step = (w[1] - w[0]) / count as f64;
        for j in 0..count {
            let a = w[0] + j as f64 * step;
            let b = if j + 1 == count { w[1] } else { a + step };
            pieces.push((a, b));
        }
    }
    let f = |u: f64| {
        let w = (log_f(u) - top).exp();
        (w, w * (u - m))
    };
    // `log_f - top` carries an absolute error of order eps |top|.
    let noise = f64::EPSILON * (1.0 + top.abs());
    let rough: f64 = pieces
        .iter()
        .map(|&(a, b)| {
            adaptive_pair(&f, a, b, f64::INFINITY, noise).map_or(0.0, |v| v.0 + v.1.abs())
        })
        .sum();
    let tol = 1e-14 * rough / pieces.len() as f64;
    let (mut mass, mut first) = (0.0, 0.0);
    for &(a, b) in &pieces {
        let (v0, v1) = adaptive_pair(&f, a, b, tol, noise).ok_or(Error::Quadrature {
            disagreement: f64::NAN,
            tolerance: tol,
        })?;
        mass += v0;
        first += v1;
    }
    Ok((top + mass.ln(), first / mass))
}
