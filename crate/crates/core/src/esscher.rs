//! Esscher tilts `mu^y(dx) = e^{yx} mu(dx) / m(y)` of discrete and gridded
//! measures, with monotonicity and tail diagnostics.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::export::{num, CsvWriter};
use crate::model::PayoffSpec;

/// A finite positive measure on the line.
///
/// Densities are reduced to atoms with trapezoidal weights. The unbounded
/// flags declare that the underlying measure extends past the grid; the tilt
/// is then refused once the grid edge carries noticeable mass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MeasureSpec {
    Atoms {
        points: Vec<f64>,
        weights: Vec<f64>,
    },
    Density {
        xs: Vec<f64>,
        values: Vec<f64>,
        #[serde(default)]
        lower_unbounded: bool,
        #[serde(default)]
        upper_unbounded: bool,
    },
}

/// Tilted mass on an edge node, relative to the total, above which a
/// truncated unbounded measure is considered unresolved.
const EDGE_MASS: f64 = 1e-10;

impl MeasureSpec {
    pub fn two_point(a: f64, b: f64) -> Self {
        MeasureSpec::Atoms {
            points: vec![a, b],
            weights: vec![0.5, 0.5],
        }
    }

    /// Density sampled at `n` equally spaced nodes of `[lo, hi]`.
    pub fn from_density(lo: f64, hi: f64, n: usize, f: impl Fn(f64) -> f64) -> Self {
        let h = (hi - lo) / (n - 1) as f64;
        let xs: Vec<f64> = (0..n)
            .map(|i| if i == n - 1 { hi } else { lo + i as f64 * h })
            .collect();
        let values = xs.iter().map(|&x| f(x)).collect();
        MeasureSpec::Density {
            xs,
            values,
            lower_unbounded: false,
            upper_unbounded: false,
        }
    }

    pub fn uniform(lo: f64, hi: f64, n: usize) -> Self {
        Self::from_density(lo, hi, n, |_| 1.0)
    }

    /// Standard normal on `[-half_width, half_width]`, flagged unbounded.
    pub fn standard_normal(half_width: f64, n: usize) -> Self {
        let c = (2.0 * std::f64::consts::PI).sqrt().recip();
        match Self::from_density(-half_width, half_width, n, |x| c * (-0.5 * x * x).exp()) {
            MeasureSpec::Density { xs, values, .. } => MeasureSpec::Density {
                xs,
                values,
                lower_unbounded: true,
                upper_unbounded: true,
            },
            atoms => atoms,
        }
    }

    pub fn validate(&self, field: &str, issues: &mut Vec<Error>) {
        let (xs, w, strict) = match self {
            MeasureSpec::Atoms { points, weights } => (points, weights, true),
            MeasureSpec::Density { xs, values, .. } => (xs, values, false),
        };
        if xs.is_empty() || xs.len() != w.len() {
            issues.push(Error::invalid(
                field,
                format!("need matching non-empty nodes, got {} and {}", xs.len(), w.len()),
            ));
            return;
        }
        if xs.iter().any(|x| !x.is_finite()) || xs.windows(2).any(|p| !(p[0] < p[1])) {
            issues.push(Error::invalid(field, "nodes must be finite and strictly increasing"));
        }
        if strict && w.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            issues.push(Error::invalid(field, "atom weights must be positive"));
        }
        if !strict {
            if xs.len() < 2 {
                issues.push(Error::invalid(field, "a density needs at least two nodes"));
            }
            if w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                issues.push(Error::invalid(field, "density values must be non-negative"));
            }
        }
        if issues.is_empty() && !(self.atoms().1.iter().sum::<f64>() > 0.0) {
            issues.push(Error::invalid(field, "total mass must be positive"));
        }
    }

    pub fn check(&self) -> Result<()> {
        let mut issues = Vec::new();
        self.validate("measure", &mut issues);
        issues.into_iter().next().map_or(Ok(()), Err)
    }

    /// Nodes and weights, densities with trapezoidal weights.
    pub fn atoms(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            MeasureSpec::Atoms { points, weights } => (points.clone(), weights.clone()),
            MeasureSpec::Density { xs, values, .. } => {
                let n = xs.len();
                let w = (0..n)
                    .map(|i| {
                        let left = if i > 0 { xs[i] - xs[i - 1] } else { 0.0 };
                        let right = if i + 1 < n { xs[i + 1] - xs[i] } else { 0.0 };
                        0.5 * values[i] * (left + right)
                    })
                    .collect();
                (xs.clone(), w)
            }
        }
    }

    /// Support bounds `(l, r)`, infinite where flagged unbounded.
    pub fn support(&self) -> (f64, f64) {
        match self {
            MeasureSpec::Atoms { points, .. } => (points[0], points[points.len() - 1]),
            MeasureSpec::Density {
                xs,
                lower_unbounded,
                upper_unbounded,
                ..
            } => (
                if *lower_unbounded { f64::NEG_INFINITY } else { xs[0] },
                if *upper_unbounded { f64::INFINITY } else { xs[xs.len() - 1] },
            ),
        }
    }

    fn unbounded(&self) -> (bool, bool) {
        match self {
            MeasureSpec::Atoms { .. } => (false, false),
            MeasureSpec::Density {
                lower_unbounded,
                upper_unbounded,
                ..
            } => (*lower_unbounded, *upper_unbounded),
        }
    }
}

/// Probability weights of `mu^y` on the measure's nodes and `log m(y)`.
pub fn tilted_weights(measure: &MeasureSpec, y: f64) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    measure.check()?;
    if !y.is_finite() {
        return Err(Error::DivergentTilt {
            y,
            reason: "non-finite tilt".into(),
        });
    }
    let (xs, w) = measure.atoms();
    let logs: Vec<f64> = xs.iter().zip(&w).map(|(x, w)| w.ln() + y * x).collect();
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = logs.iter().map(|l| (l - top).exp()).sum();
    let log_norm = top + sum.ln();
    let probs: Vec<f64> = logs.iter().map(|l| (l - log_norm).exp()).collect();
    let (lo_open, hi_open) = measure.unbounded();
    // Density values that underflow to zero end the resolved support early.
    let first = w.iter().position(|w| *w > 0.0).unwrap_or(0);
    let last = w.iter().rposition(|w| *w > 0.0).unwrap_or(0);
    if (lo_open && probs[first] > EDGE_MASS) || (hi_open && probs[last] > EDGE_MASS) {
        return Err(Error::DivergentTilt {
            y,
            reason: "tilted mass reaches the edge of the truncated support".into(),
        });
    }
    Ok((xs, probs, log_norm))
}

/// `∫ phi dmu^y` for a plain function, with `log m(y)`.
pub fn esscher_expect_with(
    measure: &MeasureSpec,
    phi: impl Fn(f64) -> f64,
    y: f64,
) -> Result<(f64, f64)> {
    let (xs, probs, log_norm) = tilted_weights(measure, y)?;
    let mut value = 0.0;
    for (x, p) in xs.iter().zip(&probs) {
        if *p > 0.0 {
            value += p * phi(*x);
        }
    }
    if value.is_nan() {
        return Err(Error::DivergentTilt {
            y,
            reason: "tilted expectation is not a number".into(),
        });
    }
    Ok((value, log_norm))
}

/// `∫ phi dmu^y` evaluated in log-space.
pub fn esscher_expect(measure: &MeasureSpec, phi: &PayoffSpec, y: f64) -> Result<f64> {
    phi.check("phi")?;
    let (xs, probs, _) = tilted_weights(measure, y)?;
    let mut value = 0.0;
    for (x, p) in xs.iter().zip(&probs) {
        if *p > 0.0 {
            value += p * phi.eval(*x)?;
        }
    }
    Ok(value)
}

/// Boundary behaviour of the tilts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailSummary {
    pub magnitude: f64,
    /// `(l, r)`, infinite where unbounded.
    pub support: (f64, f64),
    /// `∫x dmu^{-Y}` and `∫x dmu^{+Y}`.
    pub mean_lower: f64,
    pub mean_upper: f64,
    /// `|∫x dmu^{-Y} - l|`, when `l` is finite.
    pub lower_gap: Option<f64>,
    pub upper_gap: Option<f64>,
    /// `∫phi dmu^{-Y}` and `∫phi dmu^{+Y}` over increasing `Y`.
    pub trend_y: Vec<f64>,
    pub trend_lower: Vec<f64>,
    pub trend_upper: Vec<f64>,
    /// Strictly decreasing lower trend and strictly increasing upper trend.
    pub diverging_lower: bool,
    pub diverging_upper: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TiltReport {
    pub y_grid: Vec<f64>,
    pub values: Vec<f64>,
    pub normalizer_log: Vec<f64>,
    pub monotone: bool,
    /// First tilt refused by the moment screen; the scan stops there.
    pub screen_failure: Option<String>,
    pub tail: Option<TailSummary>,
}

impl TiltReport {
    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = CsvWriter::new(out, &["y", "value", "normalizer_log"])?;
        for ((y, v), l) in self.y_grid.iter().zip(&self.values).zip(&self.normalizer_log) {
            w.row(&[num(*y), num(*v), num(*l)])?;
        }
        w.finish()
    }
}

fn is_monotone(values: &[f64]) -> bool {
    let scale = 1.0 + values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    values.windows(2).all(|p| p[1] - p[0] >= -1e-10 * scale)
}

/// `∫ phi dmu^y` along `y_grid` for a nondecreasing `phi`, flagging any
/// decrease beyond `1e-10` of the value scale.
pub fn monotonicity_scan_with(
    measure: &MeasureSpec,
    phi: impl Fn(f64) -> f64,
    y_grid: &[f64],
) -> Result<TiltReport> {
    measure.check()?;
    let mut report = TiltReport {
        y_grid: Vec::with_capacity(y_grid.len()),
        values: Vec::with_capacity(y_grid.len()),
        normalizer_log: Vec::with_capacity(y_grid.len()),
        monotone: true,
        screen_failure: None,
        tail: None,
    };
    for &y in y_grid {
        match esscher_expect_with(measure, &phi, y) {
            Ok((v, l)) => {
                report.y_grid.push(y);
                report.values.push(v);
                report.normalizer_log.push(l);
            }
            Err(e) => {
                report.screen_failure = Some(e.to_string());
                break;
            }
        }
    }
    report.monotone = is_monotone(&report.values);
    Ok(report)
}

pub fn monotonicity_scan(
    measure: &MeasureSpec,
    phi: &PayoffSpec,
    y_grid: &[f64],
) -> Result<TiltReport> {
    phi.check("phi")?;
    if phi.table_nondecreasing() == Some(false) {
        return Err(Error::invalid("phi", "table values must be nondecreasing"));
    }
    let failure = std::cell::Cell::new(None);
    let report = monotonicity_scan_with(
        measure,
        |x| {
            phi.eval(x).unwrap_or_else(|e| {
                failure.set(Some(e));
                f64::NAN
            })
        },
        y_grid,
    )?;
    failure.take().map_or(Ok(report), Err)
}

/// Trend points for the divergence checks.
pub const TREND_MAGNITUDES: [f64; 4] = [10.0, 20.0, 40.0, 80.0];

/// Means under `mu^{±Y}` against the support bounds, and `∫phi dmu^{±Y}`
/// over `Y ∈ {10, 20, 40, 80}`. Sides whose tilts fail the screen are left
/// out of the trend.
pub fn tail_limit_check_with(
    measure: &MeasureSpec,
    phi: impl Fn(f64) -> f64,
    magnitude: f64,
) -> Result<TiltReport> {
    if !(magnitude.is_finite() && magnitude > 0.0) {
        return Err(Error::invalid("y_magnitude", "must be positive"));
    }
    let (l, r) = measure.support();
    let (mean_lower, _) = esscher_expect_with(measure, |x| x, -magnitude)?;
    let (mean_upper, _) = esscher_expect_with(measure, |x| x, magnitude)?;
    let side = |sign: f64| -> Vec<(f64, f64)> {
        TREND_MAGNITUDES
            .iter()
            .map_while(|&m| esscher_expect_with(measure, &phi, sign * m).ok())
            .collect()
    };
    let lower = side(-1.0);
    let upper = side(1.0);
    let trend_lower: Vec<f64> = lower.iter().map(|v| v.0).collect();
    let trend_upper: Vec<f64> = upper.iter().map(|v| v.0).collect();
    let n = trend_lower.len().min(trend_upper.len());
    let tail = TailSummary {
        magnitude,
        support: (l, r),
        mean_lower,
        mean_upper,
        lower_gap: l.is_finite().then(|| (mean_lower - l).abs()),
        upper_gap: r.is_finite().then(|| (mean_upper - r).abs()),
        trend_y: TREND_MAGNITUDES[..n].to_vec(),
        diverging_lower: trend_lower.len() > 1 && trend_lower.windows(2).all(|p| p[1] < p[0]),
        diverging_upper: trend_upper.len() > 1 && trend_upper.windows(2).all(|p| p[1] > p[0]),
        trend_lower: trend_lower[..n].to_vec(),
        trend_upper: trend_upper[..n].to_vec(),
    };
    let mut ys = Vec::new();
    let mut values = Vec::new();
    let mut logs = Vec::new();
    for k in (0..n).rev() {
        ys.push(-TREND_MAGNITUDES[k]);
        values.push(lower[k].0);
        logs.push(lower[k].1);
    }
    for k in 0..n {
        ys.push(TREND_MAGNITUDES[k]);
        values.push(upper[k].0);
        logs.push(upper[k].1);
    }
    Ok(TiltReport {
        monotone: is_monotone(&values),
        y_grid: ys,
        values,
        normalizer_log: logs,
        screen_failure: None,
        tail: Some(tail),
    })
}

pub fn tail_limit_check(measure: &MeasureSpec, phi: &PayoffSpec, magnitude: f64) -> Result<TiltReport> {
    phi.check("phi")?;
    let failure = std::cell::Cell::new(None);
    let report = tail_limit_check_with(
        measure,
        |x| {
            phi.eval(x).unwrap_or_else(|e| {
                failure.set(Some(e));
                f64::NAN
            })
        },
        magnitude,
    )?;
    failure.take().map_or(Ok(report), Err)
}
