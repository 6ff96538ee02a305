use std::io::Write;

use rayon::prelude::*;

use super::{PathEnsemble, SimpleStrategy, Strategy};
use crate::error::{Error, Result};
use crate::export::{num, CsvWriter};
use crate::model::{DriverSpec, PayoffSpec};
use crate::pde::{Saturation, SurfaceFamily};
use crate::quotes::{quote, QuoteContext};

/// A path dropped from the statistics, with the reason.
#[derive(Debug, Clone, PartialEq)]
pub struct PathFailure {
    pub path: usize,
    pub reason: String,
}

/// Per-path P&L. Failed paths hold `NaN` and are left out of the moments.
#[derive(Debug, Clone, PartialEq)]
pub struct PnLReport {
    pub per_path: Vec<f64>,
    pub failed: Vec<PathFailure>,
    pub mean: f64,
    pub rms: f64,
    pub max_abs: f64,
}

impl PnLReport {
    pub(crate) fn collect(outcomes: Vec<Result<f64>>) -> Self {
        let mut failed = Vec::new();
        let per_path: Vec<f64> = outcomes
            .into_iter()
            .enumerate()
            .map(|(path, r)| match r {
                Ok(v) => v,
                Err(e) => {
                    failed.push(PathFailure {
                        path,
                        reason: e.to_string(),
                    });
                    f64::NAN
                }
            })
            .collect();
        let (mean, rms, max_abs) = moments(&per_path);
        PnLReport {
            per_path,
            failed,
            mean,
            rms,
            max_abs,
        }
    }
}

/// Mean, root mean square and largest magnitude of the finite entries.
pub(crate) fn moments(values: &[f64]) -> (f64, f64, f64) {
    let mut count = 0usize;
    let (mut sum, mut sq, mut max_abs) = (0.0, 0.0, 0.0f64);
    for v in values.iter().filter(|v| v.is_finite()) {
        count += 1;
        sum += v;
        sq += v * v;
        max_abs = max_abs.max(v.abs());
    }
    if count == 0 {
        return (f64::NAN, f64::NAN, f64::NAN);
    }
    let n = count as f64;
    (sum / n, (sq / n).sqrt(), max_abs)
}

/// One simulation step of one path.
#[derive(Debug, Clone, PartialEq)]
pub struct TradeRecord {
    pub path: usize,
    pub time: f64,
    pub factor: f64,
    /// Holding over the following step.
    pub position: f64,
    /// Price paid for the trade at this time, zero without a trade.
    pub quote_paid: f64,
}

/// `Y_T S - sum_j P_{t_j}(-Y_{t_j-}, dY_{t_j})` on one path.
pub(crate) fn direct_path(
    ensemble: &PathEnsemble,
    path: usize,
    strategy: &dyn Strategy,
    family: &SurfaceFamily,
    s: &PayoffSpec,
    reject_saturated: bool,
    mut log: Option<&mut Vec<TradeRecord>>,
) -> Result<f64> {
    let times = ensemble.times();
    let f = ensemble.factor(path);
    let n = ensemble.n_steps();
    let mut held = 0.0;
    let mut paid = 0.0;
    for j in 0..n {
        let (t, x) = (times[j], f[j]);
        let target = strategy.position(j, t, x)?;
        if reject_saturated && target.saturated != Saturation::None {
            return Err(Error::Saturation {
                saturated: 1,
                total: n,
                limit: 0.0,
            });
        }
        let next = target.y;
        let dy = next - held;
        let price = if dy == 0.0 {
            0.0
        } else {
            let ctx = QuoteContext::new(family, x, t)?;
            quote(&ctx, -held, dy)?
        };
        paid += price;
        held = next;
        if let Some(log) = log.as_deref_mut() {
            log.push(TradeRecord {
                path,
                time: t,
                factor: x,
                position: held,
                quote_paid: price,
            });
        }
    }
    if let Some(log) = log {
        log.push(TradeRecord {
            path,
            time: times[n],
            factor: f[n],
            position: held,
            quote_paid: 0.0,
        });
    }
    Ok(held * s.eval(f[n])? - paid)
}

/// Trading gains `I(Y)` paid at the Market's quoted prices, one value per path.
pub fn pnl_direct(
    ensemble: &PathEnsemble,
    strategy: &dyn Strategy,
    family: &SurfaceFamily,
    s: &PayoffSpec,
) -> Result<PnLReport> {
    s.check("s")?;
    let outcomes = (0..ensemble.n_paths())
        .into_par_iter()
        .map(|p| direct_path(ensemble, p, strategy, family, s, false, None))
        .collect();
    Ok(PnLReport::collect(outcomes))
}

/// [`pnl_direct`] together with the step-by-step trade log.
pub fn pnl_direct_logged(
    ensemble: &PathEnsemble,
    strategy: &dyn Strategy,
    family: &SurfaceFamily,
    s: &PayoffSpec,
) -> Result<(PnLReport, Vec<TradeRecord>)> {
    s.check("s")?;
    let runs: Vec<(Result<f64>, Vec<TradeRecord>)> = (0..ensemble.n_paths())
        .into_par_iter()
        .map(|p| {
            let mut log = Vec::with_capacity(ensemble.n_steps() + 1);
            let r = direct_path(ensemble, p, strategy, family, s, false, Some(&mut log));
            (r, log)
        })
        .collect();
    let mut trades = Vec::new();
    let mut outcomes = Vec::with_capacity(runs.len());
    for (r, log) in runs {
        outcomes.push(r);
        trades.extend(log);
    }
    Ok((PnLReport::collect(outcomes), trades))
}

/// The same gains through the Market's hedge:
/// `h_M(F_T) - p(f0, 0, 0) - sum g(Z^Y) dt + sum Z^Y dW`, with
/// `Z^Y_{t_j} = Z(F_{t_j}, t_j, Y)` at the holding `Y` over the next step.
pub fn pnl_bsde(
    ensemble: &PathEnsemble,
    strategy: &dyn Strategy,
    family: &SurfaceFamily,
    h_m: &PayoffSpec,
    driver: &DriverSpec,
) -> Result<PnLReport> {
    h_m.check("h_m")?;
    let g = driver.compile()?;
    let times = ensemble.times();
    let f0 = ensemble.factor(0)[0];
    let p0 = family.p_at(f0, 0.0, 0.0)?;
    let outcomes = (0..ensemble.n_paths())
        .into_par_iter()
        .map(|path| -> Result<f64> {
            let f = ensemble.factor(path);
            let dw = ensemble.dw(path);
            let n = ensemble.n_steps();
            let (mut drift, mut noise) = (0.0, 0.0);
            for j in 0..n {
                let (t, x) = (times[j], f[j]);
                let y = strategy.position(j, t, x)?.y;
                let z = family.z_at(x, t, y)?;
                drift += g.eval_scalar(z, t) * (times[j + 1] - t);
                noise += z * dw[j];
            }
            Ok(h_m.eval(f[n])? - p0 - drift + noise)
        })
        .collect();
    Ok(PnLReport::collect(outcomes))
}

/// `sum_k Y_{tau_{k+1}} (S_{tau_{k+1}} - S_{tau_k})` over the jump times of a
/// simple strategy, with `S_t = p(x, t, 0) - p(x, t, 1)` read from the family
/// and `S_T = s(F_T)`.
pub fn stieltjes_sum(
    ensemble: &PathEnsemble,
    path: usize,
    strategy: &SimpleStrategy,
    family: &SurfaceFamily,
    s: &PayoffSpec,
) -> Result<f64> {
    let times = ensemble.times();
    let f = ensemble.factor(path);
    let n = ensemble.n_steps();
    let unit = |j: usize| -> Result<f64> {
        let ctx = QuoteContext::new(family, f[j], times[j])?;
        quote(&ctx, 0.0, 1.0)
    };
    let mut held = 0.0;
    let mut last: Option<f64> = None;
    let mut total = 0.0;
    for j in 0..n {
        let next = strategy.value_at(times[j]);
        if next != held {
            let here = unit(j)?;
            if let Some(prev) = last {
                total += held * (here - prev);
            }
            last = Some(here);
            held = next;
        }
    }
    if let Some(prev) = last {
        total += held * (s.eval(f[n])? - prev);
    }
    Ok(total)
}

pub fn write_trades_csv<W: Write>(trades: &[TradeRecord], out: W) -> std::io::Result<()> {
    let mut w = CsvWriter::new(out, &["path", "time", "factor", "position", "quote_paid"])?;
    for r in trades {
        w.row(&[
            r.path.to_string(),
            num(r.time),
            num(r.factor),
            num(r.position),
            num(r.quote_paid),
        ])?;
    }
    w.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::FactorModel;
    use crate::pde::{build_family, SolverOptions, SpaceTimeGrid};
    use crate::simulate::{simulate_paths, SimpleStrategy};

    #[test]
    fn direct_and_bsde_gains_agree_on_an_affine_claim() {
        let model = FactorModel::brownian(0.0, 1.0, 1.0);
        let s = PayoffSpec::affine(10.0, 2.0);
        let driver = DriverSpec::quadratic(0.5);
        let grid = SpaceTimeGrid::new(-6.0, 6.0, 121, 200, 1.0).unwrap();
        let ys: Vec<f64> = (-3..=3).map(f64::from).collect();
        let family = build_family(
            &model,
            &driver,
            &PayoffSpec::zero(),
            &s,
            &ys,
            &grid,
            &SolverOptions::default(),
        )
        .unwrap();
        let paths = simulate_paths(&model, 100, 200, 5).unwrap();
        let strategy = SimpleStrategy::new(vec![0.0, 0.3, 0.71], vec![1.0, 2.0, -1.0]).unwrap();
        let direct = pnl_direct(&paths, &strategy, &family, &s).unwrap();
        let bsde = pnl_bsde(&paths, &strategy, &family, &PayoffSpec::zero(), &driver).unwrap();
        assert!(direct.failed.is_empty());
        for (a, b) in direct.per_path.iter().zip(&bsde.per_path) {
            assert!((a - b).abs() < 1e-8 * (1.0 + a.abs()), "{a} vs {b}");
        }
        let (_, log) = pnl_direct_logged(&paths, &strategy, &family, &s).unwrap();
        assert_eq!(log.len(), 200 * 101);
    }
}
