use std::io::Write;

use rayon::prelude::*;

use super::pnl::{direct_path, moments, PathFailure};
use super::{PathEnsemble, Strategy};
use crate::error::{Error, Result};
use crate::export::{num, CsvWriter};
use crate::model::{DriverSpec, FactorModel, PayoffSpec};
use crate::pde::{
    bilinear, invert_z, solve_hedge_value, InversionResult, PriceSurface, Saturation,
    SolverOptions, SpaceTimeGrid, SurfaceFamily,
};

/// The hedge of a claim `h_L(s(F_T))` against the Market's quotes.
#[derive(Debug, Clone, PartialEq)]
pub struct HedgePlan {
    /// `v(x, t)`, the Market's value with the claim delivered.
    pub value_surface: PriceSurface,
    /// `Z* = -sigma v_x` on the value-surface grid.
    pub z_star: Vec<f64>,
    /// `Y* = Z⁻(x, t, Z*)` on every node before the horizon.
    pub strategy_field: Vec<f64>,
    pub saturated_nodes: usize,
    /// `p(f0, 0, 0) - v(f0, 0)`.
    pub initial_cost: f64,
}

impl HedgePlan {
    pub fn grid(&self) -> &SpaceTimeGrid {
        self.value_surface.grid()
    }

    pub fn saturated_fraction(&self) -> f64 {
        self.saturated_nodes as f64 / self.strategy_field.len() as f64
    }

    /// `Z*(x, t)`, bilinear on the value-surface grid.
    pub fn z_star_at(&self, x: f64, t: f64) -> Result<f64> {
        let grid = self.grid();
        let (i, wx, n, wt) = grid.cell(x, t)?;
        Ok(bilinear(&self.z_star, grid.nx, i, wx, n, wt))
    }

    /// The feedback strategy `Y*_t = Z⁻(F_t, t, Z*(F_t, t))`.
    pub fn strategy<'a>(&'a self, family: &'a SurfaceFamily) -> HedgeStrategy<'a> {
        HedgeStrategy { plan: self, family }
    }
}

/// [`HedgePlan`] evaluated along a path: the volume is inverted at the
/// current state rather than interpolated from the tabulated field.
#[derive(Debug, Clone, Copy)]
pub struct HedgeStrategy<'a> {
    plan: &'a HedgePlan,
    family: &'a SurfaceFamily,
}

impl Strategy for HedgeStrategy<'_> {
    fn position(&self, _j: usize, t: f64, x: f64) -> Result<InversionResult> {
        let z = self.plan.z_star_at(x, t)?;
        invert_z(self.family, x, t, z)
    }
}

/// Solves for the value surface with terminal `h_M + h_L∘s`, inverts `Z*`
/// on every node and fails when more than `saturation_limit` of the nodes
/// fall outside the family's volume range.
#[allow(clippy::too_many_arguments)]
pub fn hedge_plan(
    model: &FactorModel,
    driver: &DriverSpec,
    h_m: &PayoffSpec,
    h_l_of_s: &PayoffSpec,
    family: &SurfaceFamily,
    grid: &SpaceTimeGrid,
    options: &SolverOptions,
    saturation_limit: f64,
) -> Result<HedgePlan> {
    if !(0.0..=1.0).contains(&saturation_limit) {
        return Err(Error::invalid(
            "saturation_limit",
            format!("must lie in [0, 1], got {saturation_limit}"),
        ));
    }
    let value_surface = solve_hedge_value(model, driver, h_m, h_l_of_s, grid, options)?;
    let z_star = value_surface.z_field(model);
    let nx = grid.nx;
    let inverted: Vec<InversionResult> = (0..grid.nt * nx)
        .into_par_iter()
        .map(|k| {
            let (n, i) = (k / nx, k % nx);
            invert_z(family, grid.x(i), grid.t(n), z_star[k])
        })
        .collect::<Result<_>>()?;
    let saturated_nodes = inverted
        .iter()
        .filter(|r| r.saturated != Saturation::None)
        .count();
    let total = inverted.len();
    if saturated_nodes as f64 > saturation_limit * total as f64 {
        return Err(Error::Saturation {
            saturated: saturated_nodes,
            total,
            limit: saturation_limit,
        });
    }
    let initial_cost = family.p_at(model.f0, 0.0, 0.0)? - value_surface.value_at(model.f0, 0.0)?;
    Ok(HedgePlan {
        value_surface,
        z_star,
        strategy_field: inverted.iter().map(|r| r.y).collect(),
        saturated_nodes,
        initial_cost,
    })
}

/// Residuals `cost + I(Y*) + h_L(s(F_T))` of the discretely rebalanced hedge.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationReport {
    pub n_steps: usize,
    pub initial_cost: f64,
    pub pnl: Vec<f64>,
    pub residuals: Vec<f64>,
    /// Paths that hit a saturated volume or an unavailable quote.
    pub excluded: Vec<PathFailure>,
    pub mean: f64,
    pub rms: f64,
    /// `rms / |initial_cost|`.
    pub rms_relative: f64,
    pub max_abs: f64,
}

impl ReplicationReport {
    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = CsvWriter::new(out, &["path", "pnl", "residual"])?;
        for (k, (p, r)) in self.pnl.iter().zip(&self.residuals).enumerate() {
            w.row(&[k.to_string(), num(*p), num(*r)])?;
        }
        w.finish()
    }
}

/// Rebalances to `Y*` at every ensemble step and compares the trading gains
/// with the claim.
pub fn replication_test(
    plan: &HedgePlan,
    ensemble: &PathEnsemble,
    family: &SurfaceFamily,
    s: &PayoffSpec,
    h_l_of_s: &PayoffSpec,
) -> Result<ReplicationReport> {
    s.check("s")?;
    h_l_of_s.check("h_l")?;
    let strategy = plan.strategy(family);
    let outcomes: Vec<Result<(f64, f64)>> = (0..ensemble.n_paths())
        .into_par_iter()
        .map(|p| {
            let gains = direct_path(ensemble, p, &strategy, family, s, true, None)?;
            let terminal = ensemble.factor(p)[ensemble.n_steps()];
            let claim = h_l_of_s.eval(terminal)?;
            Ok((gains, plan.initial_cost + gains + claim))
        })
        .collect();
    let mut excluded = Vec::new();
    let mut pnl = Vec::with_capacity(outcomes.len());
    let mut residuals = Vec::with_capacity(outcomes.len());
    for (path, r) in outcomes.into_iter().enumerate() {
        match r {
            Ok((g, res)) => {
                pnl.push(g);
                residuals.push(res);
            }
            Err(e) => {
                excluded.push(PathFailure {
                    path,
                    reason: e.to_string(),
                });
                pnl.push(f64::NAN);
                residuals.push(f64::NAN);
            }
        }
    }
    let (mean, rms, max_abs) = moments(&residuals);
    Ok(ReplicationReport {
        n_steps: ensemble.n_steps(),
        initial_cost: plan.initial_cost,
        pnl,
        residuals,
        excluded,
        mean,
        rms,
        rms_relative: rms / plan.initial_cost.abs(),
        max_abs,
    })
}
