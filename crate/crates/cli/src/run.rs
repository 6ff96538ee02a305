//! Scenario orchestration: each subcommand turns a validated config into
//! headline metrics and in-memory CSV artifacts.

use impact_hedge::closed_form::{put_hedges, replication_cost};
use impact_hedge::esscher::{monotonicity_scan, tail_limit_check};
use impact_hedge::export::{num, CsvWriter};
use impact_hedge::quotes::{check_axioms, price_curve, write_price_curves_csv, QuoteContext};
use impact_hedge::simulate::{
    hedge_plan, pnl_bsde, pnl_direct, pnl_direct_logged, replication_test, simulate_paths,
    write_trades_csv, HedgePlan, PathEnsemble, SimpleStrategy, Strategy,
};
use impact_hedge::{
    build_family, solve_hedge_value, DriverSpec, FactorModel, PayoffSpec, SpaceTimeGrid,
    SurfaceFamily,
};

use crate::config::{lattice, ScenarioConfig, StrategyBlock, Subcommand};
use crate::error::CliError;
use crate::verify;

/// A headline number or flag of a run.
#[derive(Debug, Clone, PartialEq)]
pub enum Metric {
    Number(f64),
    Count(u64),
    Flag(bool),
    Text(String),
}

impl Metric {
    pub fn render(&self) -> String {
        match self {
            Metric::Number(v) => num(*v),
            Metric::Count(n) => n.to_string(),
            Metric::Flag(b) => b.to_string(),
            Metric::Text(s) => s.clone(),
        }
    }
}

/// A file produced by a run, kept in memory until emission.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub subcommand: Subcommand,
    /// SHA-256 of the effective configuration.
    pub input_digest: String,
    pub metrics: Vec<(String, Metric)>,
    /// Console lines; `verify` prints one per criterion.
    pub lines: Vec<String>,
    pub failures: Vec<String>,
}

impl RunReport {
    pub fn exit_status(&self) -> i32 {
        if self.failures.is_empty() {
            0
        } else {
            3
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub report: RunReport,
    pub artifacts: Vec<Artifact>,
}

#[derive(Default)]
pub(crate) struct Collector {
    pub metrics: Vec<(String, Metric)>,
    pub artifacts: Vec<Artifact>,
    pub lines: Vec<String>,
    pub failures: Vec<String>,
}

impl Collector {
    pub fn number(&mut self, name: &str, v: f64) {
        self.metrics.push((name.into(), Metric::Number(v)));
    }

    pub fn count(&mut self, name: &str, n: usize) {
        self.metrics.push((name.into(), Metric::Count(n as u64)));
    }

    pub fn flag(&mut self, name: &str, b: bool) {
        self.metrics.push((name.into(), Metric::Flag(b)));
    }

    pub fn text(&mut self, name: &str, s: impl Into<String>) {
        self.metrics.push((name.into(), Metric::Text(s.into())));
    }

    pub fn csv(&mut self, name: &str, write: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<(), CliError> {
        let mut bytes = Vec::new();
        write(&mut bytes).map_err(|e| CliError::io(std::path::Path::new(name), e))?;
        self.artifacts.push(Artifact {
            name: name.into(),
            bytes,
        });
        Ok(())
    }
}

/// Runs one subcommand on a validated scenario.
pub fn run_scenario(config: &ScenarioConfig, sub: Subcommand) -> Result<RunOutput, CliError> {
    config.validate(sub)?;
    let mut out = Collector::default();
    match sub {
        Subcommand::Quote => run_quote(config, &mut out)?,
        Subcommand::Surface => run_surface(config, &mut out)?,
        Subcommand::Hedge => run_hedge(config, &mut out)?,
        Subcommand::Simulate => run_simulate(config, &mut out)?,
        Subcommand::Burgers => run_burgers(config, &mut out)?,
        Subcommand::Esscher => run_esscher(config, &mut out)?,
        Subcommand::Verify => verify::run(config, &mut out)?,
    }
    if sub != Subcommand::Verify {
        out.lines = out
            .metrics
            .iter()
            .map(|(k, v)| format!("{k} = {}", v.render()))
            .collect();
    }
    Ok(RunOutput {
        report: RunReport {
            subcommand: sub,
            input_digest: crate::output::digest_hex(config.to_toml().as_bytes()),
            metrics: out.metrics,
            lines: out.lines,
            failures: out.failures,
        },
        artifacts: out.artifacts,
    })
}

struct Market {
    model: FactorModel,
    s: PayoffSpec,
    family: SurfaceFamily,
}

fn market(config: &ScenarioConfig) -> Result<Market, CliError> {
    let model = config.model.factor_model();
    let s = config.payoffs.s.clone().expect("validated");
    let grid = config.grids.space_time(&model).map_err(CliError::core("pde"))?;
    let ys = config.grids.volumes.values();
    let family = build_family(&model, &config.driver, &config.payoffs.h_m, &s, &ys, &grid, &config.grids.solver)
        .map_err(CliError::core("pde"))?;
    Ok(Market { model, s, family })
}

fn run_quote(config: &ScenarioConfig, out: &mut Collector) -> Result<(), CliError> {
    let m = market(config)?;
    let ctx = QuoteContext::new(&m.family, m.model.f0, 0.0).map_err(CliError::core("quotes"))?;
    let ys = m.family.y_grid().to_vec();
    let curve = price_curve(&ctx, 0.0, &ys).map_err(CliError::core("quotes"))?;
    let axioms = check_axioms(&ctx, &ys, &ys);
    let (lo, hi) = m.family.volume_range();
    if lo <= -1.0 && hi >= 1.0 {
        let ask = impact_hedge::quotes::quote(&ctx, 0.0, 1.0).map_err(CliError::core("quotes"))?;
        let bid = -impact_hedge::quotes::quote(&ctx, 0.0, -1.0).map_err(CliError::core("quotes"))?;
        out.number("spot_ask", ask);
        out.number("spot_bid", bid);
    }
    if ys.len() > 1 {
        let n = ys.len() - 1;
        out.number("mean_slope", (curve.prices[n] - curve.prices[0]) / (ys[n] - ys[0]));
    }
    out.number("min_second_difference", curve.min_second_difference());
    out.number("round_trip_relative", axioms.round_trip_relative);
    out.number("bid_ask_violation", axioms.bid_ask_violation);
    out.number("zero_volume", axioms.zero_volume);
    out.count("unavailable_pairs", axioms.unavailable);
    out.number("min_z_increment", m.family.z_monotonicity_defect());
    out.csv("quotes.csv", |w| write_price_curves_csv(std::slice::from_ref(&curve), w))
}

fn run_surface(config: &ScenarioConfig, out: &mut Collector) -> Result<(), CliError> {
    let m = market(config)?;
    let (lo, hi) = m.family.volume_range();
    out.number("volume_min", lo);
    out.number("volume_max", hi);
    out.number("min_z_increment", m.family.z_monotonicity_defect());
    for &y in m.family.y_grid() {
        let p = m.family.p_at(m.model.f0, 0.0, y).map_err(CliError::core("pde"))?;
        out.number(&format!("p0[y={y}]"), p);
    }
    let (xs, ts) = (config.output.x_stride, config.output.t_stride);
    out.csv("surface.csv", |w| write_surface_strided(&m.family, xs, ts, w))
}

/// `x,t,y,p,z` on every `x_stride`-th node and `t_stride`-th level; the
/// terminal level is always kept.
fn write_surface_strided(family: &SurfaceFamily, x_stride: usize, t_stride: usize, out: &mut Vec<u8>) -> std::io::Result<()> {
    let mut csv = CsvWriter::new(out, &["x", "t", "y", "p", "z"])?;
    let grid = family.grid();
    for (k, &y) in family.y_grid().iter().enumerate() {
        let p = family.surfaces()[k].values();
        let z = family.z_slice(k);
        for n in kept(grid.nt + 1, t_stride) {
            for i in kept(grid.nx, x_stride) {
                let j = n * grid.nx + i;
                csv.row(&[num(grid.x(i)), num(grid.t(n)), num(y), num(p[j]), num(z[j])])?;
            }
        }
    }
    csv.finish()
}

fn kept(len: usize, stride: usize) -> impl Iterator<Item = usize> {
    (0..len).filter(move |k| k % stride == 0 || *k == len - 1)
}

fn plan(config: &ScenarioConfig, m: &Market) -> Result<(PayoffSpec, HedgePlan), CliError> {
    let h_l = config.payoffs.h_l.clone().expect("validated").after(m.s.clone());
    let grid = config.grids.hedge_grid(&m.model).map_err(CliError::core("pde"))?;
    let plan = hedge_plan(
        &m.model,
        &config.driver,
        &config.payoffs.h_m,
        &h_l,
        &m.family,
        &grid,
        &config.grids.solver,
        config.simulation.saturation_limit,
    )
    .map_err(CliError::core("simulate"))?;
    Ok((h_l, plan))
}

fn run_hedge(config: &ScenarioConfig, out: &mut Collector) -> Result<(), CliError> {
    let m = market(config)?;
    let (_, plan) = plan(config, &m)?;
    let start = plan.strategy(&m.family).position(0, 0.0, m.model.f0).map_err(CliError::core("pde"))?;
    out.number("initial_cost", plan.initial_cost);
    out.number("value_at_start", plan.value_surface.value_at(m.model.f0, 0.0).map_err(CliError::core("pde"))?);
    out.number("position_at_start", start.y);
    out.count("saturated_nodes", plan.saturated_nodes);
    out.number("saturated_fraction", plan.saturated_fraction());
    let (xs, ts) = (config.output.x_stride, config.output.t_stride);
    out.csv("hedge.csv", |w| {
        let grid = plan.grid();
        let mut csv = CsvWriter::new(w, &["x", "t", "v", "z_star", "y_star"])?;
        for n in kept(grid.nt, ts) {
            for i in kept(grid.nx, xs) {
                let j = n * grid.nx + i;
                csv.row(&[
                    num(grid.x(i)),
                    num(grid.t(n)),
                    num(plan.value_surface.value(i, n)),
                    num(plan.z_star[j]),
                    num(plan.strategy_field[j]),
                ])?;
            }
        }
        csv.finish()
    })
}

fn run_simulate(config: &ScenarioConfig, out: &mut Collector) -> Result<(), CliError> {
    let m = market(config)?;
    let sim = &config.simulation;
    let paths = simulate_paths(&m.model, sim.n_steps, sim.n_paths, sim.seed).map_err(CliError::core("simulate"))?;
    let strategy = match &sim.strategy {
        Some(s) => s.clone(),
        None if config.payoffs.h_l.is_some() => StrategyBlock::Hedge,
        None => StrategyBlock::Simple {
            jump_times: vec![0.0],
            values: vec![1.0],
        },
    };
    match strategy {
        StrategyBlock::Hedge => {
            let (h_l, plan) = plan(config, &m)?;
            let r = replication_test(&plan, &paths, &m.family, &m.s, &h_l).map_err(CliError::core("simulate"))?;
            out.text("strategy", "hedge");
            out.number("initial_cost", r.initial_cost);
            out.number("residual_mean", r.mean);
            out.number("residual_rms", r.rms);
            out.number("residual_rms_relative", r.rms_relative);
            out.number("residual_max_abs", r.max_abs);
            out.count("excluded_paths", r.excluded.len());
            out.csv("pnl.csv", |w| r.write_csv(w))?;
            if sim.trade_log {
                let strategy = plan.strategy(&m.family);
                trade_log(&paths, &strategy, &m, sim.export_paths, out)?;
            }
        }
        StrategyBlock::Simple { jump_times, values } => {
            let strategy = SimpleStrategy::new(jump_times, values).map_err(CliError::core("simulate"))?;
            let direct = pnl_direct(&paths, &strategy, &m.family, &m.s).map_err(CliError::core("simulate"))?;
            let bsde = pnl_bsde(&paths, &strategy, &m.family, &config.payoffs.h_m, &config.driver)
                .map_err(CliError::core("simulate"))?;
            let gap = direct
                .per_path
                .iter()
                .zip(&bsde.per_path)
                .map(|(a, b)| (a - b).abs())
                .filter(|d| d.is_finite())
                .fold(0.0f64, f64::max);
            out.text("strategy", "simple");
            out.number("direct_mean", direct.mean);
            out.number("direct_rms", direct.rms);
            out.number("bsde_mean", bsde.mean);
            out.number("bsde_rms", bsde.rms);
            out.number("max_representation_gap", gap);
            out.count("failed_paths", direct.failed.len().max(bsde.failed.len()));
            out.csv("pnl.csv", |w| {
                let mut csv = CsvWriter::new(w, &["path", "direct", "bsde"])?;
                for (k, (a, b)) in direct.per_path.iter().zip(&bsde.per_path).enumerate() {
                    csv.row(&[k.to_string(), num(*a), num(*b)])?;
                }
                csv.finish()
            })?;
            if sim.trade_log {
                trade_log(&paths, &strategy, &m, sim.export_paths, out)?;
            }
        }
    }
    let shown = sim.export_paths.min(paths.n_paths());
    out.csv("paths.csv", |w| {
        let mut csv = CsvWriter::new(w, &["path", "time", "factor", "dw"])?;
        for p in 0..shown {
            let (f, dw) = (paths.factor(p), paths.dw(p));
            for (j, t) in paths.times().iter().enumerate() {
                let step = dw.get(j).map_or_else(|| num(0.0), |v| num(*v));
                csv.row(&[p.to_string(), num(*t), num(f[j]), step])?;
            }
        }
        csv.finish()
    })
}

fn trade_log(paths: &PathEnsemble, strategy: &dyn Strategy, m: &Market, shown: usize, out: &mut Collector) -> Result<(), CliError> {
    let (_, log) = pnl_direct_logged(paths, strategy, &m.family, &m.s).map_err(CliError::core("simulate"))?;
    let kept: Vec<_> = log.into_iter().filter(|r| r.path < shown).collect();
    out.csv("trades.csv", |w| write_trades_csv(&kept, w))
}

fn run_burgers(config: &ScenarioConfig, out: &mut Collector) -> Result<(), CliError> {
    let b = config.burgers.as_ref().expect("validated");
    let spec = &b.block;
    let cost = replication_cost(spec).map_err(CliError::core("closed_form"))?;
    out.number("delta", spec.delta());
    out.number("replication_cost_exact", cost.exact);
    out.number("replication_cost_approx", cost.approx);
    out.number("replication_cost_gap", (cost.approx - cost.exact) / cost.approx);
    let ws = lattice(b.w_min, b.w_max, b.w_count);
    // The field solves u_t + u_ww / 2 - gamma u u_w = 0; central differences at h.
    let h = 1e-3;
    let u = |w: f64, t: f64| spec.field(w, t);
    let mut residual = 0.0f64;
    for &t in &b.times {
        for &w in &ws {
            let ut = (u(w, t + h) - u(w, t - h)) / (2.0 * h);
            let uw = (u(w + h, t) - u(w - h, t)) / (2.0 * h);
            let uww = (u(w + h, t) - 2.0 * u(w, t) + u(w - h, t)) / (h * h);
            residual = residual.max((ut + 0.5 * uww - spec.gamma * u(w, t) * uw).abs());
        }
    }
    out.number("wave_residual", residual);
    out.csv("burgers.csv", |w| {
        let mut csv = CsvWriter::new(
            w,
            &["w", "t", "security", "y_impact", "y_bachelier", "bachelier_price", "value", "field"],
        )?;
        for &t in &b.times {
            for &x in &ws {
                let hg = put_hedges(spec, x, t);
                csv.row(&[
                    num(x),
                    num(t),
                    num(spec.b + spec.c * x),
                    num(hg.y_impact),
                    num(hg.y_bachelier),
                    num(hg.bachelier_price),
                    num(spec.value(x, t)),
                    num(spec.field(x, t)),
                ])?;
            }
        }
        csv.finish()
    })?;
    if b.solve {
        let (value_error, field_error) = burgers_pde_errors(config, spec)?;
        out.number("pde_value_error", value_error);
        out.number("pde_field_error", field_error);
    }
    Ok(())
}

/// Sup-norm gaps between the solved hedge value of the short put block and
/// the closed forms for `v` and `v_x`, over the inner three quarters of the
/// domain.
pub(crate) fn burgers_pde_errors(config: &ScenarioConfig, spec: &impact_hedge::closed_form::PutBlockSpec) -> Result<(f64, f64), CliError> {
    let model = FactorModel::brownian(spec.w0, 1.0, spec.horizon);
    let grid = config.grids.hedge_grid(&model).map_err(CliError::core("pde"))?;
    put_block_errors(spec, &grid, &config.grids.solver)
}

pub(crate) fn put_block_errors(
    spec: &impact_hedge::closed_form::PutBlockSpec,
    grid: &SpaceTimeGrid,
    options: &impact_hedge::SolverOptions,
) -> Result<(f64, f64), CliError> {
    let model = FactorModel::brownian(spec.w0, 1.0, spec.horizon);
    let claim = PayoffSpec::LogCoshPut {
        lambda: spec.lambda,
        gamma: spec.gamma,
        strike: spec.strike,
    }
    .scaled(-1.0)
    .after(PayoffSpec::affine(spec.b, spec.c));
    let v = solve_hedge_value(&model, &DriverSpec::quadratic(spec.gamma), &PayoffSpec::zero(), &claim, grid, options)
        .map_err(CliError::core("pde"))?;
    let z = v.z_field(&model);
    let centre = 0.5 * (grid.x_min + grid.x_max);
    let reach = 0.375 * (grid.x_max - grid.x_min);
    let (mut ev, mut eu) = (0.0f64, 0.0f64);
    for n in 0..=grid.nt {
        let t = grid.t(n);
        for i in 0..grid.nx {
            let w = grid.x(i);
            if (w - centre).abs() > reach {
                continue;
            }
            ev = ev.max((v.value(i, n) - spec.value(w, t)).abs());
            // sigma = 1, so v_x = -Z.
            eu = eu.max((-z[n * grid.nx + i] - spec.field(w, t)).abs());
        }
    }
    Ok((ev, eu))
}

fn run_esscher(config: &ScenarioConfig, out: &mut Collector) -> Result<(), CliError> {
    let e = config.esscher.as_ref().expect("validated");
    let measure = e.measure.measure();
    let ys = lattice(e.y_min, e.y_max, e.y_count);
    let scan = monotonicity_scan(&measure, &e.phi, &ys).map_err(CliError::core("esscher"))?;
    let tail = tail_limit_check(&measure, &e.phi, e.tail_magnitude).map_err(CliError::core("esscher"))?;
    out.flag("monotone", scan.monotone);
    out.count("scanned_tilts", scan.y_grid.len());
    out.text("screen_failure", scan.screen_failure.clone().unwrap_or_else(|| "none".into()));
    if let Some(t) = &tail.tail {
        out.number("mean_lower", t.mean_lower);
        out.number("mean_upper", t.mean_upper);
        if let Some(g) = t.lower_gap {
            out.number("lower_gap", g);
        }
        if let Some(g) = t.upper_gap {
            out.number("upper_gap", g);
        }
        out.flag("diverging_lower", t.diverging_lower);
        out.flag("diverging_upper", t.diverging_upper);
    }
    out.csv("tilt.csv", |w| scan.write_csv(w))?;
    out.csv("tail.csv", |w| tail.write_csv(w))
}
