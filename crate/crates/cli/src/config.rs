//! Scenario files: one TOML document with a block per concern.

use std::fmt;
use std::path::Path;

use impact_hedge::closed_form::PutBlockSpec;
use impact_hedge::esscher::MeasureSpec;
use impact_hedge::{
    CoefficientSpec, DriverSpec, Error as CoreError, FactorModel, PayoffSpec, SolverOptions,
    SpaceTimeGrid,
};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Issue};

/// The subcommands a scenario can drive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Subcommand {
    Quote,
    Surface,
    Hedge,
    Simulate,
    Burgers,
    Esscher,
    Verify,
}

impl Subcommand {
    pub fn name(self) -> &'static str {
        match self {
            Subcommand::Quote => "quote",
            Subcommand::Surface => "surface",
            Subcommand::Hedge => "hedge",
            Subcommand::Simulate => "simulate",
            Subcommand::Burgers => "burgers",
            Subcommand::Esscher => "esscher",
            Subcommand::Verify => "verify",
        }
    }
}

impl fmt::Display for Subcommand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelBlock {
    #[serde(default)]
    pub f0: f64,
    #[serde(default = "zero_coefficient")]
    pub drift: CoefficientSpec,
    #[serde(default = "unit_coefficient")]
    pub vol: CoefficientSpec,
    #[serde(default = "one")]
    pub horizon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lipschitz: Option<f64>,
}

impl Default for ModelBlock {
    fn default() -> Self {
        ModelBlock {
            f0: 0.0,
            drift: zero_coefficient(),
            vol: unit_coefficient(),
            horizon: 1.0,
            lipschitz: None,
        }
    }
}

impl ModelBlock {
    pub fn factor_model(&self) -> FactorModel {
        FactorModel {
            f0: self.f0,
            drift: self.drift.clone(),
            vol: self.vol.clone(),
            horizon: self.horizon,
            lipschitz: self.lipschitz,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PayoffBlock {
    /// Market endowment, a function of the factor.
    #[serde(default = "PayoffSpec::zero")]
    pub h_m: PayoffSpec,
    /// Traded security, a function of the factor.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<PayoffSpec>,
    /// Large trader's claim, a function of the security value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_l: Option<PayoffSpec>,
}

impl Default for PayoffBlock {
    fn default() -> Self {
        PayoffBlock {
            h_m: PayoffSpec::zero(),
            s: None,
            h_l: None,
        }
    }
}

/// Volumes as an explicit list or an evenly spaced range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum VolumeGrid {
    List(Vec<f64>),
    Range { min: f64, max: f64, count: usize },
}

impl Default for VolumeGrid {
    fn default() -> Self {
        VolumeGrid::Range {
            min: -2.0,
            max: 2.0,
            count: 5,
        }
    }
}

impl VolumeGrid {
    pub fn values(&self) -> Vec<f64> {
        match self {
            VolumeGrid::List(v) => v.clone(),
            VolumeGrid::Range { min, max, count } => lattice(*min, *max, *count),
        }
    }

    fn validate(&self, field: &str, issues: &mut Vec<Issue>) {
        if let VolumeGrid::Range { min, max, count } = self {
            if !(min.is_finite() && max.is_finite()) || *count < 1 || (*count > 1 && !(min < max)) {
                issues.push(Issue::new(field, "need finite min < max and count >= 1"));
                return;
            }
        }
        let v = self.values();
        if v.is_empty() {
            issues.push(Issue::new(field, "no volumes"));
        } else if v.iter().any(|y| !y.is_finite()) {
            issues.push(Issue::new(field, "volumes must be finite"));
        } else if v.windows(2).any(|w| !(w[0] < w[1])) {
            issues.push(Issue::new(field, "volumes must be strictly increasing"));
        }
    }
}

/// Evenly spaced points with exact end points.
pub fn lattice(min: f64, max: f64, count: usize) -> Vec<f64> {
    if count <= 1 {
        return vec![min];
    }
    let h = (max - min) / (count - 1) as f64;
    (0..count)
        .map(|k| if k == count - 1 { max } else { min + k as f64 * h })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResolutionBlock {
    pub nx: usize,
    pub nt: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridBlock {
    /// Space domain; defaults to `f0 ± 6 sigma sqrt(T)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_max: Option<f64>,
    #[serde(default = "default_nx")]
    pub nx: usize,
    #[serde(default = "default_nt")]
    pub nt: usize,
    #[serde(default)]
    pub volumes: VolumeGrid,
    /// Finer lattice for the hedge value surface, on the same domain.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hedge: Option<ResolutionBlock>,
    #[serde(default)]
    pub solver: SolverOptions,
}

impl Default for GridBlock {
    fn default() -> Self {
        GridBlock {
            x_min: None,
            x_max: None,
            nx: default_nx(),
            nt: default_nt(),
            volumes: VolumeGrid::default(),
            hedge: None,
            solver: SolverOptions::default(),
        }
    }
}

impl GridBlock {
    pub fn space_time(&self, model: &FactorModel) -> Result<SpaceTimeGrid, CoreError> {
        self.with_resolution(model, self.nx, self.nt)
    }

    pub fn hedge_grid(&self, model: &FactorModel) -> Result<SpaceTimeGrid, CoreError> {
        match &self.hedge {
            Some(r) => self.with_resolution(model, r.nx, r.nt),
            None => self.space_time(model),
        }
    }

    fn with_resolution(&self, model: &FactorModel, nx: usize, nt: usize) -> Result<SpaceTimeGrid, CoreError> {
        let around = SpaceTimeGrid::around(model, nx, nt)?;
        SpaceTimeGrid::new(
            self.x_min.unwrap_or(around.x_min),
            self.x_max.unwrap_or(around.x_max),
            nx,
            nt,
            model.horizon,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StrategyBlock {
    /// Rebalance to the perfect hedge of `payoffs.h_l`.
    Hedge,
    /// Deterministic holdings `values[k]` from `jump_times[k]` on.
    Simple { jump_times: Vec<f64>, values: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationBlock {
    #[serde(default = "default_paths")]
    pub n_paths: usize,
    #[serde(default = "default_steps")]
    pub n_steps: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Defaults to the hedge when `payoffs.h_l` is set, else buy-and-hold one unit.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strategy: Option<StrategyBlock>,
    /// Largest fraction of saturated strategy nodes accepted by the hedge.
    #[serde(default = "default_saturation")]
    pub saturation_limit: f64,
    /// Number of paths written to `paths.csv`.
    #[serde(default = "default_exported")]
    pub export_paths: usize,
    /// Also write the step-by-step trade log of the exported paths.
    #[serde(default)]
    pub trade_log: bool,
}

impl Default for SimulationBlock {
    fn default() -> Self {
        SimulationBlock {
            n_paths: default_paths(),
            n_steps: default_steps(),
            seed: default_seed(),
            strategy: None,
            saturation_limit: default_saturation(),
            export_paths: default_exported(),
            trade_log: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BurgersBlock {
    #[serde(flatten)]
    pub block: PutBlockSpec,
    #[serde(default = "default_w_min")]
    pub w_min: f64,
    #[serde(default = "default_w_max")]
    pub w_max: f64,
    #[serde(default = "default_w_count")]
    pub w_count: usize,
    #[serde(default = "default_times")]
    pub times: Vec<f64>,
    /// Also solve the hedge value numerically on `grids` and compare.
    #[serde(default = "yes")]
    pub solve: bool,
}

/// Measure shorthands on top of the raw atom and density forms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeasureBlock {
    TwoPoint { a: f64, b: f64 },
    Uniform { lo: f64, hi: f64, nodes: usize },
    StandardNormal { half_width: f64, nodes: usize },
    Atoms { points: Vec<f64>, weights: Vec<f64> },
    Density {
        xs: Vec<f64>,
        values: Vec<f64>,
        #[serde(default)]
        lower_unbounded: bool,
        #[serde(default)]
        upper_unbounded: bool,
    },
}

impl MeasureBlock {
    pub fn measure(&self) -> MeasureSpec {
        match self {
            MeasureBlock::TwoPoint { a, b } => MeasureSpec::two_point(*a, *b),
            MeasureBlock::Uniform { lo, hi, nodes } => MeasureSpec::uniform(*lo, *hi, *nodes),
            MeasureBlock::StandardNormal { half_width, nodes } => {
                MeasureSpec::standard_normal(*half_width, *nodes)
            }
            MeasureBlock::Atoms { points, weights } => MeasureSpec::Atoms {
                points: points.clone(),
                weights: weights.clone(),
            },
            MeasureBlock::Density {
                xs,
                values,
                lower_unbounded,
                upper_unbounded,
            } => MeasureSpec::Density {
                xs: xs.clone(),
                values: values.clone(),
                lower_unbounded: *lower_unbounded,
                upper_unbounded: *upper_unbounded,
            },
        }
    }

    fn validate(&self, field: &str, issues: &mut Vec<Issue>) {
        match self {
            MeasureBlock::Uniform { lo, hi, nodes } if !(lo < hi) || *nodes < 2 => {
                issues.push(Issue::new(field, "need lo < hi and at least two nodes"));
            }
            MeasureBlock::StandardNormal { half_width, nodes } if !(*half_width > 0.0) || *nodes < 2 => {
                issues.push(Issue::new(field, "need a positive half width and at least two nodes"));
            }
            _ => {
                let mut core = Vec::new();
                self.measure().validate(field, &mut core);
                issues.extend(core.into_iter().map(Issue::from));
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EsscherBlock {
    pub measure: MeasureBlock,
    #[serde(default = "identity")]
    pub phi: PayoffSpec,
    #[serde(default = "default_tilt_min")]
    pub y_min: f64,
    #[serde(default = "default_tilt_max")]
    pub y_max: f64,
    #[serde(default = "default_tilt_count")]
    pub y_count: usize,
    #[serde(default = "default_tail")]
    pub tail_magnitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directory: Option<String>,
    /// Significant digits of every floating-point field.
    #[serde(default = "default_precision")]
    pub precision: usize,
    /// Write every `x_stride`-th space node and `t_stride`-th time level of
    /// exported surfaces.
    #[serde(default = "one_usize")]
    pub x_stride: usize,
    #[serde(default = "one_usize")]
    pub t_stride: usize,
}

impl Default for OutputBlock {
    fn default() -> Self {
        OutputBlock {
            directory: None,
            precision: default_precision(),
            x_stride: 1,
            t_stride: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct VerifyBlock {
    /// Subset of criteria to run; all when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub criteria: Option<Vec<u32>>,
}

/// A scenario; every block has defaults except the ones a subcommand needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub model: ModelBlock,
    #[serde(default = "zero_driver")]
    pub driver: DriverSpec,
    #[serde(default)]
    pub payoffs: PayoffBlock,
    #[serde(default)]
    pub grids: GridBlock,
    #[serde(default)]
    pub simulation: SimulationBlock,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub burgers: Option<BurgersBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub esscher: Option<EsscherBlock>,
    #[serde(default)]
    pub output: OutputBlock,
    #[serde(default)]
    pub verify: VerifyBlock,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            model: ModelBlock::default(),
            driver: zero_driver(),
            payoffs: PayoffBlock::default(),
            grids: GridBlock::default(),
            simulation: SimulationBlock::default(),
            burgers: None,
            esscher: None,
            output: OutputBlock::default(),
            verify: VerifyBlock::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let de = toml::Deserializer::parse(text)
            .map_err(|e| CliError::Validation(vec![Issue::new("<root>", e.to_string())]))?;
        serde_path_to_error::deserialize(de).map_err(|e| CliError::Validation(vec![Issue::parse(e)]))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario configs always serialize")
    }

    /// Every invariant breach, each with its field path.
    pub fn issues(&self, sub: Subcommand) -> Vec<Issue> {
        let mut issues = Vec::new();
        let mut core = Vec::new();
        let model = self.model.factor_model();
        model.validate("model", &mut core);
        self.driver.validate("driver", &mut core);
        self.payoffs.h_m.validate("payoffs.h_m", &mut core);
        if let Some(s) = &self.payoffs.s {
            s.validate("payoffs.s", &mut core);
        }
        if let Some(h) = &self.payoffs.h_l {
            h.validate("payoffs.h_l", &mut core);
        }
        self.output_issues(&mut issues);
        issues.extend(core.drain(..).map(Issue::from));

        let needs_surface = matches!(sub, Subcommand::Quote | Subcommand::Surface | Subcommand::Hedge | Subcommand::Simulate);
        if needs_surface {
            if self.payoffs.s.is_none() {
                issues.push(Issue::missing("payoffs.s"));
            }
            if matches!(self.driver, DriverSpec::GoodDeal { .. }) && self.driver.dimension() != 1 {
                issues.push(Issue::new("driver.a", "the factor is one-dimensional: need a single column"));
            }
            self.grid_issues(&model, &mut issues);
        }
        match sub {
            Subcommand::Hedge => {
                if self.payoffs.h_l.is_none() {
                    issues.push(Issue::missing("payoffs.h_l"));
                }
                self.saturation_issue(&mut issues);
            }
            Subcommand::Simulate => self.simulation_issues(&mut issues),
            Subcommand::Burgers => match &self.burgers {
                None => issues.push(Issue::missing("burgers")),
                Some(b) => {
                    b.block.validate("burgers", &mut core);
                    issues.extend(core.drain(..).map(Issue::from));
                    if !(b.w_min < b.w_max) || b.w_count < 2 {
                        issues.push(Issue::new("burgers.w_min", "need w_min < w_max and w_count >= 2"));
                    }
                    if b.times.iter().any(|t| !(*t >= 0.0 && *t <= b.block.horizon)) {
                        issues.push(Issue::new("burgers.times", "times must lie in [0, horizon]"));
                    }
                    if b.solve {
                        let m = FactorModel::brownian(b.block.w0, 1.0, b.block.horizon);
                        self.grid_issues(&m, &mut issues);
                        if !(b.block.gamma > 0.0) {
                            issues.push(Issue::new("burgers.gamma", "the numerical comparison needs gamma > 0"));
                        }
                    }
                }
            },
            Subcommand::Esscher => match &self.esscher {
                None => issues.push(Issue::missing("esscher")),
                Some(e) => {
                    e.measure.validate("esscher.measure", &mut issues);
                    e.phi.validate("esscher.phi", &mut core);
                    issues.extend(core.drain(..).map(Issue::from));
                    if !(e.y_min.is_finite() && e.y_max.is_finite() && e.y_min < e.y_max) || e.y_count < 2 {
                        issues.push(Issue::new("esscher.y_min", "need finite y_min < y_max and y_count >= 2"));
                    }
                    if !(e.tail_magnitude.is_finite() && e.tail_magnitude > 0.0) {
                        issues.push(Issue::new("esscher.tail_magnitude", "must be positive"));
                    }
                }
            },
            Subcommand::Verify => {
                if let Some(list) = &self.verify.criteria {
                    for c in list {
                        if !(1..=10).contains(c) {
                            issues.push(Issue::new("verify.criteria", format!("no criterion {c}")));
                        }
                    }
                }
            }
            _ => {}
        }
        issues
    }

    pub fn validate(&self, sub: Subcommand) -> Result<(), CliError> {
        let issues = self.issues(sub);
        if issues.is_empty() {
            Ok(())
        } else {
            Err(CliError::Validation(issues))
        }
    }

    fn grid_issues(&self, model: &FactorModel, issues: &mut Vec<Issue>) {
        let g = &self.grids;
        let mut core = Vec::new();
        for (field, nx, nt) in [("grids", g.nx, g.nt)]
            .into_iter()
            .chain(g.hedge.as_ref().map(|r| ("grids.hedge", r.nx, r.nt)))
        {
            if nx < 4 {
                issues.push(Issue::new(format!("{field}.nx"), "need at least 4 space nodes"));
            }
            if nt < 1 {
                issues.push(Issue::new(format!("{field}.nt"), "need at least one time step"));
            }
        }
        if let (Some(lo), Some(hi)) = (g.x_min, g.x_max) {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                issues.push(Issue::new("grids.x_min", "need finite x_min < x_max"));
            }
        }
        if issues.is_empty() && model.horizon > 0.0 {
            if let Err(e) = g.space_time(model) {
                core.push(e);
            }
        }
        g.volumes.validate("grids.volumes", issues);
        if !(g.solver.tolerance > 0.0) {
            issues.push(Issue::new("grids.solver.tolerance", "must be positive"));
        }
        issues.extend(core.into_iter().map(Issue::from));
    }

    fn saturation_issue(&self, issues: &mut Vec<Issue>) {
        let l = self.simulation.saturation_limit;
        if !(0.0..=1.0).contains(&l) {
            issues.push(Issue::new("simulation.saturation_limit", "must lie in [0, 1]"));
        }
    }

    fn simulation_issues(&self, issues: &mut Vec<Issue>) {
        let s = &self.simulation;
        if s.n_paths == 0 {
            issues.push(Issue::new("simulation.n_paths", "need at least one path"));
        }
        if s.n_steps == 0 {
            issues.push(Issue::new("simulation.n_steps", "need at least one step"));
        }
        self.saturation_issue(issues);
        match &s.strategy {
            Some(StrategyBlock::Hedge) if self.payoffs.h_l.is_none() => {
                issues.push(Issue::missing("payoffs.h_l"));
            }
            Some(StrategyBlock::Simple { jump_times, values }) => {
                if jump_times.len() != values.len() {
                    issues.push(Issue::new(
                        "simulation.strategy.values",
                        format!("expected {} entries, got {}", jump_times.len(), values.len()),
                    ));
                } else if jump_times.windows(2).any(|w| !(w[0] < w[1])) {
                    issues.push(Issue::new("simulation.strategy.jump_times", "must be strictly increasing"));
                }
                if jump_times.iter().chain(values).any(|v| !v.is_finite()) {
                    issues.push(Issue::new("simulation.strategy", "entries must be finite"));
                }
            }
            _ => {}
        }
    }

    fn output_issues(&self, issues: &mut Vec<Issue>) {
        let o = &self.output;
        if !(1..=17).contains(&o.precision) {
            issues.push(Issue::new("output.precision", "must lie in 1..=17"));
        }
        if o.x_stride == 0 || o.t_stride == 0 {
            issues.push(Issue::new("output.x_stride", "strides must be positive"));
        }
    }
}

/// Reads and validates a scenario for one subcommand.
pub fn parse_config(path: &Path, sub: Subcommand) -> Result<ScenarioConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let config = ScenarioConfig::from_toml(&text)?;
    config.validate(sub)?;
    Ok(config)
}

fn zero_driver() -> DriverSpec {
    DriverSpec::Zero
}

fn zero_coefficient() -> CoefficientSpec {
    CoefficientSpec::constant(0.0)
}

fn unit_coefficient() -> CoefficientSpec {
    CoefficientSpec::constant(1.0)
}

fn identity() -> PayoffSpec {
    PayoffSpec::affine(0.0, 1.0)
}

fn one() -> f64 {
    1.0
}

fn one_usize() -> usize {
    1
}

fn yes() -> bool {
    true
}

fn default_nx() -> usize {
    201
}

fn default_nt() -> usize {
    400
}

fn default_paths() -> usize {
    1000
}

fn default_steps() -> usize {
    250
}

fn default_seed() -> u64 {
    42
}

fn default_saturation() -> f64 {
    0.05
}

fn default_exported() -> usize {
    20
}

fn default_precision() -> usize {
    17
}

fn default_w_min() -> f64 {
    -4.0
}

fn default_w_max() -> f64 {
    4.0
}

fn default_w_count() -> usize {
    81
}

fn default_times() -> Vec<f64> {
    vec![0.0, 0.5, 0.9]
}

fn default_tilt_min() -> f64 {
    -10.0
}

fn default_tilt_max() -> f64 {
    10.0
}

fn default_tilt_count() -> usize {
    41
}

fn default_tail() -> f64 {
    40.0
}
