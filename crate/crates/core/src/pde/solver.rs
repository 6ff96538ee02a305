//! Backward-in-time solver for
//! `p_t + mu p_x + sigma² p_xx / 2 = g(-sigma p_x, t)`, `p(x, T) = terminal(x)`.
//!
//! Diffusion and drift are implicit (backward Euler, central differences).
//! The driver is explicit, evaluated on the previous time level; optional
//! fixed-point sweeps re-evaluate it on the new level until it stops moving.
//! The explicit driver is stable while `dt |g'(z)|² sigma² <= 2 sigma²`,
//! roughly. Both ends use the zero-curvature condition `p_xx = 0`.

use serde::{Deserialize, Serialize};

use super::grid::SpaceTimeGrid;
use crate::error::{Error, Result};
use crate::model::{Driver, DriverSpec, FactorModel, PayoffSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Re-evaluate the driver on the new level until convergence.
    pub fixed_point: bool,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            fixed_point: false,
            tolerance: 1e-10,
            max_iterations: 20,
        }
    }
}

/// Solution values on a [`SpaceTimeGrid`], stored per time level.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSurface {
    grid: SpaceTimeGrid,
    values: Vec<f64>,
    terminal: PayoffSpec,
}

impl PriceSurface {
    /// Surface from a closure evaluated on every node.
    pub fn tabulate(
        grid: &SpaceTimeGrid,
        terminal: PayoffSpec,
        f: impl Fn(f64, f64) -> f64,
    ) -> Self {
        let mut values = Vec::with_capacity(grid.nx * (grid.nt + 1));
        for n in 0..=grid.nt {
            let t = grid.t(n);
            values.extend((0..grid.nx).map(|i| f(grid.x(i), t)));
        }
        PriceSurface {
            grid: grid.clone(),
            values,
            terminal,
        }
    }

    pub(crate) fn from_values(grid: &SpaceTimeGrid, values: Vec<f64>, terminal: PayoffSpec) -> Self {
        debug_assert_eq!(values.len(), grid.nx * (grid.nt + 1));
        PriceSurface {
            grid: grid.clone(),
            values,
            terminal,
        }
    }

    pub fn grid(&self) -> &SpaceTimeGrid {
        &self.grid
    }

    pub fn terminal(&self) -> &PayoffSpec {
        &self.terminal
    }

    #[inline]
    pub fn value(&self, i: usize, n: usize) -> f64 {
        self.values[n * self.grid.nx + i]
    }

    /// Values on time level `n`.
    pub fn level(&self, n: usize) -> &[f64] {
        let nx = self.grid.nx;
        &self.values[n * nx..(n + 1) * nx]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Bilinear interpolation in `(x, t)`.
    pub fn value_at(&self, x: f64, t: f64) -> Result<f64> {
        let (i, wx, n, wt) = self.grid.cell(x, t)?;
        Ok(bilinear(&self.values, self.grid.nx, i, wx, n, wt))
    }

    /// `-sigma(x, t) d/dx` of the surface on every node: central differences
    /// inside, second-order one-sided differences at both ends.
    pub fn z_field(&self, model: &FactorModel) -> Vec<f64> {
        let SpaceTimeGrid { nx, nt, .. } = self.grid;
        let mut out = vec![0.0; self.values.len()];
        for n in 0..=nt {
            let t = self.grid.t(n);
            let row = self.level(n);
            let dst = &mut out[n * nx..(n + 1) * nx];
            space_derivative(row, self.grid.dx(), dst);
            for (i, z) in dst.iter_mut().enumerate() {
                *z *= -model.sigma(self.grid.x(i), t);
            }
        }
        out
    }
}

#[inline]
pub(crate) fn bilinear(values: &[f64], nx: usize, i: usize, wx: f64, n: usize, wt: f64) -> f64 {
    let v00 = values[n * nx + i];
    let v10 = values[n * nx + i + 1];
    let v01 = values[(n + 1) * nx + i];
    let v11 = values[(n + 1) * nx + i + 1];
    let lo = v00 + wx * (v10 - v00);
    let hi = v01 + wx * (v11 - v01);
    lo + wt * (hi - lo)
}

pub(crate) fn space_derivative(row: &[f64], dx: f64, out: &mut [f64]) {
    let nx = row.len();
    let inv2 = 0.5 / dx;
    out[0] = (-3.0 * row[0] + 4.0 * row[1] - row[2]) * inv2;
    out[nx - 1] = (3.0 * row[nx - 1] - 4.0 * row[nx - 2] + row[nx - 3]) * inv2;
    for i in 1..nx - 1 {
        out[i] = (row[i + 1] - row[i - 1]) * inv2;
    }
}

/// Solve the semilinear pricing equation with the given terminal payoff.
pub fn solve_semilinear(
    model: &FactorModel,
    driver: &DriverSpec,
    terminal: &PayoffSpec,
    grid: &SpaceTimeGrid,
    options: &SolverOptions,
) -> Result<PriceSurface> {
    let driver = driver.compile()?;
    solve_compiled(model, &driver, terminal.clone(), grid, options)
}

pub(crate) fn solve_compiled(
    model: &FactorModel,
    driver: &Driver,
    terminal: PayoffSpec,
    grid: &SpaceTimeGrid,
    options: &SolverOptions,
) -> Result<PriceSurface> {
    grid.check()?;
    if driver.dimension() != 1 {
        return Err(Error::Dimension {
            expected: 1,
            got: driver.dimension(),
        });
    }
    let SpaceTimeGrid { nx, nt, .. } = *grid;
    let (dx, dt) = (grid.dx(), grid.dt());
    let xs = grid.xs();

    let mut values = vec![0.0; nx * (nt + 1)];
    {
        let last = &mut values[nt * nx..];
        for (i, v) in last.iter_mut().enumerate() {
            *v = terminal.eval(xs[i])?;
        }
        if let Some(i) = last.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                x_index: i,
                time_index: nt,
            });
        }
    }

    // Linear drivers are exact after a single linearised solve.
    let nonlinear = !matches!(driver, Driver::Zero);
    let mut work = Workspace::new(nx);
    let mut sigma = vec![0.0; nx];
    let mut mu = vec![0.0; nx];
    let mut previous = vec![0.0; nx];

    for n in (0..nt).rev() {
        let t = grid.t(n);
        for i in 0..nx {
            mu[i] = model.mu(xs[i], t);
            sigma[i] = model.sigma(xs[i], t);
            if !(sigma[i] > 0.0 && sigma[i].is_finite() && mu[i].is_finite()) {
                return Err(Error::invalid(
                    "model.vol",
                    format!(
                        "volatility must be positive and coefficients finite on the grid; \
                         sigma({}, {t}) = {}, mu = {}",
                        xs[i], sigma[i], mu[i]
                    ),
                ));
            }
        }

        let (done, rest) = values.split_at_mut((n + 1) * nx);
        let next = &rest[..nx];
        let current = &mut done[n * nx..];

        work.assemble(&mu, &sigma, dx, dt);
        // Predictor: driver from the previous level.
        work.driver_rhs(driver, next, next, &sigma, dx, dt, t);
        work.solve(current);

        if nonlinear && options.fixed_point {
            let mut converged = false;
            let mut residual = f64::INFINITY;
            for _ in 0..options.max_iterations {
                previous.copy_from_slice(current);
                work.driver_rhs(driver, next, &previous, &sigma, dx, dt, t);
                work.solve(current);
                let scale = 1.0 + current.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
                residual = current
                    .iter()
                    .zip(&previous)
                    .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
                    / scale;
                if !residual.is_finite() {
                    break;
                }
                if residual <= options.tolerance {
                    converged = true;
                    break;
                }
            }
            if !converged {
                if let Some(i) = current.iter().position(|v| !v.is_finite()) {
                    return Err(Error::NonFinite {
                        x_index: i,
                        time_index: n,
                    });
                }
                return Err(Error::NoConvergence {
                    time_index: n,
                    iterations: options.max_iterations,
                    residual,
                });
            }
        }
        if let Some(i) = current.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                x_index: i,
                time_index: n,
            });
        }
    }

    Ok(PriceSurface {
        grid: grid.clone(),
        values,
        terminal,
    })
}

/// Tridiagonal system for the interior unknowns `1..nx-1`, with the boundary
/// values eliminated through `p_0 = 2 p_1 - p_2` and its mirror.
struct Workspace {
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
    rhs: Vec<f64>,
    scratch: Vec<f64>,
    grad: Vec<f64>,
}

impl Workspace {
    fn new(nx: usize) -> Self {
        let m = nx - 2;
        Workspace {
            lower: vec![0.0; m],
            diag: vec![0.0; m],
            upper: vec![0.0; m],
            rhs: vec![0.0; nx],
            scratch: vec![0.0; m],
            grad: vec![0.0; nx],
        }
    }

    fn assemble(&mut self, mu: &[f64], sigma: &[f64], dx: f64, dt: f64) {
        let nx = mu.len();
        let m = nx - 2;
        for k in 0..m {
            let i = k + 1;
            let diff = 0.5 * sigma[i] * sigma[i] / (dx * dx);
            let adv = mu[i] / (2.0 * dx);
            self.lower[k] = -dt * (diff - adv);
            self.diag[k] = 1.0 + 2.0 * dt * diff;
            self.upper[k] = -dt * (diff + adv);
        }
        // p_0 = 2 p_1 - p_2 folded into the first interior row.
        let a = self.lower[0];
        self.diag[0] += 2.0 * a;
        if m > 1 {
            self.upper[0] -= a;
        }
        // p_{nx-1} = 2 p_{nx-2} - p_{nx-3} folded into the last one.
        let c = self.upper[m - 1];
        self.diag[m - 1] += 2.0 * c;
        if m > 1 {
            self.lower[m - 1] -= c;
        }
        self.lower[0] = 0.0;
        self.upper[m - 1] = 0.0;
    }

    /// `rhs = next - dt g(-sigma d/dx state, t)`.
    #[allow(clippy::too_many_arguments)]
    fn driver_rhs(
        &mut self,
        driver: &Driver,
        next: &[f64],
        state: &[f64],
        sigma: &[f64],
        dx: f64,
        dt: f64,
        t: f64,
    ) {
        if matches!(driver, Driver::Zero) {
            self.rhs.copy_from_slice(next);
            return;
        }
        space_derivative(state, dx, &mut self.grad);
        for i in 0..next.len() {
            let z = -sigma[i] * self.grad[i];
            self.rhs[i] = next[i] - dt * driver.eval_scalar(z, t);
        }
    }

    /// Thomas algorithm on the interior, then linear extrapolation to the ends.
    fn solve(&mut self, out: &mut [f64]) {
        let nx = out.len();
        let m = nx - 2;
        let d = &self.rhs[1..nx - 1];
        let cp = &mut self.scratch;
        let mut beta = self.diag[0];
        out[1] = d[0] / beta;
        for k in 1..m {
            cp[k] = self.upper[k - 1] / beta;
            beta = self.diag[k] - self.lower[k] * cp[k];
            out[k + 1] = (d[k] - self.lower[k] * out[k]) / beta;
        }
        for k in (0..m - 1).rev() {
            out[k + 1] -= cp[k + 1] * out[k + 2];
        }
        out[0] = 2.0 * out[1] - out[2];
        out[nx - 1] = 2.0 * out[nx - 2] - out[nx - 3];
    }
}
