//! Monte Carlo paths of the factor, simple strategies and their P&L.

mod hedge;
mod pnl;
mod strategy;

pub use hedge::{hedge_plan, replication_test, HedgePlan, HedgeStrategy, ReplicationReport};
pub use pnl::{
    pnl_bsde, pnl_direct, pnl_direct_logged, stieltjes_sum, write_trades_csv, PathFailure,
    PnLReport, TradeRecord,
};
pub use strategy::{SimpleStrategy, Strategy};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::FactorModel;

/// Euler–Maruyama paths with their Brownian increments, path-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PathEnsemble {
    times: Vec<f64>,
    n_paths: usize,
    factor: Vec<f64>,
    dw: Vec<f64>,
    seed: u64,
}

impl PathEnsemble {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    pub fn n_steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// `F_{t_0}, ..., F_{t_N}` of one path.
    pub fn factor(&self, path: usize) -> &[f64] {
        let m = self.times.len();
        &self.factor[path * m..(path + 1) * m]
    }

    /// `W_{t_{j+1}} - W_{t_j}` of one path.
    pub fn dw(&self, path: usize) -> &[f64] {
        let n = self.n_steps();
        &self.dw[path * n..(path + 1) * n]
    }

    /// Same Brownian paths on every `k`-th time step: increments are summed in
    /// blocks and the scheme is re-run on the coarse grid.
    pub fn coarsen(&self, model: &FactorModel, k: usize) -> Result<PathEnsemble> {
        let n = self.n_steps();
        if k == 0 || n % k != 0 {
            return Err(Error::invalid(
                "coarsen",
                format!("factor {k} does not divide {n} steps"),
            ));
        }
        let coarse = n / k;
        let dw: Vec<f64> = self
            .dw
            .chunks(k)
            .map(|block| block.iter().sum())
            .collect();
        let times = time_grid(model.horizon, coarse);
        let factor = euler(model, &times, &dw, self.n_paths);
        Ok(PathEnsemble {
            times,
            n_paths: self.n_paths,
            factor,
            dw,
            seed: self.seed,
        })
    }
}

fn time_grid(horizon: f64, n_steps: usize) -> Vec<f64> {
    let dt = horizon / n_steps as f64;
    (0..=n_steps)
        .map(|j| if j == n_steps { horizon } else { j as f64 * dt })
        .collect()
}

fn euler(model: &FactorModel, times: &[f64], dw: &[f64], n_paths: usize) -> Vec<f64> {
    let n = times.len() - 1;
    let mut factor = vec![0.0; n_paths * (n + 1)];
    factor
        .par_chunks_mut(n + 1)
        .zip(dw.par_chunks(n))
        .for_each(|(f, w)| {
            f[0] = model.f0;
            for j in 0..n {
                let (x, t) = (f[j], times[j]);
                let dt = times[j + 1] - t;
                f[j + 1] = x + model.mu(x, t) * dt + model.sigma(x, t) * w[j];
            }
        });
    factor
}

/// Simulates `n_paths` paths on `n_steps` uniform steps. Path `i` draws from
/// ChaCha8 seeded with `seed` on stream `i`, so results do not depend on the
/// thread count.
pub fn simulate_paths(
    model: &FactorModel,
    n_steps: usize,
    n_paths: usize,
    seed: u64,
) -> Result<PathEnsemble> {
    model.check()?;
    if n_steps == 0 {
        return Err(Error::invalid("n_steps", "need at least one step"));
    }
    if n_paths == 0 {
        return Err(Error::invalid("n_paths", "need at least one path"));
    }
    let times = time_grid(model.horizon, n_steps);
    let mut dw = vec![0.0; n_paths * n_steps];
    dw.par_chunks_mut(n_steps).enumerate().for_each(|(path, w)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(path as u64);
        for (j, slot) in w.iter_mut().enumerate() {
            let dt = times[j + 1] - times[j];
            let z: f64 = StandardNormal.sample(&mut rng);
            *slot = dt.sqrt() * z;
        }
    });
    let factor = euler(model, &times, &dw, n_paths);
    Ok(PathEnsemble {
        times,
        n_paths,
        factor,
        dw,
        seed,
    })
}
