//! Fixtures shared by the kernel benchmarks.

use impact_hedge::{
    build_family, DriverSpec, FactorModel, PayoffSpec, SolverOptions, SpaceTimeGrid,
    SurfaceFamily,
};

pub fn brownian() -> FactorModel {
    FactorModel::brownian(0.0, 1.0, 1.0)
}

/// Affine security `100 + 20 x` priced by a quadratic Market with gamma 0.5.
pub fn affine_family(nx: usize, nt: usize) -> SurfaceFamily {
    let grid = SpaceTimeGrid::new(-5.0, 5.0, nx, nt, 1.0).expect("grid");
    let ys: Vec<f64> = (-2..=2).map(f64::from).collect();
    build_family(
        &brownian(),
        &DriverSpec::quadratic(0.5),
        &PayoffSpec::zero(),
        &PayoffSpec::affine(100.0, 20.0),
        &ys,
        &grid,
        &SolverOptions::default(),
    )
    .expect("family")
}

/// The short put block on `S = 100 + W_T`, smoothed with lambda 10, gamma 0.1.
pub fn short_put() -> PayoffSpec {
    PayoffSpec::LogCoshPut {
        lambda: 10.0,
        gamma: 0.1,
        strike: 100.0,
    }
    .scaled(-1.0)
    .after(PayoffSpec::affine(100.0, 1.0))
}
