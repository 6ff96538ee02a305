//! Finite-difference solution of the semilinear pricing equation, the
//! indifference family over volumes and its Z-field inversion.

mod family;
mod grid;
mod solver;

use std::io::Write;

pub use family::{build_family, invert_z, InversionResult, Saturation, SurfaceFamily};
pub use grid::SpaceTimeGrid;
pub(crate) use grid::volume_cell;
pub(crate) use solver::bilinear;
pub use solver::{solve_semilinear, PriceSurface, SolverOptions};

use crate::error::Result;
use crate::export::{num, CsvWriter};
use crate::model::{DriverSpec, FactorModel, PayoffSpec};

/// Hedge value `v` with terminal `h_M(x) + h_L(s(x))`; `h_l_of_s` is the
/// composed payoff.
pub fn solve_hedge_value(
    model: &FactorModel,
    driver: &DriverSpec,
    h_m: &PayoffSpec,
    h_l_of_s: &PayoffSpec,
    grid: &SpaceTimeGrid,
    options: &SolverOptions,
) -> Result<PriceSurface> {
    let terminal = h_m.clone().plus(h_l_of_s.clone());
    solve_semilinear(model, driver, &terminal, grid, options)
}

/// Write the family as `x,t,y,p,z`, row-major over `(y, t, x)`.
pub fn write_surface_csv<W: Write>(family: &SurfaceFamily, out: W) -> std::io::Result<()> {
    let mut csv = CsvWriter::new(out, &["x", "t", "y", "p", "z"])?;
    let grid = family.grid();
    let (xs, ts) = (grid.xs(), grid.ts());
    for (k, &y) in family.y_grid().iter().enumerate() {
        let p = family.surfaces()[k].values();
        let z = family.z_slice(k);
        for (n, &t) in ts.iter().enumerate() {
            for (i, &x) in xs.iter().enumerate() {
                let j = n * grid.nx + i;
                csv.row(&[num(x), num(t), num(y), num(p[j]), num(z[j])])?;
            }
        }
    }
    csv.finish()
}
