use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::grid::{volume_cell, SpaceTimeGrid};
use super::solver::{bilinear, solve_compiled, PriceSurface, SolverOptions};
use crate::error::{Error, Result};
use crate::model::{check_increasing, DriverSpec, FactorModel, PayoffSpec};

/// Bisection steps used to refine a bracketing volume cell.
const BISECTION_STEPS: usize = 60;

/// Indifference surfaces `p(x, t, y)` for every volume on a grid, with the
/// matching field `Z(x, t, y) = -sigma(x, t) d/dx p(x, t, y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceFamily {
    y_grid: Vec<f64>,
    surfaces: Vec<PriceSurface>,
    z_values: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Saturation {
    None,
    /// Target below every attainable `Z`; clamped to the lowest volume.
    Low,
    /// Target above every attainable `Z`; clamped to the highest volume.
    High,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InversionResult {
    pub y: f64,
    pub saturated: Saturation,
}

impl SurfaceFamily {
    /// Assemble a family from already computed surfaces. The Z-field is
    /// obtained by differencing each surface.
    pub fn from_surfaces(
        model: &FactorModel,
        y_grid: Vec<f64>,
        surfaces: Vec<PriceSurface>,
    ) -> Result<Self> {
        let mut issues = Vec::new();
        check_increasing("y_grid", &y_grid, &mut issues);
        if let Some(e) = issues.into_iter().next() {
            return Err(e);
        }
        if surfaces.len() != y_grid.len() {
            return Err(Error::Dimension {
                expected: y_grid.len(),
                got: surfaces.len(),
            });
        }
        let grid = surfaces[0].grid();
        if surfaces.iter().any(|s| s.grid() != grid) {
            return Err(Error::invalid("surfaces", "all surfaces must share one grid"));
        }
        let z_values = surfaces.par_iter().map(|s| s.z_field(model)).collect();
        Ok(SurfaceFamily {
            y_grid,
            surfaces,
            z_values,
        })
    }

    /// Family tabulated from a closed form `p(x, t, y)`.
    pub fn tabulate(
        model: &FactorModel,
        grid: &SpaceTimeGrid,
        y_grid: Vec<f64>,
        p: impl Fn(f64, f64, f64) -> f64 + Sync,
    ) -> Result<Self> {
        grid.check()?;
        let surfaces = y_grid
            .iter()
            .map(|&y| PriceSurface::tabulate(grid, PayoffSpec::zero(), |x, t| p(x, t, y)))
            .collect();
        Self::from_surfaces(model, y_grid, surfaces)
    }

    pub fn y_grid(&self) -> &[f64] {
        &self.y_grid
    }

    pub fn grid(&self) -> &SpaceTimeGrid {
        self.surfaces[0].grid()
    }

    pub fn surfaces(&self) -> &[PriceSurface] {
        &self.surfaces
    }

    /// `Z` on every node of slice `k`, laid out like the surface values.
    pub fn z_slice(&self, k: usize) -> &[f64] {
        &self.z_values[k]
    }

    pub fn volume_range(&self) -> (f64, f64) {
        (self.y_grid[0], self.y_grid[self.y_grid.len() - 1])
    }

    fn in_volume(&self, y: f64) -> Result<(usize, f64)> {
        volume_cell(&self.y_grid, y).ok_or_else(|| {
            let (lo, hi) = self.volume_range();
            Error::OutOfDomain {
                axis: "y",
                value: y,
                lo,
                hi,
            }
        })
    }

    /// `p(x, t, y)`: bilinear in `(x, t)`, linear in the volume.
    pub fn p_at(&self, x: f64, t: f64, y: f64) -> Result<f64> {
        let cell = self.grid().cell(x, t)?;
        let (k, w) = self.in_volume(y)?;
        Ok(self.mix(cell, k, w, |s| s.values()))
    }

    /// `Z(x, t, y)` with the same interpolation as [`Self::p_at`].
    pub fn z_at(&self, x: f64, t: f64, y: f64) -> Result<f64> {
        let cell = self.grid().cell(x, t)?;
        let (k, w) = self.in_volume(y)?;
        Ok(self.mix_z(cell, k, w))
    }

    fn mix<'a>(
        &'a self,
        (i, wx, n, wt): (usize, f64, usize, f64),
        k: usize,
        w: f64,
        values: impl Fn(&'a PriceSurface) -> &'a [f64],
    ) -> f64 {
        let nx = self.grid().nx;
        let lo = bilinear(values(&self.surfaces[k]), nx, i, wx, n, wt);
        if w == 0.0 {
            return lo;
        }
        let hi = bilinear(values(&self.surfaces[k + 1]), nx, i, wx, n, wt);
        lo + w * (hi - lo)
    }

    fn mix_z(&self, (i, wx, n, wt): (usize, f64, usize, f64), k: usize, w: f64) -> f64 {
        let nx = self.grid().nx;
        let lo = bilinear(&self.z_values[k], nx, i, wx, n, wt);
        if w == 0.0 {
            return lo;
        }
        let hi = bilinear(&self.z_values[k + 1], nx, i, wx, n, wt);
        lo + w * (hi - lo)
    }

    /// `Z(x, t, y_k)` at every volume node.
    pub fn z_profile(&self, x: f64, t: f64) -> Result<Vec<f64>> {
        let (i, wx, n, wt) = self.grid().cell(x, t)?;
        let nx = self.grid().nx;
        Ok(self
            .z_values
            .iter()
            .map(|z| bilinear(z, nx, i, wx, n, wt))
            .collect())
    }

    /// Smallest first difference of `Z` along the volume axis over all nodes;
    /// nonnegative when `y -> Z(x, t, y)` is nondecreasing everywhere.
    pub fn z_monotonicity_defect(&self) -> f64 {
        let len = self.z_values[0].len();
        let mut worst = f64::INFINITY;
        for k in 1..self.z_values.len() {
            let (a, b) = (&self.z_values[k - 1], &self.z_values[k]);
            for j in 0..len {
                worst = worst.min(b[j] - a[j]);
            }
        }
        worst
    }

    /// Range of `Z` over the volume grid at `(x, t)`.
    pub fn z_range(&self, x: f64, t: f64) -> Result<(f64, f64)> {
        let z = self.z_profile(x, t)?;
        Ok(z.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(*v), hi.max(*v))
        }))
    }

    /// Left-most volume whose `Z` reaches `target`; see [`invert_z`].
    pub fn invert_z(&self, x: f64, t: f64, target: f64) -> Result<InversionResult> {
        let cell = self.grid().cell(x, t)?;
        let nx = self.grid().nx;
        let (i, wx, n, wt) = cell;
        let z_node = |k: usize| bilinear(&self.z_values[k], nx, i, wx, n, wt);

        let first = z_node(0);
        if first >= target {
            let saturated = if first > target {
                Saturation::Low
            } else {
                Saturation::None
            };
            // An exact hit on the lowest node is attained, not saturated.
            return Ok(InversionResult {
                y: self.y_grid[0],
                saturated,
            });
        }
        let mut below = first;
        for k in 1..self.y_grid.len() {
            let above = z_node(k);
            if above >= target {
                let (y0, y1) = (self.y_grid[k - 1], self.y_grid[k]);
                // Z is linear in y inside the cell; bisect for the inf crossing.
                let z_of = |y: f64| below + (y - y0) / (y1 - y0) * (above - below);
                let (mut lo, mut hi) = (y0, y1);
                for _ in 0..BISECTION_STEPS {
                    let mid = 0.5 * (lo + hi);
                    if z_of(mid) >= target {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                return Ok(InversionResult {
                    y: hi,
                    saturated: Saturation::None,
                });
            }
            below = above;
        }
        Ok(InversionResult {
            y: self.y_grid[self.y_grid.len() - 1],
            saturated: Saturation::High,
        })
    }
}

/// Solve one pricing surface per volume with terminal `h_M(x) - y s(x)`.
pub fn build_family(
    model: &FactorModel,
    driver: &DriverSpec,
    h_m: &PayoffSpec,
    s: &PayoffSpec,
    y_grid: &[f64],
    grid: &SpaceTimeGrid,
    options: &SolverOptions,
) -> Result<SurfaceFamily> {
    let mut issues = Vec::new();
    check_increasing("y_grid", y_grid, &mut issues);
    if let Some(e) = issues.into_iter().next() {
        return Err(e);
    }
    let compiled = driver.compile()?;
    if compiled.is_linear() {
        return linear_family(model, &compiled, h_m, s, y_grid, grid, options);
    }
    let surfaces = y_grid
        .par_iter()
        .map(|&y| {
            let terminal = h_m.clone().plus(s.clone().scaled(-y));
            solve_compiled(model, &compiled, terminal, grid, options).map_err(|e| Error::Slice {
                y,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    SurfaceFamily::from_surfaces(model, y_grid.to_vec(), surfaces)
}

/// With a linear driver the solution is linear in the terminal data, so
/// `p(., y) = p_{h_M} - y p_s` from two solves.
fn linear_family(
    model: &FactorModel,
    driver: &crate::model::Driver,
    h_m: &PayoffSpec,
    s: &PayoffSpec,
    y_grid: &[f64],
    grid: &SpaceTimeGrid,
    options: &SolverOptions,
) -> Result<SurfaceFamily> {
    let tag = |y: f64| move |e: Error| Error::Slice { y, source: Box::new(e) };
    // Failures are reported against the first volume they spoil.
    let first_traded = y_grid.iter().copied().find(|y| *y != 0.0).unwrap_or(1.0);
    let base = solve_compiled(model, driver, h_m.clone(), grid, options).map_err(tag(y_grid[0]))?;
    let unit = solve_compiled(model, driver, s.clone(), grid, options).map_err(tag(first_traded))?;
    let surfaces = y_grid
        .iter()
        .map(|&y| {
            let terminal = h_m.clone().plus(s.clone().scaled(-y));
            let values = base
                .values()
                .iter()
                .zip(unit.values())
                .map(|(b, u)| b - y * u)
                .collect();
            PriceSurface::from_values(grid, values, terminal)
        })
        .collect();
    SurfaceFamily::from_surfaces(model, y_grid.to_vec(), surfaces)
}

/// `Z⁻(x, t, z) = inf{y : Z(x, t, y) >= z}` on the family's volume grid.
///
/// Targets outside the attainable range are clamped to the nearest end of
/// the grid and flagged rather than rejected.
pub fn invert_z(family: &SurfaceFamily, x: f64, t: f64, target_z: f64) -> Result<InversionResult> {
    family.invert_z(x, t, target_z)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> SpaceTimeGrid {
        SpaceTimeGrid::new(-5.0, 5.0, 101, 400, 1.0).unwrap()
    }

    #[test]
    fn zero_family() {
        let m = FactorModel::brownian(0.0, 1.0, 1.0);
        let f = build_family(
            &m,
            &DriverSpec::quadratic(1.0),
            &PayoffSpec::zero(),
            &PayoffSpec::affine(0.0, 1.0),
            &[0.0],
            &grid(),
            &Default::default(),
        )
        .unwrap();
        assert!(f.surfaces()[0].values().iter().all(|v| *v == 0.0));
        assert!(f.z_slice(0).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn risk_neutral_z_equals_volume() {
        let m = FactorModel::brownian(0.0, 1.0, 1.0);
        let f = build_family(
            &m,
            &DriverSpec::Zero,
            &PayoffSpec::zero(),
            &PayoffSpec::affine(0.0, 1.0),
            &[-1.0, 0.0, 1.0],
            &grid(),
            &Default::default(),
        )
        .unwrap();
        for (k, y) in [-1.0, 0.0, 1.0].iter().enumerate() {
            assert!(f.z_slice(k).iter().all(|z| (z - y).abs() < 1e-10));
        }
    }

    #[test]
    fn affine_family_inverts_to_closed_form() {
        let m = FactorModel::brownian(0.0, 1.0, 1.0);
        let ys: Vec<f64> = (-3..=3).map(f64::from).collect();
        let f = build_family(
            &m,
            &DriverSpec::quadratic(0.5),
            &PayoffSpec::zero(),
            &PayoffSpec::affine(100.0, 20.0),
            &ys,
            &grid(),
            &Default::default(),
        )
        .unwrap();
        let z = f.z_at(0.3, 0.2, 1.5).unwrap();
        assert!((z - 30.0).abs() < 1e-8, "{z}");
        let inv = f.invert_z(0.3, 0.2, 40.0).unwrap();
        assert_eq!(inv.saturated, Saturation::None);
        assert!((inv.y - 2.0).abs() < 1e-9, "{inv:?}");
        let zero = f.invert_z(-1.0, 0.7, 0.0).unwrap();
        assert!(zero.y.abs() < 1e-9);
        assert_eq!(f.invert_z(0.0, 0.0, -1e3).unwrap().saturated, Saturation::Low);
        let high = f.invert_z(0.0, 0.0, 1e3).unwrap();
        assert_eq!((high.y, high.saturated), (3.0, Saturation::High));
        assert!(f.z_monotonicity_defect() > 0.0);
    }

    #[test]
    fn inversion_takes_the_leftmost_crossing() {
        // Z has a flat stretch equal to the target: inf semantics pick its left end.
        let m = FactorModel::brownian(0.0, 1.0, 1.0);
        let f = SurfaceFamily::tabulate(&m, &grid(), vec![0.0, 1.0, 2.0, 3.0], |x, _, y| {
            let level = match y as i32 {
                0 => 0.0,
                1 | 2 => 1.0,
                _ => 2.0,
            };
            -level * x
        })
        .unwrap();
        let inv = f.invert_z(0.0, 0.5, 1.0).unwrap();
        assert!((inv.y - 1.0).abs() < 1e-12, "{inv:?}");
    }

    #[test]
    fn slice_errors_carry_the_volume() {
        let m = FactorModel::brownian(0.0, 1.0, 1.0);
        let bad = PayoffSpec::Table {
            xs: vec![-1.0, 1.0],
            values: vec![0.0, 1.0],
        };
        let e = build_family(&m, &DriverSpec::Zero, &PayoffSpec::zero(), &bad, &[0.5], &grid(), &Default::default())
            .unwrap_err();
        assert!(matches!(e, Error::Slice { y, .. } if y == 0.5));
    }
}
