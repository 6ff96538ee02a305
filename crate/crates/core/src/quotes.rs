//! The Market's quoting rule `P_t(z, y) = p(x, t, -z) - p(x, t, y - z)` read
//! off an indifference family, and an audit of its axioms.

use std::io::Write;

use crate::error::{Error, Result};
use crate::export::{num, CsvWriter};
use crate::pde::{bilinear, volume_cell, SurfaceFamily};

/// Quoting state at one grid point `(x, t)`. Market inventory is passed per
/// call, so the context itself is stateless.
#[derive(Debug, Clone)]
pub struct QuoteContext<'a> {
    family: &'a SurfaceFamily,
    x: f64,
    t: f64,
    /// `p(x, t, y_k)` on the family's volume grid.
    profile: Vec<f64>,
}

impl<'a> QuoteContext<'a> {
    pub fn new(family: &'a SurfaceFamily, x: f64, t: f64) -> Result<Self> {
        let grid = family.grid();
        if !(t < grid.horizon) {
            return Err(Error::invalid(
                "t",
                format!("quotes need t < T = {}, got {t}", grid.horizon),
            ));
        }
        let (i, wx, n, wt) = grid.cell(x, t)?;
        let profile = family
            .surfaces()
            .iter()
            .map(|s| bilinear(s.values(), grid.nx, i, wx, n, wt))
            .collect();
        Ok(QuoteContext {
            family,
            x,
            t,
            profile,
        })
    }

    pub fn family(&self) -> &SurfaceFamily {
        self.family
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    /// `p(x, t, v)`, linear between volume nodes.
    fn p(&self, v: f64) -> Result<f64> {
        let ys = self.family.y_grid();
        let (k, w) = volume_cell(ys, v).ok_or(Error::QuoteUnavailable {
            volume: v,
            lo: ys[0],
            hi: ys[ys.len() - 1],
        })?;
        let lo = self.profile[k];
        Ok(if w == 0.0 {
            lo
        } else {
            lo + w * (self.profile[k + 1] - lo)
        })
    }
}

/// Selling price for `y` units when the Market holds inventory exposure `z`
/// (`z = -Y` of the large trader). Negative `y` is a purchase by the Market.
pub fn quote(ctx: &QuoteContext<'_>, z: f64, y: f64) -> Result<f64> {
    let before = ctx.p(-z)?;
    let after = ctx.p(y - z)?;
    Ok(before - after)
}

/// `P_t(z, y)` on a list of volumes.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceCurve {
    pub z: f64,
    pub y_grid: Vec<f64>,
    pub prices: Vec<f64>,
}

pub fn price_curve(ctx: &QuoteContext<'_>, z: f64, y_grid: &[f64]) -> Result<PriceCurve> {
    let prices = y_grid
        .iter()
        .map(|&y| quote(ctx, z, y))
        .collect::<Result<Vec<_>>>()?;
    Ok(PriceCurve {
        z,
        y_grid: y_grid.to_vec(),
        prices,
    })
}

impl PriceCurve {
    /// Smallest second difference along the curve, normalised so that on a
    /// uniform grid it is `P(y + h) - 2 P(y) + P(y - h)`.
    pub fn min_second_difference(&self) -> f64 {
        second_differences(&self.y_grid, &self.prices).fold(f64::INFINITY, f64::min)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        write_price_curves_csv(std::slice::from_ref(self), out)
    }
}

/// Curves as `z,y,price`.
pub fn write_price_curves_csv<W: Write>(curves: &[PriceCurve], out: W) -> std::io::Result<()> {
    let mut csv = CsvWriter::new(out, &["z", "y", "price"])?;
    for c in curves {
        for (y, p) in c.y_grid.iter().zip(&c.prices) {
            csv.row(&[num(c.z), num(*y), num(*p)])?;
        }
    }
    csv.finish()
}

fn second_differences<'a>(ys: &'a [f64], ps: &'a [f64]) -> impl Iterator<Item = f64> + 'a {
    (1..ys.len().saturating_sub(1)).map(move |i| {
        let (hm, hp) = (ys[i] - ys[i - 1], ys[i + 1] - ys[i]);
        ((ps[i + 1] - ps[i]) / hp - (ps[i] - ps[i - 1]) / hm) * 0.5 * (hm + hp)
    })
}

/// Worst cases of the quoting axioms over a `(z, y)` grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxiomReport {
    /// `max |P(z, y) + P(z - y, -y)|`.
    pub round_trip: f64,
    /// The same, divided by `1 + |P(z, y)|`.
    pub round_trip_relative: f64,
    /// Smallest normalised second difference in `y`.
    pub min_second_difference: f64,
    /// `max (-P(z, -y) - P(z, y))`; nonpositive when bid stays below ask.
    pub bid_ask_violation: f64,
    /// `max |P(z, 0)|`.
    pub zero_volume: f64,
    /// Pairs skipped because a volume left the family's grid.
    pub unavailable: usize,
}

/// Report-only audit; unreachable volumes are counted, not raised.
pub fn check_axioms(ctx: &QuoteContext<'_>, z_grid: &[f64], y_grid: &[f64]) -> AxiomReport {
    let mut r = AxiomReport {
        round_trip: 0.0,
        round_trip_relative: 0.0,
        min_second_difference: f64::INFINITY,
        bid_ask_violation: f64::NEG_INFINITY,
        zero_volume: 0.0,
        unavailable: 0,
    };
    for &z in z_grid {
        match quote(ctx, z, 0.0) {
            Ok(p0) => r.zero_volume = r.zero_volume.max(p0.abs()),
            Err(_) => r.unavailable += 1,
        }
        let mut curve = Vec::with_capacity(y_grid.len());
        for &y in y_grid {
            let Ok(p) = quote(ctx, z, y) else {
                r.unavailable += 1;
                curve.push(None);
                continue;
            };
            curve.push(Some(p));
            match quote(ctx, z - y, -y) {
                Ok(back) => {
                    let res = (p + back).abs();
                    r.round_trip = r.round_trip.max(res);
                    r.round_trip_relative = r.round_trip_relative.max(res / (1.0 + p.abs()));
                }
                Err(_) => r.unavailable += 1,
            }
            if let Ok(bid) = quote(ctx, z, -y) {
                r.bid_ask_violation = r.bid_ask_violation.max(-bid - p);
            }
        }
        // Convexity over the longest reachable runs of the curve.
        let mut start = 0;
        while start < curve.len() {
            let end = (start..curve.len())
                .find(|&k| curve[k].is_none())
                .unwrap_or(curve.len());
            if end - start >= 3 {
                let ps: Vec<f64> = curve[start..end].iter().map(|p| p.unwrap()).collect();
                for d in second_differences(&y_grid[start..end], &ps) {
                    r.min_second_difference = r.min_second_difference.min(d);
                }
            }
            start = end + 1;
        }
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::FactorModel;
    use crate::pde::SpaceTimeGrid;

    fn affine_family() -> SurfaceFamily {
        let m = FactorModel::brownian(0.0, 1.0, 1.0);
        let g = SpaceTimeGrid::new(-5.0, 5.0, 11, 4, 1.0).unwrap();
        let ys: Vec<f64> = (-20..=20).map(|k| k as f64 * 0.5).collect();
        SurfaceFamily::tabulate(&m, &g, ys, |x, t, y| {
            -y * (100.0 + 20.0 * x) - (1.0 - t) * 0.5 * y * y * 400.0 / 2.0
        })
        .unwrap()
    }

    #[test]
    fn spot_quotes() {
        let f = affine_family();
        let ctx = QuoteContext::new(&f, 0.0, 0.0).unwrap();
        assert_eq!(quote(&ctx, 0.0, 1.0).unwrap(), 200.0);
        assert_eq!(quote(&ctx, 0.0, -1.0).unwrap(), 0.0);
        assert_eq!(quote(&ctx, 3.7, 0.0).unwrap(), 0.0);
        let curve = price_curve(&ctx, 0.0, &[-1.0, 0.0, 1.0]).unwrap();
        assert_eq!(curve.prices, vec![0.0, 0.0, 200.0]);
    }

    #[test]
    fn unavailable_volume_is_reported() {
        let f = affine_family();
        let ctx = QuoteContext::new(&f, 0.0, 0.0).unwrap();
        let e = quote(&ctx, 0.0, 11.0).unwrap_err();
        assert!(matches!(e, Error::QuoteUnavailable { volume, .. } if volume == 11.0));
        assert!(QuoteContext::new(&f, 0.0, 1.0).is_err());
    }

    #[test]
    fn axioms_on_affine_family() {
        let f = affine_family();
        let ctx = QuoteContext::new(&f, 0.0, 0.0).unwrap();
        let zs: Vec<f64> = (-2..=2).map(|k| k as f64 * 0.5).collect();
        let ys: Vec<f64> = (-4..=4).map(|k| k as f64 * 0.5).collect();
        let r = check_axioms(&ctx, &zs, &ys);
        assert_eq!(r.unavailable, 0);
        assert_eq!(r.zero_volume, 0.0);
        assert_eq!(r.round_trip, 0.0);
        // gamma c² (T - t) dy² = 0.5 * 400 * 0.25.
        assert!((r.min_second_difference - 50.0).abs() < 1e-9);
        assert!(r.bid_ask_violation <= 0.0);
    }

    #[test]
    fn csv_layout() {
        let curve = PriceCurve {
            z: 0.0,
            y_grid: vec![1.0],
            prices: vec![200.0],
        };
        let mut buf = Vec::new();
        curve.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "z,y,price\n0.0000000000000000e0,1.0000000000000000e0,2.0000000000000000e2\n"
        );
    }
}
