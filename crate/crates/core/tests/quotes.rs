mod common;

use common::gauss_expect;
use impact_hedge::quotes::{check_axioms, price_curve, quote, QuoteContext};
use impact_hedge::{build_family, DriverSpec, Error, FactorModel, PayoffSpec, SolverOptions, SpaceTimeGrid, SurfaceFamily};
use proptest::prelude::*;
use std::sync::OnceLock;

fn affine_family() -> &'static SurfaceFamily {
    static FAMILY: OnceLock<SurfaceFamily> = OnceLock::new();
    FAMILY.get_or_init(|| {
        let model = FactorModel::brownian(0.0, 1.0, 1.0);
        let grid = SpaceTimeGrid::new(-5.0, 5.0, 401, 400, 1.0).unwrap();
        build_family(
            &model,
            &DriverSpec::quadratic(0.5),
            &PayoffSpec::zero(),
            &PayoffSpec::affine(100.0, 20.0),
            &[-2.0, -1.0, 0.0, 1.0, 2.0],
            &grid,
            &SolverOptions::default(),
        )
        .unwrap()
    })
}

fn call_family() -> &'static SurfaceFamily {
    static FAMILY: OnceLock<SurfaceFamily> = OnceLock::new();
    FAMILY.get_or_init(|| {
        let model = FactorModel::brownian(0.0, 1.0, 1.0);
        let grid = SpaceTimeGrid::new(-6.0, 6.0, 241, 400, 1.0).unwrap();
        let ys: Vec<f64> = (-16..=16).map(|k| k as f64 * 0.5).collect();
        build_family(
            &model,
            &DriverSpec::quadratic(0.5),
            &PayoffSpec::zero(),
            &PayoffSpec::Call { strike: 0.0 },
            &ys,
            &grid,
            &SolverOptions::default(),
        )
        .unwrap()
    })
}

fn lattice(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
}

#[test]
fn affine_spot_quotes() {
    let ctx = QuoteContext::new(affine_family(), 0.0, 0.0).unwrap();
    assert!((quote(&ctx, 0.0, 1.0).unwrap() - 200.0).abs() <= 1e-9);
    assert!((-quote(&ctx, 0.0, -1.0).unwrap()).abs() <= 1e-9);
    let curve = price_curve(&ctx, 0.0, &[-1.0, 0.0, 1.0]).unwrap();
    assert_eq!(curve.prices[1], 0.0);
    let mid = 0.5 * (curve.prices[2] - curve.prices[0]);
    assert!((mid - 100.0).abs() < 1e-9, "{mid}");
}

#[test]
fn zero_volume_is_free() {
    let ctx = QuoteContext::new(call_family(), 0.4, 0.3).unwrap();
    for z in lattice(-8.0, 8.0, 17) {
        assert_eq!(quote(&ctx, z, 0.0).unwrap(), 0.0);
    }
    let curve = price_curve(&ctx, 1.0, &[0.0]).unwrap();
    assert_eq!(curve.prices, vec![0.0]);
}

#[test]
fn affine_axioms_on_a_lattice() {
    let ctx = QuoteContext::new(affine_family(), 0.0, 0.0).unwrap();
    let g = lattice(-1.0, 1.0, 21);
    let r = check_axioms(&ctx, &g, &g);
    assert_eq!(r.unavailable, 0);
    assert!(r.round_trip_relative <= 1e-12);
    assert_eq!(r.zero_volume, 0.0);
    assert!(r.min_second_difference >= -1e-8);
    assert!(r.bid_ask_violation <= 1e-8);
}

#[test]
fn affine_curvature_matches_the_leading_coefficient() {
    // P is quadratic in y with leading coefficient gamma c² (T - t) / 2.
    let ctx = QuoteContext::new(affine_family(), 0.5, 0.5).unwrap();
    let curve = price_curve(&ctx, 0.0, &[-1.0, 0.0, 1.0, 2.0]).unwrap();
    let expected = 0.5 * 400.0 * 0.5;
    assert!((curve.min_second_difference() - expected).abs() < 1e-6);
}

#[test]
fn risk_neutral_curve_is_linear_in_volume() {
    let mu = 0.3;
    let model = FactorModel::constant(0.0, mu, 1.0, 1.0);
    let grid = SpaceTimeGrid::new(-6.0, 6.0, 241, 200, 1.0).unwrap();
    let s = PayoffSpec::affine(100.0, 20.0);
    let ys: Vec<f64> = (-3..=3).map(f64::from).collect();
    let fam = build_family(&model, &DriverSpec::Zero, &PayoffSpec::zero(), &s, &ys, &grid, &SolverOptions::default())
        .unwrap();
    let (x, t) = (0.5, 0.25);
    let ctx = QuoteContext::new(&fam, x, t).unwrap();
    let expected = gauss_expect(|u| 100.0 + 20.0 * u, x + mu * (1.0 - t), (1.0f64 - t).sqrt());
    let g = lattice(-1.5, 1.5, 13);
    for &z in &g {
        let curve = price_curve(&ctx, z, &g).unwrap();
        for (y, p) in curve.y_grid.iter().zip(&curve.prices) {
            assert!((p - y * expected).abs() <= 1e-6 * (1.0 + p.abs()), "z={z} y={y}: {p}");
        }
        assert!(curve.min_second_difference().abs() < 1e-8);
    }
}

#[test]
fn unreachable_volumes_are_reported() {
    let ctx = QuoteContext::new(affine_family(), 0.0, 0.0).unwrap();
    match quote(&ctx, 0.0, 3.0) {
        Err(Error::QuoteUnavailable { volume, .. }) => assert_eq!(volume, 3.0),
        other => panic!("{other:?}"),
    }
    assert!(QuoteContext::new(affine_family(), 0.0, 1.0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn round_trip_and_bid_ask(x in -3.0f64..3.0, t in 0.0f64..0.99, z in -4.0f64..4.0, y in -4.0f64..4.0) {
        let ctx = QuoteContext::new(call_family(), x, t).unwrap();
        let p = quote(&ctx, z, y).unwrap();
        let back = quote(&ctx, z - y, -y).unwrap();
        prop_assert!((p + back).abs() <= 1e-12 * (1.0 + p.abs()));
        let bid = -quote(&ctx, z, -y).unwrap();
        prop_assert!(bid <= p + 1e-8);
    }

    #[test]
    fn curves_are_convex(x in -3.0f64..3.0, t in 0.0f64..0.99, z in -3.0f64..3.0) {
        let ctx = QuoteContext::new(call_family(), x, t).unwrap();
        let curve = price_curve(&ctx, z, &lattice(-4.0, 4.0, 33)).unwrap();
        prop_assert!(curve.min_second_difference() >= -1e-8);
    }
}
