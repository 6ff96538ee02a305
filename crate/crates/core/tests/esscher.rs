use impact_hedge::esscher::{
    esscher_expect, esscher_expect_with, monotonicity_scan, monotonicity_scan_with,
    tail_limit_check, tail_limit_check_with, tilted_weights, MeasureSpec,
};
use impact_hedge::{Error, PayoffSpec};
use proptest::prelude::*;

fn identity() -> PayoffSpec {
    PayoffSpec::affine(0.0, 1.0)
}

fn normal() -> MeasureSpec {
    MeasureSpec::standard_normal(20.0, 4001)
}

fn truncated_normal() -> MeasureSpec {
    let c = (2.0 * std::f64::consts::PI).sqrt().recip();
    MeasureSpec::from_density(-2.0, 3.0, 2001, |x| c * (-0.5 * x * x).exp())
}

fn logistic(y: f64) -> f64 {
    1.0 / (1.0 + (-y).exp())
}

fn y_grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step).round() as usize;
    (0..=n).map(|k| lo + k as f64 * step).collect()
}

#[test]
fn no_tilt_is_the_plain_mean() {
    let atoms = MeasureSpec::Atoms {
        points: vec![-1.0, 0.5, 2.0],
        weights: vec![1.0, 2.0, 3.0],
    };
    let v = esscher_expect(&atoms, &identity(), 0.0).unwrap();
    assert!((v - (-1.0 + 1.0 + 6.0) / 6.0).abs() < 1e-15);
    let u = esscher_expect(&MeasureSpec::uniform(0.0, 1.0, 101), &identity(), 0.0).unwrap();
    assert!((u - 0.5).abs() < 1e-14);
}

#[test]
fn two_atom_tilt_is_logistic() {
    let m = MeasureSpec::two_point(0.0, 1.0);
    for y in y_grid(-10.0, 10.0, 0.25) {
        let v = esscher_expect(&m, &identity(), y).unwrap();
        assert!((v - logistic(y)).abs() < 1e-14);
    }
}

#[test]
fn tilted_normal_moments() {
    for y in y_grid(-4.0, 4.0, 0.5) {
        let mean = esscher_expect(&normal(), &identity(), y).unwrap();
        assert!((mean - y).abs() < 1e-10, "y={y}: {mean}");
        let (cube, _) = esscher_expect_with(&normal(), |x| x * x * x, y).unwrap();
        let exact = y * y * y + 3.0 * y;
        assert!((cube - exact).abs() < 1e-9 * (1.0 + exact.abs()), "y={y}: {cube}");
    }
}

#[test]
fn tilted_weights_are_normalized() {
    let measures = [MeasureSpec::two_point(0.0, 1.0), MeasureSpec::uniform(0.0, 1.0, 1001), truncated_normal(), normal()];
    for m in &measures {
        for y in [-7.0, -1.0, 0.0, 0.3, 6.0] {
            let (_, probs, log_norm) = tilted_weights(m, y).unwrap();
            let total: f64 = probs.iter().sum();
            assert!((total - 1.0).abs() <= 1e-14, "{total}");
            assert!(log_norm.is_finite());
        }
    }
    // Large tilts stay finite in log space.
    let (_, probs, log_norm) = tilted_weights(&MeasureSpec::two_point(0.0, 1.0), 5000.0).unwrap();
    assert!((probs.iter().sum::<f64>() - 1.0).abs() <= 1e-14);
    assert!((log_norm - (5000.0 + 0.5f64.ln())).abs() < 1e-9);
}

#[test]
fn constant_phi_is_flat() {
    let r = monotonicity_scan(&truncated_normal(), &PayoffSpec::affine(2.5, 0.0), &y_grid(-5.0, 5.0, 0.5)).unwrap();
    assert!(r.monotone);
    assert!(r.values.iter().all(|v| (v - 2.5).abs() < 1e-12));
}

#[test]
fn two_atom_scan_strictly_increases() {
    let r = monotonicity_scan(&MeasureSpec::two_point(0.0, 1.0), &identity(), &y_grid(-10.0, 10.0, 1.0)).unwrap();
    assert!(r.monotone && r.screen_failure.is_none());
    assert!(r.values.windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn monotonicity_battery() {
    let phis: [(&str, fn(f64) -> f64); 4] = [
        ("identity", |x| x),
        ("step", |x| if x >= 0.3 { 1.0 } else { 0.0 }),
        ("cube", |x| x * x * x),
        ("clipped", |x| x.clamp(-0.5, 0.5)),
    ];
    let measures = [
        ("two_atom", MeasureSpec::two_point(0.0, 1.0)),
        ("uniform", MeasureSpec::uniform(0.0, 1.0, 1001)),
        ("truncated_normal", truncated_normal()),
        ("normal", normal()),
    ];
    let ys = y_grid(-8.0, 8.0, 0.25);
    for (mname, m) in &measures {
        for (pname, phi) in &phis {
            let r = monotonicity_scan_with(m, phi, &ys).unwrap();
            assert!(r.screen_failure.is_none(), "{mname}/{pname}");
            assert!(r.monotone, "{mname}/{pname}: {:?}", r.values);
        }
    }
}

#[test]
fn scan_stops_at_the_first_refused_tilt() {
    let m = MeasureSpec::standard_normal(8.0, 801);
    let r = monotonicity_scan(&m, &identity(), &y_grid(0.0, 10.0, 1.0)).unwrap();
    assert!(r.screen_failure.is_some());
    assert!(r.y_grid.len() < 11 && !r.y_grid.is_empty());
    assert!(matches!(
        esscher_expect(&m, &identity(), 10.0),
        Err(Error::DivergentTilt { .. })
    ));
}

#[test]
fn two_atom_tails() {
    let r = tail_limit_check(&MeasureSpec::two_point(0.0, 1.0), &identity(), 40.0).unwrap();
    let tail = r.tail.unwrap();
    assert!(tail.lower_gap.unwrap() <= 1e-12);
    assert!(tail.upper_gap.unwrap() <= 1e-12);
}

#[test]
fn tilted_uniform_mean() {
    let m = MeasureSpec::uniform(0.0, 1.0, 200_001);
    let exact = |y: f64| 1.0 / (1.0 - (-y).exp()) - 1.0 / y;
    for y in [-100.0, -10.0, -1.0, 2.0, 30.0] {
        let v = esscher_expect(&m, &identity(), y).unwrap();
        assert!((v - exact(y)).abs() < 1e-6, "y={y}: {v} vs {}", exact(y));
    }
    let tail = tail_limit_check(&m, &identity(), 100.0).unwrap().tail.unwrap();
    assert!(tail.mean_lower <= 0.01, "{}", tail.mean_lower);
    assert!(tail.lower_gap.unwrap() <= 0.01);
}

#[test]
fn log_phi_diverges_at_the_lower_boundary() {
    let m = MeasureSpec::uniform(1e-8, 1.0, 400_001);
    let (v, _) = esscher_expect_with(&m, f64::ln, -100.0).unwrap();
    assert!(v < -4.0, "{v}");
    let tail = tail_limit_check_with(&m, f64::ln, 80.0).unwrap().tail.unwrap();
    assert!(tail.diverging_lower, "{:?}", tail.trend_lower);
}

#[test]
fn cube_diverges_on_both_sides_of_an_unbounded_support() {
    let m = MeasureSpec::standard_normal(30.0, 12_001);
    let r = tail_limit_check_with(&m, |x| x * x * x, 10.0).unwrap();
    let tail = r.tail.unwrap();
    assert!(tail.lower_gap.is_none() && tail.upper_gap.is_none());
    assert!((tail.mean_upper - 10.0).abs() < 1e-8, "{}", tail.mean_upper);
    assert!(tail.diverging_lower && tail.diverging_upper);
    assert_eq!(tail.trend_y, vec![10.0, 20.0]);
}

#[test]
fn underflowed_density_tails_are_refused() {
    // exp(-x²/2) is zero in double precision past |x| ≈ 38.6.
    let m = MeasureSpec::standard_normal(120.0, 48_001);
    assert!(esscher_expect(&m, &identity(), 20.0).is_ok());
    assert!(matches!(
        esscher_expect(&m, &identity(), 40.0),
        Err(Error::DivergentTilt { .. })
    ));
}

#[test]
fn report_csv_layout() {
    let r = monotonicity_scan(&MeasureSpec::two_point(0.0, 1.0), &identity(), &[-1.0, 0.0, 1.0]).unwrap();
    let mut out = Vec::new();
    r.write_csv(&mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    assert!(text.starts_with("y,value,normalizer_log\n"));
    assert_eq!(text.lines().count(), 4);
}

#[test]
fn measure_validation() {
    let bad = MeasureSpec::Atoms {
        points: vec![1.0, 0.0],
        weights: vec![1.0, -1.0],
    };
    assert!(bad.check().is_err());
}

proptest! {
    #[test]
    fn symmetric_measures_give_odd_tilts(y in -5.0f64..5.0, k in 0usize..3) {
        let phi = |x: f64| match k {
            0 => x,
            1 => x * x * x,
            _ => x.tanh(),
        };
        let m = normal();
        let (a, _) = esscher_expect_with(&m, phi, y).unwrap();
        let (b, _) = esscher_expect_with(&m, phi, -y).unwrap();
        prop_assert!((a + b).abs() <= 1e-12 * (1.0 + a.abs()), "{a} vs {b}");
    }

    #[test]
    fn tilted_atom_means_increase(points in proptest::collection::btree_set(-50i32..50, 2..8), y in -3.0f64..3.0) {
        let points: Vec<f64> = points.into_iter().map(|p| f64::from(p) / 10.0).collect();
        let weights = vec![1.0; points.len()];
        let m = MeasureSpec::Atoms { points, weights };
        let a = esscher_expect(&m, &identity(), y).unwrap();
        let b = esscher_expect(&m, &identity(), y + 0.1).unwrap();
        prop_assert!(b >= a - 1e-12);
    }
}
