#![allow(dead_code)]

/// `E[f(m + sd N)]` by composite Simpson over `±12 sd`.
pub fn gauss_expect(f: impl Fn(f64) -> f64, m: f64, sd: f64) -> f64 {
    let n = 24_000;
    let (a, b) = (-12.0, 12.0);
    let h = (b - a) / n as f64;
    let mut total = 0.0;
    for i in 0..=n {
        let u = a + i as f64 * h;
        let w = if i == 0 || i == n {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        let density = (-0.5 * u * u).exp() / (2.0 * std::f64::consts::PI).sqrt();
        total += w * density * f(m + sd * u);
    }
    total * h / 3.0
}

/// `(a - y)(b + c x) - (T - t) gamma (a - y)² c² / 2`.
pub fn affine_closed_form(a: f64, b: f64, c: f64, gamma: f64, horizon: f64, x: f64, t: f64, y: f64) -> f64 {
    let q = a - y;
    q * (b + c * x) - (horizon - t) * gamma * q * q * c * c / 2.0
}

pub fn phi(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Standard normal CDF by Simpson on `[-12, x]`.
pub fn big_phi(x: f64) -> f64 {
    if x < -12.0 {
        return 0.0;
    }
    let n = 20_000;
    let h = (x + 12.0) / n as f64;
    let mut total = 0.0;
    for i in 0..=n {
        let u = -12.0 + i as f64 * h;
        let w = if i == 0 || i == n {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        total += w * phi(u);
    }
    total * h / 3.0
}
