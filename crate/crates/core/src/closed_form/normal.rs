use libm::erfc;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

#[inline]
pub fn norm_pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

#[inline]
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// `Phi(d) / phi(d)`. Below `d = -6` this is the Mills ratio of `-d`,
/// evaluated as a continued fraction so that nothing underflows.
pub fn cdf_over_pdf(d: f64) -> f64 {
    if d >= -6.0 {
        return norm_cdf(d) / norm_pdf(d);
    }
    // R(x) = 1 / (x + 1 / (x + 2 / (x + 3 / (x + ...)))), x = -d > 6.
    let x = -d;
    let mut tail = x;
    for k in (1..=200).rev() {
        tail = x + k as f64 / tail;
    }
    1.0 / tail
}
