//! Gauss rules and the log-space Gaussian integrals behind the
//! exponential-utility surface.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DMatrix, SymmetricEigen};

/// Gauss–Hermite rule for `∫ e^{-x²} f(x) dx`, with weights kept as logs so
/// that large node counts do not underflow.
#[derive(Debug, Clone)]
pub struct HermiteRule {
    pub nodes: Vec<f64>,
    pub log_weights: Vec<f64>,
}

impl HermiteRule {
    /// Nodes from the eigenvalues of the Jacobi matrix, polished by Newton
    /// steps on the orthonormal recurrence, which also gives the weights.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let jacobi = DMatrix::from_fn(n, n, |i, j| {
            if i + 1 == j || j + 1 == i {
                (i.max(j) as f64 / 2.0).sqrt()
            } else {
                0.0
            }
        });
        let mut guesses: Vec<f64> = SymmetricEigen::new(jacobi).eigenvalues.iter().copied().collect();
        guesses.sort_by(f64::total_cmp);
        let pim4 = std::f64::consts::PI.powf(-0.25);
        let nf = n as f64;
        let mut nodes = Vec::with_capacity(n);
        let mut log_weights = Vec::with_capacity(n);
        for mut z in guesses {
            let mut pp = 0.0;
            for _ in 0..8 {
                let (mut p1, mut p2) = (pim4, 0.0);
                for j in 1..=n {
                    let jf = j as f64;
                    let p3 = p2;
                    p2 = p1;
                    p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
                }
                pp = (2.0 * nf).sqrt() * p2;
                let step = p1 / pp;
                z -= step;
                if step.abs() <= 1e-15 * z.abs().max(1.0) {
                    break;
                }
            }
            nodes.push(z);
            log_weights.push(std::f64::consts::LN_2 - 2.0 * pp.abs().ln());
        }
        // Exact symmetry.
        for i in 0..n / 2 {
            let x = 0.5 * (nodes[n - 1 - i] - nodes[i]);
            let l = 0.5 * (log_weights[i] + log_weights[n - 1 - i]);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            log_weights[i] = l;
            log_weights[n - 1 - i] = l;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        HermiteRule { nodes, log_weights }
    }

    /// Shared rule for `n` nodes.
    pub fn cached(n: usize) -> Arc<HermiteRule> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<HermiteRule>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(Default::default);
        let mut map = cache.lock().unwrap_or_else(|e| e.into_inner());
        map.entry(n)
            .or_insert_with(|| Arc::new(HermiteRule::new(n)))
            .clone()
    }
}

/// 20-point Gauss–Legendre rule on `[-1, 1]`.
fn legendre20() -> &'static ([f64; 20], [f64; 20]) {
    static RULE: OnceLock<([f64; 20], [f64; 20])> = OnceLock::new();
    RULE.get_or_init(|| {
        let n = 20;
        let mut x = [0.0; 20];
        let mut w = [0.0; 20];
        for i in 0..n / 2 {
            let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut pp = 0.0;
            for _ in 0..100 {
                let (mut p1, mut p2) = (1.0, 0.0);
                for j in 1..=n {
                    let jf = j as f64;
                    let p3 = p2;
                    p2 = p1;
                    p1 = ((2.0 * jf - 1.0) * z * p2 - (jf - 1.0) * p3) / jf;
                }
                pp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
                let step = p1 / pp;
                z -= step;
                if step.abs() < 1e-16 {
                    break;
                }
            }
            x[i] = -z;
            x[n - 1 - i] = z;
            w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
            w[n - 1 - i] = w[i];
        }
        (x, w)
    })
}

/// `∫_a^b f` with one 20-point panel, for two integrands at once.
fn panel(f: &impl Fn(f64) -> (f64, f64), a: f64, b: f64) -> (f64, f64) {
    let (x, w) = legendre20();
    let (h, c) = (0.5 * (b - a), 0.5 * (b + a));
    let mut s = (0.0, 0.0);
    for k in 0..20 {
        let v = f(c + h * x[k]);
        s.0 += w[k] * v.0;
        s.1 += w[k] * v.1;
    }
    (h * s.0, h * s.1)
}

/// Adaptive Gauss–Legendre for a pair `(f0, f1)`. `noise` is the relative
/// accuracy of the integrand values themselves, below which refinement stops.
/// Returns `None` when the recursion depth is exhausted.
pub(crate) fn adaptive_pair(
    f: &impl Fn(f64) -> (f64, f64),
    a: f64,
    b: f64,
    abs_tol: f64,
    noise: f64,
) -> Option<(f64, f64)> {
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &impl Fn(f64) -> (f64, f64),
        a: f64,
        b: f64,
        whole: (f64, f64),
        tol: f64,
        noise: f64,
        depth: usize,
    ) -> Option<(f64, f64)> {
        let mid = 0.5 * (a + b);
        let left = panel(f, a, mid);
        let right = panel(f, mid, b);
        let split = (left.0 + right.0, left.1 + right.1);
        let err = (split.0 - whole.0).abs().max((split.1 - whole.1).abs());
        // Differences at the integrand's own noise level cannot shrink further.
        let floor = 64.0 * noise.max(f64::EPSILON) * (split.0.abs() + split.1.abs());
        if err <= tol.max(floor) {
            return Some(split);
        }
        if depth == 0 {
            return None;
        }
        let l = recurse(f, a, mid, left, 0.5 * tol, noise, depth - 1)?;
        let r = recurse(f, mid, b, right, 0.5 * tol, noise, depth - 1)?;
        Some((l.0 + r.0, l.1 + r.1))
    }
    recurse(f, a, b, panel(f, a, b), abs_tol, noise, 30)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermite_moments() {
        for n in [1, 2, 5, 201, 402] {
            let r = HermiteRule::cached(n);
            let w: Vec<f64> = r.log_weights.iter().map(|l| l.exp()).collect();
            let m0: f64 = w.iter().sum();
            let m2: f64 = w.iter().zip(&r.nodes).map(|(w, x)| w * x * x).sum();
            let sqrt_pi = std::f64::consts::PI.sqrt();
            assert!((m0 / sqrt_pi - 1.0).abs() < 1e-13, "{n}: {m0}");
            if n > 1 {
                assert!((m2 / sqrt_pi - 0.5).abs() < 1e-12, "{n}: {m2}");
            }
        }
    }

    #[test]
    fn legendre_integrates_polynomials() {
        let (x, w) = legendre20();
        let s: f64 = (0..20).map(|k| w[k] * x[k].powi(38)).sum();
        assert!((s - 2.0 / 39.0).abs() < 1e-14);
        let (a, _) = adaptive_pair(&|u: f64| ((-u * u).exp(), 0.0), -10.0, 10.0, 1e-15, 0.0).unwrap();
        assert!((a - std::f64::consts::PI.sqrt()).abs() < 1e-14);
    }
}
