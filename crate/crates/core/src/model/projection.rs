//! Euclidean projections used by the good-deal driver.
//!
//! Both maps go through the normal equations `A Aᵀ w = r`, solved by
//! Cholesky. `A` has one row per traded asset, so the system is tiny.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative pivot below which `A Aᵀ` is treated as singular.
const RANK_TOLERANCE: f64 = 1e-12;

fn normal_solve(a: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    if rhs.len() != a.nrows() {
        return Err(Error::Dimension {
            expected: a.nrows(),
            got: rhs.len(),
        });
    }
    let gram = a * a.transpose();
    let scale = gram.diagonal().max().max(f64::MIN_POSITIVE);
    let chol = gram.cholesky().ok_or(Error::RankDeficient { pivot: 0.0 })?;
    let pivot = chol.l_dirty().diagonal().map(|d| d * d).min() / scale;
    if !(pivot > RANK_TOLERANCE) {
        return Err(Error::RankDeficient { pivot });
    }
    Ok(chol.solve(rhs))
}

/// Minimum-norm solution of `A x = b`, i.e. the projection of the origin onto
/// the affine set `{x : A x = b}`.
pub fn project_min_norm(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let w = normal_solve(a, b)?;
    Ok(a.transpose() * w)
}

/// Orthogonal projection of `z` onto `Kernel(A)`: `z - Aᵀ (A Aᵀ)⁻¹ A z`.
pub fn project_kernel(a: &DMatrix<f64>, z: &DVector<f64>) -> Result<DVector<f64>> {
    if z.len() != a.ncols() {
        return Err(Error::Dimension {
            expected: a.ncols(),
            got: z.len(),
        });
    }
    let w = normal_solve(a, &(a * z))?;
    Ok(z - a.transpose() * w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn row(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(1, v.len(), v)
    }

    #[test]
    fn min_norm_examples() {
        let x = project_min_norm(&row(&[1.0, 0.0]), &DVector::from_vec(vec![3.0])).unwrap();
        assert_eq!(x.as_slice(), &[3.0, 0.0]);

        let x = project_min_norm(&row(&[0.2, 0.0]), &DVector::from_vec(vec![-0.05])).unwrap();
        assert!((x[0] + 0.25).abs() < 1e-15 && x[1] == 0.0);

        let h = std::f64::consts::FRAC_1_SQRT_2;
        let x = project_min_norm(&row(&[h, h]), &DVector::from_vec(vec![1.0])).unwrap();
        assert!((x[0] - h).abs() < 1e-15 && (x[1] - h).abs() < 1e-15);
    }

    #[test]
    fn kernel_examples() {
        let p = project_kernel(&row(&[1.0, 0.0]), &DVector::from_vec(vec![2.0, 5.0])).unwrap();
        assert_eq!(p.as_slice(), &[0.0, 5.0]);
        let p = project_kernel(&row(&[0.2, 0.0]), &DVector::from_vec(vec![1.0, 1.0])).unwrap();
        assert!(p[0].abs() < 1e-15 && (p[1] - 1.0).abs() < 1e-15);
        let p = project_kernel(&row(&[0.3, -0.7]), &DVector::zeros(2)).unwrap();
        assert_eq!(p.as_slice(), &[0.0, 0.0]);
    }

    #[test]
    fn rank_deficiency_is_reported() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(matches!(
            project_min_norm(&a, &DVector::from_vec(vec![1.0, 2.0])),
            Err(Error::RankDeficient { .. })
        ));
        assert!(matches!(
            project_kernel(&row(&[0.0, 0.0]), &DVector::from_vec(vec![1.0, 1.0])),
            Err(Error::RankDeficient { .. })
        ));
    }

    #[test]
    fn dimension_mismatch() {
        assert!(matches!(
            project_kernel(&row(&[1.0, 0.0]), &DVector::from_vec(vec![1.0])),
            Err(Error::Dimension { expected: 2, got: 1 })
        ));
    }

    proptest! {
        #[test]
        fn kernel_projection_is_idempotent_and_orthogonal(
            a in proptest::collection::vec(-2.0f64..2.0, 6),
            z in proptest::collection::vec(-5.0f64..5.0, 3),
        ) {
            let a = DMatrix::from_row_slice(2, 3, &a);
            let z = DVector::from_vec(z);
            prop_assume!((&a * a.transpose()).determinant().abs() > 1e-3);
            let p = project_kernel(&a, &z).unwrap();
            let pp = project_kernel(&a, &p).unwrap();
            prop_assert!((&pp - &p).amax() <= 1e-12 * (1.0 + z.amax()));
            prop_assert!((&a * &p).amax() <= 1e-12 * (1.0 + z.amax()));
        }

        #[test]
        fn min_norm_solves_and_is_orthogonal_to_kernel(
            a in proptest::collection::vec(-2.0f64..2.0, 6),
            b in proptest::collection::vec(-3.0f64..3.0, 2),
        ) {
            let a = DMatrix::from_row_slice(2, 3, &a);
            prop_assume!((&a * a.transpose()).determinant().abs() > 1e-3);
            let b = DVector::from_vec(b);
            let x = project_min_norm(&a, &b).unwrap();
            prop_assert!((&a * &x - &b).amax() <= 1e-9);
            let k = project_kernel(&a, &x).unwrap();
            prop_assert!(k.amax() <= 1e-9);
        }
    }
}
