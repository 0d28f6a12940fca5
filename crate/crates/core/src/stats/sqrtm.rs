use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_traits::Float;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Default relative threshold below which a negative eigenvalue is treated
/// as a genuine loss of positive semidefiniteness rather than rounding.
pub const DEFAULT_CLAMP: f64 = 1e-8;

/// Largest absolute entry.
pub(crate) fn max_abs<T: Scalar>(a: &DMatrix<T>) -> T {
    a.iter()
        .fold(T::zero(), |acc, &v| Float::max(acc, Float::abs(v)))
}

/// Fails when `a` is not square or not symmetric within the scalar's
/// relative tolerance.
pub(crate) fn check_symmetric<T: Scalar>(a: &DMatrix<T>) -> Result<()> {
    if !a.is_square() {
        return Err(Error::validation(format!(
            "expected a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let scale = max_abs(a);
    let tol = T::symmetry_tolerance() * Float::max(scale, T::min_positive_value());
    let n = a.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let d = Float::abs(a[(i, j)] - a[(j, i)]);
            if d > tol {
                return Err(Error::validation(format!(
                    "matrix not symmetric: |a[{i},{j}] - a[{j},{i}]| = {d} exceeds {tol}"
                )));
            }
        }
    }
    Ok(())
}

/// `(a + aᵀ) / 2`.
pub(crate) fn symmetrize<T: Scalar>(a: &DMatrix<T>) -> DMatrix<T> {
    let half = T::lit(0.5);
    (a + a.transpose()) * half
}

/// Eigen-decomposition of a symmetric PSD matrix with small negative
/// eigenvalues clamped to zero.
pub(crate) struct ClampedEigen<T: Scalar> {
    pub values: DVector<T>,
    pub vectors: DMatrix<T>,
}

pub(crate) fn clamped_eigen<T: Scalar>(a: &DMatrix<T>, clamp_rel: T) -> Result<ClampedEigen<T>> {
    let eig = SymmetricEigen::new(a.clone());
    let largest = eig
        .eigenvalues
        .iter()
        .fold(T::zero(), |acc, &v| Float::max(acc, Float::abs(v)));
    let threshold = -clamp_rel * largest;
    let mut values = eig.eigenvalues;
    for v in values.iter_mut() {
        if !Float::is_finite(*v) {
            return Err(Error::NumericalFailure(
                "eigendecomposition produced a non-finite eigenvalue".into(),
            ));
        }
        if *v < threshold {
            return Err(Error::NotPsd {
                eigenvalue: v.to_f64_lossy(),
                threshold: threshold.to_f64_lossy(),
            });
        }
        if *v < T::zero() {
            *v = T::zero();
        }
    }
    Ok(ClampedEigen {
        values,
        vectors: eig.eigenvectors,
    })
}

/// Principal square root of a symmetric positive semidefinite matrix.
///
/// Uses a symmetric eigendecomposition; eigenvalues in
/// `[-1e-8·λ_max, 0)` are clamped to zero before the square root.
pub fn sqrtm_psd<T: Scalar>(a: &DMatrix<T>) -> Result<DMatrix<T>> {
    sqrtm_psd_with(a, T::lit(DEFAULT_CLAMP))
}

/// [`sqrtm_psd`] with an explicit relative clamp threshold.
pub fn sqrtm_psd_with<T: Scalar>(a: &DMatrix<T>, clamp_rel: T) -> Result<DMatrix<T>> {
    check_symmetric(a)?;
    let eig = clamped_eigen(&symmetrize(a), clamp_rel)?;
    let roots = eig.values.map(Float::sqrt);
    let scaled = DMatrix::from_fn(eig.vectors.nrows(), eig.vectors.ncols(), |r, c| {
        eig.vectors[(r, c)] * roots[c]
    });
    Ok(symmetrize(&(scaled * eig.vectors.transpose())))
}
