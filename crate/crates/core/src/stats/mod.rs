//! Gaussian summary statistics of feature sets and the Fréchet distance
//! between them.

mod sqrtm;

use nalgebra::{DMatrix, DVector};
use num_traits::Float;

use crate::error::{Error, Result};
use crate::feature_matrix::FeatureMatrix;
use crate::scalar::Scalar;

pub use sqrtm::{sqrtm_psd, sqrtm_psd_with, DEFAULT_CLAMP};

use sqrtm::{check_symmetric, clamped_eigen, symmetrize};

/// Relative magnitude of the diagonal jitter added on the retry path.
pub const JITTER_SCALE: f64 = 1e-6;

/// Results below this value are reported as an internal error instead of
/// being clamped to zero.
const NEGATIVE_LIMIT: f64 = -1e-6;

/// Mean vector and covariance matrix of a feature set.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianStats<T: Scalar> {
    mean: DVector<T>,
    cov: DMatrix<T>,
    n_samples: usize,
}

impl<T: Scalar> GaussianStats<T> {
    /// Wraps precomputed moments, checking shape, symmetry and the sample
    /// count.
    pub fn new(mean: DVector<T>, cov: DMatrix<T>, n_samples: usize) -> Result<Self> {
        if n_samples < 2 {
            return Err(Error::DegenerateInput(format!(
                "covariance needs at least 2 samples, got {n_samples}"
            )));
        }
        if cov.nrows() != mean.len() {
            return Err(Error::validation(format!(
                "mean has dimension {} but covariance is {}x{}",
                mean.len(),
                cov.nrows(),
                cov.ncols()
            )));
        }
        check_symmetric(&cov)?;
        Ok(Self {
            mean,
            cov,
            n_samples,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<T> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<T> {
        &self.cov
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }
}

/// Per-column mean and unbiased (N−1) sample covariance.
pub fn compute_gaussian_stats<T: Scalar>(features: &FeatureMatrix<T>) -> Result<GaussianStats<T>> {
    let n = features.len();
    let d = features.dim();
    if n < 2 {
        return Err(Error::DegenerateInput(format!(
            "covariance undefined for {n} sample(s)"
        )));
    }
    // Row-major N×D is column-major D×N: each column is one sample.
    let mut centered = DMatrix::from_column_slice(d, n, features.data());
    let mut mean = DVector::<T>::zeros(d);
    for col in centered.column_iter() {
        mean += col;
    }
    mean /= T::from_count(n);
    for mut col in centered.column_iter_mut() {
        col -= &mean;
    }
    let cov = &centered * centered.transpose() / T::from_count(n - 1);
    Ok(GaussianStats {
        mean,
        cov: symmetrize(&cov),
        n_samples: n,
    })
}

/// Fréchet distance together with how it was obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrechetDistance<T> {
    pub value: T,
    /// `‖μ_p − μ_q‖²`.
    pub mean_term: T,
    /// `tr(Σ_p + Σ_q − 2(Σ_p Σ_q)^{1/2})`, before clamping.
    pub trace_term: T,
    /// Diagonal jitter that was added to both covariances, if any.
    pub jitter: Option<T>,
}

/// `‖μ_p − μ_q‖² + tr(Σ_p + Σ_q − 2(Σ_p Σ_q)^{1/2})`.
pub fn frechet_distance<T: Scalar>(p: &GaussianStats<T>, q: &GaussianStats<T>) -> Result<T> {
    frechet_distance_detailed(p, q).map(|f| f.value)
}

/// [`frechet_distance`] with the individual terms and jitter diagnostics.
///
/// The cross term is evaluated as `tr sqrt(Σ_p^{1/2} Σ_q Σ_p^{1/2})`, which
/// has the same eigenvalues as `Σ_p Σ_q` but stays symmetric. If that
/// product is indefinite beyond rounding, both covariances get
/// `1e-6·mean(diag)·I` added and the computation is retried once.
pub fn frechet_distance_detailed<T: Scalar>(
    p: &GaussianStats<T>,
    q: &GaussianStats<T>,
) -> Result<FrechetDistance<T>> {
    if p.dim() != q.dim() {
        return Err(Error::validation(format!(
            "dimension mismatch: {} vs {}",
            p.dim(),
            q.dim()
        )));
    }
    let diff = &p.mean - &q.mean;
    let mean_term = diff.dot(&diff);

    let (trace_term, jitter) = match cross_trace(&p.cov, &q.cov) {
        Ok(cross) => (p.cov.trace() + q.cov.trace() - T::lit(2.0) * cross, None),
        Err(Error::NotPsd { .. }) => {
            let d = T::from_count(p.dim());
            let mean_diag = (p.cov.trace() + q.cov.trace()) / (T::lit(2.0) * d);
            let eps = T::lit(JITTER_SCALE) * mean_diag;
            let shift = DMatrix::<T>::identity(p.dim(), p.dim()) * eps;
            let pc = &p.cov + &shift;
            let qc = &q.cov + &shift;
            let cross = cross_trace(&pc, &qc).map_err(|e| {
                Error::NumericalFailure(format!(
                    "covariance product indefinite after jitter {eps}: {e}"
                ))
            })?;
            (pc.trace() + qc.trace() - T::lit(2.0) * cross, Some(eps))
        }
        Err(e) => return Err(e),
    };

    let raw = mean_term + trace_term;
    if raw < T::lit(NEGATIVE_LIMIT) {
        return Err(Error::NumericalFailure(format!(
            "Fréchet distance evaluated to {raw}"
        )));
    }
    Ok(FrechetDistance {
        value: Float::max(raw, T::zero()),
        mean_term,
        trace_term,
        jitter,
    })
}

/// `tr sqrt(A^{1/2} B A^{1/2})`.
fn cross_trace<T: Scalar>(a: &DMatrix<T>, b: &DMatrix<T>) -> Result<T> {
    let clamp = T::lit(DEFAULT_CLAMP);
    let root_a = sqrtm_psd_with(a, clamp)?;
    let product = symmetrize(&(&root_a * b * &root_a));
    let eig = clamped_eigen(&product, clamp)?;
    Ok(eig
        .values
        .iter()
        .fold(T::zero(), |acc, &v| acc + Float::sqrt(v)))
}
