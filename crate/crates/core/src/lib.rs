//! Evaluation toolkit for object removers.
//!
//! Removed-object images are compared against a set of real images that
//! contain no object of the removed class: a Fréchet distance between
//! Gaussian fits of their features and a linear-SVM unseparability score.
//! Pixel metrics against ground truth, mask dilation variants, a
//! subsample stability study and a synthetic paired-scene generator are
//! included for comparison and testing.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix it to `f64`, the default precision.

pub mod dataset;
mod error;
pub mod evaluation;
mod feature_matrix;
pub mod features;
pub mod paired;
mod scalar;
pub mod stats;
pub mod svm;
pub mod synth;

pub use error::{Error, Result};
pub use feature_matrix::FeatureMatrix;
pub use scalar::Scalar;

pub type Features = FeatureMatrix<f64>;
pub type Features32 = FeatureMatrix<f32>;
pub type Stats = stats::GaussianStats<f64>;
pub type Stats32 = stats::GaussianStats<f32>;
pub type DecisionFunction = svm::LinearDecisionFunction<f64>;
pub type Comparison = evaluation::ComparisonSet<f64>;
