//! Linear SVM on activation features and the discriminative scores built on
//! its decision values (U-IDS, P-IDS).
//!
//! Training minimizes the L2-regularized hinge loss
//! `λ/2·‖w‖² + 1/n·Σ max(0, 1 − yᵢ(w·zᵢ + b))` with `λ = 1/(c·n)` on
//! standardized features `zᵢ`, using epoch-wise stochastic subgradient steps
//! of size `1/(λt)`. The bias is handled as the weight of a constant unit
//! feature. Sample order within each epoch is a seeded shuffle, so a fixed
//! seed reproduces the weights bit for bit.

use std::collections::{HashMap, HashSet};

use num_traits::Float;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feature_matrix::FeatureMatrix;
use crate::scalar::Scalar;

/// Training knobs. The defaults are recorded in every report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmConfig {
    pub c: f64,
    pub max_epochs: usize,
    /// Stop once the relative change of the epoch-end objective drops
    /// below this value.
    pub tol: f64,
    pub seed: u64,
}

impl Default for SvmConfig {
    fn default() -> Self {
        Self {
            c: 1.0,
            max_epochs: 200,
            tol: 1e-6,
            seed: 0,
        }
    }
}

impl SvmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::validation(format!("svm c must be positive, got {}", self.c)));
        }
        if self.max_epochs == 0 {
            return Err(Error::validation("svm max_epochs must be at least 1"));
        }
        if !(self.tol > 0.0) {
            return Err(Error::validation(format!("svm tol must be positive, got {}", self.tol)));
        }
        Ok(())
    }
}

/// Per-dimension affine map applied before the linear score.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer<T> {
    pub mean: Vec<T>,
    /// Strictly positive; zero-variance dimensions get 1.
    pub scale: Vec<T>,
}

impl<T: Scalar> Standardizer<T> {
    fn fit(sets: &[&FeatureMatrix<T>]) -> Self {
        let d = sets[0].dim();
        let n: usize = sets.iter().map(|s| s.len()).sum();
        let mut mean = vec![T::zero(); d];
        for row in sets.iter().flat_map(|s| s.rows()) {
            for (m, &v) in mean.iter_mut().zip(row) {
                *m = *m + v;
            }
        }
        let nf = T::from_count(n);
        mean.iter_mut().for_each(|m| *m = *m / nf);
        let mut var = vec![T::zero(); d];
        for row in sets.iter().flat_map(|s| s.rows()) {
            for ((acc, &v), &m) in var.iter_mut().zip(row).zip(&mean) {
                let dev = v - m;
                *acc = *acc + dev * dev;
            }
        }
        let denom = T::from_count(n.saturating_sub(1).max(1));
        let scale = var
            .into_iter()
            .map(|s| {
                let sd = Float::sqrt(s / denom);
                if sd > T::zero() && Float::is_finite(sd) {
                    sd
                } else {
                    T::one()
                }
            })
            .collect();
        Self { mean, scale }
    }

    fn apply(&self, row: &[T], out: &mut [T]) {
        for (((o, &v), &m), &s) in out.iter_mut().zip(row).zip(&self.mean).zip(&self.scale) {
            *o = (v - m) / s;
        }
    }
}

/// Trained linear decision function `f(x) = w·((x − m)/s) + b`.
///
/// Positive values mean "looks real".
#[derive(Debug, Clone, PartialEq)]
pub struct LinearDecisionFunction<T> {
    /// Weights in standardized coordinates.
    pub weights: Vec<T>,
    pub bias: T,
    pub standardizer: Standardizer<T>,
    /// Epochs actually run.
    pub epochs: usize,
}

impl<T: Scalar> LinearDecisionFunction<T> {
    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn decision(&self, x: &[T]) -> T {
        let mut acc = self.bias;
        for (((&w, &v), &m), &s) in self
            .weights
            .iter()
            .zip(x)
            .zip(&self.standardizer.mean)
            .zip(&self.standardizer.scale)
        {
            acc = acc + w * ((v - m) / s);
        }
        acc
    }

    pub fn decisions(&self, m: &FeatureMatrix<T>) -> Vec<T> {
        m.rows().map(|r| self.decision(r)).collect()
    }

    /// Weights and bias in the original feature coordinates:
    /// `f(x) = w'·x + b'`.
    pub fn folded(&self) -> (Vec<T>, T) {
        let mut bias = self.bias;
        let w = self
            .weights
            .iter()
            .zip(&self.standardizer.mean)
            .zip(&self.standardizer.scale)
            .map(|((&w, &m), &s)| {
                bias = bias - w * m / s;
                w / s
            })
            .collect();
        (w, bias)
    }
}

fn check_pair<T: Scalar>(real: &FeatureMatrix<T>, fake: &FeatureMatrix<T>) -> Result<()> {
    if real.dim() != fake.dim() {
        return Err(Error::validation(format!(
            "feature dimension mismatch: real {} vs fake {}",
            real.dim(),
            fake.dim()
        )));
    }
    if real.len() < 2 || fake.len() < 2 {
        return Err(Error::validation(format!(
            "svm needs at least 2 rows per set, got real {} and fake {}",
            real.len(),
            fake.len()
        )));
    }
    Ok(())
}

/// Trains `f` with real rows labelled +1 and fake rows −1.
pub fn train_linear_svm<T: Scalar>(
    real: &FeatureMatrix<T>,
    fake: &FeatureMatrix<T>,
    cfg: &SvmConfig,
) -> Result<LinearDecisionFunction<T>> {
    cfg.validate()?;
    check_pair(real, fake)?;
    let d = real.dim();
    let n = real.len() + fake.len();
    let standardizer = Standardizer::fit(&[real, fake]);

    let mut z = vec![T::zero(); n * d];
    let mut labels = Vec::with_capacity(n);
    for (i, row) in real.rows().chain(fake.rows()).enumerate() {
        standardizer.apply(row, &mut z[i * d..(i + 1) * d]);
        labels.push(if i < real.len() { T::one() } else { -T::one() });
    }

    let lambda = T::one() / (T::lit(cfg.c) * T::from_count(n));
    let tol = T::lit(cfg.tol);
    let mut w = vec![T::zero(); d];
    let mut b = T::zero();
    let mut best: Option<(T, Vec<T>, T)> = None;
    let mut prev_obj: Option<T> = None;
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut t: u64 = 0;
    let mut epochs = 0;

    for _ in 0..cfg.max_epochs {
        epochs += 1;
        order.shuffle(&mut rng);
        for &i in &order {
            t += 1;
            let eta = T::one() / (lambda * T::lit(t as f64));
            let zi = &z[i * d..(i + 1) * d];
            let y = labels[i];
            let margin = y * (dot(&w, zi) + b);
            let shrink = T::one() - eta * lambda;
            w.iter_mut().for_each(|v| *v = *v * shrink);
            b = b * shrink;
            if margin < T::one() {
                let step = eta * y;
                for (wj, &zj) in w.iter_mut().zip(zi) {
                    *wj = *wj + step * zj;
                }
                b = b + step;
            }
        }

        let obj = objective(&w, b, &z, &labels, lambda);
        if best.as_ref().is_none_or(|(o, _, _)| obj < *o) {
            best = Some((obj, w.clone(), b));
        }
        if let Some(prev) = prev_obj {
            let denom = Float::max(Float::abs(prev), T::min_positive_value());
            if Float::abs(prev - obj) / denom < tol {
                break;
            }
        }
        prev_obj = Some(obj);
    }

    let (_, weights, bias) = best.expect("at least one epoch ran");
    if weights.iter().any(|v| !Float::is_finite(*v)) || !Float::is_finite(bias) {
        return Err(Error::NumericalFailure("svm weights diverged".into()));
    }
    Ok(LinearDecisionFunction {
        weights,
        bias,
        standardizer,
        epochs,
    })
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

fn objective<T: Scalar>(w: &[T], b: T, z: &[T], labels: &[T], lambda: T) -> T {
    let d = w.len();
    let hinge = labels
        .iter()
        .enumerate()
        .fold(T::zero(), |acc, (i, &y)| {
            let m = y * (dot(w, &z[i * d..(i + 1) * d]) + b);
            acc + Float::max(T::one() - m, T::zero())
        });
    let reg = dot(w, w) + b * b;
    lambda * T::lit(0.5) * reg + hinge / T::from_count(labels.len())
}

/// Unseparability score of a trained decision function on two sets:
/// `½·P(f(real) < 0) + ½·P(f(fake) > 0)`. Exact zeros count for neither.
pub fn unseparability<T: Scalar>(
    f: &LinearDecisionFunction<T>,
    real: &FeatureMatrix<T>,
    fake: &FeatureMatrix<T>,
) -> f64 {
    let real_wrong = real.rows().filter(|r| f.decision(r) < T::zero()).count();
    let fake_wrong = fake.rows().filter(|r| f.decision(r) > T::zero()).count();
    0.5 * real_wrong as f64 / real.len() as f64 + 0.5 * fake_wrong as f64 / fake.len() as f64
}

/// U-IDS: trains on both sets and scores on the same rows. Higher means
/// the fake set is harder to tell apart from the real one.
pub fn u_ids<T: Scalar>(
    real: &FeatureMatrix<T>,
    fake: &FeatureMatrix<T>,
    cfg: &SvmConfig,
) -> Result<f64> {
    let f = train_linear_svm(real, fake, cfg)?;
    Ok(unseparability(&f, real, fake))
}

/// P-IDS: fraction of pairs whose fake row scores strictly more real than
/// its paired real row. `pairing` maps fake ids to real ids and must be a
/// bijection.
pub fn p_ids<T: Scalar>(
    real: &FeatureMatrix<T>,
    fake: &FeatureMatrix<T>,
    pairing: &HashMap<String, String>,
    cfg: &SvmConfig,
) -> Result<f64> {
    check_pair(real, fake)?;
    let pairs = resolve_pairing(real, fake, pairing)?;
    let f = train_linear_svm(real, fake, cfg)?;
    let real_scores = f.decisions(real);
    let fake_scores = f.decisions(fake);
    let wins = pairs
        .iter()
        .filter(|&&(fi, ri)| fake_scores[fi] > real_scores[ri])
        .count();
    Ok(wins as f64 / pairs.len() as f64)
}

/// Row-index pairs `(fake, real)` in fake row order.
fn resolve_pairing<T: Scalar>(
    real: &FeatureMatrix<T>,
    fake: &FeatureMatrix<T>,
    pairing: &HashMap<String, String>,
) -> Result<Vec<(usize, usize)>> {
    let real_index = real.id_index();
    let fake_index = fake.id_index();
    if let Some(stray) = pairing.keys().find(|k| !fake_index.contains_key(k.as_str())) {
        return Err(Error::validation(format!(
            "pairing references unknown fake id {stray:?}"
        )));
    }
    let mut used = HashSet::new();
    let mut pairs = Vec::with_capacity(fake.len());
    for (fi, id) in fake.ids().iter().enumerate() {
        let target = pairing
            .get(id)
            .ok_or_else(|| Error::validation(format!("fake id {id:?} has no paired real id")))?;
        let ri = *real_index.get(target.as_str()).ok_or_else(|| {
            Error::validation(format!("fake id {id:?} is paired with unknown real id {target:?}"))
        })?;
        if !used.insert(ri) {
            return Err(Error::validation(format!(
                "real id {target:?} is paired more than once"
            )));
        }
        pairs.push((fi, ri));
    }
    if let Some(orphan) = real.ids().iter().enumerate().find(|(i, _)| !used.contains(i)) {
        return Err(Error::validation(format!(
            "real id {:?} has no paired fake id",
            orphan.1
        )));
    }
    Ok(pairs)
}
