use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::report::{check_protocol, unpaired_names, ComparisonSet};
use crate::error::{Error, Result};
use crate::feature_matrix::FeatureMatrix;
use crate::scalar::Scalar;
use crate::stats::{compute_gaussian_stats, frechet_distance};
use crate::svm::{train_linear_svm, unseparability, SvmConfig};

/// RSD of one metric at one sample size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityRow {
    pub metric: String,
    pub size: usize,
    pub rsd_percent: f64,
    pub iterations: usize,
    /// Mean metric value over the iterations.
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct StabilityTable {
    pub rows: Vec<StabilityRow>,
}

impl StabilityTable {
    pub fn get(&self, metric: &str, size: usize) -> Option<&StabilityRow> {
        self.rows.iter().find(|r| r.metric == metric && r.size == size)
    }

    /// `metric,size,rsd_percent,iterations` CSV.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("metric,size,rsd_percent,iterations\n");
        for r in &self.rows {
            s.push_str(&format!("{},{},{},{}\n", r.metric, r.size, r.rsd_percent, r.iterations));
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// Relative standard deviation in percent: `100 · s / |mean|` with the
/// sample (n−1) standard deviation. A constant series gives exactly 0.
pub fn relative_std_percent(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    let sd = var.sqrt();
    if sd == 0.0 {
        0.0
    } else {
        100.0 * sd / mean.abs()
    }
}

/// Options for [`subsample_stability`].
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityOptions {
    pub sizes: Vec<usize>,
    pub iterations: usize,
    pub seed: u64,
    pub svm: SvmConfig,
}

/// Draws `iterations` uniform subsamples (without replacement) of the
/// query set for every size, keeps the comparison set fixed, and reports
/// the RSD of the Fréchet distance and the SVM unseparability score.
///
/// Iteration `i` uses the seed `seed + i` on the ChaCha stream numbered by
/// the sample size, so results do not depend on scheduling.
pub fn subsample_stability<T: Scalar>(
    query: &FeatureMatrix<T>,
    query_fingerprint: &str,
    comparison: &ComparisonSet<T>,
    opts: &StabilityOptions,
) -> Result<StabilityTable> {
    opts.svm.validate()?;
    let starred = !comparison.contains_target_class();
    check_protocol(query_fingerprint, comparison, query.dim(), starred)?;
    if opts.iterations < 2 {
        return Err(Error::validation(format!(
            "RSD needs at least 2 iterations, got {}",
            opts.iterations
        )));
    }
    for &size in &opts.sizes {
        if size > query.len() {
            return Err(Error::validation(format!(
                "sample size {size} exceeds the {} query rows",
                query.len()
            )));
        }
        if size < 2 {
            return Err(Error::validation(format!("sample size {size} is below 2")));
        }
    }

    let jobs: Vec<(usize, usize)> = opts
        .sizes
        .iter()
        .flat_map(|&s| (0..opts.iterations).map(move |i| (s, i)))
        .collect();
    let values: Vec<Result<(f64, f64)>> = jobs
        .par_iter()
        .map(|&(size, iter)| {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(iter as u64));
            rng.set_stream(size as u64);
            let mut idx = rand::seq::index::sample(&mut rng, query.len(), size).into_vec();
            idx.sort_unstable();
            let sub = query.select(&idx)?;
            let fid = frechet_distance(comparison.stats(), &compute_gaussian_stats(&sub)?)?;
            let f = train_linear_svm(comparison.features(), &sub, &opts.svm)?;
            Ok((fid.to_f64_lossy(), unseparability(&f, comparison.features(), &sub)))
        })
        .collect();
    let values = values.into_iter().collect::<Result<Vec<_>>>()?;

    let (fid_name, uids_name) = unpaired_names(starred);
    let mut table = StabilityTable::default();
    for (k, &size) in opts.sizes.iter().enumerate() {
        let chunk = &values[k * opts.iterations..(k + 1) * opts.iterations];
        for (name, pick) in [(fid_name, 0usize), (uids_name, 1)] {
            let series: Vec<f64> = chunk.iter().map(|v| if pick == 0 { v.0 } else { v.1 }).collect();
            table.rows.push(StabilityRow {
                metric: name.to_string(),
                size,
                rsd_percent: relative_std_percent(&series),
                iterations: opts.iterations,
                mean: series.iter().sum::<f64>() / series.len() as f64,
            });
        }
    }
    Ok(table)
}
