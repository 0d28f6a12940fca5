use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::CoverageBand;
use crate::error::{Error, Result};
use crate::feature_matrix::FeatureMatrix;
use crate::paired::{psnr, ssim, ImagePair, PairDistances};
use crate::scalar::Scalar;
use crate::stats::{compute_gaussian_stats, frechet_distance_detailed, GaussianStats};
use crate::svm::{p_ids, train_linear_svm, unseparability, SvmConfig};

pub const FID: &str = "fid";
pub const FID_STAR: &str = "fid_star";
pub const U_IDS: &str = "u_ids";
pub const U_IDS_STAR: &str = "u_ids_star";
pub const P_IDS: &str = "p_ids";
pub const PSNR: &str = "psnr";
pub const SSIM: &str = "ssim";
pub const LPIPS_MEAN: &str = "lpips(mean)";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryDescriptor {
    pub count: usize,
    pub kernel_size: Option<u32>,
    pub coverage_band: Option<CoverageBand>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonDescriptor {
    pub count: usize,
    /// Whether the comparison images may show target-class objects.
    /// Starred metrics require this to be false.
    pub contains_target_class: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JitterEvent {
    pub metric: String,
    pub jitter: f64,
}

/// Every knob that influenced the numbers in a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub svm: SvmConfig,
    pub scalar: String,
    pub covariance: String,
    pub svm_fit_rows: Option<SvmFitRows>,
    pub jitter: Vec<JitterEvent>,
    pub notes: Vec<String>,
    /// Resolved invocation settings, when the report came from a tool run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run: Option<serde_json::Value>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SvmFitRows {
    pub comparison: usize,
    pub query: usize,
}

/// All metric values for one remover variant against one comparison set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub remover: String,
    pub query: QueryDescriptor,
    pub comparison: ComparisonDescriptor,
    pub extractor_fingerprint: String,
    pub metrics: BTreeMap<String, f64>,
    pub config: ConfigEcho,
}

impl MetricReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| Error::Parse {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Parse { path: p, message } => Error::Parse {
                path: format!("{}:{p}", path.display()),
                message,
            },
            other => other,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    /// Adds P-IDS: comparison rows act as the real side, query rows as the
    /// fake side; `pairing` maps query ids to comparison ids.
    pub fn add_p_ids<T: Scalar>(
        &mut self,
        query: &FeatureMatrix<T>,
        comparison: &FeatureMatrix<T>,
        pairing: &HashMap<String, String>,
    ) -> Result<()> {
        let v = p_ids(comparison, query, pairing, &self.config.svm)?;
        self.metrics.insert(P_IDS.into(), v);
        Ok(())
    }

    /// Adds mean PSNR and mean SSIM over image pairs. Pairs with identical
    /// images have infinite PSNR; they are counted separately and left out
    /// of the mean.
    pub fn add_image_pairs(&mut self, pairs: &[ImagePair]) -> Result<()> {
        if pairs.is_empty() {
            return Err(Error::validation("no image pairs given"));
        }
        use rayon::prelude::*;
        let scores: Vec<Result<(f64, f64)>> = pairs
            .par_iter()
            .map(|p| Ok((psnr(p), ssim(p)?)))
            .collect();
        let scores = scores.into_iter().collect::<Result<Vec<_>>>()?;
        let finite: Vec<f64> = scores.iter().map(|s| s.0).filter(|v| v.is_finite()).collect();
        if !finite.is_empty() {
            self.metrics
                .insert(PSNR.into(), finite.iter().sum::<f64>() / finite.len() as f64);
        }
        let infinite = scores.len() - finite.len();
        if infinite > 0 {
            self.metrics.insert("psnr_infinite_pairs".into(), infinite as f64);
        }
        let mean_ssim = scores.iter().map(|s| s.1).sum::<f64>() / scores.len() as f64;
        self.metrics.insert(SSIM.into(), mean_ssim);
        self.config
            .notes
            .push("psnr/ssim: full image, ssim valid-window gaussian 11x11 sigma 1.5".into());
        Ok(())
    }

    pub fn add_pair_distances(&mut self, d: &PairDistances) {
        self.metrics.insert(LPIPS_MEAN.into(), d.mean());
    }
}

/// Comparison set with its Gaussian statistics computed once.
#[derive(Debug, Clone)]
pub struct ComparisonSet<T: Scalar> {
    features: FeatureMatrix<T>,
    stats: GaussianStats<T>,
    fingerprint: String,
    contains_target_class: bool,
}

impl<T: Scalar> ComparisonSet<T> {
    pub fn new(
        features: FeatureMatrix<T>,
        fingerprint: impl Into<String>,
        contains_target_class: bool,
    ) -> Result<Self> {
        let stats = compute_gaussian_stats(&features)?;
        Ok(Self {
            features,
            stats,
            fingerprint: fingerprint.into(),
            contains_target_class,
        })
    }

    pub fn features(&self) -> &FeatureMatrix<T> {
        &self.features
    }

    pub fn stats(&self) -> &GaussianStats<T> {
        &self.stats
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub fn contains_target_class(&self) -> bool {
        self.contains_target_class
    }

    pub fn descriptor(&self) -> ComparisonDescriptor {
        ComparisonDescriptor {
            count: self.features.len(),
            contains_target_class: self.contains_target_class,
        }
    }
}

/// Removal results of one remover variant.
#[derive(Debug, Clone, Copy)]
pub struct QuerySet<'a, T: Scalar> {
    pub remover: &'a str,
    pub features: &'a FeatureMatrix<T>,
    pub fingerprint: &'a str,
    pub kernel_size: Option<u32>,
    pub coverage_band: Option<CoverageBand>,
}

/// Metric names for the two unpaired scores.
pub(crate) fn unpaired_names(starred: bool) -> (&'static str, &'static str) {
    if starred {
        (FID_STAR, U_IDS_STAR)
    } else {
        (FID, U_IDS)
    }
}

pub(crate) fn check_protocol<T: Scalar>(
    query_fingerprint: &str,
    comparison: &ComparisonSet<T>,
    query_dim: usize,
    starred: bool,
) -> Result<()> {
    if query_fingerprint != comparison.fingerprint {
        return Err(Error::validation(format!(
            "extractor fingerprints differ: query {query_fingerprint} vs comparison {}",
            comparison.fingerprint
        )));
    }
    if query_dim != comparison.features.dim() {
        return Err(Error::validation(format!(
            "feature dimensions differ: query {query_dim} vs comparison {}",
            comparison.features.dim()
        )));
    }
    if starred && comparison.contains_target_class {
        return Err(Error::Protocol(
            "starred metrics need a comparison set without target-class objects, \
             but the comparison set is not declared clean"
                .into(),
        ));
    }
    Ok(())
}

/// Fréchet distance and SVM unseparability between a query set and a
/// comparison set. With `starred`, the comparison set must be free of
/// target-class objects and the metrics are reported as FID* / U-IDS*.
pub fn evaluate_unpaired<T: Scalar>(
    query: &QuerySet<'_, T>,
    comparison: &ComparisonSet<T>,
    svm: &SvmConfig,
    starred: bool,
) -> Result<MetricReport> {
    check_protocol(query.fingerprint, comparison, query.features.dim(), starred)?;
    let (fid_name, uids_name) = unpaired_names(starred);

    let query_stats = compute_gaussian_stats(query.features)?;
    let fid = frechet_distance_detailed(comparison.stats(), &query_stats)?;
    let f = train_linear_svm(comparison.features(), query.features, svm)?;
    let uids = unseparability(&f, comparison.features(), query.features);

    let mut metrics = BTreeMap::new();
    metrics.insert(fid_name.to_string(), fid.value.to_f64_lossy());
    metrics.insert(uids_name.to_string(), uids);
    let jitter = fid
        .jitter
        .map(|j| JitterEvent {
            metric: fid_name.into(),
            jitter: j.to_f64_lossy(),
        })
        .into_iter()
        .collect();

    Ok(MetricReport {
        remover: query.remover.to_string(),
        query: QueryDescriptor {
            count: query.features.len(),
            kernel_size: query.kernel_size,
            coverage_band: query.coverage_band,
        },
        comparison: comparison.descriptor(),
        extractor_fingerprint: query.fingerprint.to_string(),
        metrics,
        config: ConfigEcho {
            svm: *svm,
            scalar: T::NAME.into(),
            covariance: "unbiased (n-1)".into(),
            svm_fit_rows: Some(SvmFitRows {
                comparison: comparison.features.len(),
                query: query.features.len(),
            }),
            jitter,
            notes: Vec::new(),
            run: None,
        },
    })
}
