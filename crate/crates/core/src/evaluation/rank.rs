use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::report::*;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    LowerIsBetter,
    HigherIsBetter,
}

/// Orientation of a known metric; `None` for auxiliary entries.
pub fn metric_direction(name: &str) -> Option<Direction> {
    match name {
        FID | FID_STAR | LPIPS_MEAN => Some(Direction::LowerIsBetter),
        U_IDS | U_IDS_STAR | P_IDS | PSNR | SSIM => Some(Direction::HigherIsBetter),
        _ => None,
    }
}

/// Remover labels for one metric, best first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRanking {
    pub metric: String,
    pub direction: Direction,
    pub order: Vec<String>,
    /// Groups of labels with exactly equal values (each of size ≥ 2).
    pub ties: Vec<Vec<String>>,
}

impl MetricRanking {
    pub fn best(&self) -> &str {
        &self.order[0]
    }

    pub fn worst(&self) -> &str {
        self.order.last().expect("rankings are never empty")
    }

    /// 1-based position of `label`.
    pub fn position(&self, label: &str) -> Option<usize> {
        self.order.iter().position(|l| l == label).map(|p| p + 1)
    }
}

/// Orders remover labels per metric. Reports must come from the same
/// extractor and describe the same query set up to the dilation kernel.
/// Equal values are ordered by label and recorded as ties.
pub fn rank_removers(reports: &[MetricReport]) -> Result<Vec<MetricRanking>> {
    let Some(first) = reports.first() else {
        return Ok(Vec::new());
    };
    let mut labels = BTreeSet::new();
    for r in reports {
        if r.extractor_fingerprint != first.extractor_fingerprint {
            return Err(Error::validation(format!(
                "report {:?} uses extractor {} but {:?} uses {}",
                r.remover, r.extractor_fingerprint, first.remover, first.extractor_fingerprint
            )));
        }
        if r.query.count != first.query.count || r.query.coverage_band != first.query.coverage_band
        {
            return Err(Error::validation(format!(
                "report {:?} describes a different query set than {:?}",
                r.remover, first.remover
            )));
        }
        if !labels.insert(r.remover.as_str()) {
            return Err(Error::validation(format!("duplicate remover label {:?}", r.remover)));
        }
    }

    let mut by_metric: BTreeMap<&str, Vec<(&str, f64)>> = BTreeMap::new();
    for r in reports {
        for (name, &v) in &r.metrics {
            if metric_direction(name).is_some() {
                by_metric.entry(name).or_default().push((&r.remover, v));
            }
        }
    }

    let mut out = Vec::with_capacity(by_metric.len());
    for (metric, mut entries) in by_metric {
        let direction = metric_direction(metric).expect("filtered above");
        entries.sort_by(|a, b| {
            let by_value = match direction {
                Direction::LowerIsBetter => a.1.total_cmp(&b.1),
                Direction::HigherIsBetter => b.1.total_cmp(&a.1),
            };
            by_value.then_with(|| a.0.cmp(b.0))
        });
        let mut ties = Vec::new();
        let mut i = 0;
        while i < entries.len() {
            let mut j = i + 1;
            while j < entries.len() && entries[j].1.total_cmp(&entries[i].1) == Ordering::Equal {
                j += 1;
            }
            if j - i > 1 {
                ties.push(entries[i..j].iter().map(|e| e.0.to_string()).collect());
            }
            i = j;
        }
        out.push(MetricRanking {
            metric: metric.to_string(),
            direction,
            order: entries.into_iter().map(|e| e.0.to_string()).collect(),
            ties,
        });
    }
    Ok(out)
}
