use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::coco::{build_class_mask, AnnotationIndex};
use crate::error::{Error, Result};

/// Inclusive coverage band `[min, max]` for query images.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageBand {
    pub min: f64,
    pub max: f64,
}

impl CoverageBand {
    pub fn new(min: f64, max: f64) -> Result<Self> {
        if !(0.0 <= min && min < max && max <= 1.0) {
            return Err(Error::validation(format!(
                "coverage band needs 0 <= min < max <= 1, got [{min}, {max}]"
            )));
        }
        Ok(Self { min, max })
    }

    pub fn contains(&self, coverage: f64) -> bool {
        self.min <= coverage && coverage <= self.max
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryEntry {
    pub image_id: u64,
    /// Coverage of the undilated class mask.
    pub coverage: f64,
}

/// Query and comparison split for one target category.
#[derive(Debug, Clone, PartialEq)]
pub struct SetSelection {
    pub category_id: u64,
    pub band: CoverageBand,
    pub query: Vec<QueryEntry>,
    /// Images without any instance of the category.
    pub comparison: Vec<u64>,
    /// Images with target instances outside the band.
    pub excluded: Vec<u64>,
}

/// Splits the annotated images for class-wise removal: images whose class
/// mask coverage falls in `band` form the query set, images without any
/// instance of the class form the comparison set, everything else is
/// dropped.
pub fn select_sets(
    index: &AnnotationIndex,
    category_id: u64,
    band: CoverageBand,
    include_crowd: bool,
) -> Result<SetSelection> {
    let ids: Vec<u64> = index.images().map(|r| r.id).collect();
    let coverages: Vec<Result<Option<f64>>> = ids
        .par_iter()
        .map(|&id| {
            if index.count_instances(id, category_id) == 0 {
                return Ok(None);
            }
            Ok(Some(build_class_mask(index, id, category_id, include_crowd)?.coverage()))
        })
        .collect();

    let mut sel = SetSelection {
        category_id,
        band,
        query: Vec::new(),
        comparison: Vec::new(),
        excluded: Vec::new(),
    };
    for (id, cov) in ids.into_iter().zip(coverages) {
        match cov? {
            None => sel.comparison.push(id),
            Some(c) if band.contains(c) => sel.query.push(QueryEntry {
                image_id: id,
                coverage: c,
            }),
            Some(_) => sel.excluded.push(id),
        }
    }
    Ok(sel)
}
