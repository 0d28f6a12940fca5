//! COCO-format annotation ingestion (integer-count RLE and polygons).

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::Deserialize;

use super::mask::{decode_rle, rasterize_polygon, BinaryMask};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Segmentation {
    /// Flat `x, y` coordinate lists, one per ring.
    Polygons(Vec<Vec<f64>>),
    /// Uncompressed RLE with its declared `(height, width)`.
    Rle {
        counts: Vec<u64>,
        height: u32,
        width: u32,
    },
    /// String-encoded RLE; kept so parsing succeeds, but decoding it is not
    /// supported.
    CompressedRle {
        counts: String,
        height: u32,
        width: u32,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub category_id: u64,
    pub segmentation: Segmentation,
    pub iscrowd: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageRecord {
    pub id: u64,
    pub width: u32,
    pub height: u32,
    pub file_name: PathBuf,
}

/// Parsed annotation file: images, their instances and category names.
#[derive(Debug, Clone, Default)]
pub struct AnnotationIndex {
    images: BTreeMap<u64, ImageRecord>,
    instances: BTreeMap<u64, Vec<Instance>>,
    categories: BTreeMap<u64, String>,
}

#[derive(Deserialize)]
struct RawDataset {
    images: Vec<RawImage>,
    annotations: Vec<RawAnnotation>,
    categories: Vec<RawCategory>,
}

#[derive(Deserialize)]
struct RawImage {
    id: u64,
    width: u32,
    height: u32,
    #[serde(default)]
    file_name: String,
}

#[derive(Deserialize)]
struct RawAnnotation {
    image_id: u64,
    category_id: i64,
    segmentation: RawSegmentation,
    #[serde(default)]
    iscrowd: u8,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawSegmentation {
    Polygons(Vec<Vec<f64>>),
    Rle { counts: RawCounts, size: [u32; 2] },
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawCounts {
    Ints(Vec<u64>),
    Compressed(String),
}

#[derive(Deserialize)]
struct RawCategory {
    id: i64,
    name: String,
}

/// Parses a COCO annotation document.
pub fn parse_annotations(json: &str) -> Result<AnnotationIndex> {
    let de = &mut serde_json::Deserializer::from_str(json);
    let raw: RawDataset = serde_path_to_error::deserialize(de).map_err(|e| Error::Parse {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;

    let mut index = AnnotationIndex::default();
    for (i, c) in raw.categories.into_iter().enumerate() {
        let id = positive(c.id).ok_or_else(|| {
            Error::validation(format!("categories[{i}] has non-positive id {}", c.id))
        })?;
        index.categories.insert(id, c.name);
    }
    for img in raw.images {
        let record = ImageRecord {
            id: img.id,
            width: img.width,
            height: img.height,
            file_name: PathBuf::from(img.file_name),
        };
        if index.images.insert(img.id, record).is_some() {
            return Err(Error::validation(format!("duplicate image id {}", img.id)));
        }
    }
    for (i, a) in raw.annotations.into_iter().enumerate() {
        if !index.images.contains_key(&a.image_id) {
            return Err(Error::validation(format!(
                "annotations[{i}] references unknown image id {}",
                a.image_id
            )));
        }
        let category_id = positive(a.category_id).ok_or_else(|| {
            Error::validation(format!(
                "annotations[{i}] has non-positive category id {}",
                a.category_id
            ))
        })?;
        let segmentation = match a.segmentation {
            RawSegmentation::Polygons(p) => Segmentation::Polygons(p),
            RawSegmentation::Rle {
                counts: RawCounts::Ints(counts),
                size: [height, width],
            } => Segmentation::Rle {
                counts,
                height,
                width,
            },
            RawSegmentation::Rle {
                counts: RawCounts::Compressed(counts),
                size: [height, width],
            } => Segmentation::CompressedRle {
                counts,
                height,
                width,
            },
        };
        index.instances.entry(a.image_id).or_default().push(Instance {
            category_id,
            segmentation,
            iscrowd: a.iscrowd != 0,
        });
    }
    Ok(index)
}

fn positive(id: i64) -> Option<u64> {
    u64::try_from(id).ok().filter(|&v| v > 0)
}

impl AnnotationIndex {
    pub fn images(&self) -> impl Iterator<Item = &ImageRecord> {
        self.images.values()
    }

    pub fn image(&self, id: u64) -> Option<&ImageRecord> {
        self.images.get(&id)
    }

    pub fn instances(&self, image_id: u64) -> &[Instance] {
        self.instances.get(&image_id).map_or(&[], Vec::as_slice)
    }

    pub fn categories(&self) -> &BTreeMap<u64, String> {
        &self.categories
    }

    /// Resolves a category given by name or numeric id.
    pub fn category_id(&self, name_or_id: &str) -> Option<u64> {
        if let Some((&id, _)) = self.categories.iter().find(|(_, n)| n.as_str() == name_or_id) {
            return Some(id);
        }
        name_or_id.parse::<u64>().ok().filter(|id| self.categories.contains_key(id))
    }

    /// Number of instances of `category_id` on an image, crowd regions
    /// included.
    pub fn count_instances(&self, image_id: u64, category_id: u64) -> usize {
        self.instances(image_id)
            .iter()
            .filter(|i| i.category_id == category_id)
            .count()
    }
}

/// Decodes one instance mask at the image's resolution.
pub fn decode_instance(seg: &Segmentation, height: u32, width: u32) -> Result<BinaryMask> {
    match seg {
        Segmentation::Polygons(rings) => rasterize_polygon(rings, height, width),
        Segmentation::Rle {
            counts,
            height: h,
            width: w,
        } => {
            if (*h, *w) != (height, width) {
                return Err(Error::validation(format!(
                    "RLE size {h}x{w} does not match image size {height}x{width}"
                )));
            }
            decode_rle(counts, height, width)
        }
        Segmentation::CompressedRle { .. } => Err(Error::format(
            0,
            "compressed (string) RLE counts are not supported",
        )),
    }
}

/// Union of all instance masks of one category on one image. Crowd
/// regions are included unless `include_crowd` is false.
pub fn build_class_mask(
    index: &AnnotationIndex,
    image_id: u64,
    category_id: u64,
    include_crowd: bool,
) -> Result<BinaryMask> {
    let img = index
        .image(image_id)
        .ok_or_else(|| Error::validation(format!("unknown image id {image_id}")))?;
    let mut mask = BinaryMask::empty(img.width, img.height);
    for inst in index.instances(image_id) {
        if inst.category_id != category_id || (inst.iscrowd && !include_crowd) {
            continue;
        }
        let m = decode_instance(&inst.segmentation, img.height, img.width)
            .map_err(|e| annotate(e, image_id))?;
        mask.union_with(&m)?;
    }
    Ok(mask)
}

fn annotate(e: Error, image_id: u64) -> Error {
    match e {
        Error::Format { offset, message } => Error::Format {
            offset,
            message: format!("image {image_id}: {message}"),
        },
        Error::Validation(m) => Error::Validation(format!("image {image_id}: {m}")),
        other => other,
    }
}
