//! Query/comparison set construction from segmentation-annotated
//! collections, mask decoding and the dilated-mask remover variants.

mod coco;
mod manifest;
mod mask;
mod select;

pub use coco::{
    build_class_mask, decode_instance, parse_annotations, AnnotationIndex, ImageRecord, Instance,
    Segmentation,
};
pub use manifest::{
    read_manifest, resolve_path, selection_manifests, write_manifest, ManifestRow, Role,
};
pub use mask::{decode_rle, dilate, encode_rle, rasterize_polygon, BinaryMask};
pub use select::{select_sets, CoverageBand, QueryEntry, SetSelection};

/// Dilation kernel sizes of the standard six remover variants.
pub const DEFAULT_KERNELS: [u32; 6] = [0, 10, 20, 30, 40, 50];
