//! Images to activation vectors through pluggable backends, plus the
//! binary feature container.

mod container;
mod image;
#[cfg(feature = "neural")]
mod neural;
mod toy;

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::feature_matrix::FeatureMatrix;
use crate::scalar::Scalar;

pub use self::container::{decode_features, encode_features, read_features, write_features};
pub use self::image::ImageBuffer;
#[cfg(feature = "neural")]
pub use self::neural::{preprocess as neural_preprocess, NeuralExtractor};
pub use self::toy::{orientation_bin, toy_descriptor, TOY_DIM};

pub const DEFAULT_INPUT_EDGE: u32 = 299;
pub const DEFAULT_NEURAL_DIM: usize = 2048;

const TOY_CONSTANTS: &str = "toy-v1;hist=3x16;luma=0.299,0.587,0.114;grad=central,replicate;orient=16";
#[cfg(feature = "neural")]
const NEURAL_CONSTANTS: &str = neural::PREPROCESS;
#[cfg(not(feature = "neural"))]
const NEURAL_CONSTANTS: &str = "bilinear-half-pixel;nchw;scale=1/127.5;offset=-1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    /// Built-in color/gradient histogram descriptor.
    Toy,
    /// ONNX model producing pooled activations.
    Neural,
    /// Rows looked up by id in an existing feature container.
    Precomputed,
}

impl std::str::FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "toy" => Ok(Backend::Toy),
            "neural" => Ok(Backend::Neural),
            "precomputed" => Ok(Backend::Precomputed),
            other => Err(Error::validation(format!("unknown backend {other:?}"))),
        }
    }
}

/// Identifies a feature extractor. The fingerprint hashes every field, the
/// preprocessing constants and the model (or table) bytes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractorSpec {
    pub backend: Backend,
    pub model_path: Option<PathBuf>,
    pub input_edge: u32,
    pub output_dim: usize,
    pub fingerprint: String,
}

impl ExtractorSpec {
    pub fn toy() -> Self {
        let fingerprint = fingerprint(Backend::Toy, 0, TOY_DIM, TOY_CONSTANTS, &[]);
        Self {
            backend: Backend::Toy,
            model_path: None,
            input_edge: 0,
            output_dim: TOY_DIM,
            fingerprint,
        }
    }

    pub fn neural(model_path: &Path, input_edge: u32, output_dim: usize) -> Result<Self> {
        if input_edge == 0 || output_dim == 0 {
            return Err(Error::validation("input edge and output dimension must be positive"));
        }
        let bytes = std::fs::read(model_path).map_err(|e| Error::Backend {
            path: model_path.to_owned(),
            message: e.to_string(),
        })?;
        Ok(Self {
            backend: Backend::Neural,
            model_path: Some(model_path.to_owned()),
            input_edge,
            output_dim,
            fingerprint: fingerprint(Backend::Neural, input_edge, output_dim, NEURAL_CONSTANTS, &bytes),
        })
    }

    pub fn precomputed(table_path: &Path) -> Result<Self> {
        let bytes = std::fs::read(table_path).map_err(|e| Error::io(table_path, e))?;
        let table: FeatureMatrix<f32> = decode_features(&bytes)?;
        Ok(Self {
            backend: Backend::Precomputed,
            model_path: Some(table_path.to_owned()),
            input_edge: 0,
            output_dim: table.dim(),
            fingerprint: fingerprint(Backend::Precomputed, 0, table.dim(), "", &bytes),
        })
    }
}

fn fingerprint(backend: Backend, edge: u32, dim: usize, constants: &str, bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("backend={backend:?};edge={edge};dim={dim};pre={constants};model=").as_bytes());
    h.update(bytes);
    hex::encode(h.finalize())
}

enum Kind {
    Toy,
    #[cfg(feature = "neural")]
    Neural(Box<NeuralExtractor>),
    Precomputed {
        table: FeatureMatrix<f32>,
        index: HashMap<String, usize>,
    },
}

/// A loaded extractor, ready to turn images into feature rows.
pub struct Extractor {
    spec: ExtractorSpec,
    kind: Kind,
}

impl Extractor {
    pub fn new(spec: &ExtractorSpec) -> Result<Self> {
        let kind = match spec.backend {
            Backend::Toy => Kind::Toy,
            Backend::Neural => {
                let path = spec
                    .model_path
                    .as_deref()
                    .ok_or_else(|| Error::validation("neural backend needs a model path"))?;
                #[cfg(feature = "neural")]
                {
                    Kind::Neural(Box::new(NeuralExtractor::load(path, spec.input_edge, spec.output_dim)?))
                }
                #[cfg(not(feature = "neural"))]
                {
                    return Err(Error::Backend {
                        path: path.to_owned(),
                        message: "built without the `neural` feature".into(),
                    });
                }
            }
            Backend::Precomputed => {
                let path = spec
                    .model_path
                    .as_deref()
                    .ok_or_else(|| Error::validation("precomputed backend needs a table path"))?;
                let table: FeatureMatrix<f32> = read_features(path)?;
                let index = table
                    .ids()
                    .iter()
                    .enumerate()
                    .map(|(i, id)| (id.clone(), i))
                    .collect();
                Kind::Precomputed { table, index }
            }
        };
        Ok(Self {
            spec: spec.clone(),
            kind,
        })
    }

    pub fn spec(&self) -> &ExtractorSpec {
        &self.spec
    }

    /// Whether rows come from image pixels (as opposed to a lookup table).
    pub fn needs_pixels(&self) -> bool {
        !matches!(self.kind, Kind::Precomputed { .. })
    }

    /// Feature row for one image. `image` may be `None` only for the
    /// precomputed backend.
    pub fn extract_one(&self, id: &str, image: Option<&ImageBuffer>) -> Result<Vec<f64>> {
        let need = || Error::validation(format!("image {id:?} has no pixel data"));
        match &self.kind {
            Kind::Toy => Ok(toy_descriptor(image.ok_or_else(need)?).to_vec()),
            #[cfg(feature = "neural")]
            Kind::Neural(n) => n.extract(id, image.ok_or_else(need)?),
            Kind::Precomputed { table, index } => {
                let i = index.get(id).ok_or_else(|| {
                    Error::validation(format!("id {id:?} not present in precomputed table"))
                })?;
                Ok(table.row(*i).iter().map(|&v| v as f64).collect())
            }
        }
    }
}

/// Extracts one row per image, preserving input order.
pub fn extract_features<T: Scalar>(
    images: &[(String, ImageBuffer)],
    extractor: &Extractor,
) -> Result<FeatureMatrix<T>> {
    let rows: Vec<Result<Vec<f64>>> = images
        .par_iter()
        .map(|(id, img)| extractor.extract_one(id, Some(img)))
        .collect();
    assemble(images.iter().map(|(id, _)| id.clone()), rows, extractor.spec().output_dim)
}

/// Per-item failures collected by [`extract_paths`], or a failure that is
/// not tied to one item.
#[derive(Debug)]
pub enum BatchError {
    Items(Vec<(String, Error)>),
    Fatal(Error),
}

impl std::fmt::Display for BatchError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BatchError::Items(items) => {
                write!(f, "{} item(s) failed:", items.len())?;
                for (id, e) in items {
                    write!(f, "\n  {id}: {e}")?;
                }
                Ok(())
            }
            BatchError::Fatal(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for BatchError {}

/// Decodes and extracts images from disk in parallel. Every per-image
/// failure is reported, not just the first.
pub fn extract_paths<T: Scalar>(
    items: &[(String, PathBuf)],
    extractor: &Extractor,
) -> std::result::Result<FeatureMatrix<T>, BatchError> {
    let rows: Vec<Result<Vec<f64>>> = items
        .par_iter()
        .map(|(id, path)| {
            if extractor.needs_pixels() {
                let img = ImageBuffer::load_png(path)?;
                extractor.extract_one(id, Some(&img))
            } else {
                extractor.extract_one(id, None)
            }
        })
        .collect();
    let failures: Vec<(String, Error)> = items
        .iter()
        .zip(&rows)
        .filter_map(|((id, _), r)| match r {
            Err(e) => Some((id.clone(), clone_error(e))),
            Ok(_) => None,
        })
        .collect();
    if !failures.is_empty() {
        return Err(BatchError::Items(failures));
    }
    assemble(items.iter().map(|(id, _)| id.clone()), rows, extractor.spec().output_dim)
        .map_err(BatchError::Fatal)
}

fn clone_error(e: &Error) -> Error {
    match e {
        Error::Io { path, source } => Error::Io {
            path: path.clone(),
            source: std::io::Error::new(source.kind(), source.to_string()),
        },
        other => Error::Validation(other.to_string()),
    }
}

fn assemble<T: Scalar>(
    ids: impl Iterator<Item = String>,
    rows: Vec<Result<Vec<f64>>>,
    dim: usize,
) -> Result<FeatureMatrix<T>> {
    let mut data = Vec::with_capacity(rows.len() * dim);
    let mut all_ids = Vec::with_capacity(rows.len());
    for (id, row) in ids.zip(rows) {
        let row = row?;
        if row.len() != dim {
            return Err(Error::validation(format!(
                "extractor produced {} values for {id:?}, expected {dim}",
                row.len()
            )));
        }
        data.extend(row.into_iter().map(T::lit));
        all_ids.push(id);
    }
    FeatureMatrix::new(all_ids, data, dim)
}
