//! Sidecar files next to feature containers and other outputs.

use std::path::{Path, PathBuf};

use removal_eval::features::ExtractorSpec;
use removal_eval::{Error, Result};
use serde::{Deserialize, Serialize};

/// Provenance of a feature container, stored as `<features>.meta.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMeta {
    pub extractor: ExtractorSpec,
    pub count: usize,
    /// `None` when nothing is known about target-class content.
    pub contains_target: Option<bool>,
    pub run: serde_json::Value,
}

pub fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

pub fn meta_path(features: &Path) -> PathBuf {
    sidecar(features, ".meta.json")
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value).expect("value serializes");
    s.push('\n');
    std::fs::write(path, s).map_err(|e| Error::Io {
        path: path.to_owned(),
        source: e,
    })
}

pub fn write_meta(meta: &FeatureMeta, features: &Path) -> Result<()> {
    write_json(meta, &meta_path(features))
}

/// Reads the sidecar of `features`, or `None` if there is none.
pub fn read_meta(features: &Path) -> Result<Option<FeatureMeta>> {
    let path = meta_path(features);
    let text = match std::fs::read_to_string(&path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(Error::Io { path, source: e }),
    };
    serde_json::from_str(&text).map(Some).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}
