//! JSON manifests tying image files to their role in an evaluation.
//!
//! A manifest is an array of rows
//! `{id, image_path, mask_path, role, coverage, kernel_size}`. Two optional
//! fields extend the base layout: `variant` names which rendering of a
//! scene the row holds (e.g. `without`, `mean_fill`) and `contains_target`
//! records whether the image shows target-class objects.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::coco::AnnotationIndex;
use super::mask::BinaryMask;
use super::select::SetSelection;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Query,
    Comparison,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub id: String,
    pub image_path: String,
    pub mask_path: Option<String>,
    pub role: Role,
    pub coverage: f64,
    pub kernel_size: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variant: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contains_target: Option<bool>,
}

pub fn write_manifest(rows: &[ManifestRow], path: &Path) -> Result<()> {
    let mut json = serde_json::to_string_pretty(rows).expect("manifest rows serialize");
    json.push('\n');
    std::fs::write(path, json).map_err(|e| Error::io(path, e))
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestRow>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de).map_err(|e| Error::Parse {
        path: format!("{}:{}", path.display(), e.path()),
        message: e.inner().to_string(),
    })
}

/// Resolves a manifest path relative to the manifest's directory.
pub fn resolve_path(manifest: &Path, entry: &str) -> PathBuf {
    let p = Path::new(entry);
    if p.is_absolute() {
        p.to_owned()
    } else {
        manifest.parent().unwrap_or(Path::new(".")).join(p)
    }
}

/// Query and comparison manifests for a selection. When `mask_dir` is
/// given, the undilated class masks of query images are written there as
/// PNGs and referenced from the rows.
pub fn selection_manifests(
    index: &AnnotationIndex,
    selection: &SetSelection,
    images_root: &Path,
    mask_dir: Option<&Path>,
    include_crowd: bool,
) -> Result<(Vec<ManifestRow>, Vec<ManifestRow>)> {
    let image_path = |id: u64| -> Result<String> {
        let rec = index
            .image(id)
            .ok_or_else(|| Error::validation(format!("unknown image id {id}")))?;
        Ok(images_root.join(&rec.file_name).to_string_lossy().into_owned())
    };
    let mut query = Vec::with_capacity(selection.query.len());
    for q in &selection.query {
        let mask_path = match mask_dir {
            Some(dir) => {
                let mask: BinaryMask = super::coco::build_class_mask(
                    index,
                    q.image_id,
                    selection.category_id,
                    include_crowd,
                )?;
                let p = dir.join(format!("{}_k0.png", q.image_id));
                mask.save_png(&p)?;
                Some(p.to_string_lossy().into_owned())
            }
            None => None,
        };
        query.push(ManifestRow {
            id: q.image_id.to_string(),
            image_path: image_path(q.image_id)?,
            mask_path,
            role: Role::Query,
            coverage: q.coverage,
            kernel_size: 0,
            variant: None,
            contains_target: Some(true),
        });
    }
    let comparison = selection
        .comparison
        .iter()
        .map(|&id| {
            Ok(ManifestRow {
                id: id.to_string(),
                image_path: image_path(id)?,
                mask_path: None,
                role: Role::Comparison,
                coverage: 0.0,
                kernel_size: 0,
                variant: None,
                contains_target: Some(false),
            })
        })
        .collect::<Result<_>>()?;
    Ok((query, comparison))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_layout() {
        let row = ManifestRow {
            id: "7".into(),
            image_path: "imgs/7.png".into(),
            mask_path: None,
            role: Role::Comparison,
            coverage: 0.0,
            kernel_size: 0,
            variant: None,
            contains_target: None,
        };
        let v = serde_json::to_value(&row).unwrap();
        assert_eq!(
            v,
            serde_json::json!({"id": "7", "image_path": "imgs/7.png", "mask_path": null,
                "role": "comparison", "coverage": 0.0, "kernel_size": 0})
        );
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.json");
        write_manifest(&[row.clone()], &p).unwrap();
        assert_eq!(read_manifest(&p).unwrap(), vec![row]);
    }

    #[test]
    fn bad_role_is_parse_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.json");
        std::fs::write(
            &p,
            r#"[{"id": "1", "image_path": "x", "mask_path": null, "role": "other", "coverage": 0, "kernel_size": 0}]"#,
        )
        .unwrap();
        assert!(matches!(read_manifest(&p), Err(Error::Parse { .. })));
    }

    #[test]
    fn relative_paths_follow_manifest() {
        assert_eq!(
            resolve_path(Path::new("/data/run/m.json"), "imgs/a.png"),
            PathBuf::from("/data/run/imgs/a.png")
        );
        assert_eq!(resolve_path(Path::new("/data/m.json"), "/abs.png"), PathBuf::from("/abs.png"));
    }
}
