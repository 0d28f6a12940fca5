use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::remover::{apply_remover, Remover};
use super::scene::{generate_scene_pair, SceneSpec};
use crate::dataset::{dilate, write_manifest, ManifestRow, Role, DEFAULT_KERNELS};
use crate::error::{Error, Result};

pub const MANIFEST_NAME: &str = "manifest.json";

/// What to render besides the scenes themselves.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkPlan {
    /// Query scenes, indices `0..n_scenes`.
    pub n_scenes: usize,
    /// Further scenes, indices `n_scenes..n_scenes + comparison_scenes`,
    /// emitted with and without targets under the comparison role.
    pub comparison_scenes: usize,
    pub methods: Vec<Remover>,
    pub kernels: Vec<u32>,
}

impl BenchmarkPlan {
    pub fn new(n_scenes: usize) -> Self {
        Self {
            n_scenes,
            comparison_scenes: 0,
            methods: Remover::ALL.to_vec(),
            kernels: DEFAULT_KERNELS.to_vec(),
        }
    }
}

pub fn scene_id(index: u64) -> String {
    format!("scene_{index:06}")
}

fn noise_seed(base: u64, index: u64, kernel: u32) -> u64 {
    base ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (kernel as u64).rotate_left(40)
}

fn rel(p: &[&str]) -> String {
    p.join("/")
}

fn ensure_dir(p: &Path) -> Result<()> {
    std::fs::create_dir_all(p).map_err(|e| Error::io(p, e))
}

/// Writes the benchmark under `out_dir` and returns the manifest path.
///
/// Layout: `with/`, `without/`, `masks/<id>_k<k>.png`,
/// `removed/<method>/k<k>/<id>.png`, plus `manifest.json` with paths
/// relative to it. Query scenes produce `2 + methods × kernels` rows each.
pub fn emit_benchmark(spec: &SceneSpec, plan: &BenchmarkPlan, out_dir: &Path) -> Result<PathBuf> {
    spec.validate()?;
    let mut dirs = vec![out_dir.to_owned()];
    if plan.n_scenes + plan.comparison_scenes > 0 {
        dirs.extend([out_dir.join("with"), out_dir.join("without")]);
    }
    if plan.n_scenes > 0 {
        dirs.push(out_dir.join("masks"));
        for m in &plan.methods {
            for k in &plan.kernels {
                dirs.push(out_dir.join("removed").join(m.name()).join(format!("k{k}")));
            }
        }
    }
    for d in &dirs {
        ensure_dir(d)?;
    }

    let query: Vec<Vec<ManifestRow>> = (0..plan.n_scenes as u64)
        .into_par_iter()
        .map(|index| emit_query_scene(spec, plan, index, out_dir))
        .collect::<Result<_>>()?;
    let start = plan.n_scenes as u64;
    let comparison: Vec<Vec<ManifestRow>> = (start..start + plan.comparison_scenes as u64)
        .into_par_iter()
        .map(|index| emit_comparison_scene(spec, index, out_dir))
        .collect::<Result<_>>()?;

    let rows: Vec<ManifestRow> = query.into_iter().chain(comparison).flatten().collect();
    let manifest = out_dir.join(MANIFEST_NAME);
    write_manifest(&rows, &manifest)?;
    Ok(manifest)
}

fn emit_query_scene(
    spec: &SceneSpec,
    plan: &BenchmarkPlan,
    index: u64,
    out_dir: &Path,
) -> Result<Vec<ManifestRow>> {
    let id = scene_id(index);
    let scene = generate_scene_pair(spec, index)?;
    let file = format!("{id}.png");
    let with_rel = rel(&["with", &file]);
    let without_rel = rel(&["without", &file]);
    scene.with.save_png(&out_dir.join(&with_rel))?;
    scene.without.save_png(&out_dir.join(&without_rel))?;

    let base_mask = rel(&["masks", &format!("{id}_k0.png")]);
    let mut rows = vec![
        ManifestRow {
            id: id.clone(),
            image_path: with_rel,
            mask_path: Some(base_mask.clone()),
            role: Role::Query,
            coverage: scene.coverage,
            kernel_size: 0,
            variant: Some("with".into()),
            contains_target: Some(!scene.mask.is_empty()),
        },
        ManifestRow {
            id: id.clone(),
            image_path: without_rel,
            mask_path: Some(base_mask),
            role: Role::Query,
            coverage: scene.coverage,
            kernel_size: 0,
            variant: Some("without".into()),
            contains_target: Some(false),
        },
    ];

    let mut written_masks = Vec::new();
    for &k in &plan.kernels {
        let mask = dilate(&scene.mask, k);
        let mask_rel = rel(&["masks", &format!("{id}_k{k}.png")]);
        if !written_masks.contains(&k) {
            mask.save_png(&out_dir.join(&mask_rel))?;
            written_masks.push(k);
        }
        for &m in &plan.methods {
            let method = match m {
                Remover::NoiseFill { seed } => Remover::NoiseFill {
                    seed: noise_seed(seed ^ spec.seed, index, k),
                },
                other => other,
            };
            let out = apply_remover(&scene.with, &scene.without, &mask, method)?;
            let img_rel = rel(&["removed", m.name(), &format!("k{k}"), &file]);
            out.save_png(&out_dir.join(&img_rel))?;
            rows.push(ManifestRow {
                id: id.clone(),
                image_path: img_rel,
                mask_path: Some(mask_rel.clone()),
                role: Role::Query,
                coverage: mask.coverage(),
                kernel_size: k,
                variant: Some(m.name().into()),
                contains_target: None,
            });
        }
    }
    if !plan.kernels.contains(&0) {
        scene.mask.save_png(&out_dir.join(rel(&["masks", &format!("{id}_k0.png")])))?;
    }
    Ok(rows)
}

fn emit_comparison_scene(spec: &SceneSpec, index: u64, out_dir: &Path) -> Result<Vec<ManifestRow>> {
    let id = scene_id(index);
    let scene = generate_scene_pair(spec, index)?;
    let file = format!("{id}.png");
    let with_rel = rel(&["with", &file]);
    let without_rel = rel(&["without", &file]);
    scene.with.save_png(&out_dir.join(&with_rel))?;
    scene.without.save_png(&out_dir.join(&without_rel))?;
    Ok(vec![
        ManifestRow {
            id: id.clone(),
            image_path: with_rel,
            mask_path: None,
            role: Role::Comparison,
            coverage: scene.coverage,
            kernel_size: 0,
            variant: Some("with".into()),
            contains_target: Some(!scene.mask.is_empty()),
        },
        ManifestRow {
            id,
            image_path: without_rel,
            mask_path: None,
            role: Role::Comparison,
            coverage: 0.0,
            kernel_size: 0,
            variant: Some("without".into()),
            contains_target: Some(false),
        },
    ])
}
