use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use removal_eval::dataset::{
    dilate as dilate_mask, parse_annotations, read_manifest, resolve_path,
    selection_manifests, write_manifest, BinaryMask, CoverageBand, ManifestRow, Role,
};
use removal_eval::evaluation::{
    evaluate_unpaired, rank_removers, subsample_stability, ComparisonSet, MetricReport, QuerySet,
    StabilityOptions,
};
use removal_eval::features::{extract_paths, read_features, Extractor, ExtractorSpec};
use removal_eval::paired::{import_pair_distances, read_image_pairs, read_pairing};
use removal_eval::synth::{emit_benchmark, BenchmarkPlan, Remover, SceneSpec};
use removal_eval::{Error, FeatureMatrix, Scalar};
use serde_json::json;

use crate::exit::{CmdResult, Failure, DATA, ENVIRONMENT};
use crate::meta::{read_meta, sidecar, write_json, write_meta, FeatureMeta};
use crate::{
    DilateArgs, EvalArgs, ExtractArgs, Precision, RankArgs, RoleArg, RsdArgs, SelectArgs,
    SynthArgs,
};

const UNKNOWN_FINGERPRINT: &str = "unknown";

fn io_error(path: &Path, e: std::io::Error) -> Failure {
    Error::Io {
        path: path.to_owned(),
        source: e,
    }
    .into()
}

fn write_output(out: Option<&Path>, text: &str) -> CmdResult {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| io_error(p, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn list_pngs(dir: &Path) -> Result<Vec<(String, PathBuf)>, Failure> {
    let entries = std::fs::read_dir(dir).map_err(|e| io_error(dir, e))?;
    let mut items = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| io_error(dir, e))?.path();
        let is_png = path
            .extension()
            .is_some_and(|x| x.eq_ignore_ascii_case("png"));
        if path.is_file() && is_png {
            let id = path.file_stem().unwrap_or_default().to_string_lossy().into_owned();
            items.push((id, path));
        }
    }
    items.sort();
    Ok(items)
}

pub fn extract(a: &ExtractArgs, echo: &serde_json::Value) -> CmdResult {
    let spec = match a.backend.into() {
        removal_eval::features::Backend::Toy => ExtractorSpec::toy(),
        removal_eval::features::Backend::Neural => {
            let model = a
                .model
                .as_deref()
                .ok_or_else(|| Failure::usage("--backend neural needs --model"))?;
            ExtractorSpec::neural(model, a.input_edge, a.output_dim)?
        }
        removal_eval::features::Backend::Precomputed => {
            let table = a
                .model
                .as_deref()
                .ok_or_else(|| Failure::usage("--backend precomputed needs --model <features>"))?;
            ExtractorSpec::precomputed(table)?
        }
    };

    let (items, declared) = match (&a.images, &a.manifest) {
        (Some(dir), _) => (list_pngs(dir)?, None),
        (None, Some(manifest)) => {
            let rows: Vec<ManifestRow> = read_manifest(manifest)?
                .into_iter()
                .filter(|r| match a.role {
                    Some(RoleArg::Query) => r.role == Role::Query,
                    Some(RoleArg::Comparison) => r.role == Role::Comparison,
                    None => true,
                })
                .filter(|r| a.variant.as_ref().is_none_or(|v| r.variant.as_ref() == Some(v)))
                .filter(|r| a.kernel.is_none_or(|k| r.kernel_size == k))
                .collect();
            let declared = if rows.iter().all(|r| r.contains_target == Some(false)) {
                Some(false)
            } else if rows.iter().any(|r| r.contains_target == Some(true)) {
                Some(true)
            } else {
                None
            };
            let items = rows
                .iter()
                .map(|r| (r.id.clone(), resolve_path(manifest, &r.image_path)))
                .collect();
            (items, declared)
        }
        (None, None) => return Err(Failure::usage("either --images or --manifest is required")),
    };
    if items.is_empty() {
        return Err(Failure::new(DATA, "no input images selected"));
    }

    let extractor = Extractor::new(&spec)?;
    let features: FeatureMatrix<f32> = extract_paths(&items, &extractor)?;
    removal_eval::features::write_features(&features, &a.out)?;
    write_meta(
        &FeatureMeta {
            extractor: spec,
            count: features.len(),
            contains_target: a.contains_target.or(declared),
            run: echo.clone(),
        },
        &a.out,
    )?;
    eprintln!("wrote {} rows of dimension {} to {}", features.len(), features.dim(), a.out.display());
    Ok(())
}

fn coverage_band(a: &SelectArgs) -> Result<CoverageBand, Failure> {
    if !(0.0..=1.0).contains(&a.min_cov) || !(0.0..=1.0).contains(&a.max_cov) || a.min_cov >= a.max_cov
    {
        return Err(Failure::usage(format!(
            "coverage band needs 0 <= --min-cov < --max-cov <= 1, got {} and {}",
            a.min_cov, a.max_cov
        )));
    }
    CoverageBand::new(a.min_cov, a.max_cov).map_err(|e| Failure::usage(e.to_string()))
}

pub fn select_sets(a: &SelectArgs, echo: &serde_json::Value) -> CmdResult {
    let band = coverage_band(a)?;
    let text = std::fs::read_to_string(&a.annotations).map_err(|e| io_error(&a.annotations, e))?;
    let index = parse_annotations(&text).map_err(|e| match e {
        Error::Parse { path, message } => Failure::new(
            ENVIRONMENT,
            format!("{}: parse error at {path}: {message}", a.annotations.display()),
        ),
        other => Failure::new(ENVIRONMENT, format!("{}: {other}", a.annotations.display())),
    })?;
    // Category ids are positive, so 0 matches no instance: every image then
    // lands in the comparison set and the query set stays empty.
    let category = index.category_id(&a.category).unwrap_or_else(|| {
        eprintln!("warning: category {:?} not found in {}", a.category, a.annotations.display());
        0
    });
    let include_crowd = !a.exclude_crowd;
    let selection = removal_eval::dataset::select_sets(&index, category, band, include_crowd)?;
    if let Some(dir) = &a.mask_dir {
        std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    }
    let (query, comparison) = selection_manifests(
        &index,
        &selection,
        &a.images_root,
        a.mask_dir.as_deref(),
        include_crowd,
    )?;
    write_manifest(&query, &a.out_query)?;
    write_manifest(&comparison, &a.out_comparison)?;
    write_json(
        &json!({
            "run": echo,
            "category_id": category,
            "query": query.len(),
            "comparison": comparison.len(),
            "excluded": selection.excluded.len(),
        }),
        &sidecar(&a.out_query, ".run.json"),
    )?;
    eprintln!(
        "query {} / comparison {} / excluded {}",
        query.len(),
        comparison.len(),
        selection.excluded.len()
    );
    Ok(())
}

pub fn dilate(a: &DilateArgs, echo: &serde_json::Value) -> CmdResult {
    let rows = read_manifest(&a.manifest)?;
    let mask_dir = a.out_dir.join("masks");
    std::fs::create_dir_all(&mask_dir).map_err(|e| io_error(&mask_dir, e))?;

    let missing: Vec<&str> = rows
        .iter()
        .filter(|r| r.mask_path.is_none())
        .map(|r| r.id.as_str())
        .collect();
    if !missing.is_empty() {
        return Err(Failure::new(DATA, format!("rows without a mask: {}", missing.join(", "))));
    }

    let mut out = Vec::new();
    let mut failures = Vec::new();
    for row in &rows {
        let mask_src = resolve_path(&a.manifest, row.mask_path.as_deref().expect("checked above"));
        let mask = match BinaryMask::load_png(&mask_src) {
            Ok(m) => m,
            Err(e) => {
                failures.push(format!("{}: {e}", row.id));
                continue;
            }
        };
        let image = std::path::absolute(resolve_path(&a.manifest, &row.image_path))
            .map_err(|e| io_error(&a.manifest, e))?;
        for &k in &a.kernels {
            let dilated = dilate_mask(&mask, k);
            let rel = format!("masks/{}_k{k}.png", row.id);
            dilated.save_png(&a.out_dir.join(&rel))?;
            out.push(ManifestRow {
                id: row.id.clone(),
                image_path: image.to_string_lossy().into_owned(),
                mask_path: Some(rel),
                role: row.role,
                coverage: dilated.coverage(),
                kernel_size: k,
                variant: row.variant.clone(),
                contains_target: row.contains_target,
            });
        }
    }
    if !failures.is_empty() {
        return Err(Failure::new(DATA, format!("unreadable masks:\n  {}", failures.join("\n  "))));
    }
    write_manifest(&out, &a.out_dir.join("manifest.json"))?;
    write_json(&json!({ "run": echo }), &a.out_dir.join("run.json"))?;
    Ok(())
}

struct LoadedSet<T> {
    features: FeatureMatrix<T>,
    meta: Option<FeatureMeta>,
}

impl<T: Scalar> LoadedSet<T> {
    fn load(path: &Path) -> Result<Self, Failure> {
        Ok(Self {
            features: read_features(path)?,
            meta: read_meta(path)?,
        })
    }

    fn fingerprint(&self) -> String {
        self.meta
            .as_ref()
            .map_or(UNKNOWN_FINGERPRINT.to_string(), |m| m.extractor.fingerprint.clone())
    }

    /// Undeclared content is treated as possibly containing the target class.
    fn contains_target(&self, override_: Option<bool>) -> bool {
        override_
            .or(self.meta.as_ref().and_then(|m| m.contains_target))
            .unwrap_or(true)
    }
}

fn comparison_set<T: Scalar>(
    path: &Path,
    override_: Option<bool>,
) -> Result<(ComparisonSet<T>, bool), Failure> {
    let loaded = LoadedSet::<T>::load(path)?;
    let declared = override_.is_some() || loaded.meta.as_ref().is_some_and(|m| m.contains_target.is_some());
    let fp = loaded.fingerprint();
    let contains = loaded.contains_target(override_);
    Ok((ComparisonSet::new(loaded.features, &fp, contains)?, declared))
}

fn eval_typed<T: Scalar>(a: &EvalArgs, echo: &serde_json::Value) -> CmdResult {
    let query = LoadedSet::<T>::load(&a.query)?;
    let (comparison, declared) = comparison_set::<T>(&a.comparison, a.comparison_contains_target)?;
    let fingerprint = query.fingerprint();
    let band = match (a.min_cov, a.max_cov) {
        (Some(lo), Some(hi)) => Some(CoverageBand::new(lo, hi).map_err(|e| Failure::usage(e.to_string()))?),
        _ => None,
    };
    let label = a.label.clone().unwrap_or_else(|| {
        a.query.file_stem().unwrap_or_default().to_string_lossy().into_owned()
    });
    let svm = a.svm.config(a.seed);
    let qs = QuerySet {
        remover: &label,
        features: &query.features,
        fingerprint: &fingerprint,
        kernel_size: a.kernel,
        coverage_band: band,
    };
    let mut report = evaluate_unpaired(&qs, &comparison, &svm, a.starred)?;
    if !declared {
        report
            .config
            .notes
            .push("comparison set declares no target-class content; treated as containing it".into());
    }
    if let Some(pairs) = &a.pairs {
        let pairing = read_pairing(pairs)?;
        match &a.pairs_real {
            Some(p) => {
                let real = LoadedSet::<T>::load(p)?;
                report.add_p_ids(&query.features, &real.features, &pairing)?;
            }
            None => report.add_p_ids(&query.features, comparison.features(), &pairing)?,
        }
    }
    if let Some(p) = &a.image_pairs {
        report.add_image_pairs(&read_image_pairs(p)?)?;
    }
    if let Some(p) = &a.lpips {
        report.add_pair_distances(&import_pair_distances(p, query.features.ids())?);
    }
    report.config.run = Some(echo.clone());
    write_output(a.out.as_deref(), &report.to_json())
}

pub fn eval(a: &EvalArgs, echo: &serde_json::Value) -> CmdResult {
    match a.precision {
        Precision::F32 => eval_typed::<f32>(a, echo),
        Precision::F64 => eval_typed::<f64>(a, echo),
    }
}

fn rsd_typed<T: Scalar>(a: &RsdArgs, echo: &serde_json::Value) -> CmdResult {
    let query = LoadedSet::<T>::load(&a.query)?;
    let (comparison, _) = comparison_set::<T>(&a.comparison, a.comparison_contains_target)?;
    if let Some(&too_big) = a.sizes.iter().find(|&&s| s > query.features.len()) {
        return Err(Failure::new(
            ENVIRONMENT,
            format!(
                "sample size {too_big} exceeds the {} rows of {}",
                query.features.len(),
                a.query.display()
            ),
        ));
    }
    let opts = StabilityOptions {
        sizes: a.sizes.clone(),
        iterations: a.iterations as usize,
        seed: a.seed,
        svm: a.svm.config(a.seed),
    };
    let table = subsample_stability(&query.features, &query.fingerprint(), &comparison, &opts)?;
    if let Some(out) = &a.out {
        write_json(
            &json!({ "run": echo, "rows": table.rows }),
            &sidecar(out, ".run.json"),
        )?;
    }
    write_output(a.out.as_deref(), &table.to_csv())
}

pub fn rsd(a: &RsdArgs, echo: &serde_json::Value) -> CmdResult {
    match a.precision {
        Precision::F32 => rsd_typed::<f32>(a, echo),
        Precision::F64 => rsd_typed::<f64>(a, echo),
    }
}

pub fn synth(a: &SynthArgs) -> CmdResult {
    let spec = SceneSpec {
        width: a.width,
        height: a.height,
        min_objects: a.min_objects,
        max_objects: a.max_objects,
        min_size: a.min_size,
        max_size: a.max_size,
        target_fraction: a.target_fraction,
        max_target_coverage: a.max_coverage,
        seed: a.seed,
        ..SceneSpec::default()
    };
    spec.validate().map_err(|e| Failure::usage(e.to_string()))?;
    let methods = a
        .methods
        .iter()
        .map(|m| m.parse::<Remover>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| Failure::usage(e.to_string()))?;
    let plan = BenchmarkPlan {
        n_scenes: a.n_scenes,
        comparison_scenes: a.comparison_scenes,
        methods,
        kernels: a.kernels.clone(),
    };
    let manifest = emit_benchmark(&spec, &plan, &a.out_dir)?;
    // Paths are left out so that reruns into other directories match.
    write_json(
        &json!({
            "spec": spec,
            "n_scenes": plan.n_scenes,
            "comparison_scenes": plan.comparison_scenes,
            "methods": plan.methods.iter().map(|m| m.name()).collect::<Vec<_>>(),
            "kernels": plan.kernels,
        }),
        &a.out_dir.join("run.json"),
    )?;
    eprintln!("wrote {}", manifest.display());
    Ok(())
}

pub fn rank(a: &RankArgs) -> CmdResult {
    let reports = a
        .reports
        .iter()
        .map(|p| MetricReport::read(p))
        .collect::<Result<Vec<_>, _>>()?;
    let rankings = rank_removers(&reports)?;
    let by_metric: BTreeMap<&str, _> = rankings.iter().map(|r| (r.metric.as_str(), r)).collect();
    let mut text = serde_json::to_string_pretty(&by_metric).expect("rankings serialize");
    text.push('\n');
    write_output(a.out.as_deref(), &text)
}
