//! Acceptance suite. Each criterion prints one `PASS`/`FAIL` line; the test
//! fails if any criterion fails.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::path::Path;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use removal_eval::dataset::{build_class_mask, dilate, parse_annotations, BinaryMask};
use removal_eval::evaluation::{
    evaluate_unpaired, rank_removers, relative_std_percent, subsample_stability, ComparisonSet,
    MetricRanking, QuerySet, StabilityOptions, FID, FID_STAR, U_IDS_STAR,
};
use removal_eval::features::{decode_features, encode_features, toy_descriptor, ImageBuffer};
use removal_eval::paired::{psnr, ssim, ImagePair};
use removal_eval::stats::{compute_gaussian_stats, frechet_distance, sqrtm_psd, GaussianStats};
use removal_eval::svm::{p_ids, train_linear_svm, u_ids, SvmConfig};
use removal_eval::synth::{
    apply_remover, emit_benchmark, generate_scene_pair, scene_id, BenchmarkPlan, Remover,
    SceneSpec,
};
use removal_eval::{Features, Result};

struct Outcome {
    name: &'static str,
    passed: bool,
    detail: String,
}

fn check(name: &'static str, f: impl FnOnce() -> Result<(bool, String)>) -> Outcome {
    match f() {
        Ok((passed, detail)) => Outcome {
            name,
            passed,
            detail,
        },
        Err(e) => Outcome {
            name,
            passed: false,
            detail: format!("error: {e}"),
        },
    }
}

fn random_features(prefix: &str, n: usize, d: usize, rng: &mut ChaCha8Rng) -> Features {
    Features::from_rows((0..n).map(|i| {
        let row = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        (format!("{prefix}{i}"), row)
    }))
    .unwrap()
}

fn gaussian(mean: Vec<f64>, cov: Vec<f64>) -> GaussianStats<f64> {
    let d = mean.len();
    GaussianStats::new(DVector::from_vec(mean), DMatrix::from_row_slice(d, d, &cov), 10).unwrap()
}

fn closed_form_frechet() -> Result<(bool, String)> {
    let start = Instant::now();
    let one_d = frechet_distance(&gaussian(vec![0.0], vec![1.0]), &gaussian(vec![1.0], vec![1.0]))?;
    let two_d = frechet_distance(
        &gaussian(vec![0.0, 0.0], vec![1.0, 0.0, 0.0, 1.0]),
        &gaussian(vec![0.0, 0.0], vec![4.0, 0.0, 0.0, 4.0]),
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let set = compute_gaussian_stats(&random_features("x", 500, 64, &mut rng))?;
    let own = frechet_distance(&set, &set)?;
    let elapsed = start.elapsed();
    let ok = (one_d - 1.0).abs() <= 1e-9
        && (two_d - 2.0).abs() <= 1e-9
        && own.abs() <= 1e-6
        && elapsed < Duration::from_secs(1);
    Ok((ok, format!("1-D {one_d}, 2-D {two_d}, self {own:e}, {elapsed:?}")))
}

fn sqrtm_property() -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let b = DMatrix::from_fn(64, 64, |_, _| rng.random_range(-1.0..1.0));
        let a = &b * b.transpose() + DMatrix::identity(64, 64) * 1e-3;
        let s = sqrtm_psd(&a)?;
        worst = worst.max((&s * &s - &a).norm() / a.norm());
    }
    Ok((worst <= 1e-8, format!("max relative residual {worst:e}")))
}

fn brute_dilate(m: &BinaryMask, k: u32) -> BinaryMask {
    let (w, h) = (m.width() as i64, m.height() as i64);
    let mut out = BinaryMask::empty(m.width(), m.height());
    if k <= 1 {
        return m.clone();
    }
    let a = (k / 2) as i64;
    for r in 0..h {
        for c in 0..w {
            let mut on = false;
            for dr in 0..k as i64 {
                for dc in 0..k as i64 {
                    let (rr, cc) = (r + dr - a, c + dc - a);
                    if (0..h).contains(&rr) && (0..w).contains(&cc) && m.get(rr as usize, cc as usize)
                    {
                        on = true;
                    }
                }
            }
            out.set(r as usize, c as usize, on);
        }
    }
    out
}

fn dilation_oracle() -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let kernels = [0u32, 1, 2, 3, 5, 10];
    let mut mismatches = 0;
    let mut order_violations = 0;
    for _ in 0..100 {
        let density = rng.random_range(0.0..0.2);
        let bits = (0..32 * 32).map(|_| rng.random_bool(density)).collect();
        let m = BinaryMask::from_bits(32, 32, bits)?;
        let mut previous = m.clone();
        for &k in &kernels {
            let d = dilate(&m, k);
            if d.bits() != brute_dilate(&m, k).bits() {
                mismatches += 1;
            }
            if !m.is_subset_of(&d) || !previous.is_subset_of(&d) {
                order_violations += 1;
            }
            previous = d;
        }
    }
    Ok((
        mismatches == 0 && order_violations == 0,
        format!("{mismatches} oracle mismatches, {order_violations} monotonicity/extensivity violations"),
    ))
}

fn svm_scores() -> Result<(bool, String)> {
    let cfg = SvmConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let shifted = |prefix: &str, shift: f64, rng: &mut ChaCha8Rng| {
        let base = random_features(prefix, 100, 8, rng);
        let rows: Vec<_> = base
            .ids()
            .iter()
            .zip(base.rows())
            .map(|(id, r)| {
                let mut r = r.to_vec();
                r[0] += shift;
                (id.clone(), r)
            })
            .collect();
        Features::from_rows(rows)
    };
    let pos = shifted("p", 10.0, &mut rng)?;
    let neg = shifted("n", -10.0, &mut rng)?;
    let separable = u_ids(&pos, &neg, &cfg)?;

    let mut rng7 = ChaCha8Rng::seed_from_u64(7);
    let same = random_features("s", 200, 64, &mut rng7);
    let identical = u_ids(&same, &same, &cfg)?;

    // Real rows around +5·e1; fakes are paired copies shifted along e1.
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let real = shifted("r", 5.0, &mut rng)?;
    let pairing: HashMap<String, String> =
        real.ids().iter().map(|id| (format!("f{id}"), id.clone())).collect();
    let fake_from = |offset: &dyn Fn(usize) -> f64| {
        Features::from_rows(
            real.ids()
                .iter()
                .zip(real.rows())
                .enumerate()
                .map(|(i, (id, r))| {
                    let mut r = r.to_vec();
                    r[0] += offset(i);
                    (format!("f{id}"), r)
                })
                .collect::<Vec<_>>(),
        )
        .unwrap()
    };
    let worse = fake_from(&|_| -20.0);
    let all_worse = p_ids(&real, &worse, &pairing, &cfg)?;
    let half = fake_from(&|i| if i % 2 == 0 { 0.5 } else { -20.0 });
    let half_split = p_ids(&real, &half, &pairing, &cfg)?;

    // Independent pair scan over the trained decision values.
    let f = train_linear_svm(&real, &half, &cfg)?;
    let real_index = real.id_index();
    let wins = half
        .ids()
        .iter()
        .zip(half.rows())
        .filter(|(id, row)| {
            let r = real.row(real_index[pairing[id.as_str()].as_str()]);
            f.decision(row) > f.decision(r)
        })
        .count();
    let scanned = wins as f64 / half.len() as f64;

    let ok = separable == 0.0
        && identical >= 0.45
        && all_worse == 0.0
        && half_split == 0.5
        && scanned == half_split;
    Ok((
        ok,
        format!(
            "separable {separable}, identical {identical:.4}, all-worse P-IDS {all_worse}, half-split P-IDS {half_split} (scan {scanned})"
        ),
    ))
}

fn paired_metrics() -> Result<(bool, String)> {
    let a = ImageBuffer::filled(32, 32, &[100, 100, 100])?;
    let b = ImageBuffer::filled(32, 32, &[101, 101, 101])?;
    let p = psnr(&ImagePair::new("d1", a.clone(), b)?);
    let gray = |v| ImageBuffer::filled(32, 32, &[v]);
    let s = ssim(&ImagePair::new("c", gray(100)?, gray(150)?)?)?;
    let same_psnr = psnr(&ImagePair::new("id", a.clone(), a.clone())?);
    let same_ssim = ssim(&ImagePair::new("id", a.clone(), a)?)?;
    let ok = (p - 48.1308).abs() <= 1e-3
        && (s - 0.9231).abs() <= 1e-4
        && same_psnr == f64::INFINITY
        && same_ssim == 1.0;
    Ok((ok, format!("PSNR {p:.4} dB, SSIM {s:.5}, identity PSNR {same_psnr}, identity SSIM {same_ssim}")))
}

fn toy(img: &ImageBuffer, id: String) -> (String, Vec<f64>) {
    (id, toy_descriptor(img).to_vec())
}

/// Toy features of the query scenes after each remover (kernel 0) and of
/// the comparison scenes rendered with and without targets.
struct SyntheticFeatures {
    query: BTreeMap<&'static str, Features>,
    clean: Features,
    contaminated: Features,
}

fn synthetic_features(
    spec: &SceneSpec,
    n_query: usize,
    n_comparison: usize,
    methods: &[Remover],
) -> Result<SyntheticFeatures> {
    let query_rows: Vec<Vec<(String, Vec<f64>)>> = (0..n_query as u64)
        .into_par_iter()
        .map(|i| {
            let s = generate_scene_pair(spec, i)?;
            methods
                .iter()
                .map(|&m| {
                    let method = match m {
                        Remover::NoiseFill { .. } => Remover::NoiseFill { seed: i },
                        other => other,
                    };
                    let out = apply_remover(&s.with, &s.without, &s.mask, method)?;
                    Ok(toy(&out, scene_id(i)))
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let start = n_query as u64;
    let comparison: Vec<((String, Vec<f64>), (String, Vec<f64>))> = (start
        ..start + n_comparison as u64)
        .into_par_iter()
        .map(|i| {
            let s = generate_scene_pair(spec, i)?;
            Ok((toy(&s.without, scene_id(i)), toy(&s.with, scene_id(i))))
        })
        .collect::<Result<_>>()?;

    let mut query = BTreeMap::new();
    for (k, m) in methods.iter().enumerate() {
        let rows: Vec<_> = query_rows.iter().map(|r| r[k].clone()).collect();
        query.insert(m.name(), Features::from_rows(rows)?);
    }
    let (clean, contaminated): (Vec<_>, Vec<_>) = comparison.into_iter().unzip();
    Ok(SyntheticFeatures {
        query,
        clean: Features::from_rows(clean)?,
        contaminated: Features::from_rows(contaminated)?,
    })
}

fn ranking_for<'a>(rankings: &'a [MetricRanking], metric: &str) -> Option<&'a MetricRanking> {
    rankings.iter().find(|r| r.metric == metric)
}

fn end_to_end_ranking() -> Result<(bool, String)> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    pool.install(|| {
        let start = Instant::now();
        let spec = SceneSpec {
            seed: 42,
            ..SceneSpec::default()
        };
        let methods = [Remover::GtPaste, Remover::MeanFill, Remover::NoRemoval];
        let feats = synthetic_features(&spec, 500, 500, &methods)?;
        let cfg = SvmConfig::default();
        let clean = ComparisonSet::new(feats.clean, "toy", false)?;
        let dirty = ComparisonSet::new(feats.contaminated, "toy", true)?;
        let mut starred = Vec::new();
        let mut unstarred = Vec::new();
        for (label, q) in &feats.query {
            let query = QuerySet {
                remover: label,
                features: q,
                fingerprint: "toy",
                kernel_size: Some(0),
                coverage_band: None,
            };
            starred.push(evaluate_unpaired(&query, &clean, &cfg, true)?);
            unstarred.push(evaluate_unpaired(&query, &dirty, &cfg, false)?);
        }
        let star_rank = rank_removers(&starred)?;
        let dirty_rank = rank_removers(&unstarred)?;
        let fid_star = ranking_for(&star_rank, FID_STAR).expect("fid_star ranked");
        let uids_star = ranking_for(&star_rank, U_IDS_STAR).expect("u_ids_star ranked");
        let fid = ranking_for(&dirty_rank, FID).expect("fid ranked");
        let elapsed = start.elapsed();

        let values = |reports: &[removal_eval::evaluation::MetricReport], metric: &str| {
            reports
                .iter()
                .map(|r| format!("{}={:.4}", r.remover, r.metrics[metric]))
                .collect::<Vec<_>>()
                .join(" ")
        };
        let ok = fid_star.best() == "gt_paste"
            && fid_star.worst() == "no_removal"
            && fid_star.ties.is_empty()
            && uids_star.best() == "gt_paste"
            && uids_star.worst() == "no_removal"
            && uids_star.ties.is_empty()
            && fid.position("no_removal") < fid_star.position("no_removal")
            && elapsed < Duration::from_secs(120);
        Ok((
            ok,
            format!(
                "FID* [{}] U-IDS* [{}] contaminated FID [{}]; no_removal FID* rank {:?} -> FID rank {:?}; {elapsed:?}",
                values(&starred, FID_STAR),
                values(&starred, U_IDS_STAR),
                values(&unstarred, FID),
                fid_star.position("no_removal"),
                fid.position("no_removal"),
            ),
        ))
    })
}

fn rsd_behaviour() -> Result<(bool, String)> {
    let constant = relative_std_percent(&[3.25; 20]);
    let spec = SceneSpec {
        seed: 42,
        ..SceneSpec::default()
    };
    let feats = synthetic_features(&spec, 2000, 500, &[Remover::MeanFill])?;
    let clean = ComparisonSet::new(feats.clean, "toy", false)?;
    let opts = StabilityOptions {
        sizes: vec![50, 1000],
        iterations: 20,
        seed: 42,
        svm: SvmConfig::default(),
    };
    let table = subsample_stability(&feats.query["mean_fill"], "toy", &clean, &opts)?;
    let small = table.get(FID_STAR, 50).expect("row").rsd_percent;
    let large = table.get(FID_STAR, 1000).expect("row").rsd_percent;
    let uids_small = table.get(U_IDS_STAR, 50).expect("row").rsd_percent;
    let uids_large = table.get(U_IDS_STAR, 1000).expect("row").rsd_percent;
    Ok((
        constant == 0.0 && large < small,
        format!(
            "constant RSD {constant}; FID* RSD {small:.3}% at 50 vs {large:.3}% at 1000 (U-IDS* {uids_small:.3}% vs {uids_large:.3}%)"
        ),
    ))
}

fn files_under(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_owned()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.insert(rel, std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn mask_from_rows(rows: &[&str]) -> BinaryMask {
    let bits = rows.iter().flat_map(|r| r.bytes().map(|b| b == b'#')).collect();
    BinaryMask::from_bits(rows[0].len() as u32, rows.len() as u32, bits).unwrap()
}

fn format_round_trips() -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let m = Features::from_rows((0..37).map(|i| {
        let row: Vec<f64> = (0..13).map(|_| rng.random_range(-1e3..1e3) as f32 as f64).collect();
        (format!("img-{i}-ü"), row)
    }))?;
    let bytes = encode_features(&m)?;
    let back: Features = decode_features(&bytes)?;
    let container_ok = back == m && encode_features(&back)? == bytes;

    let json = std::fs::read_to_string(
        Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/micro_annotations.json"),
    )
    .unwrap();
    let index = parse_annotations(&json)?;
    let expected = [
        (1, mask_from_rows(&[".#..", ".##.", "..#."])),
        (2, mask_from_rows(&[".....", ".###.", ".###.", ".###.", "....."])),
        (3, mask_from_rows(&["###.", "##..", "#...", "...."])),
    ];
    let masks_ok = expected
        .iter()
        .all(|(id, want)| build_class_mask(&index, *id, 1, true).map(|m| m.bits() == want.bits()).unwrap_or(false));

    let dir = tempfile::tempdir().unwrap();
    let spec = SceneSpec {
        seed: 42,
        ..SceneSpec::default()
    };
    let plan = BenchmarkPlan {
        comparison_scenes: 2,
        ..BenchmarkPlan::new(3)
    };
    emit_benchmark(&spec, &plan, &dir.path().join("a"))?;
    emit_benchmark(&spec, &plan, &dir.path().join("b"))?;
    let a = files_under(&dir.path().join("a"));
    let b = files_under(&dir.path().join("b"));
    let synth_ok = !a.is_empty() && a == b;

    Ok((
        container_ok && masks_ok && synth_ok,
        format!(
            "container {container_ok} ({} bytes), annotation fixtures {masks_ok}, synth rerun identical {synth_ok} ({} files)",
            bytes.len(),
            a.len()
        ),
    ))
}

#[test]
fn acceptance() {
    let outcomes = vec![
        check("closed-form Frechet distance", closed_form_frechet),
        check("matrix square root residual", sqrtm_property),
        check("dilation vs brute-force oracle", dilation_oracle),
        check("SVM unseparability and paired scores", svm_scores),
        check("PSNR and SSIM reference values", paired_metrics),
        check("end-to-end remover ranking", end_to_end_ranking),
        check("RSD behaviour", rsd_behaviour),
        check("format round-trips", format_round_trips),
    ];
    // Raw handle so the summary shows up without --nocapture.
    let mut out = std::io::stdout().lock();
    writeln!(out).unwrap();
    for o in &outcomes {
        let status = if o.passed { "PASS" } else { "FAIL" };
        writeln!(out, "{status} {}: {}", o.name, o.detail).unwrap();
    }
    writeln!(
        out,
        "INFO large-collection absolute scores, human votes and collection sizes are not checked here"
    )
    .unwrap();
    drop(out);
    let failed: Vec<_> = outcomes.iter().filter(|o| !o.passed).map(|o| o.name).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
