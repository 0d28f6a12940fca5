use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_removal-eval");

fn run(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env_remove("REMOVAL_EVAL_THREADS")
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert_eq!(code(&out), 0, "{args:?}: {}", stderr(&out));
    out
}

/// Synthetic benchmark with a clean comparison split.
fn bench(dir: &Path, scenes: &str) -> PathBuf {
    let root = dir.join("bench");
    ok(&[
        "synth", "--out-dir", p(&root), "--n-scenes", scenes, "--comparison-scenes", scenes,
        "--seed", "3", "--width", "48", "--height", "48", "--methods", "gt_paste,no_removal",
        "--kernels", "0",
    ]);
    root.join("manifest.json")
}

fn extract(manifest: &Path, role: &str, variant: &str, out: &Path) {
    ok(&[
        "extract", "--manifest", p(manifest), "--role", role, "--variant", variant, "--out", p(out),
    ]);
}

fn write_png(path: &Path, w: u32, h: u32, seed: u8) {
    let mut img = image::RgbImage::new(w, h);
    for (x, y, px) in img.enumerate_pixels_mut() {
        *px = image::Rgb([(x as u8).wrapping_mul(seed), (y as u8).wrapping_add(seed), seed]);
    }
    img.save(path).unwrap();
}

fn bytes(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap()
}

#[test]
fn help_and_usage_errors() {
    assert_eq!(code(&run(&["--help"])), 0);
    assert_eq!(code(&run(&["frobnicate"])), 64);
    assert_eq!(code(&run(&["eval", "--query", "x"])), 64);
}

#[test]
fn extract_directory_and_failures() {
    let dir = tempfile::tempdir().unwrap();
    let imgs = dir.path().join("imgs");
    std::fs::create_dir(&imgs).unwrap();
    for k in 0..3u8 {
        write_png(&imgs.join(format!("im{k}.png")), 16, 12, k + 1);
    }
    let out = dir.path().join("f.feat");
    ok(&["extract", "--images", p(&imgs), "--out", p(&out)]);
    assert!(out.is_file());
    let meta: Value = serde_json::from_slice(&std::fs::read(dir.path().join("f.feat.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["count"], 3);

    let missing = dir.path().join("nope");
    let r = run(&["extract", "--images", p(&missing), "--out", p(&out)]);
    assert_eq!(code(&r), 2);
    assert!(stderr(&r).contains("nope"), "{}", stderr(&r));

    std::fs::write(imgs.join("broken.png"), b"not a png").unwrap();
    let r = run(&["extract", "--images", p(&imgs), "--out", p(&out)]);
    assert_eq!(code(&r), 1);
    assert!(stderr(&r).contains("broken"), "{}", stderr(&r));
}

#[test]
fn extraction_does_not_depend_on_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let imgs = dir.path().join("imgs");
    std::fs::create_dir(&imgs).unwrap();
    for k in 0..12u8 {
        write_png(&imgs.join(format!("im{k:02}.png")), 20, 20, k + 1);
    }
    let a = dir.path().join("a.feat");
    let b = dir.path().join("b.feat");
    ok(&["--threads", "1", "extract", "--images", p(&imgs), "--out", p(&a)]);
    ok(&["--threads", "4", "extract", "--images", p(&imgs), "--out", p(&b)]);
    assert_eq!(bytes(&a), bytes(&b));
}

#[test]
fn select_sets_partitions_images() {
    let dir = tempfile::tempdir().unwrap();
    let ann = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/selection.json");
    let q = dir.path().join("q.json");
    let c = dir.path().join("c.json");
    ok(&[
        "select-sets", "--annotations", p(&ann), "--category", "person", "--out-query", p(&q),
        "--out-comparison", p(&c),
    ]);
    let q: Vec<Value> = serde_json::from_slice(&std::fs::read(&q).unwrap()).unwrap();
    let c: Vec<Value> = serde_json::from_slice(&std::fs::read(&c).unwrap()).unwrap();
    assert_eq!(q.len(), 1);
    assert_eq!(c.len(), 2);
    assert!(c.iter().all(|r| r["id"] != q[0]["id"]));

    let bad = run(&[
        "select-sets", "--annotations", p(&ann), "--category", "person", "--min-cov", "0.4",
        "--max-cov", "0.4", "--out-query", "q", "--out-comparison", "c",
    ]);
    assert_eq!(code(&bad), 64);

    let q2 = dir.path().join("q2.json");
    let c2 = dir.path().join("c2.json");
    let absent = ok(&[
        "select-sets", "--annotations", p(&ann), "--category", "zebra", "--out-query", p(&q2),
        "--out-comparison", p(&c2),
    ]);
    assert!(stderr(&absent).contains("warning"));
    let q2: Vec<Value> = serde_json::from_slice(&std::fs::read(&q2).unwrap()).unwrap();
    assert!(q2.is_empty());
}

#[test]
fn eval_rank_and_protocol_guard() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let m = bench(d, "40");
    let cmp = d.join("cmp.feat");
    let cmp_with = d.join("cmp_with.feat");
    let gt = d.join("gt.feat");
    let none = d.join("none.feat");
    extract(&m, "comparison", "without", &cmp);
    extract(&m, "comparison", "with", &cmp_with);
    extract(&m, "query", "gt_paste", &gt);
    extract(&m, "query", "no_removal", &none);

    let out = ok(&["eval", "--query", p(&cmp), "--comparison", p(&cmp), "--starred"]);
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(report["metrics"]["fid_star"].as_f64().unwrap().abs() < 1e-9);

    let r = run(&["eval", "--query", p(&gt), "--comparison", p(&cmp_with), "--starred"]);
    assert_eq!(code(&r), 3, "{}", stderr(&r));

    let pairs = d.join("pairs.csv");
    let mut csv = String::from("query_id,real_id\n");
    for i in 0..40 {
        csv.push_str(&format!("scene_{i:06},scene_{:06}\n", i + 40));
    }
    std::fs::write(&pairs, csv).unwrap();
    let rep_gt = d.join("gt.json");
    let rep_none = d.join("none.json");
    ok(&[
        "eval", "--query", p(&gt), "--comparison", p(&cmp), "--starred", "--pairs", p(&pairs),
        "--out", p(&rep_gt),
    ]);
    ok(&["eval", "--query", p(&none), "--comparison", p(&cmp), "--starred", "--out", p(&rep_none)]);
    let report: Value = serde_json::from_slice(&std::fs::read(&rep_gt).unwrap()).unwrap();
    assert!(report["metrics"]["p_ids"].is_number());
    assert_eq!(report["remover"], "gt");

    let ranking = ok(&["rank", p(&rep_gt), p(&rep_none)]);
    let ranking: Value = serde_json::from_slice(&ranking.stdout).unwrap();
    assert_eq!(ranking["u_ids_star"]["order"][0], "gt");
}

#[test]
fn rsd_rows_determinism_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let m = bench(d, "30");
    let cmp = d.join("cmp.feat");
    let q = d.join("q.feat");
    extract(&m, "comparison", "without", &cmp);
    extract(&m, "query", "no_removal", &q);

    let a = d.join("a.csv");
    let b = d.join("b.csv");
    let base = ["rsd", "--query", p(&q), "--comparison", p(&cmp), "--sizes", "10,20", "--iterations", "3"];
    ok(&[&base[..], &["--out", p(&a)]].concat());
    ok(&[&["--threads", "3"], &base[..], &["--out", p(&b)]].concat());
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text.lines().count(), 5, "{text}");
    assert_eq!(bytes(&a), bytes(&b));

    assert_eq!(code(&run(&[&base[..6], &["--iterations", "1"]].concat())), 64);
    let over = run(&["rsd", "--query", p(&q), "--comparison", p(&cmp), "--sizes", "31"]);
    assert_eq!(code(&over), 2, "{}", stderr(&over));
}

#[test]
fn synth_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    ok(&["synth", "--out-dir", p(&a), "--seed", "9", "--width", "40", "--height", "40"]);
    ok(&["synth", "--out-dir", p(&b), "--seed", "9", "--width", "40", "--height", "40"]);
    let rows: Vec<Value> = serde_json::from_slice(&std::fs::read(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(rows.len(), 10 * (2 + 4 * 6));
    for row in &rows {
        let rel = row["image_path"].as_str().unwrap();
        assert_eq!(bytes(&a.join(rel)), bytes(&b.join(rel)), "{rel}");
    }

    let blocker = dir.path().join("file");
    std::fs::write(&blocker, b"x").unwrap();
    let r = run(&["synth", "--out-dir", p(&blocker.join("sub")), "--n-scenes", "1"]);
    assert_eq!(code(&r), 2, "{}", stderr(&r));
}
