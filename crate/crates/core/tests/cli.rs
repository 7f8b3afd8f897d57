use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use layout_ensemble::dataset::load_annotations;
use layout_ensemble::ensemble::{
    fuse_classwise, fuse_instancewise, read_bundle, submission_csv, write_classwise, write_instances,
    EnsembleConfig, ImageGrid, PredictionBundle,
};
use tempfile::TempDir;

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/synthetic")
}

fn bundles() -> Vec<PathBuf> {
    (0..5).map(|m| fixture().join(format!("bundles/model_{m}.json"))).collect()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_layout-ensemble")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn split_writes_plan_and_report() {
    let dir = TempDir::new().unwrap();
    let ann = fixture().join("annotations.json");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let out = ok(&["split", "--annotations", s(&ann), "--k", "4", "--seed", "7", "--out", s(&a)]);
    let report = String::from_utf8(out.stdout).unwrap();
    assert_eq!(report.lines().count(), 5);
    ok(&["split", "--annotations", s(&ann), "--k", "4", "--seed", "7", "--out", s(&b)]);
    let plan = std::fs::read(a.join("folds.json")).unwrap();
    assert_eq!(plan, std::fs::read(b.join("folds.json")).unwrap());
    assert_eq!(std::fs::read_to_string(a.join("fold_report.txt")).unwrap(), report);
}

#[test]
fn missing_file_and_seed_fail() {
    let dir = TempDir::new().unwrap();
    let out = run(&["split", "--annotations", "/nonexistent/a.json", "--seed", "1", "--out", s(dir.path())]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent/a.json"));
    let ann = fixture().join("annotations.json");
    let out = run(&["split", "--annotations", s(&ann), "--out", s(dir.path())]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("seed"));
}

#[test]
fn config_file_with_flag_override() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"k": 5, "seed": 3}"#).unwrap();
    let ann = fixture().join("annotations.json");
    let out = ok(&["split", "--annotations", s(&ann), "--config", s(&cfg), "--out", s(&dir.path().join("x"))]);
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 6);
    let out = ok(&["split", "--annotations", s(&ann), "--config", s(&cfg), "--k", "2", "--out", s(&dir.path().join("y"))]);
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 3);
}

#[test]
fn locked_output_dir_is_refused() {
    let dir = TempDir::new().unwrap();
    std::fs::write(dir.path().join(".layout-ensemble.lock"), "").unwrap();
    let ann = fixture().join("annotations.json");
    let out = run(&["split", "--annotations", s(&ann), "--seed", "1", "--out", s(dir.path())]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("locked"));
}

#[test]
fn degrade_per_fold() {
    let dir = TempDir::new().unwrap();
    let ann = fixture().join("annotations.json");
    let split = dir.path().join("split");
    ok(&["split", "--annotations", s(&ann), "--seed", "7", "--out", s(&split)]);
    let aug = dir.path().join("aug");
    let images = fixture().join("images");
    let args = ["degrade", "--annotations", s(&ann), "--images", s(&images), "--plan"];
    let plan = split.join("folds.json");
    ok(&[&args[..], &[s(&plan), "--seed", "7", "--out", s(&aug)]].concat());
    let all = load_annotations(aug.join("augmented.json")).unwrap();
    let original = load_annotations(&ann).unwrap();
    assert_eq!(all.images().len(), original.images().len());
    assert_eq!(all.annotations().len(), original.annotations().len());
    for f in 0..4 {
        assert!(aug.join(format!("fold_{f}/annotations.json")).exists());
    }
    // determinism: same seed, same bytes
    let again = dir.path().join("again");
    ok(&[&args[..], &[s(&plan), "--seed", "7", "--out", s(&again)]].concat());
    let name = &all.images()[0].file_name;
    let fold = (0..4).find(|f| aug.join(format!("fold_{f}")).join(name).exists()).unwrap();
    assert_eq!(
        std::fs::read(aug.join(format!("fold_{fold}")).join(name)).unwrap(),
        std::fs::read(again.join(format!("fold_{fold}")).join(name)).unwrap()
    );
}

#[test]
fn degrade_reports_missing_images() {
    let dir = TempDir::new().unwrap();
    let ann = fixture().join("annotations.json");
    let empty = dir.path().join("no_images");
    std::fs::create_dir_all(&empty).unwrap();
    let out = run(&["degrade", "--annotations", s(&ann), "--images", s(&empty), "--seed", "1", "--out", s(&dir.path().join("o"))]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("failed"));
}

#[test]
fn fuse_matches_library_byte_for_byte() {
    let dir = TempDir::new().unwrap();
    let paths = bundles();
    let mut args = vec!["fuse", "--bundles"];
    args.extend(paths.iter().map(|p| s(p)));
    let ann = fixture().join("annotations.json");
    args.extend(["--annotations", s(&ann), "--conf", "0.25", "--iou", "0.7", "--out", s(dir.path())]);
    ok(&args);

    let loaded: Vec<PredictionBundle> = paths.iter().map(|p| read_bundle(p).unwrap()).collect();
    let cfg = EnsembleConfig::with_thresholds(0.25, 0.7);
    let grids = ImageGrid::all(&load_annotations(&ann).unwrap());
    let classwise = fuse_classwise(&loaded, &cfg, &grids).unwrap();
    let instances = fuse_instancewise(&loaded, &cfg).unwrap();
    let read = |n: &str| std::fs::read_to_string(dir.path().join(n)).unwrap();
    assert_eq!(read("classwise.json"), write_classwise(&classwise));
    assert_eq!(read("instances.json"), write_instances(&instances));
    assert_eq!(read("submission.csv"), submission_csv(&classwise));
}

/// With one bundle, no confidence cut and an IoU threshold that suppresses
/// nothing, the fused instances are the input instances. An IoU threshold of
/// 0 would suppress every overlapping pair, so the identity needs either one
/// instance per image or a threshold above every pairwise IoU.
#[test]
fn single_bundle_without_thresholds_is_identity() {
    let dir = TempDir::new().unwrap();
    let src = &bundles()[0];
    let out_a = dir.path().join("a");
    ok(&["fuse", "--bundles", s(src), "--conf", "0", "--iou", "1", "--out", s(&out_a)]);
    let fused = read_bundle(&out_a.join("instances.json")).unwrap();
    let original = read_bundle(src).unwrap();
    let key = |b: &PredictionBundle| {
        let mut v: Vec<_> = b
            .predictions
            .iter()
            .map(|p| (p.image_id(), p.category_id(), p.confidence().to_bits(), p.mask().counts().to_vec()))
            .collect();
        v.sort();
        v
    };
    // exact duplicates within a bundle would still be suppressed at IoU 1
    assert_eq!(key(&fused), key(&original));

    // one instance per image: thresholds (0, 0) keep everything as well
    let single = dir.path().join("single.json");
    let mut seen = std::collections::BTreeSet::new();
    let first: Vec<_> = original.predictions.iter().filter(|p| seen.insert(p.image_id())).cloned().collect();
    let one = PredictionBundle { model_id: "single".into(), predictions: first };
    std::fs::write(&single, layout_ensemble::ensemble::write_bundle(&one)).unwrap();
    let out_b = dir.path().join("b");
    ok(&["fuse", "--bundles", s(&single), "--conf", "0", "--iou", "0", "--out", s(&out_b)]);
    assert_eq!(key(&read_bundle(&out_b.join("instances.json")).unwrap()), key(&one));
}

#[test]
fn malformed_bundle_names_file_and_record() {
    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"[{"image_id": 1, "category_id": 1, "score": 0.5, "segmentation": {"size": [2, 2], "counts": [1]}}]"#).unwrap();
    let out = run(&["fuse", "--bundles", s(&bad), "--out", s(&dir.path().join("o"))]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.json") && err.contains('0'), "{err}");
}

#[test]
fn evaluate_perfect_and_empty_predictions() {
    let dir = TempDir::new().unwrap();
    let ann = fixture().join("annotations.json");
    let truth = load_annotations(&ann).unwrap();
    let perfect = PredictionBundle {
        model_id: "perfect".into(),
        predictions: truth
            .annotations()
            .iter()
            .map(|a| {
                layout_ensemble::ensemble::InstancePrediction::new(a.image_id, a.category_id, 1.0, truth.annotation_mask(a).unwrap(), "perfect")
                    .unwrap()
            })
            .collect(),
    };
    let p = dir.path().join("perfect.json");
    std::fs::write(&p, layout_ensemble::ensemble::write_bundle(&perfect)).unwrap();
    let out_dir = dir.path().join("eval");
    let out = ok(&["evaluate", "--annotations", s(&ann), "--bundles", s(&p), "--out", s(&out_dir)]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("overall") && text.contains("1.0000"), "{text}");
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("metrics.json")).unwrap()).unwrap();
    assert_eq!(report["dice"]["overall"], 1.0);
    assert_eq!(report["map50_95"]["mask"], 1.0);
    assert_eq!(report["map50_95"]["box"], 1.0);
    for name in ["paragraph", "text_box", "image", "table"] {
        assert!(report["dice"]["per_category"][name].is_number());
    }
    assert_eq!(report["confusion"]["labels"].as_array().unwrap().len(), 5);
    assert_eq!(report["confusion"]["matrix"].as_array().unwrap().len(), 5);
    assert!(out_dir.join("confusion.csv").exists());

    let empty = dir.path().join("empty.json");
    std::fs::write(&empty, "[]\n").unwrap();
    let out = ok(&["evaluate", "--annotations", s(&ann), "--bundles", s(&empty)]);
    let text = String::from_utf8(out.stdout).unwrap();
    let overall = text.lines().find(|l| l.starts_with("overall")).unwrap();
    let cols: Vec<&str> = overall.split_whitespace().collect();
    assert_eq!(&cols[2..], ["0.0000", "0.0000"]);
}

#[test]
fn evaluate_counts_unknown_images() {
    let dir = TempDir::new().unwrap();
    let ann = fixture().join("annotations.json");
    let bad = dir.path().join("bad.json");
    let rle = r#"{"size": [64, 48], "counts": [0, 4, 3068]}"#;
    std::fs::write(
        &bad,
        format!(
            "[{{\"image_id\": 500, \"category_id\": 1, \"score\": 0.5, \"segmentation\": {rle}}},\n{{\"image_id\": 501, \"category_id\": 1, \"score\": 0.5, \"segmentation\": {rle}}}]"
        ),
    )
    .unwrap();
    let out = run(&["evaluate", "--annotations", s(&ann), "--bundles", s(&bad)]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("2 predicted image ids") && err.contains("500"), "{err}");
}

#[test]
fn tune_budget_and_repeatability() {
    let dir = TempDir::new().unwrap();
    let ann = fixture().join("annotations.json");
    let paths = bundles();
    let mut base = vec!["tune", "--annotations", s(&ann), "--budget", "8", "--seed", "3", "--bundles"];
    base.extend(paths.iter().map(|p| s(p)));
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    ok(&[&base[..], &["--out", s(&a)]].concat());
    ok(&[&base[..], &["--out", s(&b)]].concat());
    let trace: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(a.join("trace.json")).unwrap()).unwrap();
    assert_eq!(trace.as_array().unwrap().len(), 8);
    assert_eq!(std::fs::read(a.join("trace.json")).unwrap(), std::fs::read(b.join("trace.json")).unwrap());
    let cfg: EnsembleConfig =
        serde_json::from_str(&std::fs::read_to_string(a.join("ensemble.json")).unwrap()).unwrap();
    // earliest entry wins ties
    let entries = trace.as_array().unwrap();
    let top = entries.iter().map(|e| e["objective"].as_f64().unwrap()).fold(f64::MIN, f64::max);
    let best = entries.iter().find(|e| e["objective"].as_f64().unwrap() == top).unwrap();
    assert_eq!(cfg.confidence_threshold, best["confidence"].as_f64().unwrap());
}

#[test]
fn tune_failure_keeps_partial_trace() {
    let dir = TempDir::new().unwrap();
    let ann = fixture().join("annotations.json");
    // predictions on an image the validation truth does not contain
    let stray = dir.path().join("stray.json");
    std::fs::write(
        &stray,
        r#"[{"image_id": 999, "category_id": 1, "score": 0.9, "segmentation": {"size": [64, 48], "counts": [0, 4, 3068]}}]"#,
    )
    .unwrap();
    let out_dir = dir.path().join("o");
    let out = run(&["tune", "--annotations", s(&ann), "--bundles", s(&stray), "--seed", "1", "--out", s(&out_dir)]);
    assert!(!out.status.success());
    assert_eq!(std::fs::read_to_string(out_dir.join("trace.json")).unwrap().trim(), "[]");
}
