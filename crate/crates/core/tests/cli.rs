use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bandap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bandap")).args(args).output().unwrap()
}

fn fixture(path: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(path)
        .to_string_lossy()
        .into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn eval_writes_json_with_nine_bandasap_bands() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = bandap(&[
        "eval",
        "--gt",
        &fixture("coco/gt.json"),
        "--dets",
        &fixture("coco/dets.json"),
        "--out-dir",
        out,
        "--format",
        "json,csv,text,svg",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report: Value = serde_json::from_slice(&std::fs::read(dir.path().join("report.json")).unwrap()).unwrap();
    let bands = report["bands"].as_array().unwrap();
    assert_eq!(bands.len(), 9);
    assert_eq!(bands[0]["label"], "BandASAP_4");
    assert_eq!(bands[8]["label"], "BandASAP_1024");
    let csv = std::fs::read_to_string(dir.path().join("report.csv")).unwrap();
    assert_eq!(
        csv.lines().next().unwrap(),
        "label,ap,ap50,ap75,gt_weight_sum,gt_nonzero_count"
    );
    assert_eq!(csv.lines().count(), 10);
    assert!(std::fs::read_to_string(dir.path().join("report.svg"))
        .unwrap()
        .starts_with("<svg"));
    assert!(dir.path().join("report.txt").exists());
}

#[test]
fn eval_accepts_custom_thresholds_and_categories() {
    let dir = tempfile::tempdir().unwrap();
    let o = bandap(&[
        "eval",
        "--gt",
        &fixture("coco/gt.json"),
        "--dets",
        &fixture("coco/dets.json"),
        "--bank",
        "coco",
        "--iou-thrs",
        "0.5,0.75",
        "--categories",
        "2",
        "--max-dets",
        "10",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report: Value = serde_json::from_slice(&std::fs::read(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["iou_thresholds"], serde_json::json!([0.5, 0.75]));
    assert_eq!(report["max_dets"], 10);
    assert_eq!(report["bands"].as_array().unwrap().len(), 3);
}

#[test]
fn compare_writes_reports_table_and_chart() {
    let dir = tempfile::tempdir().unwrap();
    let o = bandap(&[
        "compare",
        "--gt",
        &fixture("golden/gt.json"),
        "--dets",
        &fixture("golden/dets.json"),
        "--dets",
        &fixture("golden/dets.json"),
        "--name",
        "first",
        "--name",
        "second",
        "--out-dir",
        dir.path().to_str().unwrap(),
        "--percent",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["first.report.json", "second.report.json", "comparison.csv", "chart.svg"] {
        assert!(dir.path().join(f).exists(), "{f} missing");
    }
    let svg = std::fs::read_to_string(dir.path().join("chart.svg")).unwrap();
    assert_eq!(svg.matches("class=\"bar\"").count(), 18);
    assert_eq!(
        std::fs::read(dir.path().join("first.report.json")).unwrap(),
        std::fs::read(dir.path().join("second.report.json")).unwrap()
    );
}

#[test]
fn banks_lists_and_emits_presets() {
    let o = bandap(&["banks"]);
    assert!(o.status.success());
    let listing = String::from_utf8(o.stdout).unwrap();
    for name in ["coco", "asap", "bandasap"] {
        assert!(listing.contains(name), "{listing}");
    }

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bank.json");
    let o = bandap(&["banks", "--emit", "bandasap", "--out", path.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let bank = bandap::FilterBank::load(&path).unwrap();
    assert_eq!(bank.len(), 9);

    // the emitted file is accepted back as a --bank argument
    let out = dir.path().join("out");
    let o = bandap(&[
        "eval",
        "--gt",
        &fixture("golden/gt.json"),
        "--dets",
        &fixture("golden/dets.json"),
        "--bank",
        path.to_str().unwrap(),
        "--jobs",
        "1",
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let ours: Value = serde_json::from_slice(&std::fs::read(out.join("report.json")).unwrap()).unwrap();
    let golden: Value = serde_json::from_slice(&std::fs::read(fixture("golden/report.golden.json")).unwrap()).unwrap();
    assert_eq!(ours["bands"], golden["bands"]);
}

#[test]
fn usage_errors_exit_with_one() {
    let o = bandap(&["eval", "--no-such-flag"]);
    assert_eq!(o.status.code(), Some(1));
    let o = bandap(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(1));
    let o = bandap(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn detections_for_another_dataset_name_the_file() {
    let dir = tempfile::tempdir().unwrap();
    // the golden detections reference categories 1..=3 but images the coco fixture lacks
    let o = bandap(&[
        "eval",
        "--gt",
        &fixture("coco/gt.json"),
        "--dets",
        &fixture("golden/dets.json"),
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("golden/dets.json"), "{err}");
    assert!(err.to_lowercase().contains("unknown"), "{err}");
    assert!(!dir.path().join("report.json").exists());
}

#[test]
fn malformed_and_invalid_inputs_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"images\": [").unwrap();
    let o = bandap(&[
        "eval",
        "--gt",
        bad.to_str().unwrap(),
        "--dets",
        &fixture("coco/dets.json"),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("bad.json"));

    let nan = dir.path().join("nan.json");
    std::fs::write(
        &nan,
        r#"[{"image_id": 1, "category_id": 1, "bbox": [0, 0, 10, 10], "score": NaN}]"#,
    )
    .unwrap();
    let o = bandap(&[
        "eval",
        "--gt",
        &fixture("coco/gt.json"),
        "--dets",
        nan.to_str().unwrap(),
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("nan.json"), "{}", stderr(&o));

    let o = bandap(&[
        "eval",
        "--gt",
        &fixture("coco/gt.json"),
        "--dets",
        &fixture("coco/dets.json"),
        "--iou-thrs",
        "0.9,0.5",
    ]);
    assert_eq!(o.status.code(), Some(1));
}

fn synth_files(seed: &str, out: &Path) -> (Vec<u8>, Vec<u8>) {
    let o = bandap(&[
        "synth",
        "--preset",
        "small_skewed",
        "--seed",
        seed,
        "--images",
        "20",
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    (
        std::fs::read(out.join("gt.json")).unwrap(),
        std::fs::read(out.join("dets.json")).unwrap(),
    )
}

#[test]
fn synth_is_byte_identical_for_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let a = synth_files("42", &dir.path().join("a"));
    let b = synth_files("42", &dir.path().join("b"));
    let c = synth_files("43", &dir.path().join("c"));
    assert_eq!(a, b);
    assert_ne!(a.0, c.0);
}

#[test]
fn synth_bootstrap_writes_one_file_per_bank() {
    let dir = tempfile::tempdir().unwrap();
    let out: PathBuf = dir.path().into();
    let o = bandap(&[
        "synth",
        "--preset",
        "log_normal",
        "--images",
        "6",
        "--bootstrap",
        "3",
        "--bank",
        "asap",
        "--bank",
        "bandasap",
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    for bank in ["asap", "bandasap"] {
        let v: Value =
            serde_json::from_slice(&std::fs::read(out.join(format!("bootstrap_{bank}.json"))).unwrap()).unwrap();
        assert_eq!(v["B"], 3);
        assert_eq!(v["bands"].as_array().unwrap().len(), 9);
    }
}
