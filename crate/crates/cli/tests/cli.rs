use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dsi_core::pipeline::{features_from_csv, PipelineConfig};

fn dsi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dsi"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn tree(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (
                p.strip_prefix(dir).unwrap().to_path_buf(),
                fs::read(&p).unwrap(),
            )
        })
        .collect();
    out.sort();
    out
}

/// Small cohort used by several tests: 12 + 12 lesions, enough for
/// subset selection.
fn synth_small(dir: &Path, name: &str) -> PathBuf {
    let out = dir.join(name);
    let o = dsi(&[
        "synth",
        "--seed",
        "7",
        "--benign",
        "12",
        "--malignant",
        "12",
        "--out",
        s(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    out
}

#[test]
fn print_defaults_is_a_complete_config() {
    let o = dsi(&["config", "--print-defaults"]);
    assert!(o.status.success());
    let cfg: PipelineConfig = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(cfg, PipelineConfig::default());
}

#[test]
fn synth_is_deterministic_and_honours_count_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let a = synth_small(tmp.path(), "a");
    let b = synth_small(tmp.path(), "nested/missing/b");
    assert_eq!(tree(&a), tree(&b));
    let manifest = fs::read_to_string(a.join("manifest.jsonl")).unwrap();
    assert_eq!(manifest.lines().count(), 24);
    let malignant = manifest
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap())
        .filter(|v| v["label"] == "malignant")
        .count();
    assert_eq!(malignant, 12);
}

#[test]
fn synth_config_file_and_seed_flag() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("c.json");
    fs::write(&cfg, r#"{"cohort": {"n_benign": 3, "n_malignant": 2}}"#).unwrap();
    let out = tmp.path().join("c");
    let o = dsi(&[
        "synth",
        "--config",
        s(&cfg),
        "--seed",
        "7",
        "--out",
        s(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(
        fs::read_to_string(out.join("manifest.jsonl"))
            .unwrap()
            .lines()
            .count(),
        5
    );

    fs::write(&cfg, r#"{"cohort": {"n_benign": 0, "n_malignant": 0}}"#).unwrap();
    let o = dsi(&["synth", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
}

#[test]
fn unwritable_cohort_dir_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let blocker = tmp.path().join("file");
    fs::write(&blocker, b"x").unwrap();
    let out = blocker.join("cohort");
    let o = dsi(&[
        "synth",
        "--benign",
        "1",
        "--malignant",
        "1",
        "--out",
        s(&out),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("cannot write cohort"), "{}", stderr(&o));
}

#[test]
fn full_pipeline_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let t = tmp.path();
    let cohort = synth_small(t, "cohort");

    let csv = t.join("features.csv");
    let o = dsi(&["extract", "--cohort", s(&cohort), "--out", s(&csv)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let first = fs::read(&csv).unwrap();
    let o = dsi(&[
        "extract",
        "--cohort",
        s(&cohort.join("manifest.jsonl")),
        "--out",
        s(&csv),
    ]);
    assert!(o.status.success());
    assert_eq!(
        fs::read(&csv).unwrap(),
        first,
        "re-extraction is byte-identical"
    );
    let rows = features_from_csv(&String::from_utf8(first).unwrap()).unwrap();
    assert_eq!(rows.len(), 24);

    // Default training runs subset selection.
    let model = t.join("model.json");
    let o = dsi(&[
        "train",
        "--features-csv",
        s(&csv),
        "--out",
        s(&model),
        "--seed",
        "3",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(&model).unwrap();
    assert!(text.contains("\"model-v1\""));
    assert!(text.contains("\"subset\""));
    let sel = fs::read_to_string(t.join("model.selection.json")).unwrap();
    assert!(sel.contains("\"enumerated\": 1023"));

    // `--features all` uses the five default features.
    let five = t.join("five.json");
    let o = dsi(&[
        "train",
        "--features-csv",
        s(&csv),
        "--out",
        s(&five),
        "--features",
        "all",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let m = dsi_core::TrainedModel::load(&five).unwrap();
    assert_eq!(m.subset, dsi_core::Feature::DEFAULT_SUBSET.to_vec());

    // Evaluation: 3 scorers × 2 filters × 11 thresholds, reproducible.
    let rep = t.join("report");
    let o = dsi(&[
        "eval",
        "--features-csv",
        s(&csv),
        "--model",
        s(&five),
        "--out",
        s(&rep),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report_csv = fs::read_to_string(rep.join("report.csv")).unwrap();
    assert_eq!(report_csv.lines().count(), 1 + 66);
    let report_json = fs::read(rep.join("report.json")).unwrap();
    let o = dsi(&[
        "eval",
        "--features-csv",
        s(&csv),
        "--model",
        s(&five),
        "--out",
        s(&rep),
    ]);
    assert!(o.status.success());
    assert_eq!(fs::read(rep.join("report.json")).unwrap(), report_json);

    // Rendering is deterministic and the scorer flag changes the source.
    let frame = cohort.join("L0020.rf");
    let mask = cohort.join("L0020_mask.pgm");
    let mut pngs = Vec::new();
    for (name, scorer) in [
        ("a.png", "svm_distance"),
        ("b.png", "svm_distance"),
        ("c.png", "pc1"),
    ] {
        let out = t.join(name);
        let o = dsi(&[
            "render",
            "--frame",
            s(&frame),
            "--mask",
            s(&mask),
            "--model",
            s(&five),
            "--out",
            s(&out),
            "--scorer",
            scorer,
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        pngs.push(fs::read(&out).unwrap());
        let prov = fs::read_to_string(out.with_extension("json")).unwrap();
        assert!(
            prov.contains(&format!("\"scorer\": \"{scorer}\"")),
            "{prov}"
        );
    }
    assert_eq!(pngs[0], pngs[1]);
    assert_eq!(&pngs[0][..8], b"\x89PNG\r\n\x1a\n");

    let o = dsi(&[
        "render",
        "--frame",
        s(&frame),
        "--mask",
        s(&mask),
        "--model",
        s(&t.join("none.json")),
        "--out",
        s(&t.join("x.png")),
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn corrupt_frame_needs_lenient() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("c");
    let o = dsi(&[
        "synth",
        "--benign",
        "2",
        "--malignant",
        "2",
        "--out",
        s(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rf = out.join("L0001.rf");
    let bytes = fs::read(&rf).unwrap();
    fs::write(&rf, &bytes[..bytes.len() / 2]).unwrap();

    let csv = tmp.path().join("f.csv");
    let o = dsi(&["extract", "--cohort", s(&out), "--out", s(&csv)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!csv.exists());

    let o = dsi(&[
        "--lenient",
        "extract",
        "--cohort",
        s(&out),
        "--out",
        s(&csv),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(
        stderr(&o).contains("L0001"),
        "warning names the lesion: {}",
        stderr(&o)
    );
    let rows = features_from_csv(&fs::read_to_string(&csv).unwrap()).unwrap();
    assert_eq!(
        rows.iter().map(|r| r.id.as_str()).collect::<Vec<_>>(),
        ["L0000", "L0002", "L0003"]
    );
}

#[test]
fn single_class_training_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let csv = tmp.path().join("f.csv");
    let mut text = dsi_core::pipeline::feature_csv_header();
    for i in 0..12 {
        text.push_str(&format!("\nL{i:04},benign,major,0.5,{i},1,2,3,4,5,6,7,8,0"));
    }
    fs::write(&csv, text).unwrap();
    let o = dsi(&[
        "train",
        "--features-csv",
        s(&csv),
        "--out",
        s(&tmp.path().join("m.json")),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("need both classes"), "{}", stderr(&o));

    let o = dsi(&[
        "train",
        "--features-csv",
        s(&tmp.path().join("missing.csv")),
    ]);
    assert_eq!(o.status.code(), Some(2));
}
