use std::path::Path;
use std::process::{Command, Output};

fn fusemap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fusemap")).args(args).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn synth(dir: &Path, extra: &[&str]) {
    let seq = dir.to_str().unwrap();
    let mut args = vec!["synth", "--output", seq, "--objects", "2", "--frames", "30", "--seed", "4"];
    args.extend_from_slice(extra);
    let o = fusemap(&args);
    assert!(o.status.success(), "{}", stderr(&o));
}

fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn synth_fuse_evaluate() {
    let tmp = tempfile::tempdir().unwrap();
    let seq = tmp.path().join("seq");
    let out = tmp.path().join("out");
    synth(&seq, &[]);
    let config = seq.join("fusemap.toml");
    let o = fusemap(&[
        "fuse",
        "--config",
        config.to_str().unwrap(),
        "--input",
        seq.to_str().unwrap(),
        "--output",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["map.ply", "instances.json", "report.json", "events.jsonl"] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    assert_eq!(read_json(&out.join("instances.json"))["instances"].as_array().unwrap().len(), 2);

    let o = fusemap(&["evaluate", "--pred", out.to_str().unwrap(), "--gt", seq.to_str().unwrap(), "--iou", "0.5"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let table = String::from_utf8(o.stdout).unwrap();
    assert!(table.contains("AP50"), "{table}");
    let mean = table.lines().find(|l| l.starts_with("mean")).unwrap();
    assert_eq!(mean.split_whitespace().nth(1), Some("100.0"));

    let o = fusemap(&[
        "evaluate",
        "--pred",
        out.to_str().unwrap(),
        "--gt",
        seq.join("gt.txt").to_str().unwrap(),
        "--method",
        "cluster-all",
        "--json",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["thresholds"], serde_json::json!([0.5, 0.25]));
}

#[test]
fn flags_override_config() {
    let tmp = tempfile::tempdir().unwrap();
    let seq = tmp.path().join("seq");
    synth(&seq, &[]);
    let out = tmp.path().join("out");
    let o = fusemap(&[
        "fuse",
        "--config",
        seq.join("fusemap.toml").to_str().unwrap(),
        "--input",
        seq.to_str().unwrap(),
        "--output",
        out.to_str().unwrap(),
        "--stride",
        "20",
        "--no-merge",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report = read_json(&out.join("report.json"));
    // Frames 0 and 20 of 30.
    assert_eq!(report["detection_frames"], 2);
    assert_eq!(report["merges"], 0);

    let o = fusemap(&[
        "fuse",
        "--input",
        seq.to_str().unwrap(),
        "--output",
        out.to_str().unwrap(),
        "--no-detections",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(read_json(&out.join("instances.json"))["instances"].as_array().unwrap().is_empty());
}

#[test]
fn summarize_likelihood_writes_matrix() {
    let tmp = tempfile::tempdir().unwrap();
    let seq = tmp.path().join("seq");
    synth(&seq, &["--label-noise", "0.2"]);
    let matrix = tmp.path().join("matrix.csv");
    let evidence = tmp.path().join("evidence.csv");
    let o = fusemap(&[
        "summarize-likelihood",
        "--log",
        seq.join("annotations.json").to_str().unwrap(),
        "--output",
        matrix.to_str().unwrap(),
        "--evidence",
        evidence.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(&matrix).unwrap();
    assert_eq!(text.lines().count(), 9);
    assert!(evidence.is_file());

    let out = tmp.path().join("out");
    let o = fusemap(&[
        "fuse",
        "--input",
        seq.to_str().unwrap(),
        "--output",
        out.to_str().unwrap(),
        "--likelihood-matrix",
        matrix.to_str().unwrap(),
        "--max-depth",
        "3.5",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn missing_input_names_the_path() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("no-such-seq");
    let o = fusemap(&["fuse", "--input", missing.to_str().unwrap(), "--output", tmp.path().to_str().unwrap()]);
    assert!(!o.status.success());
    let err = stderr(&o);
    assert_eq!(err.trim().lines().count(), 1, "{err}");
    assert!(err.contains(missing.to_str().unwrap()), "{err}");
}

#[test]
fn malformed_config_fails_in_one_line() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("c.toml");
    std::fs::write(&cfg, "voxel_length = 0.02\nbogus_key = 1\n").unwrap();
    let o = fusemap(&["fuse", "--config", cfg.to_str().unwrap(), "--input", ".", "--output", "."]);
    assert!(!o.status.success());
    let err = stderr(&o);
    assert_eq!(err.trim().lines().count(), 1, "{err}");
    assert!(err.contains("bogus_key"), "{err}");

    std::fs::write(&cfg, "voxel_length = -1\n").unwrap();
    let o = fusemap(&["fuse", "--config", cfg.to_str().unwrap(), "--input", ".", "--output", "."]);
    assert!(!o.status.success());
}

#[test]
fn unknown_flag_is_rejected() {
    let o = fusemap(&["fuse", "--frobnicate"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("--frobnicate"));
}
