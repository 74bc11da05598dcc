//! Binary-level tests: exit codes, error messages and output files.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hyperball"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn usage_errors_exit_1() {
    let out = run(&["no-such-command"]);
    assert_eq!(out.status.code(), Some(1));
    let out = run(&[]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn unknown_config_key_exits_1_and_names_it() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", "{\"epcohs\": 3}");
    let out = run(&["train", "--config", &cfg, "--out", "/dev/null"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("epcohs"), "stderr: {}", stderr(&out));
}

#[test]
fn missing_data_file_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        "{\"data\": {\"features\": \"/nonexistent/f.csv\", \"labels_single\": \"/nonexistent/l.csv\"}}",
    );
    let out = run(&["train", "--config", &cfg, "--out", "/dev/null"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn malformed_csv_reports_line_number_and_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let features = dir.path().join("f.csv");
    std::fs::write(&features, "id,f0,f1\ns0,0.5,1.0\ns1,oops,1.0\n").unwrap();
    let labels = dir.path().join("l.csv");
    std::fs::write(&labels, "id,pos_idx\ns0,0\ns1,1\n").unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        &format!(
            "{{\"epochs\": 1, \"data\": {{\"features\": {features:?}, \"labels_single\": {labels:?}}}}}",
            features = features.to_str().unwrap(),
            labels = labels.to_str().unwrap()
        ),
    );
    let out = run(&["train", "--config", &cfg, "--out", dir.path().join("m.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let msg = stderr(&out);
    assert!(msg.contains(":3:"), "expected line 3 in: {msg}");
    assert!(msg.contains("oops"), "expected offending field in: {msg}");
}

#[test]
fn gen_data_prints_shape_and_train_eval_analyze_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        "{\"epochs\": 8, \"n\": 8, \"synth\": {\"samples\": 400, \"d\": 8}, \"seed\": 3}",
    );
    let data_dir = dir.path().join("data");
    let out = run(&["gen-data", "--config", &cfg, "--out", data_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("K = 15") && text.contains("d = 8") && text.contains("S = 400"), "{text}");

    let model = dir.path().join("model.json");
    let out = run(&["train", "--config", &cfg, "--out", model.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(model.exists());
    let metrics = dir.path().join("model.json.metrics.csv");
    let mtext = std::fs::read_to_string(&metrics).unwrap();
    assert!(mtext.starts_with("epoch,cls,reg,uni,total\n"));
    assert_eq!(mtext.lines().count(), 9);

    let out = run(&[
        "eval",
        "--model",
        model.to_str().unwrap(),
        "--features",
        data_dir.join("features.csv").to_str().unwrap(),
        "--labels-full",
        data_dir.join("labels_full.csv").to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let report: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(report["num_eval_samples"], 400);
    assert!(report["map"].as_f64().unwrap() > 0.0);
    assert_eq!(report["per_class_ap"].as_array().unwrap().len(), 15);

    let corr = dir.path().join("corr.csv");
    let out = run(&[
        "analyze",
        "--model",
        model.to_str().unwrap(),
        "--labels-full",
        data_dir.join("labels_full.csv").to_str().unwrap(),
        "--out",
        corr.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("pearson_r"));
    let ctext = std::fs::read_to_string(&corr).unwrap();
    assert!(ctext.starts_with("label_i,label_j,cooccur_prob,center_distance\n"));
    assert_eq!(ctext.lines().count(), 1 + 15 * 14 / 2);
}

#[test]
fn export_map_requires_two_dimensions() {
    let dir = tempfile::tempdir().unwrap();
    // n = 2 model works; default n = 16 model is refused with a clear message
    for (n, ok) in [(2usize, true), (16, false)] {
        let cfg = write_config(
            dir.path(),
            "c.json",
            &format!("{{\"epochs\": 1, \"n\": {n}, \"synth\": {{\"samples\": 80, \"d\": 6}}}}"),
        );
        let model = dir.path().join(format!("m{n}.json"));
        let out = run(&["train", "--config", &cfg, "--out", model.to_str().unwrap()]);
        assert!(out.status.success(), "{}", stderr(&out));
        let grid = dir.path().join(format!("g{n}.csv"));
        let out = run(&[
            "export-map",
            "--model",
            model.to_str().unwrap(),
            "--label",
            "0",
            "--resolution",
            "16",
            "--out",
            grid.to_str().unwrap(),
        ]);
        if ok {
            assert!(out.status.success(), "{}", stderr(&out));
            let text = std::fs::read_to_string(&grid).unwrap();
            assert!(text.starts_with("x,y,prob\n"));
            assert_eq!(text.lines().count(), 1 + 16 * 16);
            assert!(text.contains("nan"));
        } else {
            assert_eq!(out.status.code(), Some(1));
            assert!(stderr(&out).contains("2-dimensional"), "{}", stderr(&out));
        }
    }
}

#[test]
fn export_map_rejects_zero_resolution() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        "{\"epochs\": 0, \"n\": 2, \"synth\": {\"samples\": 40, \"d\": 4}}",
    );
    let model = dir.path().join("m.json");
    let out = run(&["train", "--config", &cfg, "--out", model.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let out = run(&[
        "export-map",
        "--model",
        model.to_str().unwrap(),
        "--label",
        "0",
        "--resolution",
        "0",
        "--out",
        dir.path().join("g.csv").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("resolution"));
}

#[test]
fn analyze_rejects_euclidean_and_tiny_label_sets() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        "{\"epochs\": 1, \"mode\": \"euclidean_baseline\", \"synth\": {\"samples\": 80, \"d\": 6}}",
    );
    let data_dir = dir.path().join("data");
    let out = run(&["gen-data", "--config", &cfg, "--out", data_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let model = dir.path().join("m.json");
    let out = run(&["train", "--config", &cfg, "--out", model.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let out = run(&[
        "analyze",
        "--model",
        model.to_str().unwrap(),
        "--labels-full",
        data_dir.join("labels_full.csv").to_str().unwrap(),
        "--out",
        dir.path().join("c.csv").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("hyperbolic"), "{}", stderr(&out));
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        "{\"epochs\": 2, \"n\": 4, \"synth\": {\"samples\": 80, \"d\": 6}, \"seed\": 0}",
    );
    let m_default = dir.path().join("a.json");
    let m_seeded = dir.path().join("b.json");
    let m_seeded2 = dir.path().join("c_model.json");
    for (path, extra) in [
        (&m_default, None),
        (&m_seeded, Some("11")),
        (&m_seeded2, Some("11")),
    ] {
        let mut args = vec!["train", "--config", &cfg, "--out", path.to_str().unwrap()];
        if let Some(s) = extra {
            args.push("--seed");
            args.push(s);
        }
        let out = run(&args);
        assert!(out.status.success(), "{}", stderr(&out));
    }
    let a = std::fs::read(&m_default).unwrap();
    let b = std::fs::read(&m_seeded).unwrap();
    let c = std::fs::read(&m_seeded2).unwrap();
    assert_ne!(a, b, "seed flag had no effect");
    assert_eq!(b, c, "same seed flag gave different models");
}
