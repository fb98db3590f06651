use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn enose(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_enose"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn failed_at(out: &Output, stage: &str) {
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains(&format!("stage `{stage}` failed")), "stderr: {err}");
}

#[test]
fn full_pipeline_through_the_cli() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    let sim = root.join("sim");
    ok(&enose(&["simulate", "--table", "ternary", "--seed", "4", "--out", path(&sim)]));
    let raw = sim.join("raw");
    assert_eq!(fs::read_dir(&raw).unwrap().filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "csv")).count(), 600);

    let clean = root.join("clean");
    ok(&enose(&["ingest", "--in", path(&raw), "--out", path(&clean)]));
    let processed = root.join("processed");
    ok(&enose(&["preprocess", "--in", path(&clean), "--out", path(&processed), "--window", "5", "--degree", "2"]));
    let features = processed.join("features.csv");
    assert!(features.exists());

    let model = root.join("svm.model");
    ok(&enose(&["train-svm", "--in", path(&features), "--model", path(&model)]));
    assert!(fs::read_to_string(&model).unwrap().starts_with("enose-classifier v1"));
    let stdout = ok(&enose(&["classify", "--model", path(&model), "--in", path(&features), "--report", path(&root.join("classes.csv"))]));
    let acc: f64 = stdout
        .lines()
        .find_map(|l| l.strip_prefix("accuracy = "))
        .unwrap()
        .parse()
        .unwrap();
    assert!(acc > 0.9, "training-set accuracy {acc}");

    let mlp = root.join("mlp.model");
    ok(&enose(&["train-mlp", "--in", path(&features), "--model", path(&mlp), "--epochs", "50", "--seed", "2"]));
    assert!(fs::read_to_string(&mlp).unwrap().starts_with("enose-mlp v1"));
    assert!(mlp.with_extension("loss.csv").exists());
    let stdout = ok(&enose(&["predict", "--model", path(&mlp), "--in", path(&features), "--report", path(&root.join("ppm.csv"))]));
    assert!(stdout.contains("rmse = "));
}

#[test]
fn bench_writes_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("bench");
    let stdout = ok(&enose(&["bench", "--table", "binary_methanol", "--seed", "11", "--noise", "0.0", "--out", path(&out)]));
    assert!(stdout.contains("binary_methanol: accuracy 1 "), "{stdout}");
    for f in ["metrics.csv", "confusion.csv", "predictions.csv", "scatter.svg", "index_plot.svg", "timing.txt"] {
        assert!(out.join(f).exists(), "{f}");
    }
}

#[test]
fn config_file_overrides_apply_and_unknown_keys_fail() {
    let tmp = tempfile::tempdir().unwrap();
    let good = tmp.path().join("good.conf");
    fs::write(&good, "# smaller model\nsvm_c = 5\nwindow_m = 3\n").unwrap();
    let out = tmp.path().join("run");
    ok(&enose(&["bench", "--table", "binary-ethanol", "--seed", "1", "--out", path(&out), "--config", path(&good)]));
    let metrics = fs::read_to_string(out.join("metrics.csv")).unwrap();
    assert!(metrics.contains("svm_c,5"), "{metrics}");
    assert!(metrics.contains("window_m,3"), "{metrics}");

    let bad = tmp.path().join("bad.conf");
    fs::write(&bad, "no_such_key = 1\n").unwrap();
    failed_at(&enose(&["bench", "--table", "binary_ethanol", "--out", path(&out), "--config", path(&bad)]), "bench");
}

#[test]
fn failures_exit_nonzero_with_stage() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("missing");
    failed_at(&enose(&["ingest", "--in", path(&missing), "--out", path(&tmp.path().join("o"))]), "ingest");
    failed_at(&enose(&["preprocess", "--in", path(&missing), "--out", path(&tmp.path().join("o"))]), "preprocess");

    let junk = tmp.path().join("junk.model");
    fs::write(&junk, "not a model\n").unwrap();
    let features = tmp.path().join("f.csv");
    fs::write(&features, "f1\n").unwrap();
    failed_at(&enose(&["classify", "--model", path(&junk), "--in", path(&features), "--report", path(&tmp.path().join("r.csv"))]), "classify");
    failed_at(&enose(&["predict", "--model", path(&junk), "--in", path(&features), "--report", path(&tmp.path().join("r.csv"))]), "predict");
    failed_at(&enose(&["train-svm", "--in", path(&features), "--model", path(&junk)]), "train-svm");
    failed_at(&enose(&["simulate", "--table", "ternary", "--noise=-1", "--out", path(&tmp.path().join("s"))]), "simulate");
    // output directory path names an existing file
    failed_at(&enose(&["bench", "--table", "binary_ethanol", "--out", path(&junk)]), "bench");
}

#[test]
fn malformed_stream_is_rejected_at_ingest() {
    let tmp = tempfile::tempdir().unwrap();
    let raw = tmp.path().join("raw");
    fs::create_dir(&raw).unwrap();
    let mut body = String::from("t_ms,raw1,raw2,raw3,raw4\n");
    for i in 0..100 {
        if i < 15 {
            body.push_str("0,1,2,3,4096\n");
        } else {
            body.push_str(&format!("{},1,2,3,4\n", i * 100));
        }
    }
    fs::write(raw.join("session_0000.csv"), body).unwrap();
    let out = enose(&["ingest", "--in", path(&raw), "--out", path(&tmp.path().join("clean"))]);
    failed_at(&out, "ingest");
    assert!(String::from_utf8_lossy(&out.stderr).contains("15 of 100"));
}

#[test]
fn usage_errors_exit_with_clap_code() {
    assert_eq!(enose(&["bench", "--table", "nonsense", "--out", "x"]).status.code(), Some(2));
    assert_eq!(enose(&[]).status.code(), Some(2));
    assert_eq!(enose(&["bench", "--table", "ternary", "--out", ""]).status.code(), Some(2));
}
