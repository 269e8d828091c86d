use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use prnn_core::data::load_split;

const BIN: &str = env!("CARGO_BIN_EXE_prnn");

// Short episodes keep the end-to-end runs to a few seconds.
const SMALL_COHORT: &str = "median_hours = 8\nmin_hours = 6\nmax_hours = 16\n";

fn prnn(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env_remove("RUST_LOG")
        .output()
        .expect("spawn prnn")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn ok(args: &[&str]) -> Output {
    let out = prnn(args);
    assert_eq!(
        code(&out),
        0,
        "prnn {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn generate(dir: &Path, patients: usize, seed: u64, extra: &str) -> PathBuf {
    let cfg = dir.join("gen.cfg");
    fs::write(&cfg, format!("{SMALL_COHORT}{extra}")).unwrap();
    let out = dir.join("cohort");
    ok(&[
        "generate",
        "--patients",
        &patients.to_string(),
        "--seed",
        &seed.to_string(),
        "--config",
        s(&cfg),
        "--out",
        s(&out),
    ]);
    out.join("cohort.jsonl")
}

fn train(cohort: &Path, out: &Path, model: &[&str], epochs: usize) -> PathBuf {
    let epochs = epochs.to_string();
    let mut args = vec!["train", "--cohort", s(cohort), "--out", s(out)];
    args.extend_from_slice(model);
    args.extend_from_slice(&[
        "--epochs",
        &epochs,
        "--layers",
        "4,4,4",
        "--batch-size",
        "8",
        "--learning-rate",
        "0.001",
    ]);
    ok(&args);
    out.join("checkpoint.json")
}

fn evaluate(cohort: &Path, checkpoint: &Path, out: &Path, thresholds: &str) {
    ok(&[
        "evaluate",
        "--cohort",
        s(cohort),
        "--checkpoint",
        s(checkpoint),
        "--thresholds",
        thresholds,
        "--out",
        s(out),
    ]);
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(code(&prnn(&["--help"])), 0);
    assert_eq!(code(&prnn(&["--version"])), 0);
    assert_eq!(code(&prnn(&["train", "--help"])), 0);
}

#[test]
fn argument_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = s(dir.path());
    assert_eq!(code(&prnn(&[])), 1);
    assert_eq!(code(&prnn(&["frobnicate"])), 1);
    assert_eq!(
        code(&prnn(&["generate", "--patients", "0", "--out", out])),
        1
    );
    assert_eq!(
        code(&prnn(&["generate", "--patients", "x", "--out", out])),
        1
    );

    let bad_cfg = dir.path().join("bad.cfg");
    fs::write(&bad_cfg, "median_hourz = 8\n").unwrap();
    let r = prnn(&[
        "generate",
        "--patients",
        "5",
        "--config",
        s(&bad_cfg),
        "--out",
        out,
    ]);
    assert_eq!(code(&r), 1);
    assert!(String::from_utf8_lossy(&r.stderr).contains("median_hourz"));

    let missing = dir.path().join("missing.jsonl");
    for model in [
        &["--model", "k9"][..],
        &["--model", "k0"],
        &["--model", "lstm"],
        &["--model", "k3", "--k", "2"],
        &["--model", "attention", "--k", "3"],
        &["--model", "prnn", "--k", "0"],
    ] {
        let mut args = vec!["train", "--cohort", s(&missing), "--out", out];
        args.extend_from_slice(model);
        assert_eq!(code(&prnn(&args)), 1, "{model:?}");
    }
    let r = prnn(&[
        "train",
        "--cohort",
        s(&missing),
        "--out",
        out,
        "--learning-rate",
        "-1",
    ]);
    assert_eq!(code(&r), 1);
}

#[test]
fn generate_is_reproducible_and_prints_summary() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ca = generate(a.path(), 12, 3, "");
    let cb = generate(b.path(), 12, 3, "");
    assert_eq!(fs::read(&ca).unwrap(), fs::read(&cb).unwrap());
    assert_eq!(
        fs::read(ca.with_file_name("split.json")).unwrap(),
        fs::read(cb.with_file_name("split.json")).unwrap()
    );

    let r = ok(&[
        "generate",
        "--patients",
        "12",
        "--seed",
        "3",
        "--out",
        s(&a.path().join("x")),
    ]);
    let text = String::from_utf8(r.stdout).unwrap();
    for name in ["training", "validation", "test", "overall", "mortality"] {
        assert!(text.contains(name), "summary lacks {name}:\n{text}");
    }
}

#[test]
fn generate_into_unwritable_path_is_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("plain-file");
    fs::write(&file, "").unwrap();
    let r = prnn(&["generate", "--patients", "5", "--out", s(&file.join("sub"))]);
    assert_eq!(code(&r), 2);
    assert!(!r.stderr.is_empty());
}

#[test]
fn truncated_cohort_is_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let cohort = generate(dir.path(), 8, 1, "");
    let text = fs::read_to_string(&cohort).unwrap();
    fs::write(&cohort, &text[..text.len() / 2]).unwrap();
    let r = prnn(&[
        "train",
        "--cohort",
        s(&cohort),
        "--out",
        s(&dir.path().join("t")),
        "--epochs",
        "0",
    ]);
    assert_eq!(code(&r), 2);
}

#[test]
fn zero_epochs_writes_initial_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let cohort = generate(dir.path(), 10, 2, "");
    let out = dir.path().join("train");
    let ck = train(&cohort, &out, &["--model", "k2"], 0);
    assert!(ck.is_file());
    let log = fs::read_to_string(out.join("training_log.csv")).unwrap();
    assert_eq!(log.lines().count(), 1, "header only:\n{log}");
    let parsed = prnn_core::checkpoint::Checkpoint::load(&ck).unwrap();
    assert_eq!(parsed.best_epoch, None);
}

#[test]
fn k1_and_prnn_with_k1_give_identical_checkpoints() {
    let dir = tempfile::tempdir().unwrap();
    let cohort = generate(dir.path(), 10, 4, "");
    let a = train(&cohort, &dir.path().join("a"), &["--model", "k1"], 2);
    let b = train(
        &cohort,
        &dir.path().join("b"),
        &["--model", "prnn", "--k", "1"],
        2,
    );
    assert_eq!(fs::read(a).unwrap(), fs::read(b).unwrap());
}

#[test]
fn config_file_and_flags_combine() {
    let dir = tempfile::tempdir().unwrap();
    let cohort = generate(dir.path(), 10, 4, "");
    let cfg = dir.path().join("train.cfg");
    fs::write(&cfg, "seed = 9\nmax_epochs = 5\nlayers = 4,4,4\n").unwrap();
    let out = dir.path().join("t");
    ok(&[
        "train",
        "--cohort",
        s(&cohort),
        "--config",
        s(&cfg),
        "--epochs",
        "1",
        "--out",
        s(&out),
    ]);
    let ck = prnn_core::checkpoint::Checkpoint::load(&out.join("checkpoint.json")).unwrap();
    assert_eq!(ck.training.seed, 9);
    assert_eq!(ck.training.max_epochs, 1);
}

#[test]
fn evaluate_twice_is_identical_and_reads_only_test_episodes() {
    let dir = tempfile::tempdir().unwrap();
    let cohort = generate(dir.path(), 16, 5, "");
    let ck = train(&cohort, &dir.path().join("t"), &["--model", "k2"], 1);
    let e1 = dir.path().join("e1");
    let e2 = dir.path().join("e2");
    evaluate(&cohort, &ck, &e1, "computed");
    evaluate(&cohort, &ck, &e2, "computed");
    for f in [
        "thresholds.csv",
        "variation.csv",
        "pipeup.csv",
        "auroc.csv",
        "episodes.csv",
        "evaluation.json",
    ] {
        assert_eq!(
            fs::read(e1.join(f)).unwrap(),
            fs::read(e2.join(f)).unwrap(),
            "{f}"
        );
    }

    let split = load_split(&cohort.with_file_name("split.json")).unwrap();
    let test: BTreeSet<&str> = split.test.iter().map(String::as_str).collect();
    let text = fs::read_to_string(e1.join("episodes.csv")).unwrap();
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let col = rdr
        .headers()
        .unwrap()
        .iter()
        .position(|h| h == "episode_id")
        .unwrap();
    let seen: BTreeSet<String> = rdr.records().map(|r| r.unwrap()[col].to_string()).collect();
    assert_eq!(seen.len(), test.len());
    assert!(seen.iter().all(|id| test.contains(id.as_str())));
    assert!(split.train.iter().all(|id| !seen.contains(id)));
}

#[test]
fn evaluate_missing_checkpoint_fails() {
    let dir = tempfile::tempdir().unwrap();
    let cohort = generate(dir.path(), 8, 1, "");
    let r = prnn(&[
        "evaluate",
        "--cohort",
        s(&cohort),
        "--checkpoint",
        s(&dir.path().join("nope.json")),
        "--out",
        s(&dir.path().join("e")),
    ]);
    assert_eq!(code(&r), 2);
    assert!(String::from_utf8_lossy(&r.stderr).contains("nope.json"));
}

#[test]
fn no_deaths_marks_auroc_undefined() {
    let dir = tempfile::tempdir().unwrap();
    let cohort = generate(dir.path(), 10, 6, "mortality_intercept = -60\n");
    let ck = train(&cohort, &dir.path().join("t"), &["--model", "k1"], 0);
    let e = dir.path().join("e");
    evaluate(&cohort, &ck, &e, "paper");
    let text = fs::read_to_string(e.join("auroc.csv")).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert!(!rows.is_empty());
    assert!(rows.iter().all(|r| r.contains("undefined")), "{text}");
}

#[test]
fn compare_joins_models_and_checks_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let cohort = generate(dir.path(), 16, 8, "");
    let mut evals = Vec::new();
    for model in ["k1", "k3"] {
        let ck = train(
            &cohort,
            &dir.path().join(format!("t{model}")),
            &["--model", model],
            1,
        );
        let e = dir.path().join(format!("e{model}"));
        evaluate(&cohort, &ck, &e, "paper");
        evals.push(e);
    }
    let out = dir.path().join("comparison.csv");
    ok(&[
        "compare",
        "--eval-dirs",
        s(&evals[0]),
        s(&evals[1]),
        "--out",
        s(&out),
    ]);

    let rows = prnn_core::reports::parse_comparison(&fs::read_to_string(&out).unwrap()).unwrap();
    let variation: Vec<_> = rows.iter().filter(|r| r.metric == "variation").collect();
    let keys: BTreeSet<(&str, &str)> = variation
        .iter()
        .map(|r| (r.definition.as_str(), r.model.as_str()))
        .collect();
    assert_eq!(
        keys.len(),
        variation.len(),
        "one row per (definition, model)"
    );
    let defs: BTreeSet<&str> = variation.iter().map(|r| r.definition.as_str()).collect();
    assert_eq!(variation.len(), 2 * defs.len());
    // 24 thresholded change definitions plus cardiac arrest.
    assert_eq!(defs.len(), 25);
    assert!(defs.contains("cardiac_arrest"));
    for metric in ["pipeup_mean", "pipeup_sd", "auroc"] {
        assert!(rows.iter().any(|r| r.metric == metric), "{metric}");
    }

    // Missing directory: error names the path.
    let gone = dir.path().join("does-not-exist");
    let r = prnn(&[
        "compare",
        "--eval-dirs",
        s(&evals[0]),
        s(&gone),
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&r), 2);
    assert!(String::from_utf8_lossy(&r.stderr).contains("does-not-exist"));

    // Same model twice.
    let r = prnn(&[
        "compare",
        "--eval-dirs",
        s(&evals[0]),
        s(&evals[0]),
        "--out",
        s(&out),
    ]);
    assert_ne!(code(&r), 0);

    // An evaluation on a different cohort.
    let other_dir = tempfile::tempdir().unwrap();
    let other = generate(other_dir.path(), 16, 9, "");
    let ck = dir.path().join("tk3").join("checkpoint.json");
    let foreign = dir.path().join("foreign");
    evaluate(&other, &ck, &foreign, "paper");
    let r = prnn(&[
        "compare",
        "--eval-dirs",
        s(&evals[0]),
        s(&foreign),
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&r), 2);
    assert!(String::from_utf8_lossy(&r.stderr)
        .to_lowercase()
        .contains("cohort"));
}
