use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn dsre(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dsre")).args(args).output().unwrap()
}

fn text(b: &[u8]) -> String {
    String::from_utf8_lossy(b).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Generates a tiny corpus and trains one epoch on it.
fn trained(dir: &Path) -> (PathBuf, PathBuf) {
    let data = dir.join("data");
    let out = dsre(&[
        "gen-synthetic",
        "--out",
        s(&data),
        "--relations",
        "2",
        "--bags-per-relation",
        "4",
        "--bag-size",
        "2",
        "--noise-rate",
        "0.3",
        "--test-fraction",
        "0.5",
        "--embedding-dim",
        "300",
    ]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    let run = dir.join("run");
    let out = dsre(&[
        "train",
        "--corpus",
        s(&data.join("train.jsonl")),
        "--schema",
        s(&data.join("schema.txt")),
        "--embeddings",
        s(&data.join("embeddings.txt")),
        "--out",
        s(&run),
        "--epochs",
        "1",
    ]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    (data, run)
}

fn files_in(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    v.sort();
    v
}

#[test]
fn no_arguments_prints_usage_and_exits_1() {
    let out = dsre(&[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out.stderr).contains("Usage"));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let out = dsre(&["evaluate", "--bogus"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(dsre(&["--help"]).status.code(), Some(0));
}

#[test]
fn missing_input_exits_2_naming_the_path() {
    let out = dsre(&["evaluate", "--checkpoint", "/no/such/model.ckpt", "--corpus", "/no/such/c.jsonl"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(text(&out.stderr).contains("/no/such/model.ckpt"));
}

#[test]
fn bad_config_line_exits_2_with_file_and_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("train.cfg");
    std::fs::write(&cfg, "epochs = 2\n# comment\nlearning_rat = 0.1\n").unwrap();
    let out = dsre(&["train", "--config", s(&cfg)]);
    assert_eq!(out.status.code(), Some(2));
    let err = text(&out.stderr);
    assert!(err.contains("line 3") && err.contains("train.cfg"), "{err}");
}

#[test]
fn gradcheck_passes_for_seed_7() {
    let out = dsre(&["gradcheck", "--seed", "7"]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stdout));
    assert!(text(&out.stdout).contains("max_relative_error="));
}

#[test]
fn train_evaluate_and_inspect_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let (data, run) = trained(dir.path());
    assert_eq!(files_in(&run), ["checkpoint_epoch0.ckpt", "final.ckpt", "metrics.csv"]);

    let pr = dir.path().join("pr.csv");
    let ckpt = run.join("final.ckpt");
    // embeddings come from the path recorded in the checkpoint
    let out = dsre(&["evaluate", "--checkpoint", s(&ckpt), "--corpus", s(&data.join("test.jsonl")), "--out", s(&pr)]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    let stdout = text(&out.stdout);
    assert!(stdout.starts_with("auc_pr="), "{stdout}");
    let csv = std::fs::read_to_string(&pr).unwrap();
    assert!(csv.starts_with("rank,score,correct,precision,recall\n"));
    assert_eq!(csv.lines().count(), 1 + 4 * 2);

    let with_gold = dsre(&[
        "evaluate",
        "--checkpoint",
        s(&ckpt),
        "--corpus",
        s(&data.join("test.jsonl")),
        "--gold",
        s(&data.join("test_gold.tsv")),
    ]);
    assert_eq!(text(&with_gold.stdout), stdout);

    let tsv = dir.path().join("attention.tsv");
    let out = dsre(&[
        "inspect-attention",
        "--checkpoint",
        s(&ckpt),
        "--corpus",
        s(&data.join("test.jsonl")),
        "--out",
        s(&tsv),
    ]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    assert!(text(&out.stdout).contains("hop 4"));
    let report = std::fs::read_to_string(&tsv).unwrap();
    assert!(report.starts_with("pair_id\tinstance\tsentence_id\thop1"));
    assert_eq!(report.lines().count(), 1 + 4 * 2);

    // atomic writes leave no temporaries behind
    assert_eq!(files_in(dir.path()), ["attention.tsv", "data", "pr.csv", "run"]);
    assert_eq!(files_in(&run), ["checkpoint_epoch0.ckpt", "final.ckpt", "metrics.csv"]);
}

#[test]
fn non_finite_loss_exits_3_naming_the_batch() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let out = dsre(&[
        "gen-synthetic",
        "--out",
        s(&data),
        "--relations",
        "2",
        "--bags-per-relation",
        "2",
        "--bag-size",
        "2",
        "--embedding-dim",
        "300",
    ]);
    assert!(out.status.success());
    // every static vector becomes NaN, which seeds the word table
    let emb = std::fs::read_to_string(data.join("embeddings.txt")).unwrap();
    let poisoned: String = emb
        .lines()
        .map(|l| {
            let word = l.split_whitespace().next().unwrap();
            format!("{word}{}\n", " NaN".repeat(300))
        })
        .collect();
    let bad = data.join("nan.txt");
    std::fs::write(&bad, poisoned).unwrap();
    let run = dir.path().join("run");
    let out = dsre(&[
        "train",
        "--corpus",
        s(&data.join("train.jsonl")),
        "--schema",
        s(&data.join("schema.txt")),
        "--embeddings",
        s(&bad),
        "--out",
        s(&run),
        "--epochs",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(3), "{}", text(&out.stderr));
    assert!(text(&out.stderr).contains("non-finite loss"));
}
