//! Drives the compiled binary end to end over temporary fixtures.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ngramcnn"))
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    bin()
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary should spawn")
}

fn assert_ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "expected success, got {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn assert_exit(out: &Output, code: i32) -> String {
    assert_eq!(
        out.status.code(),
        Some(code),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Writes a small separable corpus and an embedding table whose positive
/// and negative word vectors sit on opposite sides of the origin.
fn write_fixtures(dir: &Path) {
    let pos = ["good", "great", "fine", "happy", "bright", "lovely"];
    let neg = ["bad", "awful", "poor", "sad", "gloomy", "dreary"];
    let filler = ["film", "plot", "scene", "actor", "story", "music"];

    let mut corpus = String::new();
    for i in 0..120 {
        let bank: &[&str] = if i % 2 == 0 { &pos } else { &neg };
        let mut words: Vec<&str> = (0..4).map(|j| bank[(i + j) % bank.len()]).collect();
        words.push(filler[i % filler.len()]);
        words.push(filler[(i + 3) % filler.len()]);
        let label = if i % 2 == 0 { "positive" } else { "negative" };
        corpus.push_str(&format!(
            "{{\"id\":\"d{i}\",\"text\":\"{}.\",\"label\":\"{label}\"}}\n",
            words.join(" ")
        ));
    }
    fs::write(dir.join("corpus.jsonl"), corpus).unwrap();

    let mut vectors = String::new();
    for (i, w) in pos.iter().chain(&neg).chain(&filler).enumerate() {
        let base = if pos.contains(w) {
            1.0
        } else if neg.contains(w) {
            -1.0
        } else {
            0.0
        };
        let row: Vec<String> = (0..8)
            .map(|d| format!("{:.4}", base + 0.05 * ((i * 7 + d) % 11) as f64 - 0.25))
            .collect();
        vectors.push_str(&format!("{w} {}\n", row.join(" ")));
    }
    fs::write(dir.join("vectors.txt"), vectors).unwrap();
}

#[test]
fn pipeline_prep_train_eval_predict() {
    let dir = TempDir::new().unwrap();
    write_fixtures(dir.path());

    let stdout = assert_ok(&run_in(
        dir.path(),
        &[
            "prep", "--input", "corpus.jsonl", "--output", "clean.jsonl", "--stats",
        ],
    ));
    assert!(stdout.contains("120 documents"), "stats line missing: {stdout}");
    assert!(dir.path().join("clean.jsonl.manifest.json").exists());

    let train_args = [
        "train",
        "--data",
        "clean.jsonl",
        "--embeddings",
        "vectors.txt",
        "--preset",
        "custom",
        "--n",
        "12",
        "--R",
        "2",
        "--filters",
        "6",
        "--dense",
        "8",
        "--epochs",
        "2",
        "--seed",
        "3",
        "--output-dir",
    ];
    let mut first = train_args.to_vec();
    first.push("run1");
    let stdout = assert_ok(&run_in(dir.path(), &first));
    assert!(stdout.contains("epoch 1"), "missing epoch line: {stdout}");
    for artifact in ["model.ngc", "history.csv", "metrics.json", "manifest.json"] {
        assert!(
            dir.path().join("run1").join(artifact).exists(),
            "missing run1/{artifact}"
        );
    }
    let metrics: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("run1/metrics.json")).unwrap())
            .unwrap();
    assert!(metrics["accuracy"].as_f64().unwrap() >= 0.0);

    let mut second = train_args.to_vec();
    second.push("run2");
    assert_ok(&run_in(dir.path(), &second));
    assert_eq!(
        fs::read(dir.path().join("run1/model.ngc")).unwrap(),
        fs::read(dir.path().join("run2/model.ngc")).unwrap(),
        "same seed must reproduce the checkpoint byte for byte"
    );

    let stdout = assert_ok(&run_in(
        dir.path(),
        &[
            "eval",
            "--checkpoint",
            "run1/model.ngc",
            "--data",
            "clean.jsonl",
            "--embeddings",
            "vectors.txt",
            "--threads",
            "2",
            "--output",
            "metrics-eval.json",
        ],
    ));
    let evaluated: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    assert!(evaluated["accuracy"].as_f64().unwrap() > 0.5);
    assert!(dir.path().join("metrics-eval.json.manifest.json").exists());

    assert_ok(&run_in(
        dir.path(),
        &[
            "predict",
            "--checkpoint",
            "run1/model.ngc",
            "--data",
            "clean.jsonl",
            "--embeddings",
            "vectors.txt",
            "--output",
            "preds.jsonl",
        ],
    ));
    let preds = fs::read_to_string(dir.path().join("preds.jsonl")).unwrap();
    assert_eq!(preds.lines().count(), 120);
    let row: serde_json::Value = serde_json::from_str(preds.lines().next().unwrap()).unwrap();
    assert!(row["probability"].as_f64().unwrap() > 0.0);
    assert!(matches!(row["label"].as_str(), Some("positive" | "negative")));
}

#[test]
fn preset_conflicts_and_missing_custom_flags_are_usage_errors() {
    let dir = TempDir::new().unwrap();
    write_fixtures(dir.path());
    let base = [
        "train",
        "--data",
        "corpus.jsonl",
        "--embeddings",
        "vectors.txt",
    ];

    let mut conflict = base.to_vec();
    conflict.extend(["--preset", "sent", "--n", "40"]);
    let stderr = assert_exit(&run_in(dir.path(), &conflict), 2);
    assert!(stderr.contains("--preset custom"), "unexpected: {stderr}");

    let mut missing = base.to_vec();
    missing.extend(["--preset", "custom"]);
    assert_exit(&run_in(dir.path(), &missing), 2);
}

#[test]
fn gradcheck_passes_and_writes_report() {
    let dir = TempDir::new().unwrap();
    let stdout = assert_ok(&run_in(
        dir.path(),
        &["gradcheck", "--seed", "7", "--output", "report.json"],
    ));
    assert!(stdout.contains("worst relative error"), "missing: {stdout}");
    assert!(stdout.contains("backward pass verified"));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["passed"], serde_json::Value::Bool(true));
    assert_eq!(report["checks"].as_array().unwrap().len(), 9);
    assert!(dir.path().join("report.json.manifest.json").exists());
}

#[test]
fn audit_prints_enumerated_minimum_purity() {
    let dir = TempDir::new().unwrap();
    let stdout = assert_ok(&run_in(dir.path(), &["audit", "--rule", "pn"]));
    assert!(stdout.contains("0.8421"), "missing pn floor: {stdout}");
    assert!(stdout.contains("monotonicity violations: 0"));

    let stdout = assert_ok(&run_in(
        dir.path(),
        &["audit", "--rule", "4q", "--max-total", "25"],
    ));
    assert!(stdout.contains("0.8182"), "missing 4q floor: {stdout}");

    assert_exit(&run_in(dir.path(), &["audit", "--rule", "pn", "--max-total", "5"]), 2);
}

#[test]
fn prep_reports_input_problems_with_distinct_exit_codes() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("empty.jsonl"), "").unwrap();
    assert_exit(
        &run_in(
            dir.path(),
            &["prep", "--input", "empty.jsonl", "--output", "out.jsonl"],
        ),
        6,
    );
    assert_exit(
        &run_in(
            dir.path(),
            &["prep", "--input", "no-such-file.jsonl", "--output", "out.jsonl"],
        ),
        3,
    );
}

#[test]
fn analogy_ranks_toy_neighbors() {
    let dir = TempDir::new().unwrap();
    write_fixtures(dir.path());
    let stdout = assert_ok(&run_in(
        dir.path(),
        &[
            "analogy",
            "--embeddings",
            "vectors.txt",
            "--a",
            "good",
            "--b",
            "great",
            "--c",
            "bad",
            "--k",
            "3",
        ],
    ));
    assert_eq!(stdout.lines().count(), 3);
    let first = stdout.lines().next().unwrap();
    let (token, cos) = first.split_once('\t').unwrap();
    assert!(["awful", "poor", "sad", "gloomy", "dreary"].contains(&token), "got {token}");
    cos.parse::<f64>().unwrap();
}

#[test]
fn label_annotate_agree_round_trip() {
    let dir = TempDir::new().unwrap();
    fs::write(
        dir.path().join("docs.jsonl"),
        concat!(
            "{\"id\":\"a\",\"tokens\":[\"happy\",\"happy\",\"bright\"],\"label\":null}\n",
            "{\"id\":\"b\",\"tokens\":[\"gloomy\",\"sad\"],\"label\":null}\n",
            "{\"id\":\"c\",\"tokens\":[\"film\"],\"label\":null}\n",
        ),
    )
    .unwrap();
    fs::write(
        dir.path().join("anew.csv"),
        "word,valence,arousal\nhappy,8.2,6.5\nbright,7.0,5.6\nsad,1.8,3.5\ngloomy,2.2,3.2\n",
    )
    .unwrap();
    let stdout = assert_ok(&run_in(
        dir.path(),
        &[
            "label", "--input", "docs.jsonl", "--lexicon", "anew.csv", "--mode", "4q",
            "--output", "labels.jsonl",
        ],
    ));
    assert!(stdout.contains("labeled 2 of 3"), "unexpected: {stdout}");
    let labels = fs::read_to_string(dir.path().join("labels.jsonl")).unwrap();
    let rows: Vec<serde_json::Value> = labels
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(rows[0]["label"], "happy");
    assert_eq!(rows[1]["label"], "sad");
    assert_eq!(rows[2]["label"], "unknown");
    assert_eq!(rows[2]["hits"], 0);

    fs::write(
        dir.path().join("tags.jsonl"),
        concat!(
            "{\"track_id\":\"t1\",\"tags\":[\"happy\",\"joyous\",\"fun\",\"merry\"]}\n",
            "{\"track_id\":\"t2\",\"tags\":[\"sad\",\"gloomy\",\"tragic\",\"sorrow\",\"bitter\",\"funeral\",\"angry\"]}\n",
            "{\"track_id\":\"t3\",\"tags\":[\"calm\",\"tense\"]}\n",
        ),
    )
    .unwrap();
    let stdout = assert_ok(&run_in(
        dir.path(),
        &[
            "annotate", "--tags", "tags.jsonl", "--rule", "4q", "--output", "ann.jsonl",
        ],
    ));
    assert!(stdout.contains("labeled 2 of 3"), "unexpected: {stdout}");
    let rows: Vec<serde_json::Value> = fs::read_to_string(dir.path().join("ann.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(rows[0]["label"], "Q1");
    assert_eq!(rows[1]["label"], "Q3");
    assert_eq!(rows[2]["label"], serde_json::Value::Null);

    let stdout = assert_ok(&run_in(
        dir.path(),
        &[
            "agree",
            "--reference",
            "ann.jsonl",
            "--candidate",
            "ann.jsonl",
            "--output",
            "agree.json",
        ],
    ));
    assert!(stdout.contains("overall agreement 1.0000"), "unexpected: {stdout}");
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("agree.json")).unwrap()).unwrap();
    assert_eq!(report["shared"], 2);
}
