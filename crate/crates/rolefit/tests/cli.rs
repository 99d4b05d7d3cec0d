use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn rolefit(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rolefit"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn json_stdout(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "command failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is one JSON object")
}

const SPEC: &str = r#"{
  "verbs": ["feed", "brew"],
  "nouns": ["farmer", "cow", "kettle", "leaf", "barn", "dawn"],
  "roles": ["ARG0", "ARG1", "ARGM-TMP"],
  "role_probs": [[0.5, 0.3, 0.2], [0.4, 0.4, 0.2]],
  "noun_probs": [
    [[0.7, 0.3, 0.0, 0.0, 0.0, 0.0],
     [0.0, 0.6, 0.0, 0.2, 0.2, 0.0],
     [0.0, 0.0, 0.0, 0.0, 0.2, 0.8]],
    [[1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
     [0.0, 0.0, 0.5, 0.5, 0.0, 0.0],
     [0.0, 0.0, 0.0, 0.0, 0.0, 1.0]]
  ],
  "n_sentences": 1500,
  "frames_per_sentence": {"counts": [1, 2], "probs": [0.8, 0.2]},
  "args_per_frame": {"counts": [2, 3], "probs": [0.6, 0.4]},
  "seed": 9
}"#;

const NORMS: &str = "# judged fit of verb-role-noun triples, scale 1-7\n\
feed\tcow\tA1\t6.5\n\
feed\tfarmer\tA0\t6.2\n\
feed\tkettle\tA1\t1.5\n\
feed\tdawn\tAM-TMP\t5.0\n\
brew\tkettle\tA1\t6.8\n\
brew\tleaf\tA1\t5.5\n\
brew\tfarmer\tA1\t2.0\n\
brew\tbarn\tA1\t1.5\n";

const GRID: &str = r#"{
  "fractions": [1.0],
  "rolesets": [{"name": "synth3", "explicit": ["PRD", "ARG0", "ARG1", "ARGM-TMP"]}],
  "noise_levels": [{"role_flip_rate": 0.0, "head_error_rate": 0.0, "frame_drop_rate": 0.0, "seed": 0}],
  "n_runs": 2,
  "base": {"batch_size": 64, "lr": 0.2, "max_epochs": 2, "patience": 2, "seed": 3, "shuffle": true},
  "dim": 8,
  "blocks": 1,
  "dev_fraction": 0.1,
  "test_fraction": 0.1,
  "vocab_limit": 1000,
  "faithful_max": false
}"#;

#[test]
fn pipeline_synth_train_eval_sweep() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    std::fs::write(dir.join("spec.json"), SPEC).unwrap();
    std::fs::write(dir.join("norms.tsv"), NORMS).unwrap();
    std::fs::write(dir.join("grid.json"), GRID).unwrap();

    let synth = json_stdout(&rolefit(
        &["synth", "--spec", "spec.json", "--out", "corpus.jsonl"],
        dir,
    ));
    assert_eq!(synth["sentences"], 1500);
    assert!(dir.join("corpus.jsonl").exists());

    let stats = json_stdout(&rolefit(&["corpus", "stats", "--input", "corpus.jsonl"], dir));
    assert_eq!(stats["sentences"], 1500);
    let frames = stats["frames"].as_u64().unwrap();
    assert!(frames >= 1500);
    let prd_count: u64 = stats["roles"]
        .as_array()
        .unwrap()
        .iter()
        .find(|row| row["role"] == "PRD")
        .and_then(|row| row["count"].as_u64())
        .unwrap();
    assert_eq!(prd_count, frames);

    let subset = json_stdout(&rolefit(
        &[
            "corpus", "subset", "--input", "corpus.jsonl", "--fraction", "0.5", "--out",
            "half.jsonl",
        ],
        dir,
    ));
    assert_eq!(subset["sentences_out"], 750);

    let kept = json_stdout(&rolefit(
        &[
            "corpus", "filter", "--input", "corpus.jsonl", "--exclude-source", "BNC", "--out",
            "kept.jsonl",
        ],
        dir,
    ));
    assert_eq!(kept["frames_out"], frames);
    let emptied = json_stdout(&rolefit(
        &[
            "corpus", "filter", "--input", "corpus.jsonl", "--exclude-source", "SYNTH", "--out",
            "none.jsonl",
        ],
        dir,
    ));
    assert_eq!(emptied["frames_out"], 0);

    let split = json_stdout(&rolefit(
        &["corpus", "split", "--total", "10", "--dev", "0", "--test", "1"],
        dir,
    ));
    assert_eq!(split["train_files"].as_array().unwrap().len(), 8);

    let config = r#"{"name": "synth3", "explicit": ["PRD", "ARG0", "ARG1", "ARGM-TMP"]}"#;
    std::fs::write(dir.join("synth.roleset.json"), config).unwrap();
    let train = json_stdout(&rolefit(
        &[
            "train", "--corpus", "corpus.jsonl", "--roleset", "synth.roleset.json", "--epochs",
            "3", "--batch", "64", "--lr", "0.2", "--dim", "8", "--blocks", "1", "--seed", "5",
            "--out", "model.json", "--history", "history.csv",
        ],
        dir,
    ));
    assert!(train["stopped_epoch"].as_u64().unwrap() >= 1);
    assert!(dir.join("model.json").exists());
    assert!(dir.join("model.best").exists());
    let history = std::fs::read_to_string(dir.join("history.csv")).unwrap();
    assert!(history.lines().next().unwrap().contains("epoch"));

    let acc = json_stdout(&rolefit(
        &["eval", "accuracy", "--ckpt", "model.json", "--corpus", "corpus.jsonl"],
        dir,
    ));
    assert!(acc["samples"].as_u64().unwrap() > 1000);
    let role_acc = acc["role_acc"].as_f64().unwrap();
    let word_acc = acc["word_acc"].as_f64().unwrap();
    assert!(role_acc > 0.3 && role_acc <= 1.0);
    assert!(word_acc > 0.0 && word_acc <= 1.0);

    let norms = json_stdout(&rolefit(
        &[
            "eval", "norms", "--ckpt-final", "model.json", "--ckpt-best", "model.best",
            "--norms", "norms.tsv",
        ],
        dir,
    ));
    assert_eq!(norms["items"], 8);
    let rho = norms["rho_final"].as_f64().unwrap();
    assert!((-1.0..=1.0).contains(&rho));

    let sweep = json_stdout(&rolefit(
        &[
            "sweep", "--grid", "grid.json", "--corpus", "corpus.jsonl", "--norms", "norms.tsv",
            "--out", "report", "--workers", "2",
        ],
        dir,
    ));
    assert_eq!(sweep["cells"], 1);
    assert_eq!(sweep["cells_with_errors"], 0);
    let csv = std::fs::read_to_string(dir.join("report").join("report.csv")).unwrap();
    assert!(csv.lines().next().unwrap().starts_with("fraction,"));
    assert_eq!(csv.lines().count(), 2);
    let report: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("report").join("report.json")).unwrap())
            .unwrap();
    assert_eq!(report["rows"].as_array().unwrap().len(), 1);
}

#[test]
fn roleset_show_variants() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();

    let baseline = json_stdout(&rolefit(&["roleset", "show"], dir));
    assert_eq!(baseline["name"], "2Args3Mods");
    let explicit = baseline["explicit"].as_array().unwrap().len();
    assert_eq!(baseline["size"].as_u64().unwrap() as usize, explicit + 2);

    let ladder = json_stdout(&rolefit(
        &["roleset", "show", "--roleset", "by-frequency:3"],
        dir,
    ));
    assert_eq!(ladder["explicit"].as_array().unwrap().len(), explicit + 3);
}

#[test]
fn failures_exit_nonzero() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();

    let missing = rolefit(&["corpus", "stats", "--input", "absent.jsonl"], dir);
    assert!(!missing.status.success());

    let bad_roleset = rolefit(&["roleset", "show", "--roleset", "no-such-inventory"], dir);
    assert!(!bad_roleset.status.success());

    std::fs::write(dir.join("tiny.jsonl"), "not a frame record\n").unwrap();
    let malformed = rolefit(&["corpus", "stats", "--input", "tiny.jsonl"], dir);
    assert!(!malformed.status.success());
}
