//! End-to-end runs of the `atpl` binary.

use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_atpl");
const JOHN: &str = "(S(NNP John)(VP(VBD hit)(NP(DT the)(NN ball))))";

fn atpl(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env_remove("ATPL_SEED")
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn fixture(name: &str) -> String {
    format!("{}/data/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).display().to_string()
}

#[test]
fn no_arguments_prints_usage_and_exits_2() {
    let o = atpl(&[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
}

#[test]
fn unknown_flag_exits_2() {
    assert_eq!(atpl(&["check-gradients", "--frobnicate"]).status.code(), Some(2));
}

#[test]
fn parse_rebuilds_worked_example() {
    let o = atpl(&["parse", "--encodings", &fixture("john.enc")]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).trim_end(), JOHN);
}

#[test]
fn check_gradients_passes_every_block() {
    let o = atpl(&["check-gradients", "--seed", "7"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    let rows: Vec<(&str, f64)> = out
        .lines()
        .filter(|l| l.starts_with("max_rel_error,"))
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[1], f[2].parse().unwrap())
        })
        .collect();
    let blocks: Vec<&str> = rows.iter().map(|r| r.0).collect();
    assert_eq!(
        blocks,
        ["attention", "ffnn", "lstm", "blstm", "factored_weight", "decoder", "tagger", "segmenter"]
    );
    assert!(rows.iter().all(|r| r.1 <= 1e-4), "{out}");
}

#[test]
fn seed_is_mandatory_with_env_fallback() {
    let dir = tempfile::tempdir().unwrap();
    let out = p(dir.path(), "c");
    let o = atpl(&["gen-corpus", "--out", &out, "--train-size", "3", "--test-size", "2"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("seed"));
    let o = Command::new(BIN)
        .args(["gen-corpus", "--out", &out, "--train-size", "3", "--test-size", "2"])
        .env("ATPL_SEED", "5")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(Path::new(&out).join("train.trees").is_file());
}

#[test]
fn config_file_with_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = p(dir.path(), "run.cfg");
    std::fs::write(&cfg, format!("seed = 3\ntrain_size = 5\ntest_size = 4\nout = {}\n", p(dir.path(), "c"))).unwrap();
    let report = p(dir.path(), "r.csv");
    let o = atpl(&["--config", &cfg, "gen-corpus", "--train-size", "2", "--report", &report]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(&report).unwrap();
    assert!(csv.contains("sentences,train,2\n"), "{csv}");
    assert!(csv.contains("sentences,test,4\n"), "{csv}");

    std::fs::write(&cfg, "seed = 3\ncolour = blue\n").unwrap();
    assert_eq!(atpl(&["--config", &cfg, "check-gradients"]).status.code(), Some(2));
}

#[test]
fn data_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let caps = p(dir.path(), "caps.tsv");
    std::fs::write(&caps, "a\t0.1 0.2\tthe dog\n").unwrap();
    let cands = p(dir.path(), "cands.txt");
    std::fs::write(&cands, "zzz\tthe dog\n").unwrap();
    let o = atpl(&["eval-bleu", "--candidates", &cands, "--captions", &caps]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("zzz"));

    std::fs::write(&caps, "a\t0.1 x\tthe dog\n").unwrap();
    let o = atpl(&["train-captioner", "--seed", "1", "--captions", &caps, "--model", &p(dir.path(), "m")]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("record `a`"));
}

#[test]
fn eval_bleu_of_references_is_one() {
    let dir = tempfile::tempdir().unwrap();
    let caps = p(dir.path(), "caps.tsv");
    std::fs::write(&caps, "a\t0.1 0.2\tthe dog runs far|a cat\nb\t0.3 0.4\tsome man sat down\n").unwrap();
    let cands = p(dir.path(), "cands.txt");
    std::fs::write(&cands, "a\tthe dog runs far\nb\tsome man sat down\n").unwrap();
    let o = atpl(&["eval-bleu", "--candidates", &cands, "--captions", &caps]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    for n in 1..=4 {
        assert!(out.contains(&format!("bleu_{n},test,1\n")), "{out}");
    }
}

/// Runs every stage on a small corpus and returns the concatenated reports
/// and outputs.
fn small_run(dir: &Path) -> String {
    let d = |n: &str| p(dir, n);
    let c = |n: &str| p(&dir.join("c"), n);
    let steps: Vec<Vec<String>> = vec![
        vec!["gen-corpus".into(), "--out".into(), d("c"), "--train-size".into(), "30".into(), "--test-size".into(), "10".into(), "--feature-dim".into(), "16".into()],
        vec!["train-autoencoder".into(), "--input".into(), c("train.txt"), "--test-input".into(), c("test.txt"), "--model".into(), d("ae"), "--epochs".into(), "2".into(), "--d".into(), "8".into(), "--hidden".into(), "16".into(), "--context".into(), "16".into(), "--embed".into(), "8".into()],
        vec!["extract-u".into(), "--model".into(), d("ae"), "--input".into(), c("train.txt"), "--out".into(), d("u_train.txt")],
        vec!["extract-u".into(), "--model".into(), d("ae"), "--input".into(), c("test.txt"), "--out".into(), d("u_test.txt")],
        vec!["train-tagger".into(), "--tagged".into(), c("train.tagged"), "--units".into(), d("u_train.txt"), "--test-tagged".into(), c("test.tagged"), "--test-units".into(), d("u_test.txt"), "--autoencoder".into(), d("ae"), "--model".into(), d("tagger"), "--epochs".into(), "2".into()],
        vec!["eval-tagger".into(), "--model".into(), d("tagger"), "--autoencoder".into(), d("ae"), "--tagged".into(), c("test.tagged"), "--units".into(), d("u_test.txt"), "--confusion".into(), d("confusion.csv")],
        vec!["train-parser".into(), "--treebank".into(), c("train.trees"), "--units".into(), d("u_train.txt"), "--model".into(), d("parser"), "--epochs".into(), "2".into()],
        vec!["eval-parse".into(), "--model".into(), d("parser"), "--treebank".into(), c("test.trees"), "--units".into(), d("u_test.txt")],
        vec!["parse".into(), "--model".into(), d("parser"), "--tagged".into(), c("test.tagged"), "--units".into(), d("u_test.txt")],
        vec!["train-captioner".into(), "--captions".into(), c("captions_train.tsv"), "--model".into(), d("cap"), "--epochs".into(), "2".into(), "--d".into(), "4".into(), "--hidden".into(), "8".into()],
        vec!["caption".into(), "--model".into(), d("cap"), "--captions".into(), c("captions_test.tsv"), "--out".into(), d("cands.txt")],
        vec!["eval-bleu".into(), "--candidates".into(), d("cands.txt"), "--captions".into(), c("captions_test.tsv")],
    ];
    let mut all = String::new();
    for step in steps {
        let mut args: Vec<&str> = step.iter().map(String::as_str).collect();
        args.extend(["--seed", "11"]);
        let o = atpl(&args);
        assert_eq!(o.status.code(), Some(0), "{:?}: {}", step[0], String::from_utf8_lossy(&o.stderr));
        all.push_str(&format!("## {}\n{}", step[0], stdout(&o)));
    }
    for f in ["confusion.csv", "cands.txt", "u_test.txt"] {
        all.push_str(&std::fs::read_to_string(dir.join(f)).unwrap());
    }
    all
}

#[test]
fn every_subcommand_runs_and_repeats_byte_for_byte() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let first = small_run(a.path());
    let second = small_run(b.path());
    assert!(first.contains("parse_f1_predicted_codes,test,"));
    assert!(first.contains("bleu_4,test,"));
    assert_eq!(first, second);
}
