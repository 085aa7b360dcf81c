use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use diffanon::harness::ExperimentConfig;

fn diffanon(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_diffanon")).args(args).output().unwrap()
}

fn error_line(out: &Output) -> serde_json::Value {
    assert!(!out.status.success());
    let stderr = String::from_utf8(out.stderr.clone()).unwrap();
    let last = stderr.lines().last().expect("stderr is empty");
    serde_json::from_str(last).unwrap_or_else(|e| panic!("not JSON: {last} ({e})"))
}

fn write_config(dir: &Path) -> String {
    let mut c = ExperimentConfig::new(21);
    c.output_dir = dir.join("run");
    let s = &mut c.data.synthetic;
    s.n_subjects = 6;
    s.train_subjects = 3;
    s.samples_per_subject = 4;
    s.dim = 16;
    for n in s.attacks.values_mut() {
        *n = 12;
    }
    c.model.gmm.components = 2;
    let path = dir.join("exp.toml");
    fs::write(&path, c.to_toml()).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn pipeline_through_the_binary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    for cmd in ["synth", "train", "score", "evaluate"] {
        let out = diffanon(&[cmd, "--config", &cfg]);
        assert!(out.status.success(), "{cmd}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let run = dir.path().join("run");
    for f in ["data/embeddings.txt", "model.danom", "train_log.csv", "scores.txt", "report/metrics.csv", "report/det.svg"] {
        assert!(run.join(f).exists(), "{f}");
    }
    let resolved = fs::read_to_string(run.join("resolved_config.toml")).unwrap();
    assert!(resolved.contains("seed = 21"));
}

#[test]
fn flags_override_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let other = dir.path().join("elsewhere");
    let other_s = other.to_str().unwrap();
    let out = diffanon(&["synth", "--config", &cfg, "--seed", "5", "--out", other_s]);
    assert!(out.status.success());
    let out = diffanon(&["train", "--config", &cfg, "--seed", "5", "--out", other_s, "--model", "svm", "--fusion", "abs"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let resolved = fs::read_to_string(other.join("resolved_config.toml")).unwrap();
    assert!(resolved.contains("seed = 5"));
    assert!(resolved.contains("\"svm\""));
    assert!(resolved.contains("fusion = \"abs\""));
    assert!(!dir.path().join("run").exists());
}

#[test]
fn missing_seed_is_a_config_error() {
    let v = error_line(&diffanon(&["synth"]));
    assert_eq!(v["error"], "invalid_config");
    assert!(v["message"].as_str().unwrap().contains("--seed"));
}

#[test]
fn errors_are_single_json_lines() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());

    let v = error_line(&diffanon(&["train", "--config", &cfg]));
    assert_eq!(v["error"], "invalid_config");
    assert!(v["message"].as_str().unwrap().contains("synth"));

    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "seed = 1\nbogus = 2\n").unwrap();
    let v = error_line(&diffanon(&["synth", "--config", bad.to_str().unwrap()]));
    assert_eq!(v["error"], "parse");

    let garbage = dir.path().join("garbage.danom");
    fs::write(&garbage, b"not a model").unwrap();
    assert!(diffanon(&["synth", "--config", &cfg]).status.success());
    let v = error_line(&diffanon(&["score", "--config", &cfg, "--model-file", garbage.to_str().unwrap()]));
    assert_eq!(v["error"], "model_format");

    let scores = dir.path().join("scores.txt");
    fs::write(&scores, "#diffanon-scores v1\na,b,bona_fide_pair,-,oops\n").unwrap();
    let v = error_line(&diffanon(&["evaluate", "--config", &cfg, "--scores", scores.to_str().unwrap()]));
    assert_eq!(v["error"], "parse");
    assert!(v["message"].as_str().unwrap().contains(":2:"));
}

#[test]
fn purity_violation_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    assert!(diffanon(&["synth", "--config", &cfg]).status.success());
    let data = dir.path().join("run/data");
    let test = fs::read_to_string(data.join("test_pairs.txt")).unwrap();
    let attack = test.lines().find(|l| l.contains("attack_pair")).unwrap().to_string();
    let mut train = fs::read_to_string(data.join("train_pairs.txt")).unwrap();
    train.push_str(&attack);
    train.push('\n');
    fs::write(data.join("train_pairs.txt"), train).unwrap();
    let v = error_line(&diffanon(&["train", "--config", &cfg]));
    assert_eq!(v["error"], "protocol_violation");
    let probe = attack.split('\t').nth(1).unwrap();
    assert!(v["message"].as_str().unwrap().contains(probe));
}

#[test]
fn help_lists_subcommands() {
    let out = diffanon(&["--help"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for cmd in ["synth", "train", "score", "evaluate", "sweep"] {
        assert!(text.contains(cmd));
    }
}
