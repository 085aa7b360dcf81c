mod support;

use std::fs;
use std::path::Path;

use diffanon::embeddings::{read_dataset, read_pairs, write_pairs, AttackType, PairRecord};
use diffanon::harness::*;
use diffanon::metrics::{read_metrics_csv, read_summary_csv};
use diffanon::oneclass::ModelKind;
use diffanon::Error;

fn small_config(dir: &Path, seed: u64) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(seed);
    c.output_dir = dir.to_path_buf();
    let s = &mut c.data.synthetic;
    s.n_subjects = 8;
    s.train_subjects = 4;
    s.samples_per_subject = 5;
    s.dim = 24;
    for n in s.attacks.values_mut() {
        *n = 25;
    }
    c.model.vae.hidden_dim = 12;
    c.model.vae.latent_dim = 3;
    c.model.vae.epochs = 5;
    c.model.vae.batch_size = 16;
    c.model.gmm.components = 2;
    c
}

#[test]
fn synth_train_pairs_are_bona_fide_only() {
    let dir = tempfile::tempdir().unwrap();
    let c = small_config(dir.path(), 1);
    let summary = cmd_synth(&c).unwrap();
    assert!(summary.warnings.is_empty());
    assert_eq!(summary.train_pairs, 4 * 10);
    assert_eq!(summary.attack_pairs.len(), 6);
    let ds = read_dataset(&summary.files.embeddings).unwrap();
    let train = read_pairs(&summary.files.train_pairs, &ds).unwrap();
    assert!(train.iter().all(|p| p.pair_attack_type.is_none()));
    assert!(dir.path().join(RESOLVED_CONFIG).exists());
}

#[test]
fn zero_attack_mix_warns() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small_config(dir.path(), 1);
    c.data.synthetic.attacks.values_mut().for_each(|n| *n = 0);
    let summary = cmd_synth(&c).unwrap();
    assert_eq!(summary.warnings.len(), 1);
    assert!(summary.attack_pairs.is_empty());
    let ds = read_dataset(&summary.files.embeddings).unwrap();
    let test = read_pairs(&summary.files.test_pairs, &ds).unwrap();
    assert!(!test.is_empty() && test.iter().all(|p| p.pair_attack_type.is_none()));
}

#[test]
fn training_refuses_attack_pairs() {
    let dir = tempfile::tempdir().unwrap();
    let c = small_config(dir.path(), 2);
    let files = cmd_synth(&c).unwrap().files;
    let ds = read_dataset(&files.embeddings).unwrap();
    let mut train = read_pairs(&files.train_pairs, &ds).unwrap();
    let test = read_pairs(&files.test_pairs, &ds).unwrap();
    let attack: PairRecord = test.into_iter().find(|p| p.pair_attack_type.is_some()).unwrap();
    let probe_id = attack.probe.sample_id.clone();
    train.insert(3, attack);
    write_pairs(&train, &files.train_pairs).unwrap();

    match cmd_train(&c) {
        Err(Error::ProtocolViolation(msg)) => {
            assert!(msg.contains(&probe_id), "{msg}");
            assert!(msg.contains("pair 4"), "{msg}");
        }
        other => panic!("expected protocol violation, got {other:?}"),
    }
    assert!(!dir.path().join(MODEL_FILE).exists());
}

#[test]
fn train_without_data_explains() {
    let dir = tempfile::tempdir().unwrap();
    let err = cmd_train(&small_config(dir.path(), 0)).unwrap_err().to_string();
    assert!(err.contains("synth"), "{err}");
}

#[test]
fn gmm_training_log_is_monotone() {
    let dir = tempfile::tempdir().unwrap();
    let c = small_config(dir.path(), 3);
    cmd_synth(&c).unwrap();
    let t = cmd_train(&c).unwrap();
    let log = fs::read_to_string(&t.log_path).unwrap();
    let mut lines = log.lines();
    assert_eq!(lines.next(), Some("iteration,log_likelihood"));
    let values: Vec<f64> = lines.map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert!(values.len() > 1);
    for w in values.windows(2) {
        assert!(w[1] - w[0] >= -1e-8 / 40.0, "{w:?}");
    }
}

#[test]
fn score_uses_model_fusion_and_keeps_order() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small_config(dir.path(), 4);
    c.fusion = diffanon::fusion::FusionScheme::Abs;
    let files = cmd_synth(&c).unwrap().files;
    cmd_train(&c).unwrap();

    // a later config naming another scheme must not change scoring
    let mut other = c.clone();
    other.fusion = diffanon::fusion::FusionScheme::Sub;
    let s = cmd_score(&other, None, None, None).unwrap();
    assert_eq!(s.scheme, diffanon::fusion::FusionScheme::Abs);

    let ds = read_dataset(&files.embeddings).unwrap();
    let pairs = read_pairs(&files.test_pairs, &ds).unwrap();
    let scored = read_scores(&s.path).unwrap();
    assert_eq!(pairs.len(), scored.len());
    for (p, q) in pairs.iter().zip(&scored) {
        assert_eq!(p.reference.sample_id, q.reference_id);
        assert_eq!(p.probe.sample_id, q.probe_id);
        assert_eq!(p.pair_attack_type, q.pair_attack_type);
    }

    // scoring the training pairs themselves works too
    let train_scores = dir.path().join("train_scores.txt");
    cmd_score(&c, None, Some(&files.train_pairs), Some(&train_scores)).unwrap();
    assert!(read_scores(&train_scores).unwrap().iter().all(|p| p.score.is_finite()));
}

#[test]
fn score_reports_unknown_sample_line() {
    let dir = tempfile::tempdir().unwrap();
    let c = small_config(dir.path(), 5);
    let files = cmd_synth(&c).unwrap().files;
    cmd_train(&c).unwrap();
    let text = fs::read_to_string(&files.test_pairs).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    lines[3] = lines[3].replacen("s00", "zz00", 1);
    let bad = dir.path().join("bad_pairs.txt");
    fs::write(&bad, lines.join("\n") + "\n").unwrap();
    match cmd_score(&c, None, Some(&bad), None) {
        Err(Error::Parse { line, message, .. }) => {
            assert_eq!(line, 4);
            assert!(message.contains("zz00"), "{message}");
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn evaluate_matches_recount_from_scored_file() {
    let dir = tempfile::tempdir().unwrap();
    let c = small_config(dir.path(), 6);
    cmd_synth(&c).unwrap();
    cmd_train(&c).unwrap();
    let s = cmd_score(&c, None, None, None).unwrap();
    let eval = cmd_evaluate(&c, None, None).unwrap();

    // recount straight from the text file
    let text = fs::read_to_string(&s.path).unwrap();
    let mut bp = Vec::new();
    let mut by_type: std::collections::BTreeMap<String, Vec<f64>> = Default::default();
    for line in text.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let score: f64 = f[4].parse().unwrap();
        if f[3] == "-" {
            bp.push(score);
        } else {
            by_type.entry(f[3].to_string()).or_default().push(score);
        }
    }
    let (rows, avg) = read_metrics_csv(&eval.files.metrics).unwrap();
    assert_eq!(rows.len(), by_type.len());
    let mut sum = 0.0;
    for (t, d_eer, _, b100, b20) in rows {
        let at = &by_type[t.as_str()];
        assert_eq!(d_eer, support::eer_crossing(&bp, at));
        assert_eq!(b100, support::bpcer_at_apcer(&bp, at, 0.01));
        assert_eq!(b20, support::bpcer_at_apcer(&bp, at, 0.05));
        sum += d_eer;
    }
    assert!((avg - sum / by_type.len() as f64).abs() < 1e-12);
}

#[test]
fn evaluate_needs_both_classes() {
    let dir = tempfile::tempdir().unwrap();
    let c = small_config(dir.path(), 7);
    let path = dir.path().join(SCORES_FILE);
    fs::write(&path, "#diffanon-scores v1\na,b,bona_fide_pair,-,0.5\n").unwrap();
    assert!(matches!(cmd_evaluate(&c, None, None), Err(Error::Evaluation(_))));
    assert!(!dir.path().join(REPORT_DIR).exists());
}

#[test]
fn separable_scores_give_zero_rates() {
    let dir = tempfile::tempdir().unwrap();
    let c = small_config(dir.path(), 8);
    let mut text = String::from("#diffanon-scores v1\n");
    for i in 0..30 {
        text.push_str(&format!("r{i},p{i},bona_fide_pair,-,{}\n", i as f64 * 0.01));
    }
    for (k, t) in ["morphing", "silicone_mask"].iter().enumerate() {
        for i in 0..20 {
            text.push_str(&format!("r{i},{t}{i},attack_pair,{t},{}\n", 5.0 + k as f64 + i as f64));
        }
    }
    fs::write(dir.path().join(SCORES_FILE), text).unwrap();
    let eval = cmd_evaluate(&c, None, None).unwrap();
    for m in &eval.report.per_type {
        assert_eq!((m.d_eer, m.bpcer100, m.bpcer20), (0.0, 0.0, 0.0));
    }
    assert_eq!(eval.report.average_d_eer, 0.0);
}

#[test]
fn sweep_cells_equal_individual_runs() {
    let dir = tempfile::tempdir().unwrap();
    let sweep_root = dir.path().join("grid");
    let c = small_config(&sweep_root, 9);
    let summary = cmd_sweep(&c).unwrap();
    assert_eq!(summary.cells.len(), 9);
    assert_eq!(read_summary_csv(&summary.summary_path).unwrap().len(), 9);

    for (model, fusion) in [
        (ModelKind::Gmm, diffanon::fusion::FusionScheme::Sub2),
        (ModelKind::Vae, diffanon::fusion::FusionScheme::Sub),
        (ModelKind::Svm, diffanon::fusion::FusionScheme::Abs),
    ] {
        // the same pipeline run by hand from the base config
        let mut single = small_config(&dir.path().join(format!("single_{model}_{fusion}")), 9);
        single.model.kind = model;
        single.fusion = fusion;
        cmd_synth(&single).unwrap();
        cmd_train(&single).unwrap();
        cmd_score(&single, None, None, None).unwrap();
        cmd_evaluate(&single, None, None).unwrap();

        let cell = cell_config(&c, model, fusion).output_dir;
        for f in [MODEL_FILE, TRAIN_LOG, SCORES_FILE, "report/metrics.csv", "report/summary.csv", "report/det.svg"] {
            assert_eq!(
                fs::read(cell.join(f)).unwrap(),
                fs::read(single.output_dir.join(f)).unwrap(),
                "{model}_{fusion}: {f}"
            );
        }
    }
    // data were written once, at the root
    assert!(sweep_root.join("data/embeddings.txt").exists());
    assert!(!cell_config(&c, ModelKind::Gmm, diffanon::fusion::FusionScheme::Sub)
        .output_dir
        .join("data")
        .exists());
}

#[test]
fn failing_cell_does_not_stop_the_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small_config(dir.path(), 10);
    // more components than training pairs: every GMM cell fails
    c.model.gmm.components = 500;
    c.sweep.fusions = vec![diffanon::fusion::FusionScheme::Sub];
    let summary = cmd_sweep(&c).unwrap();
    let rows = read_summary_csv(&summary.summary_path).unwrap();
    assert_eq!(rows.len(), 3);
    let gmm = rows.iter().find(|r| r.model == "gmm").unwrap();
    assert!(gmm.average.is_none() && gmm.d_eer.iter().all(|(_, v)| v.is_none()));
    let vae = rows.iter().find(|r| r.model == "vae").unwrap();
    assert!(vae.average.is_some());
    assert!(vae.d_eer.iter().any(|(t, _)| *t == AttackType::Retouching));
    assert!(summary.cells[0].dir.join("error.txt").exists());
}

#[test]
fn commands_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let c = small_config(dir.path(), 11);
    let run = || {
        cmd_synth(&c).unwrap();
        cmd_train(&c).unwrap();
        cmd_score(&c, None, None, None).unwrap();
        cmd_evaluate(&c, None, None).unwrap();
        support::snapshot(dir.path())
    };
    let a = run();
    let b = run();
    assert_eq!(a, b);
    assert!(a.len() > 10);
}
