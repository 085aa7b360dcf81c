use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::config::{DataFiles, DataSource, ExperimentConfig};
use super::scores::{read_scores, score_set, write_scores, ScoredPair};
use crate::embeddings::{
    generate_synthetic, read_dataset, read_pairs, write_dataset, write_pairs, AttackType, Dataset, PairLabel,
    PairRecord,
};
use crate::error::{Error, Result};
use crate::fusion::FusionScheme;
use crate::metrics::report::write_summary;
use crate::metrics::{evaluate, export_report, EvaluationReport, ReportFiles, SummaryRow};
use crate::oneclass::{load_model, save_model, ModelKind, OneClassModel, TrainingLog};

pub const RESOLVED_CONFIG: &str = "resolved_config.toml";
pub const MODEL_FILE: &str = "model.danom";
pub const TRAIN_LOG: &str = "train_log.csv";
pub const SCORES_FILE: &str = "scores.txt";
pub const REPORT_DIR: &str = "report";
pub const SWEEP_DIR: &str = "sweep";

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_file(path: &Path, content: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        create_dir(parent)?;
    }
    fs::write(path, content).map_err(|e| Error::io(path, e))
}

fn echo_config(config: &ExperimentConfig) -> Result<()> {
    write_file(&config.output_dir.join(RESOLVED_CONFIG), &config.to_toml())
}

fn require(path: &Path, config: &ExperimentConfig) -> Result<()> {
    if path.exists() {
        return Ok(());
    }
    let hint = match config.data.source {
        DataSource::Synthetic => " (run `synth` with this config first)",
        DataSource::Files => "",
    };
    Err(Error::InvalidConfig(format!("{} does not exist{hint}", path.display())))
}

fn load_dataset(config: &ExperimentConfig) -> Result<(DataFiles, Dataset)> {
    let files = config.data_files();
    require(&files.embeddings, config)?;
    let dataset = read_dataset(&files.embeddings)?;
    Ok((files, dataset))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSummary {
    pub files: DataFiles,
    pub subjects: usize,
    pub train_subjects: usize,
    pub records: usize,
    pub train_pairs: usize,
    pub test_bona_fide_pairs: usize,
    pub attack_pairs: BTreeMap<AttackType, usize>,
    pub warnings: Vec<String>,
}

impl fmt::Display for SynthSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "subjects: {} ({} train, {} test)",
            self.subjects,
            self.train_subjects,
            self.subjects - self.train_subjects
        )?;
        writeln!(f, "records: {}", self.records)?;
        writeln!(f, "train bona fide pairs: {}", self.train_pairs)?;
        writeln!(f, "test bona fide pairs: {}", self.test_bona_fide_pairs)?;
        for (t, n) in &self.attack_pairs {
            writeln!(f, "test {t} pairs: {n}")?;
        }
        write!(f, "written to {}", self.files.embeddings.parent().unwrap_or(Path::new(".")).display())
    }
}

pub fn cmd_synth(config: &ExperimentConfig) -> Result<SynthSummary> {
    let synth = config.synthetic();
    synth.validate()?;
    let data = generate_synthetic(&synth)?;

    let mut warnings = Vec::new();
    if synth.attacks.values().all(|&n| n == 0) {
        warnings.push("attack mix is all zero: the test set contains bona fide pairs only".to_string());
    }

    let files = DataFiles::under(&config.output_dir.join("data"));
    create_dir(&config.output_dir.join("data"))?;
    write_dataset(&data.dataset(), &files.embeddings)?;
    write_pairs(&data.train_pairs, &files.train_pairs)?;
    write_pairs(&data.test_pairs, &files.test_pairs)?;
    echo_config(config)?;

    let mut attack_pairs = BTreeMap::new();
    let mut test_bona_fide_pairs = 0;
    for p in &data.test_pairs {
        match p.pair_attack_type {
            Some(t) => *attack_pairs.entry(t).or_insert(0) += 1,
            None => test_bona_fide_pairs += 1,
        }
    }
    Ok(SynthSummary {
        files,
        subjects: synth.n_subjects,
        train_subjects: synth.train_subjects,
        records: data.train_records.len() + data.test_records.len(),
        train_pairs: data.train_pairs.len(),
        test_bona_fide_pairs,
        attack_pairs,
        warnings,
    })
}

/// Refuses any training pair that is not a bona fide pair of bona fide records.
pub fn check_training_purity(pairs: &[PairRecord]) -> Result<()> {
    for (i, p) in pairs.iter().enumerate() {
        let attack_record = [&p.reference, &p.probe].into_iter().find(|r| r.attack_type.is_some());
        if p.pair_label == PairLabel::AttackPair || p.pair_attack_type.is_some() || attack_record.is_some() {
            let kind = p.pair_attack_type.or(attack_record.and_then(|r| r.attack_type));
            return Err(Error::ProtocolViolation(format!(
                "training pair {} ({} -> {}) is an attack pair{}; models may only be trained on bona fide pairs",
                i + 1,
                p.reference.sample_id,
                p.probe.sample_id,
                kind.map_or(String::new(), |t| format!(" of type {t}"))
            )));
        }
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub model_path: PathBuf,
    pub log_path: PathBuf,
    pub n_pairs: usize,
    pub log: TrainingLog,
}

impl fmt::Display for TrainSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "trained on {} bona fide pairs", self.n_pairs)?;
        for n in &self.log.notes {
            writeln!(f, "{n}")?;
        }
        if let Some(last) = self.log.values.last() {
            writeln!(f, "final {}: {last}", self.log.metric)?;
        }
        write!(f, "model written to {}", self.model_path.display())
    }
}

fn train_log_csv(log: &TrainingLog) -> String {
    let mut s = format!("iteration,{}\n", log.metric);
    for (i, v) in log.values.iter().enumerate() {
        s.push_str(&format!("{i},{v}\n"));
    }
    s
}

pub fn cmd_train(config: &ExperimentConfig) -> Result<TrainSummary> {
    config.validate()?;
    let (files, dataset) = load_dataset(config)?;
    require(&files.train_pairs, config)?;
    let pairs = read_pairs(&files.train_pairs, &dataset)?;
    if pairs.is_empty() {
        return Err(Error::InvalidConfig(format!("{} has no pairs", files.train_pairs.display())));
    }
    check_training_purity(&pairs)?;

    let slices: Vec<(&[f64], &[f64])> = pairs
        .iter()
        .map(|p| (p.reference.vector.as_slice(), p.probe.vector.as_slice()))
        .collect();
    let (model, log) = OneClassModel::fit(
        &slices,
        config.fusion,
        &config.preprocess_options(),
        &config.model_spec(),
        config.seed,
    )?;

    create_dir(&config.output_dir)?;
    let model_path = config.output_dir.join(MODEL_FILE);
    save_model(&model, &model_path)?;
    let log_path = config.output_dir.join(TRAIN_LOG);
    write_file(&log_path, &train_log_csv(&log))?;
    echo_config(config)?;
    Ok(TrainSummary {
        model_path,
        log_path,
        n_pairs: pairs.len(),
        log,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreSummary {
    pub path: PathBuf,
    pub n_bona_fide: usize,
    pub n_attack: usize,
    pub scheme: FusionScheme,
}

impl fmt::Display for ScoreSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "scored {} bona fide and {} attack pairs with {} fusion; written to {}",
            self.n_bona_fide,
            self.n_attack,
            self.scheme,
            self.path.display()
        )
    }
}

/// Scores a pair file with a trained model. The fusion scheme comes from the
/// model file; defaults are `<out>/model.danom`, the configured test pairs
/// and `<out>/scores.txt`.
pub fn cmd_score(
    config: &ExperimentConfig,
    model_path: Option<&Path>,
    pairs_path: Option<&Path>,
    out_path: Option<&Path>,
) -> Result<ScoreSummary> {
    let default_model = config.output_dir.join(MODEL_FILE);
    let model = load_model(model_path.unwrap_or(&default_model))?;
    let (files, dataset) = load_dataset(config)?;
    if dataset.dim != model.input_dim {
        return Err(Error::DimensionMismatch {
            expected: model.input_dim,
            actual: dataset.dim,
            context: format!("embeddings in {}", files.embeddings.display()),
        });
    }
    let pairs_path = pairs_path.unwrap_or(&files.test_pairs);
    require(pairs_path, config)?;
    let pairs = read_pairs(pairs_path, &dataset)?;

    let slices: Vec<(&[f64], &[f64])> = pairs
        .iter()
        .map(|p| (p.reference.vector.as_slice(), p.probe.vector.as_slice()))
        .collect();
    let scores = model.score_pairs(&slices)?;
    let scored: Vec<ScoredPair> = pairs.iter().zip(scores).map(|(p, s)| ScoredPair::new(p, s)).collect();

    let default_out = config.output_dir.join(SCORES_FILE);
    let path = out_path.unwrap_or(&default_out).to_path_buf();
    if let Some(parent) = path.parent() {
        create_dir(parent)?;
    }
    write_scores(&scored, &path)?;
    echo_config(config)?;
    let n_attack = scored.iter().filter(|p| p.pair_attack_type.is_some()).count();
    Ok(ScoreSummary {
        path,
        n_bona_fide: scored.len() - n_attack,
        n_attack,
        scheme: model.scheme,
    })
}

pub struct EvaluateSummary {
    pub report: EvaluationReport,
    pub files: ReportFiles,
}

impl fmt::Display for EvaluateSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<22} {:>8} {:>10} {:>10}", "attack type", "D-EER %", "BPCER100", "BPCER20")?;
        for m in &self.report.per_type {
            writeln!(
                f,
                "{:<22} {:>8.2} {:>10.4} {:>10.4}",
                m.attack_type.as_str(),
                100.0 * m.d_eer,
                m.bpcer100,
                m.bpcer20
            )?;
        }
        writeln!(f, "{:<22} {:>8.2}", "average", 100.0 * self.report.average_d_eer)?;
        write!(f, "report written to {}", self.files.summary.parent().unwrap_or(Path::new(".")).display())
    }
}

/// Defaults: `<out>/scores.txt` in, `<out>/report/` out.
pub fn cmd_evaluate(
    config: &ExperimentConfig,
    scores_path: Option<&Path>,
    out_dir: Option<&Path>,
) -> Result<EvaluateSummary> {
    let default_scores = config.output_dir.join(SCORES_FILE);
    let scored = read_scores(scores_path.unwrap_or(&default_scores))?;
    let set = score_set(&scored)?;
    let report = evaluate(&set, config.model.kind.as_str(), config.fusion.as_str())?;
    let default_dir = config.output_dir.join(REPORT_DIR);
    let files = export_report(&report, out_dir.unwrap_or(&default_dir))?;
    echo_config(config)?;
    Ok(EvaluateSummary { report, files })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub model: ModelKind,
    pub fusion: FusionScheme,
    pub dir: PathBuf,
    pub result: std::result::Result<SummaryRow, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSummary {
    pub cells: Vec<SweepCell>,
    pub attack_types: Vec<AttackType>,
    pub summary_path: PathBuf,
}

impl fmt::Display for SweepSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:<5} {:<5}", "model", "fusion")?;
        for t in &self.attack_types {
            write!(f, " {:>10}", abbreviate(*t))?;
        }
        writeln!(f, " {:>8}", "average")?;
        for c in &self.cells {
            write!(f, "{:<5} {:<5}", c.model.as_str(), c.fusion.as_str())?;
            match &c.result {
                Ok(row) => {
                    for t in &self.attack_types {
                        let v = row.d_eer.iter().find(|(k, _)| k == t).and_then(|(_, v)| *v);
                        match v {
                            Some(v) => write!(f, " {:>10.2}", 100.0 * v)?,
                            None => write!(f, " {:>10}", "-")?,
                        }
                    }
                    writeln!(f, " {:>8.2}", 100.0 * row.average.unwrap_or(f64::NAN))?;
                }
                Err(e) => writeln!(f, " failed: {e}")?,
            }
        }
        write!(f, "D-EER (%) summary written to {}", self.summary_path.display())
    }
}

fn abbreviate(t: AttackType) -> &'static str {
    match t {
        AttackType::SwapOuter => "swap_out",
        AttackType::SwapInner => "swap_in",
        AttackType::Morphing => "morph",
        AttackType::Retouching => "retouch",
        AttackType::SiliconeMask => "mask",
        AttackType::MakeupImpersonation => "makeup",
        AttackType::Other => "other",
    }
}

/// Config for one grid cell: shared data files, its own output directory.
pub fn cell_config(base: &ExperimentConfig, model: ModelKind, fusion: FusionScheme) -> ExperimentConfig {
    let files = base.data_files();
    let mut c = base.clone();
    c.model.kind = model;
    c.fusion = fusion;
    c.output_dir = base.output_dir.join(SWEEP_DIR).join(format!("{model}_{fusion}"));
    c.data.source = DataSource::Files;
    c.data.embeddings = Some(files.embeddings);
    c.data.train_pairs = Some(files.train_pairs);
    c.data.test_pairs = Some(files.test_pairs);
    c
}

fn run_cell(config: &ExperimentConfig) -> Result<SummaryRow> {
    cmd_train(config)?;
    cmd_score(config, None, None, None)?;
    let eval = cmd_evaluate(config, None, None)?;
    Ok(SummaryRow::from_report(&eval.report))
}

/// Generates (or reads) the data once, then runs train, score and evaluate
/// for every model and fusion pair. A failing cell is recorded, not fatal.
pub fn cmd_sweep(config: &ExperimentConfig) -> Result<SweepSummary> {
    config.validate()?;
    if config.data.source == DataSource::Synthetic {
        cmd_synth(config)?;
    }
    echo_config(config)?;

    let grid: Vec<(ModelKind, FusionScheme)> = config
        .sweep
        .models
        .iter()
        .flat_map(|&m| config.sweep.fusions.iter().map(move |&f| (m, f)))
        .collect();
    let cells: Vec<SweepCell> = grid
        .par_iter()
        .map(|&(model, fusion)| {
            let c = cell_config(config, model, fusion);
            let result = run_cell(&c).map_err(|e| e.to_string());
            if let Err(e) = &result {
                let _ = write_file(&c.output_dir.join("error.txt"), &format!("{e}\n"));
            }
            SweepCell {
                model,
                fusion,
                dir: c.output_dir,
                result,
            }
        })
        .collect();

    let attack_types: Vec<AttackType> = cells
        .iter()
        .filter_map(|c| c.result.as_ref().ok())
        .flat_map(|r| r.d_eer.iter().map(|(t, _)| *t))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let rows: Vec<SummaryRow> = cells
        .iter()
        .map(|c| {
            let found = c.result.as_ref().ok();
            SummaryRow {
                model: c.model.to_string(),
                fusion: c.fusion.to_string(),
                d_eer: attack_types
                    .iter()
                    .map(|t| (*t, found.and_then(|r| r.d_eer.iter().find(|(k, _)| k == t)).and_then(|(_, v)| *v)))
                    .collect(),
                average: found.and_then(|r| r.average),
            }
        })
        .collect();
    let summary_path = config.output_dir.join(SWEEP_DIR).join("summary.csv");
    create_dir(&config.output_dir.join(SWEEP_DIR))?;
    write_summary(&summary_path, &attack_types, &rows)?;
    Ok(SweepSummary {
        cells,
        attack_types,
        summary_path,
    })
}
