use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use diffanon::fusion::FusionScheme;
use diffanon::harness::{
    cmd_evaluate, cmd_score, cmd_sweep, cmd_synth, cmd_train, ExperimentConfig, Overrides,
};
use diffanon::oneclass::ModelKind;
use diffanon::Error;

#[derive(Parser)]
#[command(name = "diffanon", version, about = "Differential anomaly detection on face-embedding pairs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic embedding dataset into <out>/data
    Synth(Common),
    /// Fit a one-class model on the bona fide training pairs
    Train(Common),
    /// Score a pair file with a trained model
    Score {
        #[command(flatten)]
        common: Common,
        /// Model file [default: <out>/model.danom]
        #[arg(long = "model-file")]
        model_file: Option<PathBuf>,
        /// Pair file [default: configured test pairs]
        #[arg(long)]
        pairs: Option<PathBuf>,
        /// Output scored-pairs file [default: <out>/scores.txt]
        #[arg(long)]
        scores: Option<PathBuf>,
    },
    /// Compute error rates and export the report
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Scored-pairs file [default: <out>/scores.txt]
        #[arg(long)]
        scores: Option<PathBuf>,
        /// Report directory [default: <out>/report]
        #[arg(long)]
        report_dir: Option<PathBuf>,
    },
    /// Run train, score and evaluate over the model x fusion grid
    Sweep(Common),
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML)
    #[arg(long, short)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// sub, sub2 or abs
    #[arg(long)]
    fusion: Option<FusionScheme>,
    /// gmm, svm or vae
    #[arg(long)]
    model: Option<ModelKind>,
    #[arg(long, conflicts_with = "no_pca")]
    pca_dim: Option<usize>,
    #[arg(long)]
    no_pca: bool,
    #[arg(long)]
    no_l2: bool,
    #[arg(long, conflicts_with = "no_standardize")]
    standardize: bool,
    #[arg(long)]
    no_standardize: bool,
}

impl Common {
    fn resolve(&self) -> diffanon::Result<ExperimentConfig> {
        let mut config = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => match self.seed {
                Some(seed) => ExperimentConfig::new(seed),
                None => return Err(Error::InvalidConfig("pass --config or at least --seed".into())),
            },
        };
        config.apply(&Overrides {
            seed: self.seed,
            output_dir: self.out.clone(),
            fusion: self.fusion,
            model: self.model,
            pca_dim: self.pca_dim,
            no_pca: self.no_pca,
            l2_normalize: self.no_l2.then_some(false),
            standardize: match (self.standardize, self.no_standardize) {
                (true, _) => Some(true),
                (_, true) => Some(false),
                _ => None,
            },
        });
        Ok(config)
    }
}

fn run(cli: Cli) -> diffanon::Result<()> {
    match cli.command {
        Command::Synth(c) => {
            let summary = cmd_synth(&c.resolve()?)?;
            for w in &summary.warnings {
                eprintln!("warning: {w}");
            }
            println!("{summary}");
        }
        Command::Train(c) => println!("{}", cmd_train(&c.resolve()?)?),
        Command::Score {
            common,
            model_file,
            pairs,
            scores,
        } => {
            let config = common.resolve()?;
            println!(
                "{}",
                cmd_score(&config, model_file.as_deref(), pairs.as_deref(), scores.as_deref())?
            );
        }
        Command::Evaluate {
            common,
            scores,
            report_dir,
        } => {
            let config = common.resolve()?;
            println!("{}", cmd_evaluate(&config, scores.as_deref(), report_dir.as_deref())?);
        }
        Command::Sweep(c) => println!("{}", cmd_sweep(&c.resolve()?)?),
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let line = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
            eprintln!("{line}");
            ExitCode::FAILURE
        }
    }
}
