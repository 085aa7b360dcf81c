//! Declarative experiment configuration (TOML).

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::embeddings::SyntheticConfig;
use crate::error::{Error, Result};
use crate::fusion::FusionScheme;
use crate::oneclass::{CovarianceKind, ModelKind, ModelSpec, PreprocessOptions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Drives every random choice, including synthetic data.
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "default_fusion")]
    pub fusion: FusionScheme,
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub preprocessing: PreprocessingConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_fusion() -> FusionScheme {
    FusionScheme::Sub
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    #[default]
    Synthetic,
    Files,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub source: DataSource,
    pub synthetic: SyntheticConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub embeddings: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train_pairs: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test_pairs: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub gmm: GmmConfig,
    pub svm: SvmConfig,
    pub vae: VaeConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GmmConfig {
    pub components: usize,
    pub covariance: CovarianceKind,
}

impl Default for GmmConfig {
    fn default() -> Self {
        Self {
            components: 4,
            covariance: CovarianceKind::Diagonal,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvmConfig {
    pub nu: f64,
    /// Unset means `1 / D'`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
}

impl Default for SvmConfig {
    fn default() -> Self {
        Self { nu: 0.1, gamma: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VaeConfig {
    pub hidden_dim: usize,
    pub latent_dim: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
}

impl Default for VaeConfig {
    fn default() -> Self {
        Self {
            hidden_dim: 128,
            latent_dim: 16,
            epochs: 100,
            batch_size: 64,
            learning_rate: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessingConfig {
    pub l2_normalize: bool,
    /// PCA target dimension for GMM and SVM; the VAE always sees the full vector.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pca_dim: Option<usize>,
    /// Unset means on for the SVM, off otherwise.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub standardize: Option<bool>,
}

impl Default for PreprocessingConfig {
    fn default() -> Self {
        Self {
            l2_normalize: true,
            pca_dim: None,
            standardize: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub models: Vec<ModelKind>,
    pub fusions: Vec<FusionScheme>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            models: ModelKind::ALL.to_vec(),
            fusions: FusionScheme::ALL.to_vec(),
        }
    }
}

/// Field overrides taken from the command line.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub fusion: Option<FusionScheme>,
    pub model: Option<ModelKind>,
    pub pca_dim: Option<usize>,
    pub no_pca: bool,
    pub l2_normalize: Option<bool>,
    pub standardize: Option<bool>,
}

impl ExperimentConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            output_dir: default_output_dir(),
            fusion: default_fusion(),
            data: DataConfig::default(),
            model: ModelConfig::default(),
            preprocessing: PreprocessingConfig::default(),
            sweep: SweepConfig::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidConfig(e.message().to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.span().map_or(0, |s| text[..s.start].lines().count().max(1)),
            message: e.message().to_string(),
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        if let Some(dir) = &o.output_dir {
            self.output_dir = dir.clone();
        }
        if let Some(f) = o.fusion {
            self.fusion = f;
        }
        if let Some(m) = o.model {
            self.model.kind = m;
        }
        if o.no_pca {
            self.preprocessing.pca_dim = None;
        }
        if let Some(d) = o.pca_dim {
            self.preprocessing.pca_dim = Some(d);
        }
        if let Some(v) = o.l2_normalize {
            self.preprocessing.l2_normalize = v;
        }
        if let Some(v) = o.standardize {
            self.preprocessing.standardize = Some(v);
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.data.source {
            DataSource::Synthetic => self.synthetic().validate()?,
            DataSource::Files => {
                for (name, p) in [
                    ("embeddings", &self.data.embeddings),
                    ("train_pairs", &self.data.train_pairs),
                    ("test_pairs", &self.data.test_pairs),
                ] {
                    match p {
                        None => return Err(Error::InvalidConfig(format!("data.{name} is required for file input"))),
                        Some(p) if !p.exists() => {
                            return Err(Error::InvalidConfig(format!("data.{name}: {} does not exist", p.display())))
                        }
                        Some(_) => {}
                    }
                }
            }
        }
        if self.sweep.models.is_empty() || self.sweep.fusions.is_empty() {
            return Err(Error::InvalidConfig("sweep grid is empty".into()));
        }
        if self.preprocessing.pca_dim == Some(0) {
            return Err(Error::InvalidConfig("preprocessing.pca_dim must be positive".into()));
        }
        Ok(())
    }

    pub fn synthetic(&self) -> SyntheticConfig {
        SyntheticConfig {
            seed: self.seed,
            ..self.data.synthetic.clone()
        }
    }

    pub fn model_spec(&self) -> ModelSpec {
        let m = &self.model;
        match m.kind {
            ModelKind::Gmm => ModelSpec::Gmm {
                components: m.gmm.components,
                covariance: m.gmm.covariance,
            },
            ModelKind::Svm => ModelSpec::Svm {
                nu: m.svm.nu,
                gamma: m.svm.gamma,
            },
            ModelKind::Vae => ModelSpec::Vae {
                hidden_dim: m.vae.hidden_dim,
                latent_dim: m.vae.latent_dim,
                epochs: m.vae.epochs,
                batch_size: m.vae.batch_size,
                learning_rate: m.vae.learning_rate,
            },
        }
    }

    pub fn preprocess_options(&self) -> PreprocessOptions {
        let p = &self.preprocessing;
        let kind = self.model.kind;
        PreprocessOptions {
            l2_normalize: p.l2_normalize,
            standardize: p.standardize.unwrap_or(kind == ModelKind::Svm),
            pca_dim: if kind == ModelKind::Vae { None } else { p.pca_dim },
        }
    }

    /// Locations of the embedding and pair files this config reads.
    pub fn data_files(&self) -> DataFiles {
        match self.data.source {
            DataSource::Synthetic => DataFiles::under(&self.output_dir.join("data")),
            DataSource::Files => DataFiles {
                embeddings: self.data.embeddings.clone().unwrap_or_default(),
                train_pairs: self.data.train_pairs.clone().unwrap_or_default(),
                test_pairs: self.data.test_pairs.clone().unwrap_or_default(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataFiles {
    pub embeddings: PathBuf,
    pub train_pairs: PathBuf,
    pub test_pairs: PathBuf,
}

impl DataFiles {
    pub fn under(dir: &Path) -> Self {
        Self {
            embeddings: dir.join("embeddings.txt"),
            train_pairs: dir.join("train_pairs.txt"),
            test_pairs: dir.join("test_pairs.txt"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_uses_defaults() {
        let c = ExperimentConfig::from_toml("seed = 3").unwrap();
        assert_eq!(c, ExperimentConfig::new(3));
        assert_eq!(c.model.kind, ModelKind::Gmm);
        assert!(c.preprocessing.l2_normalize);
        c.validate().unwrap();
    }

    #[test]
    fn seed_is_required() {
        assert!(ExperimentConfig::from_toml("output_dir = \"x\"").is_err());
    }

    #[test]
    fn unknown_fields_rejected() {
        assert!(ExperimentConfig::from_toml("seed = 1\n[model]\nkinds = \"gmm\"").is_err());
    }

    #[test]
    fn full_config_round_trips() {
        let text = r#"
seed = 9
output_dir = "runs/a"
fusion = "SUB2"

[data]
source = "synthetic"

[data.synthetic]
n_subjects = 12
train_subjects = 6
attacks = { morphing = 10, swap_inner = 5 }

[model]
kind = "svm"

[model.svm]
nu = 0.2
gamma = 0.5

[preprocessing]
pca_dim = 32
"#;
        let c = ExperimentConfig::from_toml(text).unwrap();
        assert_eq!(c.fusion, FusionScheme::Sub2);
        assert_eq!(c.data.synthetic.n_subjects, 12);
        assert_eq!(c.synthetic().seed, 9);
        assert_eq!(
            c.model_spec(),
            ModelSpec::Svm {
                nu: 0.2,
                gamma: Some(0.5)
            }
        );
        let opts = c.preprocess_options();
        assert!(opts.standardize);
        assert_eq!(opts.pca_dim, Some(32));
        assert_eq!(ExperimentConfig::from_toml(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn vae_ignores_pca() {
        let mut c = ExperimentConfig::new(0);
        c.preprocessing.pca_dim = Some(8);
        c.model.kind = ModelKind::Vae;
        assert_eq!(c.preprocess_options().pca_dim, None);
        assert!(!c.preprocess_options().standardize);
    }

    #[test]
    fn overrides_apply() {
        let mut c = ExperimentConfig::new(0);
        c.apply(&Overrides {
            seed: Some(5),
            fusion: Some(FusionScheme::Abs),
            model: Some(ModelKind::Vae),
            pca_dim: Some(16),
            ..Default::default()
        });
        assert_eq!((c.seed, c.fusion, c.model.kind), (5, FusionScheme::Abs, ModelKind::Vae));
        assert_eq!(c.preprocessing.pca_dim, Some(16));
        c.apply(&Overrides {
            no_pca: true,
            ..Default::default()
        });
        assert_eq!(c.preprocessing.pca_dim, None);
    }

    #[test]
    fn file_source_requires_existing_paths() {
        let mut c = ExperimentConfig::new(0);
        c.data.source = DataSource::Files;
        assert!(c.validate().is_err());
        c.data.embeddings = Some("/nonexistent/e.txt".into());
        c.data.train_pairs = Some("/nonexistent/t.txt".into());
        c.data.test_pairs = Some("/nonexistent/p.txt".into());
        assert!(c.validate().is_err());
    }
}
