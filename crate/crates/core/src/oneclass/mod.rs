//! One-class detectors trained on bona fide fused vectors only.
//!
//! Every detector follows the same orientation: higher score = more
//! anomalous. A [`OneClassModel`] bundles the detector with the fusion
//! scheme and the preprocessing it was trained with, so scoring a raw
//! (reference, probe) pair always repeats the training-time pipeline.

pub mod gmm;
pub mod ocsvm;
pub mod pca;
mod persist;
pub mod vae;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embeddings::l2_normalized;
use crate::error::{check_dim, check_finite, Error, Result};
use crate::fusion::FusionScheme;

pub use gmm::{fit_gmm, gmm_score, CovarianceKind, GmmFit, GmmModel};
pub use ocsvm::{fit_ocsvm, ocsvm_score, SvmFit, SvmModel};
pub use pca::{fit_pca, PcaBasis};
pub use persist::{load_model, save_model, FORMAT_VERSION, MAGIC};
pub use vae::{fit_vae, vae_score, VaeArchitecture, VaeFit, VaeModel, VaeTraining};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    #[default]
    Gmm,
    Svm,
    Vae,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Gmm, ModelKind::Svm, ModelKind::Vae];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Gmm => "gmm",
            ModelKind::Svm => "svm",
            ModelKind::Vae => "vae",
        }
    }
}

impl FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "gmm" => Ok(ModelKind::Gmm),
            "svm" | "ocsvm" => Ok(ModelKind::Svm),
            "vae" => Ok(ModelKind::Vae),
            _ => Err(format!("unknown model kind `{s}` (expected gmm, svm or vae)")),
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Detector hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec {
    Gmm {
        components: usize,
        covariance: CovarianceKind,
    },
    Svm {
        nu: f64,
        /// `None` selects `1 / D'` for the post-preprocessing dimension `D'`.
        gamma: Option<f64>,
    },
    Vae {
        hidden_dim: usize,
        latent_dim: usize,
        epochs: usize,
        batch_size: usize,
        learning_rate: f64,
    },
}

impl ModelSpec {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelSpec::Gmm { .. } => ModelKind::Gmm,
            ModelSpec::Svm { .. } => ModelKind::Svm,
            ModelSpec::Vae { .. } => ModelKind::Vae,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreprocessOptions {
    pub l2_normalize: bool,
    pub standardize: bool,
    pub pca_dim: Option<usize>,
}

/// Per-coordinate centring and scaling, `(x - mean) / scale`.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(data: &[Vec<f64>]) -> Self {
        let n = data.len() as f64;
        let d = data[0].len();
        let mut mean = vec![0.0; d];
        for x in data {
            for (m, v) in mean.iter_mut().zip(x) {
                *m += v / n;
            }
        }
        let mut var = vec![0.0; d];
        for x in data {
            for j in 0..d {
                var[j] += (x[j] - mean[j]).powi(2) / n;
            }
        }
        let scale = var
            .iter()
            .map(|v| if v.sqrt() > 1e-12 { v.sqrt() } else { 1.0 })
            .collect();
        Self { mean, scale }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }
}

/// Everything between a raw embedding pair and the detector input.
#[derive(Debug, Clone, PartialEq)]
pub struct Preprocessing {
    pub l2_normalize: bool,
    pub standardizer: Option<Standardizer>,
    pub pca: Option<PcaBasis>,
}

impl Preprocessing {
    pub fn fuse_pair(&self, scheme: FusionScheme, reference: &[f64], probe: &[f64]) -> Result<Vec<f64>> {
        check_dim(reference.len(), probe.len(), || "embedding pair".to_string())?;
        check_finite(reference, || "reference embedding".to_string())?;
        check_finite(probe, || "probe embedding".to_string())?;
        let mut out = vec![0.0; reference.len()];
        if self.l2_normalize {
            scheme.apply_into(&l2_normalized(reference), &l2_normalized(probe), &mut out);
        } else {
            scheme.apply_into(reference, probe, &mut out);
        }
        Ok(out)
    }

    pub fn transform(&self, fused: &[f64]) -> Result<Vec<f64>> {
        let x = match &self.standardizer {
            Some(s) => {
                check_dim(s.mean.len(), fused.len(), || "standardizer input".to_string())?;
                s.apply(fused)
            }
            None => fused.to_vec(),
        };
        match &self.pca {
            Some(p) => p.project(&x),
            None => Ok(x),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum Detector {
    Gmm(GmmModel),
    Svm(SvmModel),
    Vae(VaeModel),
}

impl Detector {
    pub fn kind(&self) -> ModelKind {
        match self {
            Detector::Gmm(_) => ModelKind::Gmm,
            Detector::Svm(_) => ModelKind::Svm,
            Detector::Vae(_) => ModelKind::Vae,
        }
    }

    pub fn score(&self, x: &[f64]) -> Result<f64> {
        match self {
            Detector::Gmm(m) => gmm_score(m, x),
            Detector::Svm(m) => ocsvm_score(m, x),
            Detector::Vae(m) => vae_score(m, x),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OneClassModel {
    pub scheme: FusionScheme,
    /// Embedding (and fused-vector) dimension seen at training time.
    pub input_dim: usize,
    pub preprocessing: Preprocessing,
    pub detector: Detector,
}

/// Training diagnostics: the per-iteration objective trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingLog {
    pub metric: &'static str,
    pub values: Vec<f64>,
    pub notes: Vec<String>,
}

impl OneClassModel {
    pub fn kind(&self) -> ModelKind {
        self.detector.kind()
    }

    /// Fits preprocessing and detector on bona fide (reference, probe) pairs.
    pub fn fit(
        pairs: &[(&[f64], &[f64])],
        scheme: FusionScheme,
        options: &PreprocessOptions,
        spec: &ModelSpec,
        seed: u64,
    ) -> Result<(Self, TrainingLog)> {
        if pairs.is_empty() {
            return Err(Error::InvalidConfig("no training pairs".into()));
        }
        let input_dim = pairs[0].0.len();
        let mut pre = Preprocessing {
            l2_normalize: options.l2_normalize,
            standardizer: None,
            pca: None,
        };
        let mut data = pairs
            .iter()
            .map(|(a, b)| {
                check_dim(input_dim, a.len(), || "training pair".to_string())?;
                pre.fuse_pair(scheme, a, b)
            })
            .collect::<Result<Vec<_>>>()?;

        let mut notes = Vec::new();
        if options.standardize {
            let s = Standardizer::fit(&data);
            data = data.iter().map(|x| s.apply(x)).collect();
            pre.standardizer = Some(s);
            notes.push("per-coordinate standardisation".to_string());
        }
        if let Some(dim) = options.pca_dim {
            let basis = fit_pca(&data, dim)?;
            data = data.iter().map(|x| basis.project(x)).collect::<Result<_>>()?;
            notes.push(format!("PCA {input_dim} -> {dim}"));
            pre.pca = Some(basis);
        }

        let (detector, log) = match *spec {
            ModelSpec::Gmm { components, covariance } => {
                let fit = fit_gmm(&data, components, covariance, seed)?;
                notes.push(format!("converged={} reseeds={}", fit.converged, fit.reseeds));
                (Detector::Gmm(fit.model), ("log_likelihood", fit.log_likelihood))
            }
            ModelSpec::Svm { nu, gamma } => {
                let dim = data[0].len().max(1);
                let gamma = gamma.unwrap_or(1.0 / dim as f64);
                let fit = fit_ocsvm(&data, nu, gamma, seed)?;
                notes.push(format!(
                    "gamma={gamma} iterations={} kkt_gap={} support_vectors={}",
                    fit.iterations,
                    fit.kkt_gap,
                    fit.model.alphas.len()
                ));
                (Detector::Svm(fit.model), ("dual_objective", vec![fit.objective]))
            }
            ModelSpec::Vae {
                hidden_dim,
                latent_dim,
                epochs,
                batch_size,
                learning_rate,
            } => {
                let training = VaeTraining {
                    epochs,
                    batch_size,
                    learning_rate,
                    seed,
                };
                let fit = fit_vae(&data, hidden_dim, latent_dim, training)?;
                (Detector::Vae(fit.model), ("epoch_loss", fit.epoch_losses))
            }
        };

        let model = OneClassModel {
            scheme,
            input_dim,
            preprocessing: pre,
            detector,
        };
        let log = TrainingLog {
            metric: log.0,
            values: log.1,
            notes,
        };
        Ok((model, log))
    }

    /// Scores an already fused vector (before preprocessing).
    pub fn score_fused(&self, fused: &[f64]) -> Result<f64> {
        check_dim(self.input_dim, fused.len(), || "fused vector".to_string())?;
        let x = self.preprocessing.transform(fused)?;
        self.detector.score(&x)
    }

    pub fn score_pair(&self, reference: &[f64], probe: &[f64]) -> Result<f64> {
        check_dim(self.input_dim, reference.len(), || "reference embedding".to_string())?;
        let fused = self.preprocessing.fuse_pair(self.scheme, reference, probe)?;
        self.score_fused(&fused)
    }

    /// Scores many pairs in parallel; output order equals input order.
    pub fn score_pairs(&self, pairs: &[(&[f64], &[f64])]) -> Result<Vec<f64>> {
        pairs
            .par_iter()
            .map(|(a, b)| self.score_pair(a, b))
            .collect()
    }
}
