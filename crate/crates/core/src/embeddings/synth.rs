//! Seeded synthetic identities and attack archetypes at the embedding level.
//!
//! Each subject has a mean direction drawn uniformly on the unit sphere.
//! Bona fide samples are the mean plus isotropic Gaussian noise (per
//! coordinate std `sigma_bp`), L2-normalised. The first `train_subjects`
//! subjects form the training pool; the remaining subjects form a disjoint
//! test pool from which every attack pair is drawn.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{enumerate_bonafide_pairs, l2_normalized, AttackType, Dataset, EmbeddingRecord, PairRecord};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    pub n_subjects: usize,
    /// Subjects reserved for bona fide training pairs; the rest are test subjects.
    pub train_subjects: usize,
    pub samples_per_subject: usize,
    pub dim: usize,
    pub sigma_bp: f64,
    /// Number of attack pairs generated per archetype.
    pub attacks: BTreeMap<AttackType, usize>,
    pub morph_alpha: f64,
    pub sigma_rt: f64,
    pub sigma_mask: f64,
    #[serde(skip)]
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        let attacks = [
            AttackType::SwapOuter,
            AttackType::SwapInner,
            AttackType::Morphing,
            AttackType::Retouching,
            AttackType::SiliconeMask,
            AttackType::MakeupImpersonation,
        ]
        .into_iter()
        .map(|t| (t, 200))
        .collect();
        Self {
            n_subjects: 20,
            train_subjects: 10,
            samples_per_subject: 8,
            dim: super::DEFAULT_DIM,
            sigma_bp: 0.05,
            attacks,
            morph_alpha: 0.5,
            sigma_rt: 0.01,
            sigma_mask: 0.05,
            seed: 0,
        }
    }
}

impl SyntheticConfig {
    pub fn test_subjects(&self) -> usize {
        self.n_subjects.saturating_sub(self.train_subjects)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.n_subjects == 0 || self.samples_per_subject == 0 || self.dim == 0 {
            return bad("n_subjects, samples_per_subject and dim must be positive".into());
        }
        if self.train_subjects == 0 || self.train_subjects >= self.n_subjects {
            return bad(format!(
                "train_subjects must be in 1..{} so both subject pools are non-empty",
                self.n_subjects
            ));
        }
        for (name, v) in [
            ("sigma_bp", self.sigma_bp),
            ("sigma_rt", self.sigma_rt),
            ("sigma_mask", self.sigma_mask),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be a positive finite number, got {v}"));
            }
        }
        if !(self.morph_alpha > 0.0 && self.morph_alpha < 1.0) {
            return bad(format!("morph_alpha must lie strictly inside (0, 1), got {}", self.morph_alpha));
        }
        for (&t, &count) in &self.attacks {
            if count == 0 {
                continue;
            }
            match t {
                AttackType::Other => {
                    return bad("attack type `other` has no synthetic archetype".into());
                }
                AttackType::Retouching if self.samples_per_subject < 2 => {
                    return bad("retouching attacks need at least 2 samples per subject".into());
                }
                AttackType::Retouching => {}
                _ if self.test_subjects() < 2 => {
                    return bad(format!(
                        "attack type {t} needs 2 test subjects but only {} of n_subjects={} are outside the training pool",
                        self.test_subjects(),
                        self.n_subjects
                    ));
                }
                _ => {}
            }
        }
        Ok(())
    }
}

/// Generated records and pairs, split into disjoint subject pools.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDataset {
    pub dim: usize,
    pub train_records: Vec<EmbeddingRecord>,
    pub test_records: Vec<EmbeddingRecord>,
    pub train_pairs: Vec<PairRecord>,
    pub test_pairs: Vec<PairRecord>,
}

impl SyntheticDataset {
    /// Every record (both pools and all attack probes) as one dataset.
    pub fn dataset(&self) -> Dataset {
        let records = self
            .train_records
            .iter()
            .chain(&self.test_records)
            .cloned()
            .collect();
        Dataset::new(self.dim, records)
    }
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn gaussian(rng: &mut ChaCha8Rng, dim: usize, sigma: f64) -> Vec<f64> {
    (0..dim).map(|_| sigma * rng.sample::<f64, _>(StandardNormal)).collect()
}

fn perturbed(base: &[f64], rng: &mut ChaCha8Rng, sigma: f64) -> Vec<f64> {
    let noise = gaussian(rng, base.len(), sigma);
    let v: Vec<f64> = base.iter().zip(&noise).map(|(b, n)| b + n).collect();
    l2_normalized(&v)
}

fn subject_id(s: usize) -> String {
    format!("s{s:04}")
}

pub fn generate_synthetic(config: &SyntheticConfig) -> Result<SyntheticDataset> {
    config.validate()?;
    let dim = config.dim;
    let k = config.samples_per_subject;

    let mut mean_rng = stream(config.seed, 0);
    let means: Vec<Vec<f64>> = (0..config.n_subjects)
        .map(|_| l2_normalized(&gaussian(&mut mean_rng, dim, 1.0)))
        .collect();

    let mut sample_rng = stream(config.seed, 1);
    let samples: Vec<Vec<EmbeddingRecord>> = means
        .iter()
        .enumerate()
        .map(|(s, mean)| {
            (0..k)
                .map(|i| {
                    let v = perturbed(mean, &mut sample_rng, config.sigma_bp);
                    EmbeddingRecord::bona_fide(subject_id(s), format!("{}_{i:02}", subject_id(s)), v)
                })
                .collect()
        })
        .collect();

    let (train_samples, test_samples) = samples.split_at(config.train_subjects);
    let train_records: Vec<EmbeddingRecord> = train_samples.iter().flatten().cloned().collect();
    let mut test_records: Vec<EmbeddingRecord> = test_samples.iter().flatten().cloned().collect();
    let train_pairs = enumerate_bonafide_pairs(&train_records)?;
    let mut test_pairs = enumerate_bonafide_pairs(&test_records)?;

    let test_means = &means[config.train_subjects..];
    let m = test_samples.len();
    for (&attack_type, &count) in &config.attacks {
        let mut rng = stream(config.seed, 2 + attack_type as u64);
        for i in 0..count {
            let target = rng.random_range(0..m);
            let donor = if m > 1 {
                (target + 1 + rng.random_range(0..m - 1)) % m
            } else {
                target
            };
            let ref_idx = rng.random_range(0..k);
            let reference = &test_samples[target][ref_idx];
            let vector = match attack_type {
                AttackType::SwapOuter | AttackType::SwapInner => {
                    perturbed(&test_means[donor], &mut rng, config.sigma_bp)
                }
                AttackType::Morphing => {
                    let a = config.morph_alpha;
                    let blend: Vec<f64> = test_means[target]
                        .iter()
                        .zip(&test_means[donor])
                        .map(|(u, v)| a * u + (1.0 - a) * v)
                        .collect();
                    perturbed(&blend, &mut rng, config.sigma_bp)
                }
                AttackType::Retouching => {
                    // the retouched probe comes from a different capture than the reference
                    let src_idx = (ref_idx + 1 + rng.random_range(0..k - 1)) % k;
                    let source = &test_samples[target][src_idx];
                    perturbed(&source.vector, &mut rng, config.sigma_rt)
                }
                AttackType::SiliconeMask | AttackType::MakeupImpersonation => {
                    let source = &test_samples[donor][rng.random_range(0..k)];
                    perturbed(&source.vector, &mut rng, config.sigma_mask)
                }
                AttackType::Other => unreachable!("rejected by validate"),
            };
            let probe = EmbeddingRecord::attack(
                subject_id(config.train_subjects + target),
                format!("{attack_type}_{i:05}"),
                attack_type,
                vector,
            );
            test_pairs.push(PairRecord::attack(reference.clone(), probe.clone(), attack_type));
            test_records.push(probe);
        }
    }

    Ok(SyntheticDataset {
        dim,
        train_records,
        test_records,
        train_pairs,
        test_pairs,
    })
}
