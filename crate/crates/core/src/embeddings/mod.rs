//! Embedding and pair data model, on-disk formats, bona fide pair
//! enumeration and the seeded synthetic generator.

mod io;
mod pairs;
mod synth;

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, check_finite, Error, Result};

pub use io::{read_dataset, read_pairs, write_dataset, write_pairs};
pub use pairs::enumerate_bonafide_pairs;
pub use synth::{generate_synthetic, SyntheticConfig, SyntheticDataset};

/// Output dimension of the ArcFace ResNet100 extractor.
pub const DEFAULT_DIM: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    BonaFide,
    Attack,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::BonaFide => "bona_fide",
            Label::Attack => "attack",
        }
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "bona_fide" => Ok(Label::BonaFide),
            "attack" => Ok(Label::Attack),
            other => Err(format!("unknown label `{other}`")),
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackType {
    SwapOuter,
    SwapInner,
    Morphing,
    Retouching,
    SiliconeMask,
    MakeupImpersonation,
    Other,
}

impl AttackType {
    pub const ALL: [AttackType; 7] = [
        AttackType::SwapOuter,
        AttackType::SwapInner,
        AttackType::Morphing,
        AttackType::Retouching,
        AttackType::SiliconeMask,
        AttackType::MakeupImpersonation,
        AttackType::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AttackType::SwapOuter => "swap_outer",
            AttackType::SwapInner => "swap_inner",
            AttackType::Morphing => "morphing",
            AttackType::Retouching => "retouching",
            AttackType::SiliconeMask => "silicone_mask",
            AttackType::MakeupImpersonation => "makeup_impersonation",
            AttackType::Other => "other",
        }
    }
}

impl FromStr for AttackType {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        AttackType::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| format!("unknown attack type `{s}`"))
    }
}

impl fmt::Display for AttackType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PairLabel {
    BonaFidePair,
    AttackPair,
}

impl PairLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            PairLabel::BonaFidePair => "bona_fide_pair",
            PairLabel::AttackPair => "attack_pair",
        }
    }
}

impl FromStr for PairLabel {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "bona_fide_pair" => Ok(PairLabel::BonaFidePair),
            "attack_pair" => Ok(PairLabel::AttackPair),
            other => Err(format!("unknown pair label `{other}`")),
        }
    }
}

impl fmt::Display for PairLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One face sample as produced by a face-recognition extractor.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingRecord {
    pub subject_id: String,
    pub sample_id: String,
    pub label: Label,
    pub attack_type: Option<AttackType>,
    pub vector: Vec<f64>,
}

impl EmbeddingRecord {
    pub fn bona_fide(subject_id: impl Into<String>, sample_id: impl Into<String>, vector: Vec<f64>) -> Self {
        Self {
            subject_id: subject_id.into(),
            sample_id: sample_id.into(),
            label: Label::BonaFide,
            attack_type: None,
            vector,
        }
    }

    pub fn attack(
        subject_id: impl Into<String>,
        sample_id: impl Into<String>,
        attack_type: AttackType,
        vector: Vec<f64>,
    ) -> Self {
        Self {
            subject_id: subject_id.into(),
            sample_id: sample_id.into(),
            label: Label::Attack,
            attack_type: Some(attack_type),
            vector,
        }
    }

    /// Checks the per-record invariants against the dataset dimension.
    pub fn validate(&self, dim: usize) -> Result<()> {
        check_dim(dim, self.vector.len(), || format!("record `{}`", self.sample_id))?;
        check_finite(&self.vector, || format!("record `{}`", self.sample_id))?;
        match (self.label, self.attack_type) {
            (Label::BonaFide, None) | (Label::Attack, Some(_)) => Ok(()),
            (Label::BonaFide, Some(t)) => Err(Error::InvalidRecord(format!(
                "bona fide record `{}` carries attack type {t}",
                self.sample_id
            ))),
            (Label::Attack, None) => Err(Error::InvalidRecord(format!(
                "attack record `{}` has no attack type",
                self.sample_id
            ))),
        }
    }
}

/// Records sharing one declared embedding dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub dim: usize,
    pub records: Vec<EmbeddingRecord>,
}

impl Dataset {
    pub fn new(dim: usize, records: Vec<EmbeddingRecord>) -> Self {
        Self { dim, records }
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::with_capacity(self.records.len());
        for record in &self.records {
            record.validate(self.dim)?;
            if !seen.insert(record.sample_id.as_str()) {
                return Err(Error::InvalidRecord(format!(
                    "duplicate sample_id `{}`",
                    record.sample_id
                )));
            }
        }
        Ok(())
    }

    pub fn find(&self, sample_id: &str) -> Option<&EmbeddingRecord> {
        self.records.iter().find(|r| r.sample_id == sample_id)
    }
}

/// A (reference, probe) pair. The reference is the trusted image.
#[derive(Debug, Clone, PartialEq)]
pub struct PairRecord {
    pub reference: EmbeddingRecord,
    pub probe: EmbeddingRecord,
    pub pair_label: PairLabel,
    pub pair_attack_type: Option<AttackType>,
}

impl PairRecord {
    pub fn bona_fide(reference: EmbeddingRecord, probe: EmbeddingRecord) -> Self {
        Self {
            reference,
            probe,
            pair_label: PairLabel::BonaFidePair,
            pair_attack_type: None,
        }
    }

    pub fn attack(reference: EmbeddingRecord, probe: EmbeddingRecord, attack_type: AttackType) -> Self {
        Self {
            reference,
            probe,
            pair_label: PairLabel::AttackPair,
            pair_attack_type: Some(attack_type),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (r, p) = (&self.reference, &self.probe);
        check_dim(r.vector.len(), p.vector.len(), || {
            format!("pair ({}, {})", r.sample_id, p.sample_id)
        })?;
        match self.pair_label {
            PairLabel::BonaFidePair => {
                if r.subject_id != p.subject_id {
                    return Err(Error::InvalidRecord(format!(
                        "bona fide pair ({}, {}) spans subjects {} and {}",
                        r.sample_id, p.sample_id, r.subject_id, p.subject_id
                    )));
                }
                if r.label != Label::BonaFide || p.label != Label::BonaFide {
                    return Err(Error::InvalidRecord(format!(
                        "bona fide pair ({}, {}) contains an attack record",
                        r.sample_id, p.sample_id
                    )));
                }
                if self.pair_attack_type.is_some() {
                    return Err(Error::InvalidRecord(format!(
                        "bona fide pair ({}, {}) carries an attack type",
                        r.sample_id, p.sample_id
                    )));
                }
            }
            PairLabel::AttackPair => {
                if self.pair_attack_type.is_none() {
                    return Err(Error::InvalidRecord(format!(
                        "attack pair ({}, {}) has no attack type",
                        r.sample_id, p.sample_id
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Unit-L2 copy of `v`. The zero vector is returned unchanged.
pub fn l2_normalized(v: &[f64]) -> Vec<f64> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter().map(|x| x / norm).collect()
    } else {
        v.to_vec()
    }
}

pub fn cosine_similarity(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}
