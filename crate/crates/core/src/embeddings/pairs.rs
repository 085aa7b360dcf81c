use std::collections::BTreeMap;

use super::{EmbeddingRecord, Label, PairRecord};
use crate::error::{Error, Result};

/// All unordered same-subject pairs, each combination once.
///
/// Output is ordered by subject_id, then by the lexicographic order of the
/// two sample ids; within a pair the lexicographically smaller sample is
/// the reference.
pub fn enumerate_bonafide_pairs(records: &[EmbeddingRecord]) -> Result<Vec<PairRecord>> {
    let mut by_subject: BTreeMap<&str, Vec<&EmbeddingRecord>> = BTreeMap::new();
    for r in records {
        if r.label != Label::BonaFide {
            return Err(Error::InvalidRecord(format!(
                "cannot build bona fide pairs from attack record `{}`",
                r.sample_id
            )));
        }
        by_subject.entry(r.subject_id.as_str()).or_default().push(r);
    }

    let mut pairs = Vec::new();
    for samples in by_subject.values_mut() {
        samples.sort_by(|a, b| a.sample_id.cmp(&b.sample_id));
        for (i, a) in samples.iter().enumerate() {
            for b in &samples[i + 1..] {
                pairs.push(PairRecord::bona_fide((*a).clone(), (*b).clone()));
            }
        }
    }
    Ok(pairs)
}
