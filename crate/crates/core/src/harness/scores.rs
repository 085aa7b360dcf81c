//! Scored-pair files: `#diffanon-scores v1` then one
//! `ref_id,probe_id,pair_label,attack_type_or_dash,score` line per pair.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::embeddings::{AttackType, PairLabel, PairRecord};
use crate::error::{Error, Result};
use crate::metrics::ScoreSet;

pub const SCORES_HEADER: &str = "#diffanon-scores v1";

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredPair {
    pub reference_id: String,
    pub probe_id: String,
    pub pair_label: PairLabel,
    pub pair_attack_type: Option<AttackType>,
    pub score: f64,
}

impl ScoredPair {
    pub fn new(pair: &PairRecord, score: f64) -> Self {
        Self {
            reference_id: pair.reference.sample_id.clone(),
            probe_id: pair.probe.sample_id.clone(),
            pair_label: pair.pair_label,
            pair_attack_type: pair.pair_attack_type,
            score,
        }
    }
}

pub fn write_scores(scored: &[ScoredPair], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut s = String::from(SCORES_HEADER);
    s.push('\n');
    for p in scored {
        if !p.score.is_finite() {
            return Err(Error::NonFinite(format!("score of pair ({}, {})", p.reference_id, p.probe_id)));
        }
        for id in [&p.reference_id, &p.probe_id] {
            if id.contains(',') {
                return Err(Error::InvalidRecord(format!("sample id `{id}` contains a comma")));
            }
        }
        let attack = p.pair_attack_type.map_or("-", AttackType::as_str);
        let _ = writeln!(s, "{},{},{},{},{}", p.reference_id, p.probe_id, p.pair_label, attack, p.score);
    }
    fs::write(path, s).map_err(|e| Error::io(path, e))
}

pub fn read_scores(path: impl AsRef<Path>) -> Result<Vec<ScoredPair>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let bad = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim_end() == SCORES_HEADER => {}
        _ => return Err(bad(1, format!("missing `{SCORES_HEADER}` header"))),
    }
    let mut out = Vec::new();
    for (i, l) in lines {
        let line = i + 1;
        if l.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = l.split(',').collect();
        if f.len() != 5 {
            return Err(bad(line, format!("expected 5 fields, found {}", f.len())));
        }
        let pair_label: PairLabel = f[2].parse().map_err(|e| bad(line, e))?;
        let pair_attack_type = match f[3] {
            "-" => None,
            t => Some(t.parse::<AttackType>().map_err(|e| bad(line, e))?),
        };
        match (pair_label, pair_attack_type) {
            (PairLabel::AttackPair, None) => return Err(bad(line, "attack pair without attack type".into())),
            (PairLabel::BonaFidePair, Some(_)) => return Err(bad(line, "bona fide pair with attack type".into())),
            _ => {}
        }
        let score: f64 = f[4].parse().map_err(|_| bad(line, format!("cannot parse score `{}`", f[4])))?;
        if !score.is_finite() {
            return Err(bad(line, "score is not finite".into()));
        }
        out.push(ScoredPair {
            reference_id: f[0].to_string(),
            probe_id: f[1].to_string(),
            pair_label,
            pair_attack_type,
            score,
        });
    }
    Ok(out)
}

/// Pools bona fide scores and groups attack scores by type.
pub fn score_set(scored: &[ScoredPair]) -> Result<ScoreSet> {
    let mut set = ScoreSet::default();
    for p in scored {
        match p.pair_attack_type {
            None => set.bona_fide.push(p.score),
            Some(t) => set.attacks.entry(t).or_default().push(p.score),
        }
    }
    if set.bona_fide.is_empty() {
        return Err(Error::Evaluation("scored file has no bona fide pairs".into()));
    }
    if set.attacks.is_empty() {
        return Err(Error::Evaluation("scored file has no attack pairs".into()));
    }
    Ok(set)
}
