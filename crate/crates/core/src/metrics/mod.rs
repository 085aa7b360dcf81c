//! Error rates for a detector whose scores grow with anomaly.
//!
//! Decision rule: a pair is flagged as an attack iff `score > threshold`.
//! Ties therefore count as bona fide.

pub(crate) mod report;

use std::collections::BTreeMap;

use serde::Serialize;

use crate::embeddings::AttackType;
use crate::error::{check_finite, Error, Result};

pub use report::{export_report, read_det_csv, read_histogram_csv, read_metrics_csv, read_summary_csv, MetricsRow, ReportFiles};
pub use report::{HistogramBin, SummaryRow, HISTOGRAM_BINS};

/// Operating points reported alongside the D-EER.
pub const BPCER100_APCER: f64 = 0.01;
pub const BPCER20_APCER: f64 = 0.05;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScoreSet {
    pub bona_fide: Vec<f64>,
    pub attacks: BTreeMap<AttackType, Vec<f64>>,
}

impl ScoreSet {
    pub fn validate(&self) -> Result<()> {
        check_finite(&self.bona_fide, || "bona fide scores".to_string())?;
        for (t, s) in &self.attacks {
            check_finite(s, || format!("{t} scores"))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DetPoint {
    pub threshold: f64,
    pub apcer: f64,
    pub bpcer: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetCurve {
    pub points: Vec<DetPoint>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EqualErrorRate {
    pub rate: f64,
    pub threshold: f64,
}

fn non_empty(scores: &[f64], what: &str) -> Result<()> {
    if scores.is_empty() {
        return Err(Error::Evaluation(format!("{what} score list is empty")));
    }
    check_finite(scores, || format!("{what} scores"))
}

/// Fraction of attack scores classified bona fide (`≤ threshold`).
pub fn apcer(attack_scores: &[f64], threshold: f64) -> Result<f64> {
    non_empty(attack_scores, "attack")?;
    let n = attack_scores.iter().filter(|&&s| s <= threshold).count();
    Ok(n as f64 / attack_scores.len() as f64)
}

/// Fraction of bona fide scores classified attack (`> threshold`).
pub fn bpcer(bona_fide_scores: &[f64], threshold: f64) -> Result<f64> {
    non_empty(bona_fide_scores, "bona fide")?;
    let n = bona_fide_scores.iter().filter(|&&s| s > threshold).count();
    Ok(n as f64 / bona_fide_scores.len() as f64)
}

fn sorted(v: &[f64]) -> Vec<f64> {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

/// One point at `-inf`, one per distinct score in either list, one at `+inf`.
pub fn det_curve(bona_fide_scores: &[f64], attack_scores: &[f64]) -> Result<DetCurve> {
    non_empty(bona_fide_scores, "bona fide")?;
    non_empty(attack_scores, "attack")?;
    let bp = sorted(bona_fide_scores);
    let at = sorted(attack_scores);
    let (n_bp, n_at) = (bp.len() as f64, at.len() as f64);

    let mut points = Vec::with_capacity(bp.len() + at.len() + 2);
    points.push(DetPoint {
        threshold: f64::NEG_INFINITY,
        apcer: 0.0,
        bpcer: 1.0,
    });
    // i, j: number of scores ≤ the current threshold
    let (mut i, mut j) = (0usize, 0usize);
    while i < bp.len() || j < at.len() {
        let t = match (bp.get(i), at.get(j)) {
            (Some(&a), Some(&b)) => a.min(b),
            (Some(&a), None) => a,
            (None, Some(&b)) => b,
            (None, None) => unreachable!(),
        };
        while i < bp.len() && bp[i] <= t {
            i += 1;
        }
        while j < at.len() && at[j] <= t {
            j += 1;
        }
        points.push(DetPoint {
            threshold: t,
            apcer: j as f64 / n_at,
            bpcer: (bp.len() - i) as f64 / n_bp,
        });
    }
    points.push(DetPoint {
        threshold: f64::INFINITY,
        apcer: 1.0,
        bpcer: 0.0,
    });
    Ok(DetCurve { points })
}

impl DetCurve {
    /// First sweep point where `APCER − BPCER` turns non-negative; exact if
    /// it is zero there, otherwise interpolated against the previous point.
    pub fn d_eer(&self) -> EqualErrorRate {
        let diff = |p: &DetPoint| p.apcer - p.bpcer;
        let k = self
            .points
            .iter()
            .position(|p| diff(p) >= 0.0)
            .expect("the +inf sentinel has APCER 1 and BPCER 0");
        let cur = self.points[k];
        if diff(&cur) == 0.0 || k == 0 {
            return EqualErrorRate {
                rate: cur.apcer,
                threshold: cur.threshold,
            };
        }
        let prev = self.points[k - 1];
        let (d0, d1) = (diff(&prev), diff(&cur));
        let w = -d0 / (d1 - d0);
        let rate = prev.apcer + w * (cur.apcer - prev.apcer);
        let threshold = if prev.threshold.is_finite() && cur.threshold.is_finite() {
            prev.threshold + w * (cur.threshold - prev.threshold)
        } else if cur.threshold.is_finite() {
            cur.threshold
        } else {
            prev.threshold
        };
        EqualErrorRate { rate, threshold }
    }

    /// BPCER at the largest sweep threshold whose APCER stays within `target`.
    pub fn bpcer_at_apcer(&self, target: f64) -> Result<f64> {
        if !(target > 0.0 && target <= 1.0) {
            return Err(Error::Evaluation(format!("target APCER must lie in (0, 1], got {target}")));
        }
        let p = self
            .points
            .iter()
            .rev()
            .find(|p| p.apcer <= target)
            .expect("the -inf sentinel has APCER 0");
        Ok(p.bpcer)
    }
}

pub fn d_eer(bona_fide_scores: &[f64], attack_scores: &[f64]) -> Result<EqualErrorRate> {
    Ok(det_curve(bona_fide_scores, attack_scores)?.d_eer())
}

pub fn bpcer_at_apcer(bona_fide_scores: &[f64], attack_scores: &[f64], target_apcer: f64) -> Result<f64> {
    det_curve(bona_fide_scores, attack_scores)?.bpcer_at_apcer(target_apcer)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackMetrics {
    pub attack_type: AttackType,
    pub n_attack: usize,
    pub d_eer: f64,
    pub d_eer_threshold: f64,
    pub bpcer100: f64,
    pub bpcer20: f64,
    pub det: DetCurve,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub model: String,
    pub fusion: String,
    pub n_bona_fide: usize,
    pub per_type: Vec<AttackMetrics>,
    /// Unweighted mean of the per-type D-EERs.
    pub average_d_eer: f64,
    pub scores: ScoreSet,
}

/// Every attack type is evaluated against the full pool of bona fide scores.
pub fn evaluate(scores: &ScoreSet, model: &str, fusion: &str) -> Result<EvaluationReport> {
    non_empty(&scores.bona_fide, "bona fide")?;
    if scores.attacks.is_empty() {
        return Err(Error::Evaluation("no attack scores to evaluate".into()));
    }
    let mut per_type = Vec::with_capacity(scores.attacks.len());
    for (&attack_type, attack) in &scores.attacks {
        let det = det_curve(&scores.bona_fide, attack)?;
        let eer = det.d_eer();
        per_type.push(AttackMetrics {
            attack_type,
            n_attack: attack.len(),
            d_eer: eer.rate,
            d_eer_threshold: eer.threshold,
            bpcer100: det.bpcer_at_apcer(BPCER100_APCER)?,
            bpcer20: det.bpcer_at_apcer(BPCER20_APCER)?,
            det,
        });
    }
    let average_d_eer = per_type.iter().map(|m| m.d_eer).sum::<f64>() / per_type.len() as f64;
    Ok(EvaluationReport {
        model: model.to_string(),
        fusion: fusion.to_string(),
        n_bona_fide: scores.bona_fide.len(),
        per_type,
        average_d_eer,
        scores: scores.clone(),
    })
}
