use std::collections::BTreeMap;

use serde::Serialize;

use crate::dataio::ClassLabel;
use crate::error::{Error, Result};

/// Which end of the score axis flags PD, the positive class. A model
/// trained on PD assigns PD low scores, hence `PdLow`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PositiveRule {
    PdLow,
    PdHigh,
}

impl PositiveRule {
    /// Score mapped so that larger means "more PD".
    fn oriented(self, score: f64) -> f64 {
        match self {
            PositiveRule::PdLow => -score,
            PositiveRule::PdHigh => score,
        }
    }

    pub fn predicts_pd(self, score: f64, threshold: f64) -> bool {
        match self {
            PositiveRule::PdLow => score < threshold,
            PositiveRule::PdHigh => score > threshold,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    /// Samples at least as PD-like as this score are flagged. The first
    /// point flags nothing and carries an infinite threshold.
    pub threshold: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Roc {
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

fn class_counts(scores: &[f64], labels: &[ClassLabel]) -> Result<(usize, usize)> {
    if scores.len() != labels.len() {
        return Err(Error::InvalidData(format!("{} scores but {} labels", scores.len(), labels.len())));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite("score".into()));
    }
    let pos = labels.iter().filter(|&&l| l == ClassLabel::Pd).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::InvalidData(format!("need both classes, got {pos} pd and {neg} control")));
    }
    Ok((pos, neg))
}

/// ROC curve over all distinct thresholds, ties grouped, with the AUC by
/// trapezoidal integration.
pub fn roc_auc(scores: &[f64], labels: &[ClassLabel], rule: PositiveRule) -> Result<Roc> {
    let (pos, neg) = class_counts(scores, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| rule.oriented(scores[b]).total_cmp(&rule.oriented(scores[a])));

    let infinite = match rule {
        PositiveRule::PdLow => f64::NEG_INFINITY,
        PositiveRule::PdHigh => f64::INFINITY,
    };
    let mut points = vec![RocPoint {
        fpr: 0.0,
        tpr: 0.0,
        threshold: infinite,
    }];
    // twice the area in units of one (positive, negative) pair
    let mut area2: u128 = 0;
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let value = scores[order[i]];
        let (prev_tp, prev_fp) = (tp, fp);
        while i < order.len() && scores[order[i]] == value {
            match labels[order[i]] {
                ClassLabel::Pd => tp += 1,
                ClassLabel::Control => fp += 1,
            }
            i += 1;
        }
        area2 += ((fp - prev_fp) * (tp + prev_tp)) as u128;
        points.push(RocPoint {
            fpr: fp as f64 / neg as f64,
            tpr: tp as f64 / pos as f64,
            threshold: value,
        });
    }
    let auc = area2 as f64 / (2 * pos * neg) as f64;
    Ok(Roc { points, auc })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Confusion {
    /// Metrics from counts; an empty denominator yields 0.
    pub fn from_counts(tp: usize, fp: usize, tn: usize, fn_: usize) -> Self {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = ratio(2 * tp, 2 * tp + fp + fn_);
        Confusion {
            tp,
            fp,
            tn,
            fn_,
            precision,
            recall,
            f1,
        }
    }

    pub fn fpr(&self) -> f64 {
        if self.fp + self.tn == 0 {
            0.0
        } else {
            self.fp as f64 / (self.fp + self.tn) as f64
        }
    }
}

/// Confusion counts with PD positive. Under `PdLow` a sample is predicted
/// PD iff its score is strictly below `threshold`.
pub fn confusion_at_threshold(scores: &[f64], labels: &[ClassLabel], threshold: f64, rule: PositiveRule) -> Confusion {
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    for (&s, &l) in scores.iter().zip(labels) {
        match (rule.predicts_pd(s, threshold), l) {
            (true, ClassLabel::Pd) => tp += 1,
            (true, ClassLabel::Control) => fp += 1,
            (false, ClassLabel::Control) => tn += 1,
            (false, ClassLabel::Pd) => fn_ += 1,
        }
    }
    Confusion::from_counts(tp, fp, tn, fn_)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdCriterion {
    MaxF1,
    Youden,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ThresholdChoice {
    pub threshold: f64,
    /// The criterion's value at `threshold`.
    pub objective: f64,
    pub confusion: Confusion,
}

/// Scans the midpoints between adjacent distinct scores and keeps the
/// best by `criterion`; on ties the smaller threshold wins.
pub fn select_threshold(
    scores: &[f64],
    labels: &[ClassLabel],
    rule: PositiveRule,
    criterion: ThresholdCriterion,
) -> Result<ThresholdChoice> {
    class_counts(scores, labels)?;
    let mut distinct = scores.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(Error::Degenerate("all scores are equal; no threshold separates them".into()));
    }
    let mut best: Option<ThresholdChoice> = None;
    for w in distinct.windows(2) {
        let threshold = w[0] + (w[1] - w[0]) / 2.0;
        let confusion = confusion_at_threshold(scores, labels, threshold, rule);
        let objective = match criterion {
            ThresholdCriterion::MaxF1 => confusion.f1,
            ThresholdCriterion::Youden => confusion.recall - confusion.fpr(),
        };
        if best.is_none_or(|b| objective > b.objective) {
            best = Some(ThresholdChoice {
                threshold,
                objective,
                confusion,
            });
        }
    }
    Ok(best.expect("at least one midpoint"))
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampleScore {
    pub subject_id: String,
    pub label: ClassLabel,
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SubjectScore {
    pub subject_id: String,
    pub label: ClassLabel,
    pub score: f64,
    pub samples: usize,
}

/// Mean score per subject, ordered by subject id. Scores are summed in
/// sorted order so the result does not depend on sample order.
pub fn subject_aggregate(samples: &[SampleScore]) -> Result<Vec<SubjectScore>> {
    let mut groups: BTreeMap<&str, (ClassLabel, Vec<f64>)> = BTreeMap::new();
    for s in samples {
        let entry = groups.entry(&s.subject_id).or_insert((s.label, Vec::new()));
        if entry.0 != s.label {
            return Err(Error::InvalidData(format!("subject {} has mixed labels", s.subject_id)));
        }
        entry.1.push(s.score);
    }
    Ok(groups
        .into_iter()
        .map(|(id, (label, mut scores))| {
            scores.sort_by(f64::total_cmp);
            SubjectScore {
                subject_id: id.to_string(),
                label,
                score: scores.iter().sum::<f64>() / scores.len() as f64,
                samples: scores.len(),
            }
        })
        .collect())
}
