//! Turns per-example probability distributions into grid predictions.
//!
//! M-variants (and the single framing) predict the polarity set directly,
//! so the grid label is the argmax of the distribution. B-variants carry
//! one yes/no example per candidate polarity; the yes-probability is the
//! candidate's matching score and the grid label is the candidate with the
//! highest score. All ties break by canonical polarity order.

use std::collections::BTreeMap;

use crate::classifier::ProbDist;
use crate::corpus::Polarity;
use crate::error::{Error, Result};
use crate::pairs::{GroupKey, PairExample};

/// Whether a group's scores are direct label probabilities (M) or
/// per-candidate matching scores (B).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecodeKind {
    MVariant,
    BVariant,
}

/// One decoded grid cell with its full per-polarity score map, kept so
/// restricted argmax (3-way, binary, ...) can be recomputed downstream.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodedGroup {
    pub group: GroupKey,
    pub kind: DecodeKind,
    /// M: probability per polarity. B: P(yes) per candidate polarity.
    pub scores: BTreeMap<Polarity, f64>,
}

impl DecodedGroup {
    /// Argmax over the scores; ties break by canonical polarity order.
    pub fn label(&self) -> Polarity {
        argmax_canonical(self.scores.iter().map(|(p, s)| (*p, *s)))
            .expect("decoded groups always carry at least one score")
    }

    /// Scalar aspect-presence evidence in [0, 1]: `1 - P(none)` for
    /// M-variants, the best non-none matching score for B-variants.
    pub fn presence_score(&self) -> f64 {
        match self.kind {
            DecodeKind::MVariant => 1.0 - self.scores.get(&Polarity::None).copied().unwrap_or(0.0),
            DecodeKind::BVariant => self
                .scores
                .iter()
                .filter(|(p, _)| **p != Polarity::None)
                .map(|(_, s)| *s)
                .fold(0.0, f64::max),
        }
    }

    /// Pairwise-renormalized positive evidence:
    /// `P(positive) / (P(positive) + P(negative))`, or `None` when that
    /// denominator is zero or the polarities are absent.
    pub fn sentiment_score(&self) -> Option<f64> {
        let pos = self.scores.get(&Polarity::Positive).copied().unwrap_or(0.0);
        let neg = self.scores.get(&Polarity::Negative).copied().unwrap_or(0.0);
        let denom = pos + neg;
        (denom > 0.0).then(|| pos / denom)
    }

    pub fn to_prediction(&self) -> GridPrediction {
        GridPrediction {
            group: self.group.clone(),
            label: self.label(),
            presence_score: self.presence_score(),
            sentiment_score: self.sentiment_score(),
        }
    }
}

/// Final per-grid-cell prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPrediction {
    pub group: GroupKey,
    pub label: Polarity,
    pub presence_score: f64,
    pub sentiment_score: Option<f64>,
}

fn argmax_canonical(scores: impl IntoIterator<Item = (Polarity, f64)>) -> Option<Polarity> {
    let by_polarity: BTreeMap<Polarity, f64> = scores.into_iter().collect();
    let mut best: Option<(Polarity, f64)> = None;
    for polarity in Polarity::CANONICAL {
        if let Some(&score) = by_polarity.get(&polarity) {
            // Strictly greater keeps the earliest canonical polarity on
            // ties.
            if best.is_none_or(|(_, s)| score > s) {
                best = Some((polarity, score));
            }
        }
    }
    best.map(|(p, _)| p)
}

fn known_task_set(polarities: &[Polarity]) -> bool {
    let sorted: Vec<Polarity> = {
        let mut v = polarities.to_vec();
        v.sort();
        v
    };
    let mut tabsa = vec![Polarity::Positive, Polarity::Negative, Polarity::None];
    tabsa.sort();
    let mut absa = Polarity::CANONICAL.to_vec();
    absa.sort();
    sorted == tabsa || sorted == absa
}

/// Decodes M-variant (or single-framing) predictions: one example per
/// group, label = argmax over the task polarity set.
pub fn decode_m_groups(
    dists: &BTreeMap<String, ProbDist>,
    examples: &[PairExample],
) -> Result<Vec<DecodedGroup>> {
    let mut groups: BTreeMap<GroupKey, DecodedGroup> = BTreeMap::new();
    for example in examples {
        if example.method.is_b_variant() {
            return Err(Error::Contract(format!(
                "decode_m received B-variant example '{}'",
                example.uid
            )));
        }
        let dist = dists
            .get(&example.uid)
            .ok_or_else(|| Error::Validation(format!("no score row for uid '{}'", example.uid)))?;
        let mut scores = BTreeMap::new();
        for (label, p) in dist.iter() {
            let polarity = Polarity::parse(label).map_err(|_| {
                Error::Validation(format!(
                    "uid '{}': score label '{label}' is not a polarity",
                    example.uid
                ))
            })?;
            scores.insert(polarity, p);
        }
        let polarities: Vec<Polarity> = scores.keys().copied().collect();
        if !known_task_set(&polarities) {
            return Err(Error::Validation(format!(
                "uid '{}': scores cover {polarities:?}, not a task polarity set",
                example.uid
            )));
        }
        let decoded = DecodedGroup {
            group: example.group.clone(),
            kind: DecodeKind::MVariant,
            scores,
        };
        if groups.insert(example.group.clone(), decoded).is_some() {
            return Err(Error::Validation(format!(
                "duplicate example for group '{}'",
                example.group
            )));
        }
    }
    Ok(groups.into_values().collect())
}

/// Decodes B-variant predictions: each group needs exactly one yes/no
/// example per candidate polarity of the task set; the matching score is
/// P(yes).
pub fn decode_b_groups(
    dists: &BTreeMap<String, ProbDist>,
    examples: &[PairExample],
) -> Result<Vec<DecodedGroup>> {
    let mut scores_by_group: BTreeMap<GroupKey, BTreeMap<Polarity, f64>> = BTreeMap::new();
    for example in examples {
        if !example.method.is_b_variant() {
            return Err(Error::Contract(format!(
                "decode_b received non-B example '{}'",
                example.uid
            )));
        }
        let candidate = example.candidate.ok_or_else(|| {
            Error::Validation(format!(
                "B-variant example '{}' lacks a candidate",
                example.uid
            ))
        })?;
        let dist = dists
            .get(&example.uid)
            .ok_or_else(|| Error::Validation(format!("no score row for uid '{}'", example.uid)))?;
        let labels: Vec<&str> = dist.labels().collect();
        if labels != ["no", "yes"] {
            return Err(Error::Validation(format!(
                "uid '{}': B-variant scores must be over yes/no, got {labels:?}",
                example.uid
            )));
        }
        let yes = dist.get("yes").unwrap();
        let group_scores = scores_by_group.entry(example.group.clone()).or_default();
        if group_scores.insert(candidate, yes).is_some() {
            return Err(Error::Validation(format!(
                "group '{}': duplicate candidate '{candidate}'",
                example.group
            )));
        }
    }
    let mut out = Vec::with_capacity(scores_by_group.len());
    for (group, scores) in scores_by_group {
        let polarities: Vec<Polarity> = scores.keys().copied().collect();
        if !known_task_set(&polarities) {
            return Err(Error::Validation(format!(
                "group '{group}': incomplete candidate set {polarities:?}"
            )));
        }
        out.push(DecodedGroup {
            group,
            kind: DecodeKind::BVariant,
            scores,
        });
    }
    Ok(out)
}

/// M-variant decoding to final grid predictions.
pub fn decode_m(
    dists: &BTreeMap<String, ProbDist>,
    examples: &[PairExample],
) -> Result<Vec<GridPrediction>> {
    Ok(decode_m_groups(dists, examples)?
        .iter()
        .map(DecodedGroup::to_prediction)
        .collect())
}

/// B-variant decoding to final grid predictions.
pub fn decode_b(
    dists: &BTreeMap<String, ProbDist>,
    examples: &[PairExample],
) -> Result<Vec<GridPrediction>> {
    Ok(decode_b_groups(dists, examples)?
        .iter()
        .map(DecodedGroup::to_prediction)
        .collect())
}

/// Argmax restricted to an allowed polarity subset (which must exclude
/// `none`), over renormalized probabilities (M) or matching scores (B);
/// renormalization cannot change an argmax, so the masked maximum is
/// taken directly. Same tie rule as full decoding.
pub fn restrict_polarity(group: &DecodedGroup, allowed: &[Polarity]) -> Result<Polarity> {
    if allowed.is_empty() {
        return Err(Error::Contract("allowed polarity set is empty".into()));
    }
    if allowed.contains(&Polarity::None) {
        return Err(Error::Contract(
            "restricted decoding cannot include the none label".into(),
        ));
    }
    let masked: Vec<(Polarity, f64)> = group
        .scores
        .iter()
        .filter(|(p, _)| allowed.contains(p))
        .map(|(p, s)| (*p, *s))
        .collect();
    argmax_canonical(masked).ok_or_else(|| {
        Error::Validation(format!(
            "group '{}' lacks all of the allowed candidates {allowed:?}",
            group.group
        ))
    })
}

/// Prediction TSV export with columns group_id, label, presence_score,
/// sentiment_score.
pub fn write_predictions_tsv(predictions: &[GridPrediction]) -> String {
    let mut out = String::from("group_id\tlabel\tpresence_score\tsentiment_score\n");
    for p in predictions {
        let sentiment = p
            .sentiment_score
            .map(|s| format!("{s:.6}"))
            .unwrap_or_default();
        out.push_str(&format!(
            "{}\t{}\t{:.6}\t{}\n",
            p.group.id_string(),
            p.label,
            p.presence_score,
            sentiment
        ));
    }
    out
}
