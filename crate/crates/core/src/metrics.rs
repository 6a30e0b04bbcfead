//! Evaluation protocols.
//!
//! SentiHood: strict accuracy, macro-F1, and macro-averaged AUC for aspect
//! detection; accuracy and macro-AUC for sentiment. SemEval-2014 Task 4:
//! micro P/R/F1 for category detection; 4-way/3-way/binary accuracy for
//! category polarity. All 0/0 ratios follow the explicit conventions
//! below and are flagged in the report notes rather than propagating NaN.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::corpus::{AspectSet, LabeledSentence, Polarity};
use crate::decode::{restrict_polarity, DecodedGroup, GridPrediction};
use crate::error::{Error, Result};
use crate::pairs::GroupKey;

/// Which evaluation protocol a report was computed under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Sentihood,
    Semeval,
}

/// Per-task metric bundle. SentiHood reports populate the five
/// aspect/sentiment fields; SemEval reports the detection and polarity
/// fields; the others stay null.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub task: Protocol,
    pub aspect_strict_acc: Option<f64>,
    pub aspect_macro_f1: Option<f64>,
    pub aspect_macro_auc: Option<f64>,
    pub sentiment_acc: Option<f64>,
    pub sentiment_macro_auc: Option<f64>,
    pub detection_precision: Option<f64>,
    pub detection_recall: Option<f64>,
    pub detection_f1: Option<f64>,
    pub polarity_acc_4way: Option<f64>,
    pub polarity_acc_3way: Option<f64>,
    pub polarity_acc_binary: Option<f64>,
    /// Degenerate-case flags: skipped AUC aspects, 0/0 conventions
    /// applied, undefined metrics.
    #[serde(default)]
    pub notes: Vec<String>,
}

impl EvaluationReport {
    fn empty(task: Protocol) -> Self {
        EvaluationReport {
            task,
            aspect_strict_acc: None,
            aspect_macro_f1: None,
            aspect_macro_auc: None,
            sentiment_acc: None,
            sentiment_macro_auc: None,
            detection_precision: None,
            detection_recall: None,
            detection_f1: None,
            polarity_acc_4way: None,
            polarity_acc_3way: None,
            polarity_acc_binary: None,
            notes: Vec::new(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("report json: {e}")))
    }
}

/// The gold label grid: one polarity per (sentence, target?, aspect).
pub type GoldGrid = BTreeMap<GroupKey, Polarity>;

/// Collects grid-expanded sentences into a [`GoldGrid`].
pub fn gold_grid(sentences: &[LabeledSentence]) -> GoldGrid {
    let mut grid = GoldGrid::new();
    for sentence in sentences {
        for entry in &sentence.gold {
            grid.insert(
                GroupKey::new(&sentence.id, entry.target, &entry.aspect),
                entry.polarity,
            );
        }
    }
    grid
}

fn prediction_map<'a>(
    gold: &GoldGrid,
    predictions: &'a [GridPrediction],
) -> Result<BTreeMap<&'a GroupKey, &'a GridPrediction>> {
    let map: BTreeMap<&GroupKey, &GridPrediction> =
        predictions.iter().map(|p| (&p.group, p)).collect();
    for key in gold.keys() {
        if !map.contains_key(key) {
            return Err(Error::Validation(format!(
                "no prediction for gold group '{key}'"
            )));
        }
    }
    Ok(map)
}

type Unit = (String, Option<u32>);

/// Gold and predicted present-aspect sets per (sentence, target) unit.
fn units_with_sets(
    gold: &GoldGrid,
    preds: &BTreeMap<&GroupKey, &GridPrediction>,
) -> BTreeMap<Unit, (BTreeSet<String>, BTreeSet<String>)> {
    let mut units: BTreeMap<Unit, (BTreeSet<String>, BTreeSet<String>)> = BTreeMap::new();
    for (key, gold_label) in gold {
        let unit = (key.sentence_id.clone(), key.target);
        let entry = units.entry(unit).or_default();
        if *gold_label != Polarity::None {
            entry.0.insert(key.aspect.clone());
        }
        if preds[key].label != Polarity::None {
            entry.1.insert(key.aspect.clone());
        }
    }
    units
}

/// Fraction of (sentence, target) units whose predicted aspect set equals
/// the gold aspect set exactly.
pub fn strict_aspect_accuracy(gold: &GoldGrid, predictions: &[GridPrediction]) -> Result<f64> {
    if gold.is_empty() {
        return Err(Error::Validation("empty gold grid".into()));
    }
    let preds = prediction_map(gold, predictions)?;
    let units = units_with_sets(gold, &preds);
    let correct = units.values().filter(|(g, p)| g == p).count();
    Ok(correct as f64 / units.len() as f64)
}

/// Per-aspect binary-presence F1, macro-averaged over the aspect set.
/// 0/0 ratios count as 0; aspects with no gold or predicted occurrences
/// are reported back for flagging.
pub fn aspect_macro_f1(
    gold: &GoldGrid,
    predictions: &[GridPrediction],
    aspects: &AspectSet,
) -> Result<(f64, Vec<String>)> {
    if gold.is_empty() {
        return Err(Error::Validation("empty gold grid".into()));
    }
    let preds = prediction_map(gold, predictions)?;
    let mut total = 0.0;
    let mut degenerate = Vec::new();
    for aspect in aspects.names() {
        let mut tp = 0u64;
        let mut fp = 0u64;
        let mut fn_ = 0u64;
        for (key, gold_label) in gold {
            if key.aspect != *aspect {
                continue;
            }
            let gold_present = *gold_label != Polarity::None;
            let pred_present = preds[key].label != Polarity::None;
            match (gold_present, pred_present) {
                (true, true) => tp += 1,
                (false, true) => fp += 1,
                (true, false) => fn_ += 1,
                (false, false) => {}
            }
        }
        if tp + fp + fn_ == 0 {
            degenerate.push(aspect.clone());
        }
        let precision = ratio_or_zero(tp, tp + fp);
        let recall = ratio_or_zero(tp, tp + fn_);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        total += f1;
    }
    Ok((total / aspects.len() as f64, degenerate))
}

fn ratio_or_zero(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// ROC-AUC as the Mann-Whitney statistic with the tie convention:
/// `(#{s_p > s_n} + 0.5 * #{s_p = s_n}) / (P * N)`, computed by average
/// ranks. Returns `None` for single-class input, which callers exclude
/// from macro averages.
pub fn roc_auc(scores: &[(f64, bool)]) -> Option<f64> {
    let positives = scores.iter().filter(|(_, positive)| *positive).count();
    let negatives = scores.len() - positives;
    if positives == 0 || negatives == 0 {
        return None;
    }
    let mut sorted: Vec<(f64, bool)> = scores.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j < sorted.len() && sorted[j].0 == sorted[i].0 {
            j += 1;
        }
        // Average 1-based rank of the tie block [i, j).
        let avg_rank = (i + 1 + j) as f64 / 2.0;
        rank_sum_pos += avg_rank * sorted[i..j].iter().filter(|(_, p)| *p).count() as f64;
        i = j;
    }
    let p = positives as f64;
    let n = negatives as f64;
    let u = rank_sum_pos - p * (p + 1.0) / 2.0;
    Some(u / (p * n))
}

/// Macro-averaged AUC bundle over the aspect set.
#[derive(Debug, Clone, PartialEq)]
pub struct AucBundle {
    pub aspect_macro_auc: Option<f64>,
    pub sentiment_macro_auc: Option<f64>,
    /// Aspects lacking both classes, excluded from the respective macro.
    pub skipped_detection: Vec<String>,
    pub skipped_sentiment: Vec<String>,
}

/// Aspect-detection AUC (presence score against binary gold presence) and
/// sentiment AUC (sentiment score against positive-vs-negative gold,
/// restricted to gold-present pairs), each macro-averaged per aspect over
/// the aspects carrying both classes.
pub fn sentihood_auc_bundle(
    gold: &GoldGrid,
    predictions: &[GridPrediction],
    aspects: &AspectSet,
) -> Result<AucBundle> {
    let preds = prediction_map(gold, predictions)?;
    let mut detection_aucs = Vec::new();
    let mut sentiment_aucs = Vec::new();
    let mut skipped_detection = Vec::new();
    let mut skipped_sentiment = Vec::new();
    for aspect in aspects.names() {
        let mut detection: Vec<(f64, bool)> = Vec::new();
        let mut sentiment: Vec<(f64, bool)> = Vec::new();
        for (key, gold_label) in gold {
            if key.aspect != *aspect {
                continue;
            }
            let pred = preds[key];
            detection.push((pred.presence_score, *gold_label != Polarity::None));
            if matches!(gold_label, Polarity::Positive | Polarity::Negative) {
                let score = pred.sentiment_score.ok_or_else(|| {
                    Error::Validation(format!("gold-present group '{key}' has no sentiment score"))
                })?;
                sentiment.push((score, *gold_label == Polarity::Positive));
            }
        }
        match roc_auc(&detection) {
            Some(auc) => detection_aucs.push(auc),
            None => skipped_detection.push(aspect.clone()),
        }
        match roc_auc(&sentiment) {
            Some(auc) => sentiment_aucs.push(auc),
            None => skipped_sentiment.push(aspect.clone()),
        }
    }
    let mean = |values: &[f64]| {
        (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
    };
    Ok(AucBundle {
        aspect_macro_auc: mean(&detection_aucs),
        sentiment_macro_auc: mean(&sentiment_aucs),
        skipped_detection,
        skipped_sentiment,
    })
}

fn group_map(groups: &[DecodedGroup]) -> BTreeMap<&GroupKey, &DecodedGroup> {
    groups.iter().map(|g| (&g.group, g)).collect()
}

/// Accuracy over gold positive/negative pairs, with predictions restricted
/// to the positive/negative subset. `None` when the restricted set is
/// empty.
pub fn sentiment_accuracy(gold: &GoldGrid, groups: &[DecodedGroup]) -> Result<Option<f64>> {
    let by_group = group_map(groups);
    let mut correct = 0usize;
    let mut total = 0usize;
    for (key, gold_label) in gold {
        if !matches!(gold_label, Polarity::Positive | Polarity::Negative) {
            continue;
        }
        let group = by_group
            .get(key)
            .ok_or_else(|| Error::Validation(format!("no decoded group for gold group '{key}'")))?;
        let predicted = restrict_polarity(group, &[Polarity::Positive, Polarity::Negative])?;
        total += 1;
        if predicted == *gold_label {
            correct += 1;
        }
    }
    Ok((total > 0).then(|| correct as f64 / total as f64))
}

/// Micro-averaged detection precision/recall/F1 for the aspect-only task.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionPrf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub notes: Vec<String>,
}

/// Detected set = grid cells predicted non-none; compared against the
/// gold-annotated cells. 0/0 ratios count as 0 and are flagged.
pub fn semeval_detection_prf(
    gold: &GoldGrid,
    predictions: &[GridPrediction],
) -> Result<DetectionPrf> {
    if gold.is_empty() {
        return Err(Error::Validation("empty gold grid".into()));
    }
    let preds = prediction_map(gold, predictions)?;
    let mut tp = 0u64;
    let mut fp = 0u64;
    let mut fn_ = 0u64;
    for (key, gold_label) in gold {
        let gold_present = *gold_label != Polarity::None;
        let pred_present = preds[key].label != Polarity::None;
        match (gold_present, pred_present) {
            (true, true) => tp += 1,
            (false, true) => fp += 1,
            (true, false) => fn_ += 1,
            (false, false) => {}
        }
    }
    let mut notes = Vec::new();
    if tp + fp == 0 {
        notes.push("detection precision is 0/0, counted as 0".to_string());
    }
    if tp + fn_ == 0 {
        notes.push("detection recall is 0/0, counted as 0".to_string());
    }
    let precision = ratio_or_zero(tp, tp + fp);
    let recall = ratio_or_zero(tp, tp + fn_);
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        notes.push("detection F1 is 0/0, counted as 0".to_string());
        0.0
    };
    Ok(DetectionPrf {
        precision,
        recall,
        f1,
        notes,
    })
}

/// Polarity-accuracy evaluation modes for the aspect-only task.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolarityMode {
    FourWay,
    ThreeWay,
    Binary,
}

impl PolarityMode {
    pub fn allowed(self) -> &'static [Polarity] {
        match self {
            PolarityMode::FourWay => &[
                Polarity::Positive,
                Polarity::Negative,
                Polarity::Neutral,
                Polarity::Conflict,
            ],
            PolarityMode::ThreeWay => &[Polarity::Positive, Polarity::Negative, Polarity::Neutral],
            PolarityMode::Binary => &[Polarity::Positive, Polarity::Negative],
        }
    }
}

/// Accuracy over gold cells whose label lies in the mode's set, with
/// predictions restricted to that set. `None` when the evaluation set is
/// empty.
pub fn semeval_polarity_accuracy(
    gold: &GoldGrid,
    groups: &[DecodedGroup],
    mode: PolarityMode,
) -> Result<Option<f64>> {
    let by_group = group_map(groups);
    let allowed = mode.allowed();
    let mut correct = 0usize;
    let mut total = 0usize;
    for (key, gold_label) in gold {
        if !allowed.contains(gold_label) {
            continue;
        }
        let group = by_group
            .get(key)
            .ok_or_else(|| Error::Validation(format!("no decoded group for gold group '{key}'")))?;
        let predicted = restrict_polarity(group, allowed)?;
        total += 1;
        if predicted == *gold_label {
            correct += 1;
        }
    }
    Ok((total > 0).then(|| correct as f64 / total as f64))
}

/// Full SentiHood protocol over decoded groups.
pub fn evaluate_sentihood(
    gold: &GoldGrid,
    groups: &[DecodedGroup],
    aspects: &AspectSet,
) -> Result<EvaluationReport> {
    let predictions: Vec<GridPrediction> = groups.iter().map(DecodedGroup::to_prediction).collect();
    let mut report = EvaluationReport::empty(Protocol::Sentihood);
    report.aspect_strict_acc = Some(strict_aspect_accuracy(gold, &predictions)?);
    let (macro_f1, degenerate) = aspect_macro_f1(gold, &predictions, aspects)?;
    report.aspect_macro_f1 = Some(macro_f1);
    for aspect in degenerate {
        report.notes.push(format!(
            "aspect '{aspect}' has no gold or predicted presence; F1 counted as 0"
        ));
    }
    let bundle = sentihood_auc_bundle(gold, &predictions, aspects)?;
    report.aspect_macro_auc = bundle.aspect_macro_auc;
    report.sentiment_macro_auc = bundle.sentiment_macro_auc;
    if bundle.aspect_macro_auc.is_some() || bundle.sentiment_macro_auc.is_some() {
        report
            .notes
            .push("AUC values are macro-averaged over aspects, not pooled".to_string());
    }
    for aspect in bundle.skipped_detection {
        report.notes.push(format!(
            "aspect '{aspect}' skipped in detection AUC (single class)"
        ));
    }
    for aspect in bundle.skipped_sentiment {
        report.notes.push(format!(
            "aspect '{aspect}' skipped in sentiment AUC (single class)"
        ));
    }
    report.sentiment_acc = sentiment_accuracy(gold, groups)?;
    if report.sentiment_acc.is_none() {
        report
            .notes
            .push("sentiment accuracy undefined: no gold positive/negative pairs".to_string());
    }
    if report.aspect_macro_auc.is_none() {
        report
            .notes
            .push("aspect AUC undefined: every aspect is single-class".to_string());
    }
    if report.sentiment_macro_auc.is_none() {
        report
            .notes
            .push("sentiment AUC undefined: every aspect is single-class".to_string());
    }
    Ok(report)
}

/// Full SemEval-2014 Task 4 protocol (subtask 3 + subtask 4) over decoded
/// groups.
pub fn evaluate_semeval(gold: &GoldGrid, groups: &[DecodedGroup]) -> Result<EvaluationReport> {
    let predictions: Vec<GridPrediction> = groups.iter().map(DecodedGroup::to_prediction).collect();
    let mut report = EvaluationReport::empty(Protocol::Semeval);
    let prf = semeval_detection_prf(gold, &predictions)?;
    report.detection_precision = Some(prf.precision);
    report.detection_recall = Some(prf.recall);
    report.detection_f1 = Some(prf.f1);
    report.notes.extend(prf.notes);
    for (mode, slot, name) in [
        (
            PolarityMode::FourWay,
            &mut report.polarity_acc_4way,
            "4-way",
        ),
        (
            PolarityMode::ThreeWay,
            &mut report.polarity_acc_3way,
            "3-way",
        ),
        (
            PolarityMode::Binary,
            &mut report.polarity_acc_binary,
            "binary",
        ),
    ] {
        *slot = semeval_polarity_accuracy(gold, groups, mode)?;
        if slot.is_none() {
            report.notes.push(format!(
                "{name} polarity accuracy undefined: empty evaluation set"
            ));
        }
    }
    Ok(report)
}

fn cell(value: Option<f64>) -> String {
    match value {
        Some(v) => format!("{:6.2}", v * 100.0),
        None => format!("{:>6}", "-"),
    }
}

/// Renders reports as plain-text table rows (values in percent), one
/// section per protocol.
pub fn render_reports_table(named: &[(String, EvaluationReport)]) -> String {
    let mut out = String::new();
    let width = named
        .iter()
        .map(|(name, _)| name.len())
        .chain(std::iter::once(5))
        .max()
        .unwrap_or(5);
    let sentihood: Vec<_> = named
        .iter()
        .filter(|(_, r)| r.task == Protocol::Sentihood)
        .collect();
    if !sentihood.is_empty() {
        out.push_str(&format!(
            "{:width$}  {}\n",
            "model", "aspect_acc  aspect_f1  aspect_auc  sent_acc  sent_auc"
        ));
        for (name, r) in &sentihood {
            out.push_str(&format!(
                "{name:width$}  {:>10}  {:>9}  {:>10}  {:>8}  {:>8}\n",
                cell(r.aspect_strict_acc),
                cell(r.aspect_macro_f1),
                cell(r.aspect_macro_auc),
                cell(r.sentiment_acc),
                cell(r.sentiment_macro_auc),
            ));
        }
    }
    let semeval: Vec<_> = named
        .iter()
        .filter(|(_, r)| r.task == Protocol::Semeval)
        .collect();
    if !semeval.is_empty() {
        if !out.is_empty() {
            out.push('\n');
        }
        out.push_str(&format!(
            "{:width$}  {}\n",
            "model", "precision  recall  f1      4-way   3-way   binary"
        ));
        for (name, r) in &semeval {
            out.push_str(&format!(
                "{name:width$}  {:>9}  {:>6}  {:>6}  {:>6}  {:>6}  {:>6}\n",
                cell(r.detection_precision),
                cell(r.detection_recall),
                cell(r.detection_f1),
                cell(r.polarity_acc_4way),
                cell(r.polarity_acc_3way),
                cell(r.polarity_acc_binary),
            ));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decode::DecodeKind;

    fn key(sid: &str, target: Option<u32>, aspect: &str) -> GroupKey {
        GroupKey::new(sid, target, aspect)
    }

    fn pred(
        group: GroupKey,
        label: Polarity,
        presence: f64,
        sentiment: Option<f64>,
    ) -> GridPrediction {
        GridPrediction {
            group,
            label,
            presence_score: presence,
            sentiment_score: sentiment,
        }
    }

    /// Gold-derived oracle predictions: the gold label itself with
    /// one-hot presence/sentiment scores.
    fn oracle_predictions(gold: &GoldGrid) -> Vec<GridPrediction> {
        gold.iter()
            .map(|(key, label)| {
                let presence = if *label == Polarity::None { 0.0 } else { 1.0 };
                let sentiment = match label {
                    Polarity::Positive => Some(1.0),
                    Polarity::Negative => Some(0.0),
                    _ => Some(0.5),
                };
                pred(key.clone(), *label, presence, sentiment)
            })
            .collect()
    }

    /// An M-variant decoded group with a one-hot distribution at the
    /// given label.
    fn one_hot_group(key: GroupKey, label: Polarity, set: &[Polarity]) -> DecodedGroup {
        DecodedGroup {
            group: key,
            kind: DecodeKind::MVariant,
            scores: set
                .iter()
                .map(|p| (*p, if *p == label { 1.0 } else { 0.0 }))
                .collect(),
        }
    }

    fn two_aspects() -> AspectSet {
        AspectSet::new(vec!["general".into(), "price".into()]).unwrap()
    }

    #[test]
    fn strict_accuracy_oracle_is_one() {
        let gold: GoldGrid = GoldGrid::from([
            (key("1", Some(1), "general"), Polarity::Positive),
            (key("1", Some(1), "price"), Polarity::None),
            (key("1", Some(2), "general"), Polarity::None),
            (key("1", Some(2), "price"), Polarity::Negative),
        ]);
        let preds = oracle_predictions(&gold);
        assert_eq!(strict_aspect_accuracy(&gold, &preds).unwrap(), 1.0);
    }

    #[test]
    fn strict_accuracy_counts_set_equality_per_unit() {
        // Unit A: gold {general}, pred {general}. Unit B: gold
        // {price, safety}, pred {price}. One of two units correct.
        let aspects =
            AspectSet::new(vec!["general".into(), "price".into(), "safety".into()]).unwrap();
        let gold: GoldGrid = GoldGrid::from([
            (key("a", Some(1), "general"), Polarity::Positive),
            (key("a", Some(1), "price"), Polarity::None),
            (key("a", Some(1), "safety"), Polarity::None),
            (key("b", Some(1), "general"), Polarity::None),
            (key("b", Some(1), "price"), Polarity::Negative),
            (key("b", Some(1), "safety"), Polarity::Positive),
        ]);
        let preds = vec![
            pred(key("a", Some(1), "general"), Polarity::Positive, 1.0, None),
            pred(key("a", Some(1), "price"), Polarity::None, 0.0, None),
            pred(key("a", Some(1), "safety"), Polarity::None, 0.0, None),
            pred(key("b", Some(1), "general"), Polarity::None, 0.0, None),
            pred(key("b", Some(1), "price"), Polarity::Negative, 1.0, None),
            pred(key("b", Some(1), "safety"), Polarity::None, 0.0, None),
        ];
        assert_eq!(strict_aspect_accuracy(&gold, &preds).unwrap(), 0.5);
        let _ = aspects;
    }

    #[test]
    fn all_none_unit_with_empty_gold_counts_correct() {
        let gold: GoldGrid = GoldGrid::from([
            (key("a", Some(1), "general"), Polarity::None),
            (key("a", Some(1), "price"), Polarity::None),
        ]);
        let preds = vec![
            pred(key("a", Some(1), "general"), Polarity::None, 0.0, None),
            pred(key("a", Some(1), "price"), Polarity::None, 0.0, None),
        ];
        assert_eq!(strict_aspect_accuracy(&gold, &preds).unwrap(), 1.0);
    }

    #[test]
    fn missing_group_is_an_error() {
        let gold: GoldGrid = GoldGrid::from([(key("a", Some(1), "general"), Polarity::None)]);
        let err = strict_aspect_accuracy(&gold, &[]).unwrap_err();
        assert!(err.to_string().contains("a::t1::general"), "{err}");
    }

    #[test]
    fn macro_f1_oracle_is_one() {
        let gold: GoldGrid = GoldGrid::from([
            (key("1", Some(1), "general"), Polarity::Positive),
            (key("1", Some(1), "price"), Polarity::Negative),
            (key("2", Some(1), "general"), Polarity::None),
            (key("2", Some(1), "price"), Polarity::Positive),
        ]);
        let preds = oracle_predictions(&gold);
        let (f1, degenerate) = aspect_macro_f1(&gold, &preds, &two_aspects()).unwrap();
        assert_eq!(f1, 1.0);
        assert!(degenerate.is_empty());
    }

    #[test]
    fn macro_f1_hand_case() {
        // Aspect "general": TP=1, FP=1, FN=0 -> P=1/2, R=1, F1=2/3.
        // Aspects "price", "safety", "transit": perfect with support.
        // Macro = (3 + 2/3) / 4.
        let aspects = AspectSet::new(vec![
            "general".into(),
            "price".into(),
            "safety".into(),
            "transit".into(),
        ])
        .unwrap();
        let mut gold = GoldGrid::new();
        let mut preds = Vec::new();
        for (sid, aspect, gold_label, pred_label) in [
            ("1", "general", Polarity::Positive, Polarity::Positive), // TP
            ("2", "general", Polarity::None, Polarity::Positive),     // FP
            ("1", "price", Polarity::Positive, Polarity::Positive),
            ("2", "price", Polarity::None, Polarity::None),
            ("1", "safety", Polarity::Negative, Polarity::Negative),
            ("2", "safety", Polarity::None, Polarity::None),
            ("1", "transit", Polarity::Positive, Polarity::Positive),
            ("2", "transit", Polarity::None, Polarity::None),
        ] {
            gold.insert(key(sid, Some(1), aspect), gold_label);
            preds.push(pred(key(sid, Some(1), aspect), pred_label, 0.5, None));
        }
        let (f1, _) = aspect_macro_f1(&gold, &preds, &aspects).unwrap();
        let expected = (3.0 + 2.0 / 3.0) / 4.0;
        assert!((f1 - expected).abs() < 1e-12, "{f1} vs {expected}");
        assert!((expected - 0.9167).abs() < 1e-4);
    }

    #[test]
    fn macro_f1_flags_unsupported_aspects() {
        let gold: GoldGrid = GoldGrid::from([
            (key("1", Some(1), "general"), Polarity::Positive),
            (key("1", Some(1), "price"), Polarity::None),
        ]);
        let preds = oracle_predictions(&gold);
        let (f1, degenerate) = aspect_macro_f1(&gold, &preds, &two_aspects()).unwrap();
        // "price" never gold and never predicted -> F1 0 by convention.
        assert_eq!(degenerate, vec!["price".to_string()]);
        assert_eq!(f1, 0.5);
    }

    /// Independent O(P*N) pairwise oracle.
    pub(crate) fn brute_force_auc(scores: &[(f64, bool)]) -> Option<f64> {
        let positives: Vec<f64> = scores.iter().filter(|(_, p)| *p).map(|(s, _)| *s).collect();
        let negatives: Vec<f64> = scores
            .iter()
            .filter(|(_, p)| !*p)
            .map(|(s, _)| *s)
            .collect();
        if positives.is_empty() || negatives.is_empty() {
            return None;
        }
        let mut greater = 0u64;
        let mut ties = 0u64;
        for &sp in &positives {
            for &sn in &negatives {
                if sp > sn {
                    greater += 1;
                } else if sp == sn {
                    ties += 1;
                }
            }
        }
        Some(
            (greater as f64 + 0.5 * ties as f64)
                / (positives.len() as f64 * negatives.len() as f64),
        )
    }

    #[test]
    fn auc_hand_case() {
        // positives [0.9, 0.4], negatives [0.8, 0.1]: 3 of 4 pairs won.
        let scores = [(0.9, true), (0.4, true), (0.8, false), (0.1, false)];
        assert_eq!(roc_auc(&scores), Some(0.75));
        assert_eq!(brute_force_auc(&scores), Some(0.75));
    }

    #[test]
    fn auc_all_ties_is_half() {
        let scores = [(0.3, true), (0.3, false), (0.3, true), (0.3, false)];
        assert_eq!(roc_auc(&scores), Some(0.5));
    }

    #[test]
    fn auc_perfect_separation_is_one() {
        let scores = [(0.9, true), (0.8, true), (0.2, false), (0.1, false)];
        assert_eq!(roc_auc(&scores), Some(1.0));
    }

    #[test]
    fn auc_single_class_is_undefined() {
        assert_eq!(roc_auc(&[(0.9, true), (0.8, true)]), None);
        assert_eq!(roc_auc(&[]), None);
    }

    #[test]
    fn auc_matches_brute_force_on_random_instances() {
        let mut state = 0x12345u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            state
        };
        for _ in 0..50 {
            let n = 2 + (next() % 30) as usize;
            let scores: Vec<(f64, bool)> = (0..n)
                .map(|_| ((next() % 8) as f64 / 7.0, next() % 2 == 0))
                .collect();
            assert_eq!(roc_auc(&scores), brute_force_auc(&scores));
        }
    }

    #[test]
    fn auc_complement_symmetry() {
        let scores = [
            (0.9, true),
            (0.4, true),
            (0.8, false),
            (0.1, false),
            (0.4, false),
        ];
        let flipped: Vec<(f64, bool)> = scores.iter().map(|(s, p)| (-s, !p)).collect();
        assert_eq!(roc_auc(&scores), roc_auc(&flipped));
    }

    #[test]
    fn auc_bundle_macro_averages_per_aspect() {
        // Aspect "general": presence positives [0.9, 0.4] vs negatives
        // [0.8, 0.1] -> 0.75. Aspect "price": perfectly separated -> 1.0.
        let mut gold = GoldGrid::new();
        let mut preds = Vec::new();
        for (sid, aspect, gold_label, presence) in [
            ("1", "general", Polarity::Positive, 0.9),
            ("2", "general", Polarity::None, 0.8),
            ("3", "general", Polarity::Positive, 0.4),
            ("4", "general", Polarity::None, 0.1),
            ("1", "price", Polarity::Positive, 0.9),
            ("2", "price", Polarity::Positive, 0.8),
            ("3", "price", Polarity::None, 0.2),
            ("4", "price", Polarity::None, 0.1),
        ] {
            gold.insert(key(sid, Some(1), aspect), gold_label);
            preds.push(pred(
                key(sid, Some(1), aspect),
                gold_label,
                presence,
                Some(0.5),
            ));
        }
        let bundle = sentihood_auc_bundle(&gold, &preds, &two_aspects()).unwrap();
        assert_eq!(bundle.aspect_macro_auc, Some(0.875));
        assert!(bundle.skipped_detection.is_empty());
        // Every gold-present pair is positive: sentiment AUC undefined.
        assert_eq!(bundle.sentiment_macro_auc, None);
        assert_eq!(bundle.skipped_sentiment.len(), 2);
    }

    #[test]
    fn auc_bundle_oracle_and_constant() {
        let mut gold = GoldGrid::new();
        for (sid, aspect, label) in [
            ("1", "general", Polarity::Positive),
            ("2", "general", Polarity::Negative),
            ("3", "general", Polarity::None),
            ("1", "price", Polarity::Negative),
            ("2", "price", Polarity::Positive),
            ("3", "price", Polarity::None),
        ] {
            gold.insert(key(sid, Some(1), aspect), label);
        }
        let oracle = oracle_predictions(&gold);
        let bundle = sentihood_auc_bundle(&gold, &oracle, &two_aspects()).unwrap();
        assert_eq!(bundle.aspect_macro_auc, Some(1.0));
        assert_eq!(bundle.sentiment_macro_auc, Some(1.0));
        // Constant scores: every comparison ties -> 0.5 exactly.
        let constant: Vec<GridPrediction> = gold
            .iter()
            .map(|(k, label)| pred(k.clone(), *label, 0.25, Some(0.5)))
            .collect();
        let bundle = sentihood_auc_bundle(&gold, &constant, &two_aspects()).unwrap();
        assert_eq!(bundle.aspect_macro_auc, Some(0.5));
        assert_eq!(bundle.sentiment_macro_auc, Some(0.5));
    }

    fn groups_for(labels: &[(GroupKey, Polarity)]) -> Vec<DecodedGroup> {
        let set = [Polarity::Positive, Polarity::Negative, Polarity::None];
        labels
            .iter()
            .map(|(k, l)| one_hot_group(k.clone(), *l, &set))
            .collect()
    }

    #[test]
    fn sentiment_accuracy_oracle_and_hand_count() {
        let gold: GoldGrid = GoldGrid::from([
            (key("1", Some(1), "general"), Polarity::Positive),
            (key("2", Some(1), "general"), Polarity::Positive),
            (key("3", Some(1), "general"), Polarity::Positive),
            (key("4", Some(1), "general"), Polarity::None),
        ]);
        let oracle: Vec<(GroupKey, Polarity)> = gold.iter().map(|(k, l)| (k.clone(), *l)).collect();
        assert_eq!(
            sentiment_accuracy(&gold, &groups_for(&oracle)).unwrap(),
            Some(1.0)
        );
        // Predictions (positive, negative, positive) over 3 gold-positive
        // pairs -> 2/3.
        let mixed = groups_for(&[
            (key("1", Some(1), "general"), Polarity::Positive),
            (key("2", Some(1), "general"), Polarity::Negative),
            (key("3", Some(1), "general"), Polarity::Positive),
            (key("4", Some(1), "general"), Polarity::None),
        ]);
        let acc = sentiment_accuracy(&gold, &mixed).unwrap().unwrap();
        assert!((acc - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn sentiment_accuracy_undefined_without_present_gold() {
        let gold: GoldGrid = GoldGrid::from([(key("1", Some(1), "general"), Polarity::None)]);
        let groups = groups_for(&[(key("1", Some(1), "general"), Polarity::None)]);
        assert_eq!(sentiment_accuracy(&gold, &groups).unwrap(), None);
    }

    fn semeval_gold() -> GoldGrid {
        // gold {s1: food, service; s2: price} over a 4-category grid.
        let mut gold = GoldGrid::new();
        for (sid, aspect, label) in [
            ("s1", "food", Polarity::Positive),
            ("s1", "service", Polarity::Negative),
            ("s1", "price", Polarity::None),
            ("s1", "ambience", Polarity::None),
            ("s2", "food", Polarity::None),
            ("s2", "service", Polarity::None),
            ("s2", "price", Polarity::Positive),
            ("s2", "ambience", Polarity::None),
        ] {
            gold.insert(key(sid, None, aspect), label);
        }
        gold
    }

    #[test]
    fn detection_prf_hand_case() {
        let gold = semeval_gold();
        // predicted {s1: food; s2: price, ambience}.
        let preds: Vec<GridPrediction> = gold
            .keys()
            .map(|k| {
                let label = match (k.sentence_id.as_str(), k.aspect.as_str()) {
                    ("s1", "food") => Polarity::Positive,
                    ("s2", "price") => Polarity::Positive,
                    ("s2", "ambience") => Polarity::Negative,
                    _ => Polarity::None,
                };
                pred(k.clone(), label, 0.5, None)
            })
            .collect();
        let prf = semeval_detection_prf(&gold, &preds).unwrap();
        assert!((prf.precision - 2.0 / 3.0).abs() < 1e-12);
        assert!((prf.recall - 2.0 / 3.0).abs() < 1e-12);
        assert!((prf.f1 - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn detection_prf_oracle_and_empty() {
        let gold = semeval_gold();
        let prf = semeval_detection_prf(&gold, &oracle_predictions(&gold)).unwrap();
        assert_eq!((prf.precision, prf.recall, prf.f1), (1.0, 1.0, 1.0));
        // Nothing predicted: precision 0/0 -> 0 (flagged), recall 0.
        let nothing: Vec<GridPrediction> = gold
            .keys()
            .map(|k| pred(k.clone(), Polarity::None, 0.0, None))
            .collect();
        let prf = semeval_detection_prf(&gold, &nothing).unwrap();
        assert_eq!((prf.precision, prf.recall, prf.f1), (0.0, 0.0, 0.0));
        assert!(!prf.notes.is_empty());
    }

    #[test]
    fn prf_identity_holds_when_defined() {
        let gold = semeval_gold();
        let preds: Vec<GridPrediction> = gold
            .keys()
            .enumerate()
            .map(|(i, k)| {
                let label = if i % 2 == 0 {
                    Polarity::Positive
                } else {
                    Polarity::None
                };
                pred(k.clone(), label, 0.5, None)
            })
            .collect();
        let prf = semeval_detection_prf(&gold, &preds).unwrap();
        if prf.precision + prf.recall > 0.0 {
            let expected = 2.0 * prf.precision * prf.recall / (prf.precision + prf.recall);
            assert!((prf.f1 - expected).abs() < 1e-12);
        }
    }

    fn five_set_groups(labels: &[(GroupKey, Polarity)]) -> Vec<DecodedGroup> {
        labels
            .iter()
            .map(|(k, l)| one_hot_group(k.clone(), *l, &Polarity::CANONICAL))
            .collect()
    }

    #[test]
    fn polarity_accuracy_modes() {
        let mut gold = GoldGrid::new();
        for (sid, label) in [
            ("s1", Polarity::Positive),
            ("s2", Polarity::Negative),
            ("s3", Polarity::Neutral),
            ("s4", Polarity::Conflict),
        ] {
            gold.insert(key(sid, None, "food"), label);
        }
        let oracle: Vec<(GroupKey, Polarity)> = gold.iter().map(|(k, l)| (k.clone(), *l)).collect();
        let oracle_groups = five_set_groups(&oracle);
        for mode in [
            PolarityMode::FourWay,
            PolarityMode::ThreeWay,
            PolarityMode::Binary,
        ] {
            assert_eq!(
                semeval_polarity_accuracy(&gold, &oracle_groups, mode).unwrap(),
                Some(1.0)
            );
        }
        // Predictions (positive, positive, neutral, conflict) -> 3/4 on
        // 4-way; the conflict pair drops out of 3-way.
        let mixed = five_set_groups(&[
            (key("s1", None, "food"), Polarity::Positive),
            (key("s2", None, "food"), Polarity::Positive),
            (key("s3", None, "food"), Polarity::Neutral),
            (key("s4", None, "food"), Polarity::Conflict),
        ]);
        assert_eq!(
            semeval_polarity_accuracy(&gold, &mixed, PolarityMode::FourWay).unwrap(),
            Some(0.75)
        );
        assert_eq!(
            semeval_polarity_accuracy(&gold, &mixed, PolarityMode::ThreeWay).unwrap(),
            Some(2.0 / 3.0)
        );
        assert_eq!(
            semeval_polarity_accuracy(&gold, &mixed, PolarityMode::Binary).unwrap(),
            Some(0.5)
        );
    }

    #[test]
    fn polarity_accuracy_undefined_on_empty_mode_set() {
        let gold: GoldGrid = GoldGrid::from([(key("s1", None, "food"), Polarity::None)]);
        let groups = five_set_groups(&[(key("s1", None, "food"), Polarity::None)]);
        assert_eq!(
            semeval_polarity_accuracy(&gold, &groups, PolarityMode::Binary).unwrap(),
            None
        );
    }

    #[test]
    fn metrics_are_permutation_invariant_in_prediction_order() {
        let gold = semeval_gold();
        let mut preds = oracle_predictions(&gold);
        let forward = semeval_detection_prf(&gold, &preds).unwrap();
        preds.reverse();
        assert_eq!(semeval_detection_prf(&gold, &preds).unwrap(), forward);

        let mut grid = GoldGrid::new();
        grid.insert(key("1", Some(1), "general"), Polarity::Positive);
        grid.insert(key("1", Some(1), "price"), Polarity::None);
        grid.insert(key("2", Some(1), "general"), Polarity::None);
        grid.insert(key("2", Some(1), "price"), Polarity::Negative);
        let mut preds = oracle_predictions(&grid);
        let strict = strict_aspect_accuracy(&grid, &preds).unwrap();
        let f1 = aspect_macro_f1(&grid, &preds, &two_aspects()).unwrap();
        preds.reverse();
        assert_eq!(strict_aspect_accuracy(&grid, &preds).unwrap(), strict);
        assert_eq!(aspect_macro_f1(&grid, &preds, &two_aspects()).unwrap(), f1);
    }

    #[test]
    fn report_json_round_trips() {
        let mut gold = GoldGrid::new();
        for (sid, aspect, label) in [
            ("1", "general", Polarity::Positive),
            ("2", "general", Polarity::Negative),
            ("1", "price", Polarity::None),
            ("2", "price", Polarity::Positive),
        ] {
            gold.insert(key(sid, Some(1), aspect), label);
        }
        let oracle: Vec<(GroupKey, Polarity)> = gold.iter().map(|(k, l)| (k.clone(), *l)).collect();
        let report = evaluate_sentihood(&gold, &groups_for(&oracle), &two_aspects()).unwrap();
        assert_eq!(report.aspect_strict_acc, Some(1.0));
        assert_eq!(report.aspect_macro_f1, Some(1.0));
        assert_eq!(report.sentiment_acc, Some(1.0));
        assert!(report.detection_f1.is_none());
        let back = EvaluationReport::from_json(&report.to_json()).unwrap();
        assert_eq!(back, report);
        let table = render_reports_table(&[("oracle".to_string(), report)]);
        assert!(table.contains("100.00"), "{table}");
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn arb_scores() -> impl Strategy<Value = Vec<(f64, bool)>> {
            proptest::collection::vec(
                (
                    (0u32..12).prop_map(|q| q as f64 / 11.0),
                    proptest::bool::ANY,
                ),
                2..40,
            )
        }

        proptest! {
            #[test]
            fn auc_equals_brute_force(scores in arb_scores()) {
                prop_assert_eq!(roc_auc(&scores), tests::brute_force_auc(&scores));
            }

            #[test]
            fn auc_complement_symmetry_holds(scores in arb_scores()) {
                let flipped: Vec<(f64, bool)> =
                    scores.iter().map(|(s, p)| (-s, !p)).collect();
                prop_assert_eq!(roc_auc(&scores), roc_auc(&flipped));
            }

            #[test]
            fn auc_is_permutation_invariant(scores in arb_scores(), seed in 0u64..100) {
                let mut shuffled = scores.clone();
                let mut state = seed.wrapping_add(1);
                for i in (1..shuffled.len()).rev() {
                    state ^= state << 13;
                    state ^= state >> 7;
                    state ^= state << 17;
                    shuffled.swap(i, (state % (i as u64 + 1)) as usize);
                }
                prop_assert_eq!(roc_auc(&scores), roc_auc(&shuffled));
            }
        }
    }
}
