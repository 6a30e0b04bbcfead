//! Desk-scale sentence-pair classifier: hashed segment-tagged n-gram
//! features feeding a multinomial logistic-regression head, trained by
//! deterministic mini-batch gradient descent. Also houses the score-file
//! import/export contract used to plug in externally produced
//! probabilities.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::pairs::PairExample;

/// 64-bit FNV-1a over raw bytes; the published, bit-exact feature hash.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

/// Sparse hashed feature vector; indices are strictly within the hash
/// dimension, sorted, and unique (collisions accumulate their counts).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    indices: Vec<u32>,
    values: Vec<f64>,
    hash_dim: usize,
}

impl FeatureVector {
    /// Builds a canonical vector from (index, value) pairs in any order;
    /// duplicate indices accumulate.
    pub fn new(entries: impl IntoIterator<Item = (u32, f64)>, hash_dim: usize) -> Result<Self> {
        require_power_of_two(hash_dim)?;
        let mut counts: BTreeMap<u32, f64> = BTreeMap::new();
        for (index, value) in entries {
            if index as usize >= hash_dim {
                return Err(Error::Contract(format!(
                    "feature index {index} outside hash dimension {hash_dim}"
                )));
            }
            *counts.entry(index).or_default() += value;
        }
        let (indices, values) = counts.into_iter().unzip();
        Ok(FeatureVector {
            indices,
            values,
            hash_dim,
        })
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.indices
            .iter()
            .copied()
            .zip(self.values.iter().copied())
    }

    pub fn hash_dim(&self) -> usize {
        self.hash_dim
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

fn require_power_of_two(hash_dim: usize) -> Result<()> {
    if hash_dim == 0 || !hash_dim.is_power_of_two() {
        return Err(Error::Contract(format!(
            "hash dimension must be a power of two, got {hash_dim}"
        )));
    }
    Ok(())
}

fn hash_feature(feature: &str, hash_dim: usize) -> u32 {
    (fnv1a64(feature.as_bytes()) & (hash_dim as u64 - 1)) as u32
}

/// Encodes a pair example as segment-tagged unigram and bigram counts:
/// sentence1 n-grams are prefixed `A:`, sentence2 n-grams `B:`, each
/// hashed into `[0, hash_dim)`. Deterministic; ignores all example
/// metadata other than the two sentences.
pub fn encode_features(example: &PairExample, hash_dim: usize) -> Result<FeatureVector> {
    require_power_of_two(hash_dim)?;
    let mut entries: Vec<(u32, f64)> = Vec::new();
    for (tag, sentence) in [("A:", &example.sentence1), ("B:", &example.sentence2)] {
        let tokens: Vec<&str> = sentence.split_whitespace().collect();
        for token in &tokens {
            entries.push((hash_feature(&format!("{tag}{token}"), hash_dim), 1.0));
        }
        for window in tokens.windows(2) {
            let feature = format!("{tag}{} {}", window[0], window[1]);
            entries.push((hash_feature(&feature, hash_dim), 1.0));
        }
    }
    FeatureVector::new(entries, hash_dim)
}

/// Training hyperparameters for the built-in classifier. The defaults
/// converge on desk-scale corpora in seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Hash dimension exponent; the feature space is `2^hash_bits`.
    pub hash_bits: u32,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.2,
            epochs: 5,
            batch_size: 32,
            seed: 42,
            hash_bits: 18,
        }
    }
}

impl TrainConfig {
    pub fn hash_dim(&self) -> usize {
        1usize << self.hash_bits
    }

    pub fn validate(&self) -> Result<()> {
        if self.learning_rate <= 0.0 || !self.learning_rate.is_finite() {
            return Err(Error::Contract(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Contract("batch size must be positive".into()));
        }
        if !(10..=26).contains(&self.hash_bits) {
            return Err(Error::Contract(format!(
                "hash_bits must lie in [10, 26], got {}",
                self.hash_bits
            )));
        }
        Ok(())
    }
}

/// Softmax-head parameters: a dense `K x H` weight matrix plus bias over
/// an ordered label set.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    label_names: Vec<String>,
    hash_dim: usize,
    /// Row-major `K x H`.
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl ModelParams {
    /// A zero model: every prediction is the uniform distribution.
    pub fn zeros(label_names: Vec<String>, hash_dim: usize) -> Result<Self> {
        require_power_of_two(hash_dim)?;
        if label_names.len() < 2 {
            return Err(Error::Contract(format!(
                "a model needs at least 2 labels, got {}",
                label_names.len()
            )));
        }
        let k = label_names.len();
        Ok(ModelParams {
            label_names,
            hash_dim,
            weights: vec![0.0; k * hash_dim],
            bias: vec![0.0; k],
        })
    }

    pub fn label_names(&self) -> &[String] {
        &self.label_names
    }

    pub fn hash_dim(&self) -> usize {
        self.hash_dim
    }

    pub fn num_labels(&self) -> usize {
        self.label_names.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    const MAGIC: &'static [u8; 8] = b"ASPAIRM1";

    /// Serializes to the versioned binary model container (layout
    /// documented in the repository README).
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + self.weights.len() * 8);
        out.extend_from_slice(Self::MAGIC);
        out.extend_from_slice(&(self.label_names.len() as u32).to_le_bytes());
        out.extend_from_slice(&(self.hash_dim as u64).to_le_bytes());
        for label in &self.label_names {
            out.extend_from_slice(&(label.len() as u32).to_le_bytes());
            out.extend_from_slice(label.as_bytes());
        }
        for &b in &self.bias {
            out.extend_from_slice(&b.to_le_bytes());
        }
        for &w in &self.weights {
            out.extend_from_slice(&w.to_le_bytes());
        }
        out
    }

    /// Parses the binary model container, validating magic, sizes, and
    /// entry finiteness.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cursor = 0usize;
        let take = |cursor: &mut usize, n: usize| -> Result<&[u8]> {
            let end = cursor
                .checked_add(n)
                .filter(|&e| e <= bytes.len())
                .ok_or_else(|| Error::Parse("model file truncated".into()))?;
            let slice = &bytes[*cursor..end];
            *cursor = end;
            Ok(slice)
        };
        if take(&mut cursor, 8)? != Self::MAGIC {
            return Err(Error::Parse(
                "not a model file (bad magic); expected ASPAIRM1".into(),
            ));
        }
        let k = u32::from_le_bytes(take(&mut cursor, 4)?.try_into().unwrap()) as usize;
        let hash_dim = u64::from_le_bytes(take(&mut cursor, 8)?.try_into().unwrap()) as usize;
        require_power_of_two(hash_dim).map_err(|e| Error::Parse(e.to_string()))?;
        if k < 2 {
            return Err(Error::Parse(format!("model has {k} labels, need >= 2")));
        }
        let mut label_names = Vec::with_capacity(k);
        for _ in 0..k {
            let len = u32::from_le_bytes(take(&mut cursor, 4)?.try_into().unwrap()) as usize;
            let label = std::str::from_utf8(take(&mut cursor, len)?)
                .map_err(|e| Error::Parse(format!("model label not utf-8: {e}")))?;
            label_names.push(label.to_string());
        }
        let mut read_f64s = |n: usize| -> Result<Vec<f64>> {
            let mut out = Vec::with_capacity(n);
            for _ in 0..n {
                let v = f64::from_le_bytes(take(&mut cursor, 8)?.try_into().unwrap());
                if !v.is_finite() {
                    return Err(Error::Parse("model contains a non-finite entry".into()));
                }
                out.push(v);
            }
            Ok(out)
        };
        let bias = read_f64s(k)?;
        let weights = read_f64s(k * hash_dim)?;
        if cursor != bytes.len() {
            return Err(Error::Parse("trailing bytes after model payload".into()));
        }
        Ok(ModelParams {
            label_names,
            hash_dim,
            weights,
            bias,
        })
    }
}

/// A normalized probability distribution over a declared label set, keyed
/// by example uid.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbDist {
    pub uid: String,
    probs: BTreeMap<String, f64>,
}

impl ProbDist {
    /// Builds a distribution from per-label mass. Values must be finite
    /// and non-negative. Masses are divided by their sum unless they
    /// already sum to 1 within 1e-9, which keeps file round-trips
    /// bit-exact; sums outside `[0.99, 1.01]` are rejected only when
    /// `strict_sum` is set (the score-import tolerance).
    fn build(uid: String, pairs: Vec<(String, f64)>, strict_sum: bool) -> Result<Self> {
        if pairs.len() < 2 {
            return Err(Error::Contract(format!(
                "distribution for '{uid}' needs at least 2 labels"
            )));
        }
        let mut sum = 0.0;
        for (label, value) in &pairs {
            if !value.is_finite() || *value < 0.0 {
                return Err(Error::Validation(format!(
                    "probability for '{uid}' label '{label}' is {value}"
                )));
            }
            sum += value;
        }
        if strict_sum && !(0.99..=1.01).contains(&sum) {
            return Err(Error::Validation(format!(
                "row for '{uid}' sums to {sum}, outside [0.99, 1.01]"
            )));
        }
        if sum <= 0.0 {
            return Err(Error::Validation(format!(
                "distribution for '{uid}' has zero total mass"
            )));
        }
        let renormalize = (sum - 1.0).abs() > 1e-9;
        let mut probs = BTreeMap::new();
        for (label, value) in pairs {
            let p = if renormalize { value / sum } else { value };
            if probs.insert(label.clone(), p).is_some() {
                return Err(Error::Validation(format!(
                    "duplicate label '{label}' in distribution for '{uid}'"
                )));
            }
        }
        Ok(ProbDist { uid, probs })
    }

    /// Public constructor with the import tolerance applied.
    pub fn new(uid: impl Into<String>, pairs: Vec<(String, f64)>) -> Result<Self> {
        Self::build(uid.into(), pairs, true)
    }

    pub fn get(&self, label: &str) -> Option<f64> {
        self.probs.get(label).copied()
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.probs.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.probs.iter().map(|(l, p)| (l.as_str(), *p))
    }
}

/// The known label sets, used to infer a model's label names from
/// training golds. B-variant golds are yes/no; 3-class covers the
/// targeted task, 5-class the aspect-only task.
fn known_label_sets() -> [Vec<&'static str>; 3] {
    [
        vec!["yes", "no"],
        vec!["positive", "negative", "none"],
        vec!["positive", "negative", "neutral", "conflict", "none"],
    ]
}

/// Infers the label set of a training corpus: yes/no if any binary label
/// appears, else the 5-class set if neutral/conflict appear, else the
/// 3-class set. Mixed sets are a contract violation.
pub fn infer_label_names(examples: &[PairExample]) -> Result<Vec<String>> {
    if examples.is_empty() {
        return Err(Error::Contract(
            "cannot infer labels from an empty corpus".into(),
        ));
    }
    let golds: Vec<&str> = examples.iter().map(|e| e.gold.as_str()).collect();
    let sets = known_label_sets();
    let chosen = if golds.iter().any(|g| *g == "yes" || *g == "no") {
        sets[0].clone()
    } else if golds.iter().any(|g| *g == "neutral" || *g == "conflict") {
        sets[2].clone()
    } else {
        sets[1].clone()
    };
    for (i, gold) in golds.iter().enumerate() {
        if !chosen.contains(gold) {
            return Err(Error::Contract(format!(
                "example '{}' has gold '{gold}', outside the inferred label set {chosen:?}",
                examples[i].uid
            )));
        }
    }
    Ok(chosen.into_iter().map(String::from).collect())
}

/// SplitMix64: a tiny deterministic generator used only for epoch
/// shuffling, so training is bit-identical across platforms and builds.
pub(crate) struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub(crate) fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub(crate) fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E3779B97F4A7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
        z ^ (z >> 31)
    }
}

fn shuffle(order: &mut [usize], rng: &mut SplitMix64) {
    for i in (1..order.len()).rev() {
        let j = (rng.next_u64() % (i as u64 + 1)) as usize;
        order.swap(i, j);
    }
}

fn logits(weights: &[f64], bias: &[f64], hash_dim: usize, features: &FeatureVector) -> Vec<f64> {
    let mut out = bias.to_vec();
    for (index, value) in features.iter() {
        for (k, logit) in out.iter_mut().enumerate() {
            *logit += value * weights[k * hash_dim + index as usize];
        }
    }
    out
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Mean cross-entropy of a batch under explicit parameters. Shared by the
/// training loop's gradient and the finite-difference checks.
pub fn batch_loss(
    weights: &[f64],
    bias: &[f64],
    hash_dim: usize,
    batch: &[(&FeatureVector, usize)],
) -> f64 {
    let mut total = 0.0;
    for (features, gold) in batch {
        let probs = softmax(&logits(weights, bias, hash_dim, features));
        total -= probs[*gold].max(f64::MIN_POSITIVE).ln();
    }
    total / batch.len() as f64
}

/// Dense analytic gradient of [`batch_loss`] with respect to the weights
/// and bias: `(p - y) c^T`, averaged over the batch.
pub fn batch_gradient(
    weights: &[f64],
    bias: &[f64],
    hash_dim: usize,
    batch: &[(&FeatureVector, usize)],
) -> (Vec<f64>, Vec<f64>) {
    let k = bias.len();
    let mut grad_w = vec![0.0; k * hash_dim];
    let mut grad_b = vec![0.0; k];
    let scale = 1.0 / batch.len() as f64;
    for (features, gold) in batch {
        let probs = softmax(&logits(weights, bias, hash_dim, features));
        for label in 0..k {
            let delta = (probs[label] - if label == *gold { 1.0 } else { 0.0 }) * scale;
            grad_b[label] += delta;
            for (index, value) in features.iter() {
                grad_w[label * hash_dim + index as usize] += delta * value;
            }
        }
    }
    (grad_w, grad_b)
}

/// Trains the softmax head with an explicit label set.
///
/// Weights start at zero; the example order is reshuffled each epoch by a
/// generator seeded from `config.seed`, and the whole procedure is
/// bit-identical for identical inputs and config. Mini-batch updates are
/// applied after all probabilities of the batch are computed, in batch
/// order, so summation order is fixed.
pub fn train_softmax_with_labels(
    examples: &[PairExample],
    label_names: Vec<String>,
    config: &TrainConfig,
) -> Result<ModelParams> {
    config.validate()?;
    if examples.is_empty() {
        return Err(Error::Contract("cannot train on an empty corpus".into()));
    }
    let hash_dim = config.hash_dim();
    let mut model = ModelParams::zeros(label_names, hash_dim)?;

    let mut encoded: Vec<(FeatureVector, usize)> = Vec::with_capacity(examples.len());
    for example in examples {
        let gold = model
            .label_names
            .iter()
            .position(|l| *l == example.gold)
            .ok_or_else(|| {
                Error::Contract(format!(
                    "example '{}' has gold '{}', outside the label set {:?}",
                    example.uid, example.gold, model.label_names
                ))
            })?;
        encoded.push((encode_features(example, hash_dim)?, gold));
    }

    let mut order: Vec<usize> = (0..encoded.len()).collect();
    let mut rng = SplitMix64::new(config.seed);
    let mut deltas: Vec<Vec<f64>> = Vec::new();
    for _ in 0..config.epochs {
        shuffle(&mut order, &mut rng);
        for batch in order.chunks(config.batch_size) {
            // First pass: probabilities under the current parameters.
            deltas.clear();
            for &i in batch {
                let (features, gold) = &encoded[i];
                let mut delta = softmax(&logits(&model.weights, &model.bias, hash_dim, features));
                delta[*gold] -= 1.0;
                deltas.push(delta);
            }
            // Second pass: apply the accumulated update sparsely.
            let step = config.learning_rate / batch.len() as f64;
            for (&i, delta) in batch.iter().zip(&deltas) {
                let (features, _) = &encoded[i];
                for (label, delta_k) in delta.iter().enumerate() {
                    let d = step * delta_k;
                    model.bias[label] -= d;
                    for (index, value) in features.iter() {
                        model.weights[label * hash_dim + index as usize] -= d * value;
                    }
                }
            }
        }
    }
    Ok(model)
}

/// Trains with the label set inferred from the training golds.
pub fn train_softmax(examples: &[PairExample], config: &TrainConfig) -> Result<ModelParams> {
    let label_names = infer_label_names(examples)?;
    train_softmax_with_labels(examples, label_names, config)
}

/// Predicts the label distribution of one example:
/// `softmax(W c + bias)` with max-subtraction stabilization.
pub fn predict_proba(model: &ModelParams, example: &PairExample) -> ProbDist {
    let features =
        encode_features(example, model.hash_dim).expect("model hash dimension is validated");
    let probs = softmax(&logits(
        &model.weights,
        &model.bias,
        model.hash_dim,
        &features,
    ));
    let pairs: Vec<(String, f64)> = model.label_names.iter().cloned().zip(probs).collect();
    ProbDist::build(example.uid.clone(), pairs, false)
        .expect("softmax output is a valid distribution")
}

/// Serializes distributions to the score TSV contract: header
/// `uid<TAB>label1<TAB>...<TAB>labelK`, probabilities printed with 17
/// significant digits so parsing restores the exact values.
pub fn export_scores_tsv(dists: &[ProbDist], labels: &[String]) -> Result<String> {
    let mut out = String::from("uid");
    for label in labels {
        out.push('\t');
        out.push_str(label);
    }
    out.push('\n');
    for dist in dists {
        if dist.probs.len() != labels.len() || !labels.iter().all(|l| dist.probs.contains_key(l)) {
            return Err(Error::Contract(format!(
                "distribution for '{}' does not cover the declared label set",
                dist.uid
            )));
        }
        out.push_str(&dist.uid);
        for label in labels {
            out.push('\t');
            out.push_str(&format!("{:.16e}", dist.probs[label]));
        }
        out.push('\n');
    }
    Ok(out)
}

/// Parses a score TSV document. The header label order must match
/// `expected_labels` exactly; each row must sum to 1 within the
/// `[0.99, 1.01]` tolerance (and is renormalized when it does not sum to
/// 1 within 1e-9).
pub fn import_external_scores(text: &str, expected_labels: &[String]) -> Result<Vec<ProbDist>> {
    let mut lines = text.lines().enumerate();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty score file".into()))?
        .1;
    let header_fields: Vec<&str> = header.split('\t').collect();
    if header_fields.first() != Some(&"uid")
        || header_fields.len() != expected_labels.len() + 1
        || !header_fields[1..]
            .iter()
            .zip(expected_labels)
            .all(|(h, e)| h == e)
    {
        return Err(Error::Validation(format!(
            "score file label set mismatch: header carries {:?}, expected {:?}",
            &header_fields[1..],
            expected_labels
        )));
    }
    let mut dists = Vec::new();
    for (i, line) in lines {
        let line_no = i + 1;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != expected_labels.len() + 1 {
            return Err(Error::Parse(format!(
                "score file line {line_no}: expected {} fields, got {}",
                expected_labels.len() + 1,
                fields.len()
            )));
        }
        let uid = fields[0];
        if uid.is_empty() {
            return Err(Error::Parse(format!(
                "score file line {line_no}: missing uid"
            )));
        }
        let mut pairs = Vec::with_capacity(expected_labels.len());
        for (label, raw) in expected_labels.iter().zip(&fields[1..]) {
            let value: f64 = raw.parse().map_err(|_| {
                Error::Parse(format!(
                    "score file line {line_no}: non-numeric field '{raw}'"
                ))
            })?;
            pairs.push((label.clone(), value));
        }
        let dist = ProbDist::new(uid, pairs)
            .map_err(|e| Error::Validation(format!("score file line {line_no}: {e}")))?;
        dists.push(dist);
    }
    Ok(dists)
}

/// The reference fine-tuning configuration exported for external
/// transformer stacks, as a key=value document.
pub fn reference_finetune_config() -> String {
    [
        "model=bert-base-uncased",
        "transformer_blocks=12",
        "hidden_size=768",
        "attention_heads=12",
        "total_parameters=110M",
        "dropout=0.1",
        "epochs=4",
        "learning_rate=2e-5",
        "batch_size=24",
    ]
    .join("\n")
        + "\n"
}
