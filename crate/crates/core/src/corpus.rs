//! Dataset ingestion: SentiHood JSON and SemEval-2014 Task 4 XML are parsed
//! into a canonical sentence representation, and each sentence can be
//! expanded to the full (target, aspect) label grid.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sentiment polarity, including `None` for "this (target, aspect) pair is
/// not mentioned".
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Positive,
    Negative,
    Neutral,
    Conflict,
    None,
}

impl Polarity {
    /// Canonical order used for candidate generation and all tie-breaking.
    pub const CANONICAL: [Polarity; 5] = [
        Polarity::Positive,
        Polarity::Negative,
        Polarity::Neutral,
        Polarity::Conflict,
        Polarity::None,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Polarity::Positive => "positive",
            Polarity::Negative => "negative",
            Polarity::Neutral => "neutral",
            Polarity::Conflict => "conflict",
            Polarity::None => "none",
        }
    }

    /// Case-insensitive parse ("Positive" and "positive" both map to
    /// `Polarity::Positive`).
    pub fn parse(s: &str) -> Result<Polarity> {
        match s.to_ascii_lowercase().as_str() {
            "positive" => Ok(Polarity::Positive),
            "negative" => Ok(Polarity::Negative),
            "neutral" => Ok(Polarity::Neutral),
            "conflict" => Ok(Polarity::Conflict),
            "none" => Ok(Polarity::None),
            other => Err(Error::Validation(format!("unknown polarity '{other}'"))),
        }
    }

    /// Rank in the canonical order; lower wins ties.
    pub fn canonical_rank(self) -> usize {
        Polarity::CANONICAL.iter().position(|p| *p == self).unwrap()
    }
}

impl fmt::Display for Polarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which grid shape a sentence carries: per-(target, aspect) labels or
/// per-aspect labels only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Tabsa,
    Absa,
}

impl Task {
    /// The polarity label set of the task, in canonical order.
    pub fn polarity_set(self) -> &'static [Polarity] {
        match self {
            Task::Tabsa => &[Polarity::Positive, Polarity::Negative, Polarity::None],
            Task::Absa => &Polarity::CANONICAL,
        }
    }
}

/// A pre-identified target mention such as `LOCATION1`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetId {
    /// 1-based index (`1` for LOCATION1).
    pub index: u32,
    /// Original dataset token, e.g. `"LOCATION1"`.
    pub surface: String,
}

impl TargetId {
    pub fn new(index: u32, surface: impl Into<String>) -> Result<Self> {
        let surface = surface.into();
        if index < 1 {
            return Err(Error::Validation(format!(
                "target index must be >= 1, got {index}"
            )));
        }
        if surface != format!("LOCATION{index}") {
            return Err(Error::Validation(format!(
                "target surface '{surface}' does not match LOCATION{index}"
            )));
        }
        Ok(TargetId { index, surface })
    }
}

/// An ordered set of aspect identifiers; non-empty and duplicate-free.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AspectSet {
    names: Vec<String>,
}

impl AspectSet {
    pub fn new(names: Vec<String>) -> Result<Self> {
        if names.is_empty() {
            return Err(Error::Validation("aspect set must be non-empty".into()));
        }
        let mut seen = BTreeSet::new();
        for name in &names {
            if !seen.insert(name.as_str()) {
                return Err(Error::Validation(format!("duplicate aspect '{name}'")));
            }
        }
        Ok(AspectSet { names })
    }

    /// The four SentiHood aspects used during evaluation, in their
    /// published order.
    pub fn sentihood() -> Self {
        AspectSet {
            names: ["general", "price", "transit-location", "safety"]
                .map(String::from)
                .to_vec(),
        }
    }

    /// The five SemEval-2014 Task 4 restaurant categories.
    pub fn semeval_restaurants() -> Self {
        AspectSet {
            names: [
                "food",
                "service",
                "price",
                "ambience",
                "anecdotes/miscellaneous",
            ]
            .map(String::from)
            .to_vec(),
        }
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn contains(&self, name: &str) -> bool {
        self.names.iter().any(|n| n == name)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

/// One gold annotation: (target?, aspect) -> polarity.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldLabel {
    /// Target index; absent for ABSA sentences.
    pub target: Option<u32>,
    pub aspect: String,
    pub polarity: Polarity,
}

/// A corpus sentence with normalized tokens, its target mentions, and gold
/// (target, aspect) -> polarity labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSentence {
    pub id: String,
    pub task: Task,
    pub raw_text: String,
    pub norm_tokens: Vec<String>,
    pub targets: Vec<TargetId>,
    pub gold: Vec<GoldLabel>,
}

impl LabeledSentence {
    /// Looks up the gold polarity for a (target, aspect) key.
    pub fn gold_polarity(&self, target: Option<u32>, aspect: &str) -> Option<Polarity> {
        self.gold
            .iter()
            .find(|g| g.target == target && g.aspect == aspect)
            .map(|g| g.polarity)
    }

    /// The normalized sentence as a space-joined string.
    pub fn norm_text(&self) -> String {
        self.norm_tokens.join(" ")
    }

    /// True when `gold` covers exactly the targets x aspects grid.
    pub fn is_grid_expanded(&self, aspects: &AspectSet) -> bool {
        let expected: usize = match self.task {
            Task::Tabsa => self.targets.len() * aspects.len(),
            Task::Absa => aspects.len(),
        };
        if self.gold.len() != expected {
            return false;
        }
        let keys: Vec<Option<u32>> = match self.task {
            Task::Tabsa => self.targets.iter().map(|t| Some(t.index)).collect(),
            Task::Absa => vec![None],
        };
        keys.iter().all(|t| {
            aspects
                .names()
                .iter()
                .all(|a| self.gold_polarity(*t, a).is_some())
        })
    }
}

/// Lowercases, splits punctuation into separate tokens, and rewrites each
/// `LOCATION<k>` token as the three tokens `location`, `-`, `<k>`.
///
/// Total and deterministic; the empty string yields no tokens.
pub fn normalize_text(raw: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    for word in raw.split_whitespace() {
        let mut run = String::new();
        for ch in word.chars() {
            if ch.is_alphanumeric() {
                run.push(ch);
            } else {
                flush_run(&mut run, &mut tokens);
                tokens.push(ch.to_lowercase().collect());
            }
        }
        flush_run(&mut run, &mut tokens);
    }
    tokens
}

fn flush_run(run: &mut String, tokens: &mut Vec<String>) {
    if run.is_empty() {
        return;
    }
    match location_digits(run) {
        Some(digits) => {
            tokens.push("location".to_string());
            tokens.push("-".to_string());
            tokens.push(digits.to_string());
        }
        None => tokens.push(run.to_lowercase()),
    }
    run.clear();
}

/// Digits of a `LOCATION<k>` token, or `None` when the token is not one.
fn location_digits(token: &str) -> Option<&str> {
    let digits = token.strip_prefix("LOCATION")?;
    if !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit()) {
        Some(digits)
    } else {
        None
    }
}

/// Distinct `LOCATION<k>` tokens of a raw text, sorted by index.
fn scan_targets(raw: &str) -> Result<Vec<TargetId>> {
    let mut found = BTreeSet::new();
    for word in raw.split_whitespace() {
        let mut run = String::new();
        let mut runs = Vec::new();
        for ch in word.chars() {
            if ch.is_alphanumeric() {
                run.push(ch);
            } else if !run.is_empty() {
                runs.push(std::mem::take(&mut run));
            }
        }
        if !run.is_empty() {
            runs.push(run);
        }
        for r in runs {
            if let Some(digits) = location_digits(&r) {
                let index: u32 = digits.parse().map_err(|_| {
                    Error::Validation(format!("target token '{r}' has an invalid index"))
                })?;
                found.insert((index, r.clone()));
            }
        }
    }
    found
        .into_iter()
        .map(|(index, surface)| TargetId::new(index, surface))
        .collect()
}

#[derive(Deserialize)]
struct RawOpinion {
    target_entity: String,
    aspect: String,
    sentiment: String,
}

#[derive(Deserialize)]
struct RawSentihoodRecord {
    id: serde_json::Value,
    text: String,
    #[serde(default)]
    opinions: Vec<RawOpinion>,
}

/// Parses a SentiHood JSON document into labeled sentences.
///
/// Targets are the distinct `LOCATION<k>` tokens found in the text, sorted
/// by index. Gold labels carry only the opinions present in the record;
/// grid filling happens in [`grid_expand`]. Aspect strings are retained
/// verbatim, including aspects outside the evaluated set.
pub fn parse_sentihood(document: &str) -> Result<Vec<LabeledSentence>> {
    let records: Vec<serde_json::Value> =
        serde_json::from_str(document).map_err(|e| Error::Parse(format!("sentihood json: {e}")))?;
    let mut sentences = Vec::with_capacity(records.len());
    for (idx, value) in records.into_iter().enumerate() {
        let record: RawSentihoodRecord = serde_json::from_value(value)
            .map_err(|e| Error::Parse(format!("sentihood record {idx}: {e}")))?;
        let id = match &record.id {
            serde_json::Value::Number(n) => n.to_string(),
            serde_json::Value::String(s) => s.clone(),
            other => {
                return Err(Error::Parse(format!(
                    "sentihood record {idx}: id must be integer or string, got {other}"
                )))
            }
        };
        let targets = scan_targets(&record.text)?;
        let mut gold: Vec<GoldLabel> = Vec::new();
        for op in &record.opinions {
            let target = targets
                .iter()
                .find(|t| t.surface == op.target_entity)
                .ok_or_else(|| {
                    Error::Validation(format!(
                        "sentence '{id}': opinion target '{}' does not occur in the text",
                        op.target_entity
                    ))
                })?;
            let polarity = Polarity::parse(&op.sentiment).map_err(|_| {
                Error::Validation(format!(
                    "sentence '{id}': unknown sentiment '{}'",
                    op.sentiment
                ))
            })?;
            if !matches!(
                polarity,
                Polarity::Positive | Polarity::Negative | Polarity::None
            ) {
                return Err(Error::Validation(format!(
                    "sentence '{id}': sentiment '{}' outside the sentihood label set",
                    op.sentiment
                )));
            }
            push_gold(&mut gold, &id, Some(target.index), &op.aspect, polarity)?;
        }
        sentences.push(LabeledSentence {
            norm_tokens: normalize_text(&record.text),
            id,
            task: Task::Tabsa,
            raw_text: record.text,
            targets,
            gold,
        });
    }
    Ok(sentences)
}

/// Appends a gold entry, deduplicating exact repeats and rejecting
/// conflicting ones.
fn push_gold(
    gold: &mut Vec<GoldLabel>,
    id: &str,
    target: Option<u32>,
    aspect: &str,
    polarity: Polarity,
) -> Result<()> {
    if let Some(existing) = gold
        .iter()
        .find(|g| g.target == target && g.aspect == aspect)
    {
        if existing.polarity == polarity {
            return Ok(());
        }
        return Err(Error::Validation(format!(
            "sentence '{id}': conflicting labels for aspect '{aspect}'"
        )));
    }
    gold.push(GoldLabel {
        target,
        aspect: aspect.to_string(),
        polarity,
    });
    Ok(())
}

/// Parses a SemEval-2014 Task 4 XML document (aspect-category annotations)
/// into labeled sentences. Aspect-term annotations are ignored.
pub fn parse_semeval(document: &str) -> Result<Vec<LabeledSentence>> {
    use quick_xml::events::Event;

    let mut reader = quick_xml::Reader::from_str(document);

    let mut sentences = Vec::new();
    let mut cur_id: Option<String> = None;
    let mut cur_text = String::new();
    let mut cur_gold: Vec<GoldLabel> = Vec::new();
    let mut in_text = false;

    loop {
        let event = reader.read_event().map_err(|e| {
            Error::Parse(format!(
                "semeval xml at byte {}: {e}",
                reader.buffer_position()
            ))
        })?;
        match event {
            Event::Start(e) if e.name().as_ref() == b"sentence" => {
                let mut id = None;
                for attr in e.attributes() {
                    let attr = attr.map_err(|e| Error::Parse(format!("semeval xml: {e}")))?;
                    if attr.key.as_ref() == b"id" {
                        id = Some(
                            attr.normalized_value(quick_xml::XmlVersion::Implicit1_0)
                                .map_err(|e| Error::Parse(format!("semeval xml: {e}")))?
                                .into_owned(),
                        );
                    }
                }
                cur_id = Some(id.ok_or_else(|| {
                    Error::Validation("sentence element without id attribute".into())
                })?);
                cur_text.clear();
                cur_gold.clear();
            }
            Event::Start(e) if e.name().as_ref() == b"text" => in_text = true,
            Event::End(e) if e.name().as_ref() == b"text" => in_text = false,
            Event::Text(t) if in_text => {
                let raw = t
                    .xml10_content()
                    .map_err(|e| Error::Parse(format!("semeval xml: {e}")))?;
                cur_text.push_str(&raw);
            }
            Event::GeneralRef(r) if in_text => {
                if let Some(ch) = r
                    .resolve_char_ref()
                    .map_err(|e| Error::Parse(format!("semeval xml: {e}")))?
                {
                    cur_text.push(ch);
                } else {
                    let name = r
                        .decode()
                        .map_err(|e| Error::Parse(format!("semeval xml: {e}")))?;
                    let resolved = match name.as_ref() {
                        "amp" => '&',
                        "lt" => '<',
                        "gt" => '>',
                        "quot" => '"',
                        "apos" => '\'',
                        other => {
                            return Err(Error::Parse(format!(
                                "semeval xml: unknown entity '&{other};'"
                            )))
                        }
                    };
                    cur_text.push(resolved);
                }
            }
            Event::Empty(e) | Event::Start(e) if e.name().as_ref() == b"aspectCategory" => {
                let id = cur_id.clone().ok_or_else(|| {
                    Error::Validation("aspectCategory outside a sentence element".into())
                })?;
                let mut category = None;
                let mut polarity = None;
                for attr in e.attributes() {
                    let attr = attr.map_err(|e| Error::Parse(format!("semeval xml: {e}")))?;
                    let value = attr
                        .normalized_value(quick_xml::XmlVersion::Implicit1_0)
                        .map_err(|e| Error::Parse(format!("semeval xml: {e}")))?
                        .into_owned();
                    match attr.key.as_ref() {
                        b"category" => category = Some(value),
                        b"polarity" => polarity = Some(value),
                        _ => {}
                    }
                }
                let category = category.ok_or_else(|| {
                    Error::Validation(format!("sentence '{id}': aspectCategory without category"))
                })?;
                let polarity_str = polarity.ok_or_else(|| {
                    Error::Validation(format!("sentence '{id}': aspectCategory without polarity"))
                })?;
                let polarity = Polarity::parse(&polarity_str).map_err(|_| {
                    Error::Validation(format!(
                        "sentence '{id}': unknown polarity '{polarity_str}'"
                    ))
                })?;
                if polarity == Polarity::None {
                    return Err(Error::Validation(format!(
                        "sentence '{id}': polarity 'none' is not a valid annotation"
                    )));
                }
                push_gold(&mut cur_gold, &id, None, &category, polarity)?;
            }
            Event::End(e) if e.name().as_ref() == b"sentence" => {
                let id = cur_id
                    .take()
                    .ok_or_else(|| Error::Parse("unbalanced sentence element".into()))?;
                sentences.push(LabeledSentence {
                    id,
                    task: Task::Absa,
                    norm_tokens: normalize_text(&cur_text),
                    raw_text: std::mem::take(&mut cur_text),
                    targets: Vec::new(),
                    gold: std::mem::take(&mut cur_gold),
                });
            }
            Event::Eof => break,
            _ => {}
        }
    }
    Ok(sentences)
}

/// Fills the sentence's gold map to the full grid: every (target, aspect)
/// pair for TABSA, every aspect for ABSA. Unannotated pairs receive
/// [`Polarity::None`]; entries whose aspect is outside `aspects` are
/// dropped. Idempotent.
pub fn grid_expand(sentence: &LabeledSentence, aspects: &AspectSet) -> Result<LabeledSentence> {
    let keys: Vec<Option<u32>> = match sentence.task {
        Task::Tabsa => {
            if sentence.targets.is_empty() {
                return Err(Error::Validation(format!(
                    "sentence '{}': tabsa sentence has no targets",
                    sentence.id
                )));
            }
            sentence.targets.iter().map(|t| Some(t.index)).collect()
        }
        Task::Absa => vec![None],
    };
    for entry in &sentence.gold {
        if !keys.contains(&entry.target) {
            return Err(Error::Validation(format!(
                "sentence '{}': gold entry references unknown target {:?}",
                sentence.id, entry.target
            )));
        }
    }
    let mut gold = Vec::with_capacity(keys.len() * aspects.len());
    for target in &keys {
        for aspect in aspects.names() {
            let polarity = sentence
                .gold_polarity(*target, aspect)
                .unwrap_or(Polarity::None);
            gold.push(GoldLabel {
                target: *target,
                aspect: aspect.clone(),
                polarity,
            });
        }
    }
    let mut expanded = sentence.clone();
    expanded.gold = gold;
    Ok(expanded)
}

/// Serializes sentences to the canonical internal form: JSON-lines, one
/// sentence per line.
pub fn write_jsonl(sentences: &[LabeledSentence]) -> Result<String> {
    let mut out = String::new();
    for sentence in sentences {
        let line = serde_json::to_string(sentence)
            .map_err(|e| Error::Validation(format!("sentence '{}': {e}", sentence.id)))?;
        out.push_str(&line);
        out.push('\n');
    }
    Ok(out)
}

/// Parses the canonical JSON-lines form back into sentences.
pub fn read_jsonl(text: &str) -> Result<Vec<LabeledSentence>> {
    text.lines()
        .enumerate()
        .filter(|(_, line)| !line.trim().is_empty())
        .map(|(i, line)| {
            serde_json::from_str(line)
                .map_err(|e| Error::Parse(format!("jsonl line {}: {e}", i + 1)))
        })
        .collect()
}
