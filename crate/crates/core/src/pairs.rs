//! Auxiliary-sentence construction and pair-dataset generation.
//!
//! Each grid entry of a sentence becomes one or more classification
//! instances, depending on the construction method:
//!
//! | method | sentence2 (TABSA)                                              | labels    |
//! |--------|----------------------------------------------------------------|-----------|
//! | qa_m   | `what do you think of the {aspect} of {target} ?`              | task set  |
//! | nli_m  | `{target} - {aspect}`                                          | task set  |
//! | qa_b   | `the polarity of the aspect {aspect} of {target} is {candidate}`| yes / no |
//! | nli_b  | `{target} - {aspect} - {candidate}`                            | yes / no  |
//! | single | (empty)                                                        | task set  |
//!
//! ABSA drops the target: `what do you think of the {aspect} of it ?`,
//! `{aspect}`, `the polarity of the aspect {aspect} is {candidate}`, and
//! `{aspect} - {candidate}`. `{target}` renders as `location - <k>` and
//! aspect names render through the same punctuation-splitting pass as the
//! main sentence (`transit-location` becomes `transit - location`).

use std::collections::BTreeMap;
use std::fmt;

use crate::corpus::{normalize_text, AspectSet, LabeledSentence, Polarity, TargetId, Task};
use crate::error::{Error, Result};

/// How the second sentence of a pair is constructed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Method {
    QaM,
    NliM,
    QaB,
    NliB,
    Single,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::QaM,
        Method::NliM,
        Method::QaB,
        Method::NliB,
        Method::Single,
    ];

    /// B-variants emit one yes/no example per candidate polarity.
    pub fn is_b_variant(self) -> bool {
        matches!(self, Method::QaB | Method::NliB)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Method::QaM => "qa_m",
            Method::NliM => "nli_m",
            Method::QaB => "qa_b",
            Method::NliB => "nli_b",
            Method::Single => "single",
        }
    }

    pub fn parse(s: &str) -> Result<Method> {
        match s.to_ascii_lowercase().as_str() {
            "qa_m" => Ok(Method::QaM),
            "nli_m" => Ok(Method::NliM),
            "qa_b" => Ok(Method::QaB),
            "nli_b" => Ok(Method::NliB),
            "single" => Ok(Method::Single),
            other => Err(Error::Validation(format!(
                "unknown construction method '{other}'"
            ))),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One cell of the prediction grid: (sentence, target?, aspect).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct GroupKey {
    pub sentence_id: String,
    /// Target index; `None` for ABSA groups.
    pub target: Option<u32>,
    pub aspect: String,
}

impl GroupKey {
    pub fn new(
        sentence_id: impl Into<String>,
        target: Option<u32>,
        aspect: impl Into<String>,
    ) -> Self {
        GroupKey {
            sentence_id: sentence_id.into(),
            target,
            aspect: aspect.into(),
        }
    }

    /// Stable text form used in file exports: `sid::t<k>::aspect` for
    /// TABSA and `sid::-::aspect` for ABSA.
    pub fn id_string(&self) -> String {
        match self.target {
            Some(t) => format!("{}::t{}::{}", self.sentence_id, t, self.aspect),
            None => format!("{}::-::{}", self.sentence_id, self.aspect),
        }
    }

    /// Parses the `id_string` form back; the aspect and target are the
    /// last two `::`-separated fields, so sentence ids may contain `::`.
    pub fn parse(s: &str) -> Result<GroupKey> {
        let mut parts = s.rsplitn(3, "::");
        let aspect = parts.next().unwrap_or_default();
        let target = parts.next();
        let sentence_id = parts.next();
        let (Some(target), Some(sentence_id)) = (target, sentence_id) else {
            return Err(Error::Parse(format!("malformed group id '{s}'")));
        };
        let target = match target {
            "-" => None,
            t => {
                let digits = t.strip_prefix('t').ok_or_else(|| {
                    Error::Parse(format!("malformed group id '{s}': bad target field"))
                })?;
                Some(digits.parse::<u32>().map_err(|_| {
                    Error::Parse(format!("malformed group id '{s}': bad target index"))
                })?)
            }
        };
        Ok(GroupKey::new(sentence_id, target, aspect))
    }
}

impl fmt::Display for GroupKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id_string())
    }
}

/// One generated classification instance.
#[derive(Debug, Clone, PartialEq)]
pub struct PairExample {
    /// Deterministic function of (group, method, candidate); globally
    /// unique within a run.
    pub uid: String,
    pub group: GroupKey,
    pub method: Method,
    /// The normalized main sentence, space-joined.
    pub sentence1: String,
    /// The auxiliary sentence; empty for `single`.
    pub sentence2: String,
    /// Candidate polarity; present iff the method is a B-variant.
    pub candidate: Option<Polarity>,
    /// Gold label over the method's label set: a polarity name for
    /// M-variants and `single`, `yes`/`no` for B-variants.
    pub gold: String,
}

impl PairExample {
    fn new(
        group: GroupKey,
        method: Method,
        sentence1: String,
        sentence2: String,
        candidate: Option<Polarity>,
        gold: String,
    ) -> Self {
        let uid = match candidate {
            Some(c) => format!("{}::{}::{}", group.id_string(), method, c),
            None => format!("{}::{}", group.id_string(), method),
        };
        PairExample {
            uid,
            group,
            method,
            sentence1,
            sentence2,
            candidate,
            gold,
        }
    }
}

/// Renders an aspect identifier through the shared tokenizer so sentence2
/// tokens align with sentence1 vocabulary (`transit-location` ->
/// `transit - location`).
fn render_aspect(aspect: &str) -> String {
    normalize_text(aspect).join(" ")
}

fn render_target(target: &TargetId) -> String {
    format!("location - {}", target.index)
}

/// Builds the auxiliary sentence for one grid cell.
///
/// `target` is `None` for ABSA; `candidate` must be present iff `method`
/// is a B-variant. `single` yields the empty string.
pub fn make_auxiliary(
    method: Method,
    target: Option<&TargetId>,
    aspect: &str,
    candidate: Option<Polarity>,
) -> Result<String> {
    if method.is_b_variant() != candidate.is_some() {
        return Err(Error::Contract(format!(
            "method {method} {} a candidate polarity",
            if method.is_b_variant() {
                "requires"
            } else {
                "does not take"
            }
        )));
    }
    let aspect = render_aspect(aspect);
    let aux = match (method, target) {
        (Method::Single, _) => String::new(),
        (Method::QaM, Some(t)) => {
            format!(
                "what do you think of the {aspect} of {} ?",
                render_target(t)
            )
        }
        (Method::QaM, None) => format!("what do you think of the {aspect} of it ?"),
        (Method::NliM, Some(t)) => format!("{} - {aspect}", render_target(t)),
        (Method::NliM, None) => aspect,
        (Method::QaB, Some(t)) => format!(
            "the polarity of the aspect {aspect} of {} is {}",
            render_target(t),
            candidate.unwrap()
        ),
        (Method::QaB, None) => {
            format!(
                "the polarity of the aspect {aspect} is {}",
                candidate.unwrap()
            )
        }
        (Method::NliB, Some(t)) => {
            format!("{} - {aspect} - {}", render_target(t), candidate.unwrap())
        }
        (Method::NliB, None) => format!("{aspect} - {}", candidate.unwrap()),
    };
    Ok(aux)
}

fn require_expanded(sentence: &LabeledSentence, aspects: &AspectSet) -> Result<()> {
    if !sentence.is_grid_expanded(aspects) {
        return Err(Error::Validation(format!(
            "sentence '{}' is not grid-expanded against the aspect set",
            sentence.id
        )));
    }
    Ok(())
}

fn target_of(sentence: &LabeledSentence, index: Option<u32>) -> Option<&TargetId> {
    index.and_then(|i| sentence.targets.iter().find(|t| t.index == i))
}

/// Generates the pair dataset for one construction method over
/// grid-expanded sentences.
///
/// Output order is deterministic: sentence order, then target index, then
/// aspect-set order, then canonical polarity order. M-variants emit one
/// example per grid entry; B-variants emit one per (grid entry, candidate
/// polarity of the task set).
pub fn build_pairs(
    sentences: &[LabeledSentence],
    method: Method,
    aspects: &AspectSet,
) -> Result<Vec<PairExample>> {
    if method == Method::Single {
        return Err(Error::Contract(
            "build_pairs does not handle the single framing; use build_single_groups".into(),
        ));
    }
    let mut examples = Vec::new();
    for sentence in sentences {
        require_expanded(sentence, aspects)?;
        let sentence1 = sentence.norm_text();
        let keys: Vec<Option<u32>> = match sentence.task {
            Task::Tabsa => sentence.targets.iter().map(|t| Some(t.index)).collect(),
            Task::Absa => vec![None],
        };
        let candidates: &[Polarity] = sentence.task.polarity_set();
        for target_index in keys {
            let target = target_of(sentence, target_index);
            for aspect in aspects.names() {
                let grid_label = sentence
                    .gold_polarity(target_index, aspect)
                    .expect("expanded grid covers every key");
                let group = GroupKey::new(&sentence.id, target_index, aspect);
                if method.is_b_variant() {
                    for &candidate in candidates {
                        let sentence2 = make_auxiliary(method, target, aspect, Some(candidate))?;
                        let gold = if candidate == grid_label { "yes" } else { "no" };
                        examples.push(PairExample::new(
                            group.clone(),
                            method,
                            sentence1.clone(),
                            sentence2,
                            Some(candidate),
                            gold.to_string(),
                        ));
                    }
                } else {
                    let sentence2 = make_auxiliary(method, target, aspect, None)?;
                    examples.push(PairExample::new(
                        group.clone(),
                        method,
                        sentence1.clone(),
                        sentence2,
                        None,
                        grid_label.to_string(),
                    ));
                }
            }
        }
    }
    Ok(examples)
}

/// Sub-dataset key for the single-sentence framing: (target index, aspect).
pub type SingleGroupKey = (Option<u32>, String);

/// Builds the single-sentence framing: one sub-dataset per (target index,
/// aspect), each containing one example per sentence mentioning that
/// target. The union of all groups covers every grid entry exactly once.
pub fn build_single_groups(
    sentences: &[LabeledSentence],
    aspects: &AspectSet,
) -> Result<BTreeMap<SingleGroupKey, Vec<PairExample>>> {
    let mut groups: BTreeMap<SingleGroupKey, Vec<PairExample>> = BTreeMap::new();
    for sentence in sentences {
        require_expanded(sentence, aspects)?;
        let sentence1 = sentence.norm_text();
        let keys: Vec<Option<u32>> = match sentence.task {
            Task::Tabsa => sentence.targets.iter().map(|t| Some(t.index)).collect(),
            Task::Absa => vec![None],
        };
        for target_index in keys {
            for aspect in aspects.names() {
                let grid_label = sentence
                    .gold_polarity(target_index, aspect)
                    .expect("expanded grid covers every key");
                let group = GroupKey::new(&sentence.id, target_index, aspect);
                groups
                    .entry((target_index, aspect.clone()))
                    .or_default()
                    .push(PairExample::new(
                        group,
                        Method::Single,
                        sentence1.clone(),
                        String::new(),
                        None,
                        grid_label.to_string(),
                    ));
            }
        }
    }
    Ok(groups)
}

/// Header of the pair TSV export.
pub const PAIRS_TSV_HEADER: &str = "uid\tgroup_id\tmethod\tcandidate\tgold\tsentence1\tsentence2";

fn check_tsv_field(field: &str, what: &str) -> Result<()> {
    if field.contains('\t') || field.contains('\n') || field.contains('\r') {
        return Err(Error::Validation(format!(
            "{what} contains a tab or newline and cannot be written as TSV: {field:?}"
        )));
    }
    Ok(())
}

/// Serializes examples to the pair TSV contract: tab-separated, one header
/// line, UTF-8, LF line endings.
pub fn write_pairs_tsv(examples: &[PairExample]) -> Result<String> {
    let mut out = String::from(PAIRS_TSV_HEADER);
    out.push('\n');
    for ex in examples {
        let candidate = ex.candidate.map(|c| c.to_string()).unwrap_or_default();
        let fields = [
            ex.uid.as_str(),
            &ex.group.id_string(),
            ex.method.as_str(),
            &candidate,
            &ex.gold,
            &ex.sentence1,
            &ex.sentence2,
        ];
        for field in fields {
            check_tsv_field(field, "pair field")?;
        }
        out.push_str(&fields.join("\t"));
        out.push('\n');
    }
    Ok(out)
}

/// Parses a pair TSV document back into examples.
pub fn read_pairs_tsv(text: &str) -> Result<Vec<PairExample>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == PAIRS_TSV_HEADER => {}
        Some((_, header)) => {
            return Err(Error::Parse(format!(
                "pair file header mismatch: expected '{PAIRS_TSV_HEADER}', got '{header}'"
            )))
        }
        None => return Err(Error::Parse("empty pair file".into())),
    }
    let mut examples = Vec::new();
    for (i, line) in lines {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 7 {
            return Err(Error::Parse(format!(
                "pair file line {}: expected 7 fields, got {}",
                i + 1,
                fields.len()
            )));
        }
        let method = Method::parse(fields[2])
            .map_err(|e| Error::Parse(format!("pair file line {}: {e}", i + 1)))?;
        let candidate = match fields[3] {
            "" => None,
            c => Some(
                Polarity::parse(c)
                    .map_err(|e| Error::Parse(format!("pair file line {}: {e}", i + 1)))?,
            ),
        };
        if method.is_b_variant() != candidate.is_some() {
            return Err(Error::Parse(format!(
                "pair file line {}: candidate presence does not match method {method}",
                i + 1
            )));
        }
        examples.push(PairExample {
            uid: fields[0].to_string(),
            group: GroupKey::parse(fields[1])
                .map_err(|e| Error::Parse(format!("pair file line {}: {e}", i + 1)))?,
            method,
            candidate,
            gold: fields[4].to_string(),
            sentence1: fields[5].to_string(),
            sentence2: fields[6].to_string(),
        });
    }
    Ok(examples)
}
