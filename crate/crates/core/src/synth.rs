//! Synthetic corpora for smoke tests and trainability checks.

use crate::corpus::{normalize_text, GoldLabel, LabeledSentence, Polarity, TargetId, Task};

/// A linearly separable targeted corpus: every sentence mentions
/// LOCATION1 and expresses exactly one (aspect, polarity) fact, where the
/// aspect is signalled by a dedicated keyword and the polarity by a
/// global cue word. A linear model over pair features separates the
/// positive/negative decision via the cue-word unigrams, and aspect
/// presence via the keyword n-grams.
pub fn separable_sentihood_corpus(sentences_per_combo: usize) -> Vec<LabeledSentence> {
    let aspect_words = [
        ("general", "vibe"),
        ("price", "rent"),
        ("transit-location", "trains"),
        ("safety", "street"),
    ];
    let polarity_words = [(Polarity::Positive, "superb"), (Polarity::Negative, "grim")];
    let fillers = ["around", "lately", "frankly", "apparently", "overall"];

    let mut sentences = Vec::new();
    let mut counter = 0usize;
    for (aspect, keyword) in aspect_words {
        for (polarity, cue) in polarity_words {
            for rep in 0..sentences_per_combo {
                let filler = fillers[(counter + rep) % fillers.len()];
                let raw_text = format!("LOCATION1 feels {cue} for {keyword} {filler} people say .");
                sentences.push(LabeledSentence {
                    id: format!("syn{counter}"),
                    task: Task::Tabsa,
                    norm_tokens: normalize_text(&raw_text),
                    raw_text,
                    targets: vec![TargetId::new(1, "LOCATION1").expect("valid target")],
                    gold: vec![GoldLabel {
                        target: Some(1),
                        aspect: aspect.to_string(),
                        polarity,
                    }],
                });
                counter += 1;
            }
        }
    }
    sentences
}
