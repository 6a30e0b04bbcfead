//! Aspect-based sentiment analysis via sentence pairs.
//!
//! This crate turns targeted and plain aspect-based sentiment analysis
//! into sentence-pair classification: it ingests the SentiHood and
//! SemEval-2014 Task 4 datasets, constructs auxiliary sentences by four
//! methods (plus a single-sentence framing), trains or imports a
//! classifier over the generated pairs, decodes per-grid predictions from
//! the classifier's probabilities, and evaluates with each dataset's
//! published protocol.
//!
//! Pipeline stages map onto modules:
//!
//! * [`corpus`]: dataset parsing, normalization, grid expansion
//! * [`pairs`]: auxiliary-sentence construction and pair generation
//! * [`classifier`]: hashed-feature softmax classifier and score files
//! * [`decode`]: grid-label decoding (argmax and matching score)
//! * [`metrics`]: evaluation protocols and reports
//! * [`synth`]: synthetic corpora for smoke tests

pub mod classifier;
pub mod corpus;
pub mod decode;
pub mod error;
pub mod metrics;
pub mod pairs;
pub mod synth;

pub use error::{Error, Result};
