//! offlens: offensive-language classification pipeline for score-annotated
//! tweet corpora.
//!
//! The pieces, in pipeline order:
//!
//! - [`corpus`] — the three-task data model (OFF/NOT, TIN/UNT, IND/GRP/OTH)
//!   and the TSV file formats for scored, labeled, and gold data;
//! - [`labeling`] — cutoff policies that turn continuous distant-supervision
//!   scores into training labels, plus score histograms and summary stats;
//! - [`text`] — light tweet cleaning and unigram+bigram sparse features;
//! - [`glm`] — binary and multinomial logistic regression trained by
//!   deterministic full-batch gradient descent;
//! - [`eval`] — confusion matrices, per-class P/R/F1, accuracy, macro-F1,
//!   the majority baseline, and an audit that recomputes published tables;
//! - [`cascade`] — A→B→C cascaded inference, seeded confusion-cell
//!   sampling, and display redaction;
//! - [`synth`] — deterministic planted-lexicon corpora for end-to-end runs;
//! - [`cli`] — the `offlens` command-line surface over all of the above.

pub mod cascade;
pub mod cli;
pub mod corpus;
pub mod eval;
pub mod glm;
pub mod labeling;
pub mod rng;
pub mod synth;
pub mod text;

pub use corpus::{Corpus, Label, LabeledCorpus, LabeledTweet, ScoredCorpus, ScoredTweet, TaskId};
pub use eval::{ConfusionMatrix, MetricsReport};
pub use glm::{GlmConfig, GlmModel};
pub use labeling::CutoffPolicy;
pub use text::{SparseVector, Vocabulary};
