//! Synthetic planted-lexicon corpora.
//!
//! Real distantly-supervised corpora cannot be redistributed, so the
//! pipeline is exercised on generated ones. Documents are drawn from a
//! background vocabulary; a chosen fraction are salted with task-specific
//! marker tokens. Scores are the marker density pushed through a fixed
//! monotone curve chosen so that the per-task default cutoffs reproduce
//! the gold labels exactly: Task A/C marked documents score at least 0.85,
//! unmarked ones 0.2 (0.15 per class for Task C); Task B inverts the curve
//! because low scores mean targeted.
//!
//! Everything is driven by one SplitMix64 stream, so a given configuration
//! always produces byte-identical files.

use crate::corpus::{
    Corpus, Label, LabeledCorpus, LabeledTweet, ScoredCorpus, ScoredTweet, TaskId,
};
use crate::rng::SplitMix64;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("fraction {0} out of range [0,1]")]
    BadFraction(f64),
    #[error("holdout {holdout} must be smaller than the corpus size {docs}")]
    HoldoutTooLarge { holdout: usize, docs: usize },
    #[error("corpus size must be positive")]
    EmptyCorpus,
}

pub const BACKGROUND_WORDS: usize = 400;
pub const MARKER_WORDS: usize = 10;
const DOC_LEN_MIN: u64 = 6;
const DOC_LEN_SPAN: u64 = 7; // lengths 6..=12
const MARKERS_MIN: u64 = 2;
const MARKERS_SPAN: u64 = 3; // 2..=4 markers per marked doc

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub task: TaskId,
    pub docs: usize,
    pub marked_fraction: f64,
    pub seed: u64,
    /// Number of documents split off into a held-out evaluation set.
    pub holdout: usize,
    /// Marked fraction of the holdout; `None` splits proportionally.
    pub holdout_marked: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub train_scored: ScoredCorpus,
    pub train_gold: LabeledCorpus,
    pub holdout_scored: Option<ScoredCorpus>,
    pub holdout_gold: Option<LabeledCorpus>,
}

fn marker_prefixes(task: TaskId) -> &'static [(&'static str, Label)] {
    match task {
        TaskId::A => &[("offmark", Label::Off)],
        TaskId::B => &[("tinmark", Label::Tin)],
        TaskId::C => &[
            ("indmark", Label::Ind),
            ("grpmark", Label::Grp),
            ("othmark", Label::Oth),
        ],
    }
}

/// Density-to-score curve for Tasks A and C: monotone non-decreasing,
/// below the 0.8 cutoff at zero density and above it for any density a
/// marked document can have.
fn high_curve(density: f64, idle: f64) -> f64 {
    if density == 0.0 {
        idle
    } else {
        (0.78 + 0.55 * density).min(1.0)
    }
}

/// Task B curve: monotone non-increasing, since low scores mean targeted.
fn low_curve(density: f64) -> f64 {
    if density == 0.0 {
        0.6
    } else {
        (0.12 - 0.1 * density).max(0.0)
    }
}

struct Doc {
    id: String,
    text: String,
    scores: Vec<f64>,
    gold: Option<Label>,
    marked: bool,
}

fn generate_doc(rng: &mut SplitMix64, task: TaskId, index: usize, marked: bool) -> Doc {
    let len = DOC_LEN_MIN + rng.next_below(DOC_LEN_SPAN);
    let mut tokens: Vec<String> = (0..len)
        .map(|_| format!("w{:03}", rng.next_below(BACKGROUND_WORDS as u64)))
        .collect();
    let families = marker_prefixes(task);
    let mut family_idx = 0usize;
    let mut n_markers = 0u64;
    if marked {
        family_idx = if families.len() > 1 {
            rng.next_below(families.len() as u64) as usize
        } else {
            0
        };
        n_markers = MARKERS_MIN + rng.next_below(MARKERS_SPAN);
        for _ in 0..n_markers {
            let word = format!(
                "{}{}",
                families[family_idx].0,
                rng.next_below(MARKER_WORDS as u64)
            );
            let pos = rng.next_below(tokens.len() as u64 + 1) as usize;
            tokens.insert(pos, word);
        }
    }
    let density = n_markers as f64 / tokens.len() as f64;
    let (scores, gold) = match task {
        TaskId::A => {
            let gold = if marked { Label::Off } else { Label::Not };
            (vec![high_curve(density, 0.2)], Some(gold))
        }
        TaskId::B => {
            let gold = if marked { Label::Tin } else { Label::Unt };
            (vec![low_curve(density)], Some(gold))
        }
        TaskId::C => {
            let mut scores = vec![0.0; 3];
            for (k, s) in scores.iter_mut().enumerate() {
                let d = if marked && k == family_idx {
                    density
                } else {
                    0.0
                };
                *s = high_curve(d, 0.15);
            }
            let gold = marked.then(|| families[family_idx].1);
            (scores, gold)
        }
    };
    Doc {
        id: format!("d{index:06}"),
        text: tokens.join(" "),
        scores,
        gold,
        marked,
    }
}

fn fraction_count(total: usize, fraction: f64) -> usize {
    (total as f64 * fraction).round() as usize
}

fn into_corpora(task: TaskId, docs: Vec<&Doc>) -> (ScoredCorpus, LabeledCorpus) {
    let mut scored = Corpus::new(task);
    let mut gold = Corpus::new(task);
    for d in docs {
        scored.records.push(ScoredTweet {
            id: d.id.clone(),
            text: d.text.clone(),
            scores: d.scores.clone(),
            std: None,
        });
        if let Some(label) = d.gold {
            gold.records.push(LabeledTweet {
                id: d.id.clone(),
                text: d.text.clone(),
                label,
            });
        }
    }
    (scored, gold)
}

/// Generates the corpus and, when `holdout > 0`, splits it. The holdout is
/// a subset of the generated documents; `holdout_marked` stratifies its
/// class balance (clamped to what is available), otherwise membership is a
/// uniform seeded draw. Either way both splits keep document order.
pub fn generate(cfg: &SynthConfig) -> Result<SynthOutput, SynthError> {
    if cfg.docs == 0 {
        return Err(SynthError::EmptyCorpus);
    }
    if !(0.0..=1.0).contains(&cfg.marked_fraction) {
        return Err(SynthError::BadFraction(cfg.marked_fraction));
    }
    if let Some(f) = cfg.holdout_marked {
        if !(0.0..=1.0).contains(&f) {
            return Err(SynthError::BadFraction(f));
        }
    }
    if cfg.holdout >= cfg.docs && cfg.holdout != 0 {
        return Err(SynthError::HoldoutTooLarge {
            holdout: cfg.holdout,
            docs: cfg.docs,
        });
    }

    let mut rng = SplitMix64::new(cfg.seed);
    let n_marked = fraction_count(cfg.docs, cfg.marked_fraction);
    let mut marked = vec![false; cfg.docs];
    for idx in rng.sample_indices(cfg.docs, n_marked) {
        marked[idx] = true;
    }
    let docs: Vec<Doc> = (0..cfg.docs)
        .map(|i| generate_doc(&mut rng, cfg.task, i, marked[i]))
        .collect();

    if cfg.holdout == 0 {
        let (scored, gold) = into_corpora(cfg.task, docs.iter().collect());
        return Ok(SynthOutput {
            train_scored: scored,
            train_gold: gold,
            holdout_scored: None,
            holdout_gold: None,
        });
    }

    let mut in_holdout = vec![false; cfg.docs];
    match cfg.holdout_marked {
        Some(f) => {
            let marked_ids: Vec<usize> = (0..cfg.docs).filter(|&i| docs[i].marked).collect();
            let unmarked_ids: Vec<usize> = (0..cfg.docs).filter(|&i| !docs[i].marked).collect();
            let want_marked = fraction_count(cfg.holdout, f)
                .min(marked_ids.len())
                .max(cfg.holdout.saturating_sub(unmarked_ids.len()));
            let want_unmarked = cfg.holdout - want_marked;
            for idx in rng.sample_indices(marked_ids.len(), want_marked) {
                in_holdout[marked_ids[idx]] = true;
            }
            for idx in rng.sample_indices(unmarked_ids.len(), want_unmarked) {
                in_holdout[unmarked_ids[idx]] = true;
            }
        }
        None => {
            for idx in rng.sample_indices(cfg.docs, cfg.holdout) {
                in_holdout[idx] = true;
            }
        }
    }

    let train: Vec<&Doc> = docs.iter().filter(|d| !in_holdout[doc_index(d)]).collect();
    let held: Vec<&Doc> = docs.iter().filter(|d| in_holdout[doc_index(d)]).collect();
    let (train_scored, train_gold) = into_corpora(cfg.task, train);
    let (holdout_scored, holdout_gold) = into_corpora(cfg.task, held);
    Ok(SynthOutput {
        train_scored,
        train_gold,
        holdout_scored: Some(holdout_scored),
        holdout_gold: Some(holdout_gold),
    })
}

fn doc_index(d: &Doc) -> usize {
    d.id[1..].parse().expect("synth ids are d<index>")
}
