//! Cascaded three-task inference and qualitative-analysis instruments.
//!
//! The cascade mirrors the task structure: every record gets a Task A
//! prediction, only records predicted OFF continue to Task B, and only
//! records predicted TIN continue to Task C. The analysis side draws
//! seeded samples from one confusion cell at a time and materializes
//! review files whose profanity is masked for display.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::corpus::{tsv_field, Label, LabeledCorpus, TaskId};
use crate::glm::{GlmError, GlmModel};
use crate::rng::SplitMix64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CascadeError {
    #[error("model for task {task} has label order {found:?}, expected {expected:?}")]
    ModelTaskMismatch {
        task: TaskId,
        expected: Vec<Label>,
        found: Vec<Label>,
    },
    #[error("cell {0} is empty")]
    EmptyCell(CellSpec),
    #[error("lexicon term {0:?} is shorter than 3 characters")]
    TermTooShort(String),
    #[error("id {0:?} has no record to resolve against")]
    UnknownId(String),
    #[error(transparent)]
    Glm(#[from] GlmError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// The three task models, validated against their label orders.
#[derive(Debug, Clone)]
pub struct CascadeModels {
    pub a: GlmModel,
    pub b: GlmModel,
    pub c: GlmModel,
}

impl CascadeModels {
    pub fn new(a: GlmModel, b: GlmModel, c: GlmModel) -> Result<Self, CascadeError> {
        for (task, model) in [(TaskId::A, &a), (TaskId::B, &b), (TaskId::C, &c)] {
            if model.labels != task.labels() {
                return Err(CascadeError::ModelTaskMismatch {
                    task,
                    expected: task.labels().to_vec(),
                    found: model.labels.clone(),
                });
            }
        }
        Ok(CascadeModels { a, b, c })
    }
}

/// Per-task predictions in input order. Membership is the provenance: a
/// record appears in `task_b` exactly when Task A predicted it OFF, and in
/// `task_c` exactly when Task B predicted it TIN.
#[derive(Debug, Clone, Default)]
pub struct CascadeResult {
    pub task_a: Vec<(String, Label)>,
    pub task_b: Vec<(String, Label)>,
    pub task_c: Vec<(String, Label)>,
}

/// Runs the cascade over (id, text) pairs. Each model featurizes the text
/// with its own vocabulary, so the three tasks may use different feature
/// spaces.
pub fn run_cascade<'a, I>(docs: I, models: &CascadeModels, threshold: f64) -> CascadeResult
where
    I: IntoIterator<Item = (&'a str, &'a str)>,
{
    let mut result = CascadeResult::default();
    for (id, text) in docs {
        let label_a = models.a.predict_text(text, threshold);
        result.task_a.push((id.to_string(), label_a));
        if label_a != Label::Off {
            continue;
        }
        let label_b = models.b.predict_text(text, threshold);
        result.task_b.push((id.to_string(), label_b));
        if label_b != Label::Tin {
            continue;
        }
        let label_c = models.c.predict_text(text, threshold);
        result.task_c.push((id.to_string(), label_c));
    }
    result
}

/// One confusion cell, written `GOLD:PRED` — the cell OFF:NOT holds the
/// records whose gold label is OFF and predicted label is NOT, matching
/// the way the cells are named in table captions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CellSpec {
    pub gold: Label,
    pub pred: Label,
}

impl fmt::Display for CellSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.gold, self.pred)
    }
}

impl FromStr for CellSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (gold, pred) = s
            .split_once(':')
            .ok_or_else(|| format!("cell {s:?} must be GOLD:PRED, e.g. OFF:NOT"))?;
        Ok(CellSpec {
            gold: gold.parse()?,
            pred: pred.parse()?,
        })
    }
}

/// The ids drawn from one confusion cell: `trials` independent draws of
/// up to `n_per_trial` distinct ids each, fully determined by the seed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleReport {
    pub cell: CellSpec,
    pub n_per_trial: usize,
    pub seed: u64,
    pub trials: Vec<Vec<String>>,
}

/// Draws `trials` trials of `min(n, population)` ids uniformly without
/// replacement from the named cell. Trials are independent, so an id may
/// recur across trials. The population order (and therefore the draw) is
/// fixed by the gold corpus order.
pub fn sample_cell(
    gold: &LabeledCorpus,
    pred: &LabeledCorpus,
    cell: CellSpec,
    n: usize,
    trials: usize,
    seed: u64,
) -> Result<SampleReport, CascadeError> {
    let pred_by_id: HashMap<&str, Label> = pred
        .records
        .iter()
        .map(|r| (r.id.as_str(), r.label))
        .collect();
    let mut population: Vec<&str> = Vec::new();
    for r in &gold.records {
        let p = pred_by_id
            .get(r.id.as_str())
            .copied()
            .ok_or_else(|| CascadeError::UnknownId(r.id.clone()))?;
        if r.label == cell.gold && p == cell.pred {
            population.push(&r.id);
        }
    }
    if population.is_empty() {
        return Err(CascadeError::EmptyCell(cell));
    }
    let mut rng = SplitMix64::new(seed);
    let mut out = Vec::with_capacity(trials);
    for _ in 0..trials {
        let idx = rng.sample_indices(population.len(), n);
        out.push(idx.into_iter().map(|i| population[i].to_string()).collect());
    }
    Ok(SampleReport {
        cell,
        n_per_trial: n,
        seed,
        trials: out,
    })
}

fn check_lexicon(lexicon: &[String]) -> Result<Vec<String>, CascadeError> {
    let mut lowered = Vec::with_capacity(lexicon.len());
    for term in lexicon {
        if term.chars().count() < 3 {
            return Err(CascadeError::TermTooShort(term.clone()));
        }
        lowered.push(term.to_lowercase());
    }
    Ok(lowered)
}

fn mask_word(word: &str) -> String {
    let chars: Vec<char> = word.chars().collect();
    let n = chars.len();
    let mut out = String::with_capacity(word.len());
    out.push(chars[0]);
    for _ in 0..n.saturating_sub(3) {
        out.push('*');
    }
    out.push(chars[n - 2]);
    out.push(chars[n - 1]);
    out
}

/// Rewrites every case-insensitive whole-word lexicon match keeping its
/// first and last two characters, asterisks in between: bitch becomes
/// b**ch, fuck becomes f*ck. Token count and token lengths are preserved;
/// non-matches are untouched.
pub fn redact(text: &str, lexicon: &[String]) -> Result<String, CascadeError> {
    let lowered = check_lexicon(lexicon)?;
    let mut out = String::with_capacity(text.len());
    let mut word = String::new();
    let flush = |word: &mut String, out: &mut String| {
        if !word.is_empty() {
            if lowered.iter().any(|t| *t == word.to_lowercase()) {
                out.push_str(&mask_word(word));
            } else {
                out.push_str(word);
            }
            word.clear();
        }
    };
    for c in text.chars() {
        if c.is_alphanumeric() {
            word.push(c);
        } else {
            flush(&mut word, &mut out);
            out.push(c);
        }
    }
    flush(&mut word, &mut out);
    Ok(out)
}

/// Writes the review TSV a human annotates: header row, then one row per
/// sampled id with (trial, id, gold, pred, redacted text) and an empty
/// annotation column for OFF??/TIN?? marks.
pub fn write_sample_review(
    report: &SampleReport,
    texts: &HashMap<String, String>,
    lexicon: &[String],
    path: &Path,
) -> Result<(), CascadeError> {
    check_lexicon(lexicon)?;
    let mut out = fs::File::create(path)?;
    writeln!(out, "trial\tid\tgold\tpred\ttext\tannotation")?;
    for (trial_idx, trial) in report.trials.iter().enumerate() {
        for id in trial {
            let text = texts
                .get(id)
                .ok_or_else(|| CascadeError::UnknownId(id.clone()))?;
            let display = redact(&tsv_field(text), lexicon)?;
            writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t",
                trial_idx + 1,
                tsv_field(id),
                report.cell.gold,
                report.cell.pred,
                display
            )?;
        }
    }
    Ok(())
}
