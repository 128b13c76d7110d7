//! Distant-supervision threshold labeling and score-distribution tools.
//!
//! SOLID-style training data carries continuous scores instead of labels.
//! A cutoff policy turns a score into a categorical training label: high
//! Task A scores are OFF, low Task B scores are TIN, and a Task C record
//! takes the highest of its three per-class scores among those that reach
//! the cutoff (or is excluded from training when none does).

use crate::corpus::{Corpus, Label, LabeledCorpus, LabeledTweet, ScoredCorpus, TaskId};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum LabelingError {
    #[error("score {0} out of range [0,1]")]
    ScoreOutOfRange(f64),
    #[error("cutoff {0} out of range [0,1]")]
    CutoffOutOfRange(f64),
    #[error("bin width {0} must divide 1 into a whole number of bins")]
    BadBinWidth(f64),
    #[error("empty input")]
    EmptyInput,
    #[error("policy for task {policy} applied to task {corpus} corpus")]
    TaskMismatch { policy: TaskId, corpus: TaskId },
    #[error("cutoff {cutoff} does not sit on a bin boundary of width {bin_width}")]
    CutoffOffBoundary { cutoff: f64, bin_width: f64 },
}

/// Rule converting a continuous score into a categorical label.
///
/// `inclusive` decides which side of the boundary the cutoff value itself
/// belongs to: when true (the default), a score exactly at the cutoff
/// qualifies for the high side — OFF for Task A, UNT for Task B, the
/// candidate class for Task C.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutoffPolicy {
    pub task: TaskId,
    pub cutoff: f64,
    pub inclusive: bool,
}

impl CutoffPolicy {
    /// Validated constructor; cutoff must lie in [0,1].
    pub fn new(task: TaskId, cutoff: f64, inclusive: bool) -> Result<Self, LabelingError> {
        if !(0.0..=1.0).contains(&cutoff) {
            return Err(LabelingError::CutoffOutOfRange(cutoff));
        }
        Ok(CutoffPolicy {
            task,
            cutoff,
            inclusive,
        })
    }

    /// Per-task defaults: 0.8 for Tasks A and C, 0.2 for Task B, inclusive.
    pub fn default_for(task: TaskId) -> Self {
        let cutoff = match task {
            TaskId::A | TaskId::C => 0.8,
            TaskId::B => 0.2,
        };
        CutoffPolicy {
            task,
            cutoff,
            inclusive: true,
        }
    }

    fn qualifies(&self, score: f64) -> bool {
        if self.inclusive {
            score >= self.cutoff
        } else {
            score > self.cutoff
        }
    }
}

fn check_score(score: f64) -> Result<(), LabelingError> {
    if !(0.0..=1.0).contains(&score) {
        return Err(LabelingError::ScoreOutOfRange(score));
    }
    Ok(())
}

/// Task A: OFF when the score reaches the cutoff, NOT otherwise.
pub fn label_task_a(score: f64, policy: &CutoffPolicy) -> Result<Label, LabelingError> {
    check_score(score)?;
    Ok(if policy.qualifies(score) {
        Label::Off
    } else {
        Label::Not
    })
}

/// Task B: TIN below the cutoff, UNT at or above it.
pub fn label_task_b(score: f64, policy: &CutoffPolicy) -> Result<Label, LabelingError> {
    check_score(score)?;
    Ok(if policy.qualifies(score) {
        Label::Unt
    } else {
        Label::Tin
    })
}

/// Task C: among the classes whose score reaches the cutoff, the one with
/// the highest score, ties broken IND > GRP > OTH. `None` when no class
/// qualifies; such records are excluded from training.
pub fn label_task_c(
    scores: [f64; 3],
    policy: &CutoffPolicy,
) -> Result<Option<Label>, LabelingError> {
    for &s in &scores {
        check_score(s)?;
    }
    let mut best: Option<(Label, f64)> = None;
    for (label, &score) in TaskId::C.labels().iter().zip(scores.iter()) {
        if policy.qualifies(score) {
            let better = match best {
                Some((_, b)) => score > b,
                None => true,
            };
            if better {
                best = Some((*label, score));
            }
        }
    }
    Ok(best.map(|(label, _)| label))
}

/// Class counts produced by one `apply_policy` pass, in the task's label
/// order, plus the number of excluded records (Task C only).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolicyReport {
    pub counts: Vec<(Label, u64)>,
    pub excluded: u64,
}

/// Maps a scored corpus to a labeled one record by record, preserving
/// order. Task C records with no qualifying class are dropped and counted.
pub fn apply_policy(
    corpus: &ScoredCorpus,
    policy: &CutoffPolicy,
) -> Result<(LabeledCorpus, PolicyReport), LabelingError> {
    if corpus.task != policy.task {
        return Err(LabelingError::TaskMismatch {
            policy: policy.task,
            corpus: corpus.task,
        });
    }
    let labels = corpus.task.labels();
    let mut counts: Vec<(Label, u64)> = labels.iter().map(|&l| (l, 0)).collect();
    let mut excluded = 0u64;
    let mut out = Corpus::new(corpus.task);
    for r in &corpus.records {
        let label = match corpus.task {
            TaskId::A => Some(label_task_a(r.scores[0], policy)?),
            TaskId::B => Some(label_task_b(r.scores[0], policy)?),
            TaskId::C => label_task_c([r.scores[0], r.scores[1], r.scores[2]], policy)?,
        };
        match label {
            Some(label) => {
                let slot = counts
                    .iter_mut()
                    .find(|(l, _)| *l == label)
                    .expect("label in set");
                slot.1 += 1;
                out.records.push(LabeledTweet {
                    id: r.id.clone(),
                    text: r.text.clone(),
                    label,
                });
            }
            None => excluded += 1,
        }
    }
    Ok((out, PolicyReport { counts, excluded }))
}

/// Equal-width score histogram over [0,1]. Bin i covers [i*w, (i+1)*w);
/// the final bin is closed at 1.0.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub bin_width: f64,
    pub counts: Vec<u64>,
    pub total: u64,
}

impl Histogram {
    /// Per-bin proportions; these sum to 1 within 1e-9 when total > 0.
    pub fn proportions(&self) -> Vec<f64> {
        if self.total == 0 {
            return vec![0.0; self.counts.len()];
        }
        self.counts
            .iter()
            .map(|&c| c as f64 / self.total as f64)
            .collect()
    }

    /// Count of scores at or above `cutoff`, which must sit on a bin
    /// boundary. Exact integer arithmetic: sums the bins from the boundary up.
    pub fn count_at_or_above(&self, cutoff: f64) -> Result<u64, LabelingError> {
        let scaled = cutoff / self.bin_width;
        let idx = scaled.round();
        if (scaled - idx).abs() > 1e-9 {
            return Err(LabelingError::CutoffOffBoundary {
                cutoff,
                bin_width: self.bin_width,
            });
        }
        let idx = idx as usize;
        Ok(self.counts[idx.min(self.counts.len())..].iter().sum())
    }
}

fn bin_count(bin_width: f64) -> Result<usize, LabelingError> {
    if !(bin_width > 0.0 && bin_width <= 1.0) {
        return Err(LabelingError::BadBinWidth(bin_width));
    }
    let n = 1.0 / bin_width;
    if (n - n.round()).abs() > 1e-9 {
        return Err(LabelingError::BadBinWidth(bin_width));
    }
    Ok(n.round() as usize)
}

/// Bins scores into a histogram. Scores within 1e-9 bin-widths of a
/// boundary are snapped onto it, so decimal scores like 0.3 land in the
/// bin they name despite binary-float rounding.
pub fn score_histogram(scores: &[f64], bin_width: f64) -> Result<Histogram, LabelingError> {
    let n_bins = bin_count(bin_width)?;
    let mut counts = vec![0u64; n_bins];
    for &s in scores {
        check_score(s)?;
        let scaled = s / bin_width;
        let mut idx = if (scaled - scaled.round()).abs() < 1e-9 {
            scaled.round() as usize
        } else {
            scaled.floor() as usize
        };
        if idx >= n_bins {
            idx = n_bins - 1; // 1.0 belongs to the closed top bin
        }
        counts[idx] += 1;
    }
    Ok(Histogram {
        bin_width,
        counts,
        total: scores.len() as u64,
    })
}

/// Median, mean, and population standard deviation of a score sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SummaryStats {
    pub median: f64,
    pub mean: f64,
    pub std: f64,
}

/// Median uses the midpoint-of-two convention for even lengths; std is the
/// population standard deviation.
pub fn summary_stats(scores: &[f64]) -> Result<SummaryStats, LabelingError> {
    if scores.is_empty() {
        return Err(LabelingError::EmptyInput);
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite scores"));
    let n = sorted.len();
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    };
    let mean = sorted.iter().sum::<f64>() / n as f64;
    let var = sorted.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
    Ok(SummaryStats {
        median,
        mean,
        std: var.sqrt(),
    })
}
