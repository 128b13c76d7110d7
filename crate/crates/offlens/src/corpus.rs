//! Corpus data model and TSV file formats.
//!
//! Three English tasks share one corpus shape: Task A decides offensive vs
//! not (OFF/NOT), Task B decides targeted vs untargeted (TIN/UNT), Task C
//! names the target (IND/GRP/OTH). Records are either *scored* — a tweet
//! with one continuous confidence score in [0,1] (three for Task C, one per
//! class) — or *labeled* with a categorical label from the task's set.
//!
//! Files are headerless TSV, UTF-8, LF line endings. Scored rows are
//! `id \t text \t score [\t std]` for Tasks A and B and
//! `id \t text \t s_ind \t s_grp \t s_oth` for Task C; labeled rows are
//! `id \t text \t label`. There is no quoting: tabs and newlines embedded
//! in text are normalized to single spaces on write (lossy by design).

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

/// The three cascaded tasks. Task C consumes the output of Task B, and
/// Task B the output of Task A.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TaskId {
    A,
    B,
    C,
}

impl TaskId {
    /// Label set in its fixed order. The order doubles as the tie-break
    /// order wherever one is needed.
    pub fn labels(self) -> &'static [Label] {
        match self {
            TaskId::A => &[Label::Off, Label::Not],
            TaskId::B => &[Label::Tin, Label::Unt],
            TaskId::C => &[Label::Ind, Label::Grp, Label::Oth],
        }
    }

    /// Number of scores a scored record carries: one for A and B, three
    /// (IND, GRP, OTH in fixed column order) for C.
    pub fn score_arity(self) -> usize {
        match self {
            TaskId::A | TaskId::B => 1,
            TaskId::C => 3,
        }
    }
}

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TaskId::A => write!(f, "A"),
            TaskId::B => write!(f, "B"),
            TaskId::C => write!(f, "C"),
        }
    }
}

impl FromStr for TaskId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "A" | "a" => Ok(TaskId::A),
            "B" | "b" => Ok(TaskId::B),
            "C" | "c" => Ok(TaskId::C),
            other => Err(format!("unknown task {other:?} (expected A, B, or C)")),
        }
    }
}

/// Union of the three tasks' label sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Off,
    Not,
    Tin,
    Unt,
    Ind,
    Grp,
    Oth,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Off => "OFF",
            Label::Not => "NOT",
            Label::Tin => "TIN",
            Label::Unt => "UNT",
            Label::Ind => "IND",
            Label::Grp => "GRP",
            Label::Oth => "OTH",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "OFF" => Ok(Label::Off),
            "NOT" => Ok(Label::Not),
            "TIN" => Ok(Label::Tin),
            "UNT" => Ok(Label::Unt),
            "IND" => Ok(Label::Ind),
            "GRP" => Ok(Label::Grp),
            "OTH" => Ok(Label::Oth),
            other => Err(format!("unknown label {other:?}")),
        }
    }
}

/// A tweet with continuous confidence scores in [0,1].
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredTweet {
    pub id: String,
    pub text: String,
    /// One score for Tasks A/B; three (IND, GRP, OTH) for Task C.
    pub scores: Vec<f64>,
    /// Standard deviation column, present in SOLID-style Task A/B files.
    pub std: Option<f64>,
}

/// A tweet with a categorical label from its task's label set.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledTweet {
    pub id: String,
    pub text: String,
    pub label: Label,
}

/// Common view over scored and labeled records.
pub trait CorpusRecord {
    fn id(&self) -> &str;
    fn text(&self) -> &str;
}

impl CorpusRecord for ScoredTweet {
    fn id(&self) -> &str {
        &self.id
    }
    fn text(&self) -> &str {
        &self.text
    }
}

impl CorpusRecord for LabeledTweet {
    fn id(&self) -> &str {
        &self.id
    }
    fn text(&self) -> &str {
        &self.text
    }
}

/// Ordered record collection for one task. Ids are unique; order is the
/// file order and is preserved by every operation.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus<T: CorpusRecord> {
    pub task: TaskId,
    pub records: Vec<T>,
}

pub type ScoredCorpus = Corpus<ScoredTweet>;
pub type LabeledCorpus = Corpus<LabeledTweet>;

impl<T: CorpusRecord> Corpus<T> {
    pub fn new(task: TaskId) -> Self {
        Corpus {
            task,
            records: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// (id, text) pairs in corpus order.
    pub fn docs(&self) -> impl Iterator<Item = (&str, &str)> {
        self.records.iter().map(|r| (r.id(), r.text()))
    }
}

/// What went wrong with one physical line.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseIssue {
    #[error("malformed line: {0}")]
    MalformedLine(String),
    #[error("score {0} out of range [0,1]")]
    ScoreOutOfRange(f64),
    #[error("empty text")]
    EmptyText,
    #[error("duplicate id {0:?}")]
    DuplicateId(String),
    #[error("unknown label {0:?} for task {1}")]
    UnknownLabel(String, TaskId),
    #[error("std {0} must be a finite non-negative number")]
    BadStd(f64),
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("line {line}: {issue}")]
    Line { line: usize, issue: ParseIssue },
    #[error("corpus for task {expected} given records for task {found}")]
    TaskMismatch { expected: TaskId, found: TaskId },
}

/// Strict aborts on the first bad line; lenient skips bad lines and counts
/// them in the load report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ParseMode {
    #[default]
    Strict,
    Lenient,
}

/// Per-file accounting: physical lines seen, records kept, and the lines
/// rejected in lenient mode. `lines == loaded + skipped.len()` always holds.
#[derive(Debug, Clone, Default)]
pub struct LoadReport {
    pub lines: usize,
    pub loaded: usize,
    pub skipped: Vec<(usize, ParseIssue)>,
}

fn parse_score(field: &str) -> Result<f64, ParseIssue> {
    let value: f64 = field
        .parse()
        .map_err(|_| ParseIssue::MalformedLine(format!("bad score {field:?}")))?;
    if !(0.0..=1.0).contains(&value) {
        return Err(ParseIssue::ScoreOutOfRange(value));
    }
    Ok(value)
}

/// Parses one scored TSV line: `id \t text \t score [\t std]` for Tasks A/B,
/// `id \t text \t s_ind \t s_grp \t s_oth` for Task C.
pub fn parse_scored_line(line: &str, task: TaskId) -> Result<ScoredTweet, ParseIssue> {
    let fields: Vec<&str> = line.split('\t').collect();
    let arity = task.score_arity();
    let (min_fields, max_fields) = if arity == 1 { (3, 4) } else { (5, 5) };
    if fields.len() < min_fields || fields.len() > max_fields {
        return Err(ParseIssue::MalformedLine(format!(
            "expected {min_fields}-{max_fields} tab-separated fields for task {task}, found {}",
            fields.len()
        )));
    }
    let id = fields[0].to_string();
    let text = fields[1].to_string();
    if text.trim().is_empty() {
        return Err(ParseIssue::EmptyText);
    }
    let mut scores = Vec::with_capacity(arity);
    for field in &fields[2..2 + arity] {
        scores.push(parse_score(field)?);
    }
    let std = if arity == 1 && fields.len() == 4 {
        let value: f64 = fields[3]
            .parse()
            .map_err(|_| ParseIssue::MalformedLine(format!("bad std {:?}", fields[3])))?;
        if !value.is_finite() || value < 0.0 {
            return Err(ParseIssue::BadStd(value));
        }
        Some(value)
    } else {
        None
    };
    Ok(ScoredTweet {
        id,
        text,
        scores,
        std,
    })
}

/// Parses one labeled TSV line: `id \t text \t label`.
pub fn parse_labeled_line(line: &str, task: TaskId) -> Result<LabeledTweet, ParseIssue> {
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() != 3 {
        return Err(ParseIssue::MalformedLine(format!(
            "expected 3 tab-separated fields, found {}",
            fields.len()
        )));
    }
    let text = fields[1].to_string();
    if text.trim().is_empty() {
        return Err(ParseIssue::EmptyText);
    }
    let label: Label = fields[2]
        .parse()
        .map_err(|_| ParseIssue::UnknownLabel(fields[2].to_string(), task))?;
    if !task.labels().contains(&label) {
        return Err(ParseIssue::UnknownLabel(fields[2].to_string(), task));
    }
    Ok(LabeledTweet {
        id: fields[0].to_string(),
        text,
        label,
    })
}

fn load_lines<T: CorpusRecord>(
    path: &Path,
    task: TaskId,
    mode: ParseMode,
    parse: impl Fn(&str, TaskId) -> Result<T, ParseIssue>,
) -> Result<(Corpus<T>, LoadReport), CorpusError> {
    let content = fs::read_to_string(path)?;
    let mut corpus = Corpus::new(task);
    let mut report = LoadReport::default();
    let mut seen: HashSet<String> = HashSet::new();
    for (idx, raw) in content.lines().enumerate() {
        let line_no = idx + 1;
        report.lines += 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        let parsed = parse(line, task).and_then(|record| {
            if !seen.insert(record.id().to_string()) {
                Err(ParseIssue::DuplicateId(record.id().to_string()))
            } else {
                Ok(record)
            }
        });
        match parsed {
            Ok(record) => {
                corpus.records.push(record);
                report.loaded += 1;
            }
            Err(issue) => match mode {
                ParseMode::Strict => {
                    return Err(CorpusError::Line {
                        line: line_no,
                        issue,
                    })
                }
                ParseMode::Lenient => report.skipped.push((line_no, issue)),
            },
        }
    }
    Ok((corpus, report))
}

/// Loads a scored corpus, preserving file order.
pub fn load_scored(
    path: &Path,
    task: TaskId,
    mode: ParseMode,
) -> Result<(ScoredCorpus, LoadReport), CorpusError> {
    load_lines(path, task, mode, parse_scored_line)
}

/// Loads a labeled corpus, preserving file order.
pub fn load_labeled(
    path: &Path,
    task: TaskId,
    mode: ParseMode,
) -> Result<(LabeledCorpus, LoadReport), CorpusError> {
    load_lines(path, task, mode, parse_labeled_line)
}

/// Normalizes a field for TSV output: every tab, newline, or carriage
/// return becomes a single space. Lossy, applied on write only.
pub(crate) fn tsv_field(s: &str) -> String {
    s.replace(['\t', '\n', '\r'], " ")
}

/// Writes `id \t text \t label` rows. Reading the file back reproduces the
/// corpus exactly once text has been through one write (round-trip identity
/// from the first write onward, since normalization is idempotent).
pub fn write_labeled(corpus: &LabeledCorpus, path: &Path) -> Result<(), CorpusError> {
    let mut out = fs::File::create(path)?;
    for r in &corpus.records {
        writeln!(
            out,
            "{}\t{}\t{}",
            tsv_field(&r.id),
            tsv_field(&r.text),
            r.label
        )?;
    }
    Ok(())
}

/// Writes scored rows in the task's column layout. Floats are printed in
/// Rust's shortest round-trip form, so a rewrite of a loaded file is
/// byte-identical.
pub fn write_scored(corpus: &ScoredCorpus, path: &Path) -> Result<(), CorpusError> {
    let mut out = fs::File::create(path)?;
    for r in &corpus.records {
        let mut row = format!("{}\t{}", tsv_field(&r.id), tsv_field(&r.text));
        for s in &r.scores {
            row.push('\t');
            row.push_str(&s.to_string());
        }
        if let Some(std) = r.std {
            row.push('\t');
            row.push_str(&std.to_string());
        }
        writeln!(out, "{row}")?;
    }
    Ok(())
}
