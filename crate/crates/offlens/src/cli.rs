//! The `offlens` command-line surface.
//!
//! One executable, ten subcommands: label, dist, train, predict, evaluate,
//! audit, cascade, sample, redact, synth. A flat key=value config file
//! (named by `--config` or the `OFFLENS_CONFIG` environment variable)
//! supplies defaults; command-line flags always win. Exit codes: 0 on
//! success, 1 on data errors, 2 on usage errors. All randomized behavior
//! is seed-controlled, so identical invocations produce byte-identical
//! outputs.

use std::collections::HashMap;
use std::ffi::OsString;
use std::fs;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::cascade::{run_cascade, sample_cell, write_sample_review, CascadeModels, CellSpec};
use crate::corpus::{
    load_labeled, load_scored, write_labeled, Corpus, Label, LabeledCorpus, LabeledTweet,
    LoadReport, ParseMode, TaskId,
};
use crate::eval::{
    audit_table, build_confusion, metrics, parse_counts_tsv, parse_published_tsv, ConfusionMatrix,
    MetricsReport,
};
use crate::glm::{load_model, save_model, train, GlmConfig, ModelKind};
use crate::labeling::{apply_policy, score_histogram, summary_stats, CutoffPolicy};
use crate::synth::{generate, SynthConfig};
use crate::text::{
    clean_with, fit_vocabulary, tokenize, vectorize, FeatureConfig, FeatureScheme, SparseVector,
    Token,
};

#[derive(Debug)]
pub enum CliError {
    /// Bad flags or config; exit code 2.
    Usage(String),
    /// Bad data or I/O; exit code 1.
    Data(String),
}

macro_rules! data_errors {
    ($($ty:ty),*) => {
        $(impl From<$ty> for CliError {
            fn from(e: $ty) -> Self {
                CliError::Data(e.to_string())
            }
        })*
    };
}

data_errors!(
    crate::corpus::CorpusError,
    crate::labeling::LabelingError,
    crate::glm::GlmError,
    crate::eval::EvalError,
    crate::cascade::CascadeError,
    crate::synth::SynthError,
    std::io::Error
);

#[derive(Parser, Debug)]
#[command(
    name = "offlens",
    version,
    about = "Offensive-language pipeline: threshold labeling, n-gram logistic regression, cascaded inference, evaluation"
)]
struct Cli {
    /// Flat key=value config file supplying flag defaults (falls back to
    /// the OFFLENS_CONFIG environment variable)
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Upper bound on worker threads; processing is sequential and output
    /// never depends on this value
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Convert a scored corpus to categorical labels via a cutoff policy
    Label(LabelArgs),
    /// Print the score distribution of a scored corpus in 0.1-style bins
    Dist(DistArgs),
    /// Train a logistic-regression model on a labeled corpus
    Train(TrainArgs),
    /// Predict labels for a corpus with a trained model
    Predict(PredictArgs),
    /// Compare predictions against gold labels
    Evaluate(EvaluateArgs),
    /// Recompute a published results table from its confusion counts and
    /// flag inconsistent cells
    Audit(AuditArgs),
    /// Run the A -> B -> C cascade over a test corpus
    Cascade(CascadeArgs),
    /// Draw seeded samples from one confusion cell into a review file
    Sample(SampleArgs),
    /// Mask lexicon terms in text for display (b**ch style)
    Redact(RedactArgs),
    /// Generate a synthetic planted-lexicon corpus
    Synth(SynthArgs),
}

#[derive(Args, Debug)]
struct LabelArgs {
    /// Task: A, B, or C
    #[arg(long)]
    task: Option<TaskId>,
    /// Cutoff in [0,1]; defaults to 0.8 for A/C and 0.2 for B
    #[arg(long)]
    cutoff: Option<f64>,
    /// Exclusive comparison (score strictly above the cutoff qualifies)
    #[arg(long)]
    exclusive: bool,
    /// Input scored TSV
    #[arg(long = "in", value_name = "TSV")]
    input: Option<PathBuf>,
    /// Output labeled TSV
    #[arg(long)]
    out: Option<PathBuf>,
    /// Skip and count malformed lines instead of aborting
    #[arg(long)]
    lenient: bool,
}

#[derive(Args, Debug)]
struct DistArgs {
    /// Task: A, B, or C
    #[arg(long)]
    task: Option<TaskId>,
    /// Input scored TSV
    #[arg(long = "in", value_name = "TSV")]
    input: Option<PathBuf>,
    /// Histogram bin width; 1/width must be a whole number
    #[arg(long, default_value_t = 0.1)]
    bin_width: f64,
    /// Score column to bin (0-based; Task C has columns 0..2)
    #[arg(long, default_value_t = 0)]
    column: usize,
    /// Also print median, mean, and population standard deviation
    #[arg(long)]
    stats: bool,
    /// Skip and count malformed lines instead of aborting
    #[arg(long)]
    lenient: bool,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Task: A, B, or C (A and B train binary models, C multinomial)
    #[arg(long)]
    task: Option<TaskId>,
    /// Input labeled TSV
    #[arg(long = "in", value_name = "TSV")]
    input: Option<PathBuf>,
    /// Output model file
    #[arg(long)]
    model: Option<PathBuf>,
    /// Minimum document frequency for vocabulary n-grams
    #[arg(long)]
    min_df: Option<u32>,
    /// L2 regularization strength
    #[arg(long)]
    l2_lambda: Option<f64>,
    /// Maximum gradient-descent iterations
    #[arg(long)]
    max_iters: Option<usize>,
    /// Relative loss-decrease stopping tolerance
    #[arg(long)]
    tolerance: Option<f64>,
    /// Initial learning rate (halved on any loss increase)
    #[arg(long)]
    learning_rate: Option<f64>,
    /// Use occurrence counts instead of binary presence features
    #[arg(long)]
    counts: bool,
    /// Keep the original letter case
    #[arg(long)]
    no_lowercase: bool,
    /// Class weighting: uniform or balanced (inverse frequency)
    #[arg(long, default_value = "uniform")]
    class_weights: String,
    /// Skip and count malformed lines instead of aborting
    #[arg(long)]
    lenient: bool,
}

#[derive(Args, Debug)]
struct PredictArgs {
    /// Trained model file
    #[arg(long)]
    model: Option<PathBuf>,
    /// Input corpus TSV
    #[arg(long = "in", value_name = "TSV")]
    input: Option<PathBuf>,
    /// Input kind: labeled (labels ignored) or scored (scores ignored)
    #[arg(long, default_value = "labeled")]
    kind: String,
    /// Output labeled TSV of predictions
    #[arg(long)]
    out: Option<PathBuf>,
    /// Decision threshold on the positive class (binary models)
    #[arg(long)]
    threshold: Option<f64>,
    /// Skip and count malformed lines instead of aborting
    #[arg(long)]
    lenient: bool,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    /// Gold labeled TSV
    #[arg(long)]
    gold: Option<PathBuf>,
    /// Predicted labeled TSV
    #[arg(long)]
    pred: Option<PathBuf>,
    /// Comma-separated label order, e.g. OFF,NOT
    #[arg(long)]
    labels: Option<String>,
    /// Task whose label set to use when --labels is omitted
    #[arg(long)]
    task: Option<TaskId>,
}

#[derive(Args, Debug)]
struct AuditArgs {
    /// Confusion counts TSV: a label header row, then one count row per
    /// predicted label
    #[arg(long)]
    counts: Option<PathBuf>,
    /// Published values TSV: LABEL\tP\tR\tF1 rows plus optional accuracy,
    /// majority, and macro_f1 rows (use - for unprinted cells)
    #[arg(long)]
    published: Option<PathBuf>,
    /// Flag published values further than this from the recomputation
    #[arg(long, default_value_t = 0.001)]
    tolerance: f64,
}

#[derive(Args, Debug)]
struct CascadeArgs {
    /// Test corpus TSV
    #[arg(long)]
    test: Option<PathBuf>,
    /// Input kind: labeled (labels ignored) or scored (scores ignored)
    #[arg(long, default_value = "labeled")]
    kind: String,
    /// Task A model file
    #[arg(long)]
    model_a: Option<PathBuf>,
    /// Task B model file
    #[arg(long)]
    model_b: Option<PathBuf>,
    /// Task C model file
    #[arg(long)]
    model_c: Option<PathBuf>,
    /// Directory for pred_a.tsv, pred_b.tsv, pred_c.tsv
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Decision threshold for the binary stages
    #[arg(long)]
    threshold: Option<f64>,
    /// Skip and count malformed lines instead of aborting
    #[arg(long)]
    lenient: bool,
}

#[derive(Args, Debug)]
struct SampleArgs {
    /// Gold labeled TSV
    #[arg(long)]
    gold: Option<PathBuf>,
    /// Predicted labeled TSV
    #[arg(long)]
    pred: Option<PathBuf>,
    /// Confusion cell as GOLD:PRED, e.g. OFF:NOT
    #[arg(long)]
    cell: CellSpec,
    /// Instances per trial
    #[arg(long, default_value_t = 10)]
    n: usize,
    /// Number of independent trials
    #[arg(long, default_value_t = 10)]
    trials: usize,
    /// Generator seed
    #[arg(long)]
    seed: Option<u64>,
    /// Output review TSV
    #[arg(long)]
    out: Option<PathBuf>,
    /// Redaction lexicon file (one term per line) applied to review text
    #[arg(long)]
    lexicon: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct RedactArgs {
    /// Lexicon file, one term per line (# comments allowed)
    #[arg(long)]
    lexicon: PathBuf,
    /// Input text file (stdin when omitted)
    #[arg(long = "in", value_name = "FILE")]
    input: Option<PathBuf>,
    /// Output file (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// Task: A, B, or C
    #[arg(long)]
    task: Option<TaskId>,
    /// Number of documents to generate
    #[arg(long)]
    docs: usize,
    /// Fraction of documents salted with marker tokens
    #[arg(long)]
    marked: f64,
    /// Generator seed
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Documents split off into a held-out evaluation set
    #[arg(long, default_value_t = 0)]
    holdout: usize,
    /// Marked fraction of the holdout (stratified split); proportional
    /// when omitted
    #[arg(long)]
    holdout_marked: Option<f64>,
}

/// Defaults loadable from a flat key=value file. Every field mirrors a
/// flag; flags take precedence.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunConfig {
    pub task: Option<TaskId>,
    pub cutoff_a: Option<f64>,
    pub cutoff_b: Option<f64>,
    pub cutoff_c: Option<f64>,
    pub exclusive: Option<bool>,
    pub min_df: Option<u32>,
    pub l2_lambda: Option<f64>,
    pub max_iters: Option<usize>,
    pub tolerance: Option<f64>,
    pub learning_rate: Option<f64>,
    pub decision_threshold: Option<f64>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub scheme: Option<FeatureScheme>,
    pub lowercase: Option<bool>,
    pub lenient: Option<bool>,
    pub input: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub gold: Option<PathBuf>,
    pub pred: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
}

impl RunConfig {
    /// Parses `key = value` lines; `#` starts a comment and blank lines
    /// are skipped. Unknown keys are usage errors.
    pub fn parse(text: &str) -> Result<RunConfig, String> {
        let mut cfg = RunConfig::default();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| format!("config line {}: expected key=value", no + 1))?;
            let (key, value) = (key.trim(), value.trim());
            let bad = |e: String| format!("config line {}: {key}: {e}", no + 1);
            let badp = |e: std::num::ParseFloatError| bad(e.to_string());
            let badi = |e: std::num::ParseIntError| bad(e.to_string());
            let badb = |e: std::str::ParseBoolError| bad(e.to_string());
            match key {
                "task" => cfg.task = Some(value.parse().map_err(bad)?),
                "cutoff.a" => cfg.cutoff_a = Some(value.parse().map_err(badp)?),
                "cutoff.b" => cfg.cutoff_b = Some(value.parse().map_err(badp)?),
                "cutoff.c" => cfg.cutoff_c = Some(value.parse().map_err(badp)?),
                "exclusive" => cfg.exclusive = Some(value.parse().map_err(badb)?),
                "min_df" => cfg.min_df = Some(value.parse().map_err(badi)?),
                "l2_lambda" => cfg.l2_lambda = Some(value.parse().map_err(badp)?),
                "max_iters" => cfg.max_iters = Some(value.parse().map_err(badi)?),
                "tolerance" => cfg.tolerance = Some(value.parse().map_err(badp)?),
                "learning_rate" => cfg.learning_rate = Some(value.parse().map_err(badp)?),
                "decision_threshold" => cfg.decision_threshold = Some(value.parse().map_err(badp)?),
                "seed" => cfg.seed = Some(value.parse().map_err(badi)?),
                "threads" => cfg.threads = Some(value.parse().map_err(badi)?),
                "scheme" => cfg.scheme = Some(value.parse().map_err(bad)?),
                "lowercase" => cfg.lowercase = Some(value.parse().map_err(badb)?),
                "lenient" => cfg.lenient = Some(value.parse().map_err(badb)?),
                "in" => cfg.input = Some(PathBuf::from(value)),
                "out" => cfg.out = Some(PathBuf::from(value)),
                "gold" => cfg.gold = Some(PathBuf::from(value)),
                "pred" => cfg.pred = Some(PathBuf::from(value)),
                "model" => cfg.model = Some(PathBuf::from(value)),
                "test" => cfg.test = Some(PathBuf::from(value)),
                "out_dir" => cfg.out_dir = Some(PathBuf::from(value)),
                other => return Err(format!("config line {}: unknown key {other:?}", no + 1)),
            }
        }
        Ok(cfg)
    }

    fn cutoff_for(&self, task: TaskId) -> Option<f64> {
        match task {
            TaskId::A => self.cutoff_a,
            TaskId::B => self.cutoff_b,
            TaskId::C => self.cutoff_c,
        }
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let path = match &cli.config {
        Some(p) => Some(p.clone()),
        None => std::env::var_os("OFFLENS_CONFIG").map(PathBuf::from),
    };
    match path {
        Some(p) => {
            let text = fs::read_to_string(&p)
                .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", p.display())))?;
            RunConfig::parse(&text).map_err(CliError::Usage)
        }
        None => Ok(RunConfig::default()),
    }
}

// -- formatting helpers ------------------------------------------------------

/// Three-decimal table metric in the leading-dot style (".896", "1.000").
pub fn fmt3(x: f64) -> String {
    strip_zero(format!("{x:.3}"))
}

/// Five-decimal macro-F1 (".77136").
pub fn fmt5(x: f64) -> String {
    strip_zero(format!("{x:.5}"))
}

fn strip_zero(s: String) -> String {
    match s.strip_prefix("0.") {
        Some(rest) => format!(".{rest}"),
        None => s,
    }
}

/// Histogram bin boundary: "0", ".1", ".85", "1.0".
fn fmt_boundary(v: f64) -> String {
    if v <= 0.0 {
        return "0".into();
    }
    if (v - 1.0).abs() < 1e-12 {
        return "1.0".into();
    }
    let s = format!("{v:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    strip_zero(s.to_string())
}

/// Confusion matrix in the gold-on-columns orientation with marginals and
/// per-class metrics, followed by the caption-style summary lines.
pub fn render_report(cm: &ConfusionMatrix, report: &MetricsReport) -> String {
    let mut out = String::new();
    let labels = cm.labels();
    out.push('\t');
    out.push_str(
        &labels
            .iter()
            .map(|l| l.to_string())
            .collect::<Vec<_>>()
            .join("\t"),
    );
    out.push_str("\t\tP\tR\tF1\n");
    for (i, l) in labels.iter().enumerate() {
        out.push_str(&l.to_string());
        for j in 0..labels.len() {
            out.push_str(&format!("\t{}", cm.cell(i, j)));
        }
        let c = &report.per_class[i];
        out.push_str(&format!(
            "\t{}\t{}\t{}\t{}\n",
            cm.row_marginal(i),
            fmt3(c.precision),
            fmt3(c.recall),
            fmt3(c.f1)
        ));
    }
    out.push('\t');
    out.push_str(
        &(0..labels.len())
            .map(|j| cm.col_marginal(j).to_string())
            .collect::<Vec<_>>()
            .join("\t"),
    );
    out.push_str(&format!("\t{}\n", cm.total()));
    out.push_str(&format!(
        "accuracy = {}, majority classifier = {}\n",
        fmt3(report.accuracy),
        fmt3(report.majority_baseline)
    ));
    out.push_str(&format!("macro-F1 = {}\n", fmt5(report.macro_f1)));
    out
}

// -- shared resolution helpers ----------------------------------------------

fn need<T: Clone>(flag: Option<T>, fallback: Option<T>, name: &str) -> Result<T, CliError> {
    flag.or(fallback)
        .ok_or_else(|| CliError::Usage(format!("missing --{name} (and no config fallback)")))
}

fn parse_mode(lenient_flag: bool, cfg: &RunConfig) -> ParseMode {
    if lenient_flag || cfg.lenient.unwrap_or(false) {
        ParseMode::Lenient
    } else {
        ParseMode::Strict
    }
}

fn report_skips(report: &LoadReport, path: &Path) {
    if !report.skipped.is_empty() {
        eprintln!(
            "{}: skipped {} of {} lines",
            path.display(),
            report.skipped.len(),
            report.lines
        );
        for (line, issue) in report.skipped.iter().take(10) {
            eprintln!("  line {line}: {issue}");
        }
        if report.skipped.len() > 10 {
            eprintln!("  ... and {} more", report.skipped.len() - 10);
        }
    }
}

fn parse_labels_flag(raw: &str) -> Result<Vec<Label>, CliError> {
    let labels: Vec<Label> = raw
        .split(',')
        .map(|s| s.trim().parse::<Label>())
        .collect::<Result<_, _>>()
        .map_err(CliError::Usage)?;
    if labels.len() < 2 {
        return Err(CliError::Usage("--labels needs at least 2 labels".into()));
    }
    Ok(labels)
}

/// The unique task whose label set contains every given label; the three
/// sets are disjoint, so membership of the first label decides.
fn task_for_labels(labels: &[Label]) -> Result<TaskId, CliError> {
    [TaskId::A, TaskId::B, TaskId::C]
        .into_iter()
        .find(|t| labels.iter().all(|l| t.labels().contains(l)))
        .ok_or_else(|| CliError::Usage(format!("labels {labels:?} do not all belong to one task")))
}

fn kind_flag(kind: &str) -> Result<bool, CliError> {
    match kind {
        "scored" => Ok(true),
        "labeled" => Ok(false),
        other => Err(CliError::Usage(format!(
            "--kind must be scored or labeled, not {other:?}"
        ))),
    }
}

/// Loads (id, text) docs from either corpus kind.
fn load_docs(
    path: &Path,
    task: TaskId,
    scored: bool,
    mode: ParseMode,
) -> Result<Vec<(String, String)>, CliError> {
    let docs = if scored {
        let (corpus, report) = load_scored(path, task, mode)?;
        report_skips(&report, path);
        corpus
            .docs()
            .map(|(i, t)| (i.to_string(), t.to_string()))
            .collect()
    } else {
        let (corpus, report) = load_labeled(path, task, mode)?;
        report_skips(&report, path);
        corpus
            .docs()
            .map(|(i, t)| (i.to_string(), t.to_string()))
            .collect()
    };
    Ok(docs)
}

fn resolve_threshold(flag: Option<f64>, cfg: &RunConfig) -> Result<f64, CliError> {
    let t = flag.or(cfg.decision_threshold).unwrap_or(0.5);
    if !(t > 0.0 && t < 1.0) {
        return Err(CliError::Usage(format!(
            "--threshold {t} must lie strictly inside (0,1)"
        )));
    }
    Ok(t)
}

fn label_counts(records: &[LabeledTweet], labels: &[Label]) -> Vec<(Label, usize)> {
    labels
        .iter()
        .map(|&l| (l, records.iter().filter(|r| r.label == l).count()))
        .collect()
}

// -- subcommand handlers ------------------------------------------------------

fn cmd_label(args: LabelArgs, cfg: &RunConfig) -> Result<(), CliError> {
    let task = need(args.task, cfg.task, "task")?;
    let cutoff = args
        .cutoff
        .or(cfg.cutoff_for(task))
        .unwrap_or_else(|| CutoffPolicy::default_for(task).cutoff);
    let inclusive = !(args.exclusive || cfg.exclusive.unwrap_or(false));
    let policy = CutoffPolicy::new(task, cutoff, inclusive)
        .map_err(|e| CliError::Usage(format!("--cutoff: {e}")))?;
    let input = need(args.input, cfg.input.clone(), "in")?;
    let out = need(args.out, cfg.out.clone(), "out")?;
    let (corpus, report) = load_scored(&input, task, parse_mode(args.lenient, cfg))?;
    report_skips(&report, &input);
    let (labeled, policy_report) = apply_policy(&corpus, &policy)?;
    write_labeled(&labeled, &out)?;
    for (label, count) in &policy_report.counts {
        println!("{label}\t{count}");
    }
    println!("excluded\t{}", policy_report.excluded);
    Ok(())
}

fn cmd_dist(args: DistArgs, cfg: &RunConfig) -> Result<(), CliError> {
    let task = args.task.or(cfg.task).unwrap_or(TaskId::A);
    let input = need(args.input, cfg.input.clone(), "in")?;
    if args.column >= task.score_arity() {
        return Err(CliError::Usage(format!(
            "--column {} out of range for task {task} ({} score column(s))",
            args.column,
            task.score_arity()
        )));
    }
    let (corpus, report) = load_scored(&input, task, parse_mode(args.lenient, cfg))?;
    report_skips(&report, &input);
    let scores: Vec<f64> = corpus
        .records
        .iter()
        .map(|r| r.scores[args.column])
        .collect();
    let hist = score_histogram(&scores, args.bin_width)
        .map_err(|e| CliError::Usage(format!("--bin-width: {e}")))?;
    println!("range\tproportion\tcount");
    let props = hist.proportions();
    for (i, (&count, prop)) in hist.counts.iter().zip(props.iter()).enumerate() {
        let lo = fmt_boundary(i as f64 * hist.bin_width);
        let hi = fmt_boundary((i + 1) as f64 * hist.bin_width);
        println!("{lo} - {hi}\t{prop:.3}\t{count}");
    }
    println!("total\t{:.3}\t{}", props.iter().sum::<f64>(), hist.total);
    if args.stats {
        let s = summary_stats(&scores)?;
        println!("median\t{:.5}", s.median);
        println!("mean\t{:.5}", s.mean);
        println!("std\t{:.5}", s.std);
    }
    Ok(())
}

fn resolve_glm_config(args: &TrainArgs, cfg: &RunConfig) -> GlmConfig {
    let defaults = GlmConfig::default();
    GlmConfig {
        l2_lambda: args
            .l2_lambda
            .or(cfg.l2_lambda)
            .unwrap_or(defaults.l2_lambda),
        max_iters: args
            .max_iters
            .or(cfg.max_iters)
            .unwrap_or(defaults.max_iters),
        tolerance: args
            .tolerance
            .or(cfg.tolerance)
            .unwrap_or(defaults.tolerance),
        learning_rate: args
            .learning_rate
            .or(cfg.learning_rate)
            .unwrap_or(defaults.learning_rate),
        seed: cfg.seed.unwrap_or(defaults.seed),
        class_weights: None,
        decision_threshold: cfg
            .decision_threshold
            .unwrap_or(defaults.decision_threshold),
    }
}

fn cmd_train(args: TrainArgs, cfg: &RunConfig) -> Result<(), CliError> {
    let task = need(args.task, cfg.task, "task")?;
    let input = need(args.input.clone(), cfg.input.clone(), "in")?;
    let model_path = need(args.model.clone(), cfg.model.clone(), "model")?;
    let (corpus, report) = load_labeled(&input, task, parse_mode(args.lenient, cfg))?;
    report_skips(&report, &input);

    let features = FeatureConfig {
        scheme: if args.counts {
            FeatureScheme::Counts
        } else {
            cfg.scheme.unwrap_or(FeatureScheme::Presence)
        },
        lowercase: if args.no_lowercase {
            false
        } else {
            cfg.lowercase.unwrap_or(true)
        },
    };
    let min_df = args.min_df.or(cfg.min_df).unwrap_or(2);
    if min_df == 0 {
        return Err(CliError::Usage("--min-df must be at least 1".into()));
    }

    let docs: Vec<Vec<Token>> = corpus
        .records
        .iter()
        .map(|r| tokenize(&clean_with(&r.text, features.lowercase)))
        .collect();
    let vocab = fit_vocabulary(&docs, min_df);
    let xs: Vec<SparseVector> = docs
        .iter()
        .map(|d| vectorize(d, &vocab, features.scheme))
        .collect();
    let ys: Vec<Label> = corpus.records.iter().map(|r| r.label).collect();

    let labels = task.labels();
    let kind = match task {
        TaskId::A | TaskId::B => ModelKind::Binary,
        TaskId::C => ModelKind::Multinomial,
    };
    let mut glm_cfg = resolve_glm_config(&args, cfg);
    match args.class_weights.as_str() {
        "uniform" => {}
        "balanced" => {
            let n = ys.len() as f64;
            let k = labels.len() as f64;
            let weights = labels
                .iter()
                .map(|&l| {
                    let count = ys.iter().filter(|&&y| y == l).count();
                    if count == 0 {
                        1.0
                    } else {
                        n / (k * count as f64)
                    }
                })
                .collect();
            glm_cfg.class_weights = Some(weights);
        }
        other => {
            return Err(CliError::Usage(format!(
                "--class-weights must be uniform or balanced, not {other:?}"
            )))
        }
    }
    glm_cfg
        .validate(labels.len())
        .map_err(|e| CliError::Usage(e.to_string()))?;

    let outcome = train(&xs, &ys, labels, kind, &vocab, features, &glm_cfg)?;
    for w in &outcome.report.warnings {
        eprintln!("warning: {w}");
    }
    save_model(&outcome.model, &model_path)?;
    println!(
        "trained {kind} model: {} docs, {} features, {} iterations, final loss {:.6}",
        xs.len(),
        vocab.size(),
        outcome.report.iterations,
        outcome.report.losses.last().copied().unwrap_or(f64::NAN)
    );
    Ok(())
}

fn cmd_predict(args: PredictArgs, cfg: &RunConfig) -> Result<(), CliError> {
    let model_path = need(args.model, cfg.model.clone(), "model")?;
    let input = need(args.input, cfg.input.clone(), "in")?;
    let out = need(args.out, cfg.out.clone(), "out")?;
    let model = load_model(&model_path)?;
    let task = task_for_labels(&model.labels)?;
    let threshold = resolve_threshold(args.threshold, cfg)?;
    let docs = load_docs(
        &input,
        task,
        kind_flag(&args.kind)?,
        parse_mode(args.lenient, cfg),
    )?;
    let mut predicted = Corpus::new(task);
    for (id, text) in docs {
        let label = model.predict_text(&text, threshold);
        predicted.records.push(LabeledTweet { id, text, label });
    }
    write_labeled(&predicted, &out)?;
    for (label, count) in label_counts(&predicted.records, task.labels()) {
        println!("{label}\t{count}");
    }
    Ok(())
}

fn cmd_evaluate(args: EvaluateArgs, cfg: &RunConfig) -> Result<(), CliError> {
    let labels: Vec<Label> = match (&args.labels, args.task.or(cfg.task)) {
        (Some(raw), _) => parse_labels_flag(raw)?,
        (None, Some(task)) => task.labels().to_vec(),
        (None, None) => return Err(CliError::Usage("need --labels or --task".into())),
    };
    let task = task_for_labels(&labels)?;
    let gold_path = need(args.gold, cfg.gold.clone(), "gold")?;
    let pred_path = need(args.pred, cfg.pred.clone(), "pred")?;
    let (gold, _) = load_labeled(&gold_path, task, ParseMode::Strict)?;
    let (pred, _) = load_labeled(&pred_path, task, ParseMode::Strict)?;
    if gold.len() != pred.len() {
        return Err(CliError::Data(format!(
            "LengthMismatch: gold file has {} records, predictions file has {}",
            gold.len(),
            pred.len()
        )));
    }
    let pred_by_id: HashMap<&str, Label> = pred
        .records
        .iter()
        .map(|r| (r.id.as_str(), r.label))
        .collect();
    let mut gold_seq = Vec::with_capacity(gold.len());
    let mut pred_seq = Vec::with_capacity(gold.len());
    for r in &gold.records {
        let p = pred_by_id
            .get(r.id.as_str())
            .copied()
            .ok_or_else(|| CliError::Data(format!("UnknownId: {:?} has no prediction", r.id)))?;
        gold_seq.push(r.label);
        pred_seq.push(p);
    }
    let cm = build_confusion(&gold_seq, &pred_seq, &labels)?;
    let report = metrics(&cm)?;
    print!("{}", render_report(&cm, &report));
    Ok(())
}

fn cmd_audit(args: AuditArgs, cfg: &RunConfig) -> Result<(), CliError> {
    let counts_path = need(args.counts, None, "counts")?;
    let published_path = need(args.published, None, "published")?;
    let _ = cfg;
    let cm = parse_counts_tsv(&fs::read_to_string(&counts_path)?)?;
    let published = parse_published_tsv(&fs::read_to_string(&published_path)?)?;
    let found = audit_table(&cm, &published, args.tolerance)?;
    if found.is_empty() {
        println!("no discrepancies at tolerance {}", args.tolerance);
    } else {
        for d in &found {
            println!(
                "{}: published {}, computed {}",
                d.metric,
                fmt3(d.published),
                fmt3(d.computed)
            );
        }
    }
    Ok(())
}

fn cmd_cascade(args: CascadeArgs, cfg: &RunConfig) -> Result<(), CliError> {
    let test = need(args.test, cfg.test.clone(), "test")?;
    let out_dir = need(args.out_dir, cfg.out_dir.clone(), "out-dir")?;
    let model_a = need(args.model_a, None, "model-a")?;
    let model_b = need(args.model_b, None, "model-b")?;
    let model_c = need(args.model_c, None, "model-c")?;
    let threshold = resolve_threshold(args.threshold, cfg)?;
    let models = CascadeModels::new(
        load_model(&model_a)?,
        load_model(&model_b)?,
        load_model(&model_c)?,
    )?;
    let docs = load_docs(
        &test,
        TaskId::A,
        kind_flag(&args.kind)?,
        parse_mode(args.lenient, cfg),
    )?;
    let result = run_cascade(
        docs.iter().map(|(i, t)| (i.as_str(), t.as_str())),
        &models,
        threshold,
    );

    let texts: HashMap<&str, &str> = docs.iter().map(|(i, t)| (i.as_str(), t.as_str())).collect();
    fs::create_dir_all(&out_dir)?;
    for (task, preds, file) in [
        (TaskId::A, &result.task_a, "pred_a.tsv"),
        (TaskId::B, &result.task_b, "pred_b.tsv"),
        (TaskId::C, &result.task_c, "pred_c.tsv"),
    ] {
        let mut corpus = Corpus::new(task);
        for (id, label) in preds {
            corpus.records.push(LabeledTweet {
                id: id.clone(),
                text: texts[id.as_str()].to_string(),
                label: *label,
            });
        }
        write_labeled(&corpus, &out_dir.join(file))?;
        println!("{task}\t{}", preds.len());
    }
    Ok(())
}

fn cmd_sample(args: SampleArgs, cfg: &RunConfig) -> Result<(), CliError> {
    let task = task_for_labels(&[args.cell.gold, args.cell.pred])?;
    let gold_path = need(args.gold, cfg.gold.clone(), "gold")?;
    let pred_path = need(args.pred, cfg.pred.clone(), "pred")?;
    let out = need(args.out, cfg.out.clone(), "out")?;
    let seed = args.seed.or(cfg.seed).unwrap_or(0);
    let (gold, _) = load_labeled(&gold_path, task, ParseMode::Strict)?;
    let (pred, _) = load_labeled(&pred_path, task, ParseMode::Strict)?;
    let lexicon = match &args.lexicon {
        Some(path) => read_lexicon(path)?,
        None => Vec::new(),
    };
    let report = sample_cell(&gold, &pred, args.cell, args.n, args.trials, seed)?;
    let texts: HashMap<String, String> = gold
        .records
        .iter()
        .map(|r| (r.id.clone(), r.text.clone()))
        .collect();
    write_sample_review(&report, &texts, &lexicon, &out)?;
    println!(
        "cell {}: {} trials of up to {} ids (seed {seed}) -> {}",
        report.cell,
        report.trials.len(),
        report.n_per_trial,
        out.display()
    );
    Ok(())
}

fn read_lexicon(path: &Path) -> Result<Vec<String>, CliError> {
    let mut terms = Vec::new();
    for raw in fs::read_to_string(path)?.lines() {
        let term = raw.split('#').next().unwrap_or("").trim();
        if !term.is_empty() {
            terms.push(term.to_string());
        }
    }
    Ok(terms)
}

fn cmd_redact(args: RedactArgs) -> Result<(), CliError> {
    let lexicon = read_lexicon(&args.lexicon)?;
    let input = match &args.input {
        Some(p) => fs::read_to_string(p)?,
        None => {
            let mut buf = String::new();
            for line in std::io::stdin().lock().lines() {
                buf.push_str(&line?);
                buf.push('\n');
            }
            buf
        }
    };
    let mut out = String::with_capacity(input.len());
    for line in input.lines() {
        out.push_str(&crate::cascade::redact(line, &lexicon)?);
        out.push('\n');
    }
    match &args.out {
        Some(p) => fs::write(p, out)?,
        None => {
            std::io::stdout().write_all(out.as_bytes())?;
        }
    }
    Ok(())
}

fn cmd_synth(args: SynthArgs, cfg: &RunConfig) -> Result<(), CliError> {
    let task = need(args.task, cfg.task, "task")?;
    let out_dir = need(args.out_dir, cfg.out_dir.clone(), "out-dir")?;
    let seed = args.seed.or(cfg.seed).unwrap_or(0);
    let synth_cfg = SynthConfig {
        task,
        docs: args.docs,
        marked_fraction: args.marked,
        seed,
        holdout: args.holdout,
        holdout_marked: args.holdout_marked,
    };
    let output = generate(&synth_cfg)?;
    fs::create_dir_all(&out_dir)?;
    let write_pair = |scored: &crate::corpus::ScoredCorpus,
                      gold: &LabeledCorpus,
                      scored_name: &str,
                      gold_name: &str|
     -> Result<(), CliError> {
        crate::corpus::write_scored(scored, &out_dir.join(scored_name))?;
        write_labeled(gold, &out_dir.join(gold_name))?;
        println!("{scored_name}\t{}", scored.len());
        println!("{gold_name}\t{}", gold.len());
        Ok(())
    };
    match (&output.holdout_scored, &output.holdout_gold) {
        (Some(hs), Some(hg)) => {
            write_pair(
                &output.train_scored,
                &output.train_gold,
                "train_scored.tsv",
                "train_gold.tsv",
            )?;
            write_pair(hs, hg, "test_scored.tsv", "test_gold.tsv")?;
        }
        _ => {
            write_pair(
                &output.train_scored,
                &output.train_gold,
                "scored.tsv",
                "gold.tsv",
            )?;
        }
    }
    Ok(())
}

// -- entry points --------------------------------------------------------------

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let cfg = load_config(&cli)?;
    if let Some(threads) = cli.threads.or(cfg.threads) {
        if threads == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
    }
    match cli.command {
        Command::Label(args) => cmd_label(args, &cfg),
        Command::Dist(args) => cmd_dist(args, &cfg),
        Command::Train(args) => cmd_train(args, &cfg),
        Command::Predict(args) => cmd_predict(args, &cfg),
        Command::Evaluate(args) => cmd_evaluate(args, &cfg),
        Command::Audit(args) => cmd_audit(args, &cfg),
        Command::Cascade(args) => cmd_cascade(args, &cfg),
        Command::Sample(args) => cmd_sample(args, &cfg),
        Command::Redact(args) => cmd_redact(args),
        Command::Synth(args) => cmd_synth(args, &cfg),
    }
}

/// Runs the CLI on the given argv and returns the exit code: 0 success,
/// 1 data error, 2 usage error.
pub fn run_from<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(CliError::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            2
        }
        Err(CliError::Data(msg)) => {
            eprintln!("error: {msg}");
            1
        }
    }
}

pub fn run() -> i32 {
    run_from(std::env::args_os())
}
