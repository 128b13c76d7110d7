//! L2-regularized logistic regression over sparse vectors.
//!
//! Binary models use the sigmoid and predict the first label of their
//! label order; multinomial models use the softmax. Training is full-batch
//! gradient descent with step halving on any loss increase, so the
//! accepted-loss sequence is non-increasing and the whole procedure is
//! deterministic given the dataset order and configuration. Weights start
//! at zero; the objective is convex, so no restarts are needed.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::corpus::Label;
use crate::text::{featurize, FeatureConfig, FeatureScheme, SparseVector, Vocabulary};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GlmError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("loss became non-finite during training")]
    NonFinite,
    #[error("label {0} not in the model's label order")]
    UnknownLabel(Label),
    #[error("empty dataset")]
    EmptyDataset,
    #[error("batch has {xs} vectors but {ys} labels")]
    BatchMismatch { xs: usize, ys: usize },
    #[error("invalid configuration: {0}")]
    BadConfig(String),
    #[error("model file line {line}: {reason}")]
    ModelFormat { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Binary,
    Multinomial,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelKind::Binary => write!(f, "binary"),
            ModelKind::Multinomial => write!(f, "multinomial"),
        }
    }
}

impl FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "binary" => Ok(ModelKind::Binary),
            "multinomial" => Ok(ModelKind::Multinomial),
            other => Err(format!("unknown model kind {other:?}")),
        }
    }
}

/// Training and decision hyperparameters. The defaults are artifact
/// conventions: nothing upstream prescribes them.
#[derive(Debug, Clone, PartialEq)]
pub struct GlmConfig {
    pub l2_lambda: f64,
    pub max_iters: usize,
    pub tolerance: f64,
    pub learning_rate: f64,
    pub seed: u64,
    /// Per-class loss weights aligned to the label order; None = uniform.
    pub class_weights: Option<Vec<f64>>,
    /// Binary decision boundary on p(first label); inclusive.
    pub decision_threshold: f64,
}

impl Default for GlmConfig {
    fn default() -> Self {
        GlmConfig {
            l2_lambda: 1e-4,
            max_iters: 200,
            tolerance: 1e-6,
            learning_rate: 0.1,
            seed: 0,
            class_weights: None,
            decision_threshold: 0.5,
        }
    }
}

impl GlmConfig {
    pub fn validate(&self, n_labels: usize) -> Result<(), GlmError> {
        if self.l2_lambda < 0.0 || !self.l2_lambda.is_finite() {
            return Err(GlmError::BadConfig(format!(
                "l2_lambda {} must be >= 0",
                self.l2_lambda
            )));
        }
        if self.max_iters == 0 {
            return Err(GlmError::BadConfig("max_iters must be >= 1".into()));
        }
        if self.tolerance < 0.0 {
            return Err(GlmError::BadConfig(format!(
                "tolerance {} must be >= 0",
                self.tolerance
            )));
        }
        if self.learning_rate <= 0.0 {
            return Err(GlmError::BadConfig(format!(
                "learning_rate {} must be > 0",
                self.learning_rate
            )));
        }
        if !(self.decision_threshold > 0.0 && self.decision_threshold < 1.0) {
            return Err(GlmError::BadConfig(format!(
                "decision_threshold {} must lie strictly inside (0,1)",
                self.decision_threshold
            )));
        }
        if let Some(w) = &self.class_weights {
            if w.len() != n_labels {
                return Err(GlmError::BadConfig(format!(
                    "class_weights has {} entries for {} labels",
                    w.len(),
                    n_labels
                )));
            }
            if w.iter().any(|&x| x <= 0.0 || !x.is_finite()) {
                return Err(GlmError::BadConfig("class_weights must be positive".into()));
            }
        }
        Ok(())
    }
}

/// Trained classifier: weight rows (one for binary, one per class for
/// multinomial), intercepts, the label order, and the featurization it was
/// trained with.
#[derive(Debug, Clone, PartialEq)]
pub struct GlmModel {
    pub kind: ModelKind,
    pub weights: Vec<Vec<f64>>,
    pub intercepts: Vec<f64>,
    pub labels: Vec<Label>,
    pub vocab: Vocabulary,
    pub features: FeatureConfig,
    /// L2 strength used at training time, recorded for provenance.
    pub l2_lambda: f64,
}

impl GlmModel {
    pub fn dim(&self) -> usize {
        self.vocab.size()
    }

    fn n_rows(&self) -> usize {
        match self.kind {
            ModelKind::Binary => 1,
            ModelKind::Multinomial => self.labels.len(),
        }
    }

    fn check_dim(&self, x: &SparseVector) -> Result<(), GlmError> {
        if x.dim() != self.dim() {
            return Err(GlmError::DimensionMismatch {
                expected: self.dim(),
                found: x.dim(),
            });
        }
        Ok(())
    }

    fn scores(&self, x: &SparseVector) -> Vec<f64> {
        self.weights
            .iter()
            .zip(self.intercepts.iter())
            .map(|(w, b)| x.dot(w) + b)
            .collect()
    }

    /// Per-class probabilities over the label order; they sum to 1 within
    /// 1e-9. Binary models return (p, 1-p).
    pub fn predict_proba(&self, x: &SparseVector) -> Result<Vec<f64>, GlmError> {
        self.check_dim(x)?;
        let z = self.scores(x);
        Ok(match self.kind {
            ModelKind::Binary => {
                let p = sigmoid(z[0]);
                vec![p, 1.0 - p]
            }
            ModelKind::Multinomial => softmax(&z),
        })
    }

    /// Decision rule: binary models take the first label when its
    /// probability reaches the threshold (inclusive); multinomial models
    /// take the argmax, ties resolved to the earlier label.
    pub fn predict(&self, x: &SparseVector, threshold: f64) -> Result<Label, GlmError> {
        let proba = self.predict_proba(x)?;
        Ok(match self.kind {
            ModelKind::Binary => {
                if proba[0] >= threshold {
                    self.labels[0]
                } else {
                    self.labels[1]
                }
            }
            ModelKind::Multinomial => {
                let mut best = 0;
                for (i, &p) in proba.iter().enumerate() {
                    if p > proba[best] {
                        best = i;
                    }
                }
                self.labels[best]
            }
        })
    }

    /// Featurizes raw text with the model's own vocabulary and recipe,
    /// then predicts.
    pub fn predict_text(&self, text: &str, threshold: f64) -> Label {
        let x = featurize(text, &self.vocab, &self.features);
        self.predict(&x, threshold)
            .expect("model-owned vocabulary matches its dimension")
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// ln(1 + e^t) without overflow.
fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = z.iter().map(|&v| (v - m).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|&e| e / sum).collect()
}

fn log_sum_exp(z: &[f64]) -> f64 {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + z.iter().map(|&v| (v - m).exp()).sum::<f64>().ln()
}

/// Gradient of the regularized loss, shaped like the model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub weights: Vec<Vec<f64>>,
    pub intercepts: Vec<f64>,
}

fn class_indices(ys: &[Label], labels: &[Label]) -> Result<Vec<usize>, GlmError> {
    ys.iter()
        .map(|y| {
            labels
                .iter()
                .position(|l| l == y)
                .ok_or(GlmError::UnknownLabel(*y))
        })
        .collect()
}

/// Mean cross-entropy plus (lambda/2)·||weights||², intercepts excluded
/// from the penalty, and its exact analytic gradient. Class weights scale
/// each example's contribution and the normalizer is the total weight, so
/// uniform weights reduce to the plain mean.
pub fn loss_and_gradient(
    model: &GlmModel,
    xs: &[SparseVector],
    ys: &[Label],
    cfg: &GlmConfig,
) -> Result<(f64, Gradient), GlmError> {
    if xs.len() != ys.len() {
        return Err(GlmError::BatchMismatch {
            xs: xs.len(),
            ys: ys.len(),
        });
    }
    if xs.is_empty() {
        return Err(GlmError::EmptyDataset);
    }
    for x in xs {
        model.check_dim(x)?;
    }
    let y_idx = class_indices(ys, &model.labels)?;
    let uniform = vec![1.0; model.labels.len()];
    let cw: &[f64] = cfg.class_weights.as_deref().unwrap_or(&uniform);

    let rows = model.n_rows();
    let dim = model.dim();
    let mut grad_w = vec![vec![0.0; dim]; rows];
    let mut grad_b = vec![0.0; rows];
    let mut data_loss = 0.0;
    let mut total_weight = 0.0;

    for (x, &y) in xs.iter().zip(y_idx.iter()) {
        let w = cw[y];
        total_weight += w;
        match model.kind {
            ModelKind::Binary => {
                let z = model.scores(x)[0];
                let target = if y == 0 { 1.0 } else { 0.0 };
                // -[y ln p + (1-y) ln(1-p)] for p = sigmoid(z)
                data_loss += w * (target * softplus(-z) + (1.0 - target) * softplus(z));
                let residual = sigmoid(z) - target;
                for (i, v) in x.iter() {
                    grad_w[0][i] += w * residual * v;
                }
                grad_b[0] += w * residual;
            }
            ModelKind::Multinomial => {
                let z = model.scores(x);
                let lse = log_sum_exp(&z);
                data_loss += w * (lse - z[y]);
                let proba = softmax(&z);
                for k in 0..rows {
                    let residual = proba[k] - if k == y { 1.0 } else { 0.0 };
                    for (i, v) in x.iter() {
                        grad_w[k][i] += w * residual * v;
                    }
                    grad_b[k] += w * residual;
                }
            }
        }
    }

    let mut loss = data_loss / total_weight;
    for (grow, wrow) in grad_w.iter_mut().zip(model.weights.iter()) {
        for (g, &w) in grow.iter_mut().zip(wrow.iter()) {
            *g = *g / total_weight + cfg.l2_lambda * w;
            loss += 0.5 * cfg.l2_lambda * w * w;
        }
    }
    for g in grad_b.iter_mut() {
        *g /= total_weight;
    }
    Ok((
        loss,
        Gradient {
            weights: grad_w,
            intercepts: grad_b,
        },
    ))
}

/// Accounting from one training run. The loss sequence holds the initial
/// loss followed by every accepted step's loss and is non-increasing.
#[derive(Debug, Clone, Default)]
pub struct TrainReport {
    pub iterations: usize,
    pub losses: Vec<f64>,
    pub converged: bool,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: GlmModel,
    pub report: TrainReport,
}

fn zero_model(
    kind: ModelKind,
    labels: &[Label],
    vocab: &Vocabulary,
    features: FeatureConfig,
    lambda: f64,
) -> GlmModel {
    let rows = match kind {
        ModelKind::Binary => 1,
        ModelKind::Multinomial => labels.len(),
    };
    GlmModel {
        kind,
        weights: vec![vec![0.0; vocab.size()]; rows],
        intercepts: vec![0.0; rows],
        labels: labels.to_vec(),
        vocab: vocab.clone(),
        features,
        l2_lambda: lambda,
    }
}

fn stepped(model: &GlmModel, grad: &Gradient, lr: f64) -> GlmModel {
    let mut next = model.clone();
    for (row, grow) in next.weights.iter_mut().zip(grad.weights.iter()) {
        for (w, g) in row.iter_mut().zip(grow.iter()) {
            *w -= lr * g;
        }
    }
    for (b, g) in next.intercepts.iter_mut().zip(grad.intercepts.iter()) {
        *b -= lr * g;
    }
    next
}

const MIN_STEP: f64 = 1e-20;

/// Full-batch gradient descent from all-zero weights with step halving on
/// any loss increase. Stops when the relative loss decrease falls below
/// the tolerance, when no step size improves the loss, or at `max_iters`.
/// A dataset with a single present class yields a constant-probability
/// model (Laplace-smoothed intercepts) plus a warning instead of failing.
pub fn train(
    xs: &[SparseVector],
    ys: &[Label],
    labels: &[Label],
    kind: ModelKind,
    vocab: &Vocabulary,
    features: FeatureConfig,
    cfg: &GlmConfig,
) -> Result<TrainOutcome, GlmError> {
    if xs.is_empty() || ys.is_empty() {
        return Err(GlmError::EmptyDataset);
    }
    if xs.len() != ys.len() {
        return Err(GlmError::BatchMismatch {
            xs: xs.len(),
            ys: ys.len(),
        });
    }
    match kind {
        ModelKind::Binary => {
            if labels.len() != 2 {
                return Err(GlmError::BadConfig(format!(
                    "binary model needs exactly 2 labels, got {}",
                    labels.len()
                )));
            }
        }
        ModelKind::Multinomial => {
            if labels.len() < 2 {
                return Err(GlmError::BadConfig(
                    "multinomial model needs >= 2 labels".into(),
                ));
            }
        }
    }
    cfg.validate(labels.len())?;
    let y_idx = class_indices(ys, labels)?;
    for x in xs {
        if x.dim() != vocab.size() {
            return Err(GlmError::DimensionMismatch {
                expected: vocab.size(),
                found: x.dim(),
            });
        }
    }

    let mut class_counts = vec![0usize; labels.len()];
    for &y in &y_idx {
        class_counts[y] += 1;
    }
    let present = class_counts.iter().filter(|&&c| c > 0).count();

    let mut model = zero_model(kind, labels, vocab, features, cfg.l2_lambda);
    let mut report = TrainReport::default();

    if present < 2 {
        // Laplace-smoothed log frequencies keep every probability finite.
        let n = y_idx.len() as f64;
        match kind {
            ModelKind::Binary => {
                let p = (class_counts[0] as f64 + 1.0) / (n + 2.0);
                model.intercepts[0] = (p / (1.0 - p)).ln();
            }
            ModelKind::Multinomial => {
                let k = labels.len() as f64;
                for (b, &c) in model.intercepts.iter_mut().zip(class_counts.iter()) {
                    *b = ((c as f64 + 1.0) / (n + k)).ln();
                }
            }
        }
        let (loss, _) = loss_and_gradient(&model, xs, ys, cfg)?;
        report.losses.push(loss);
        report.converged = true;
        report.warnings.push(format!(
            "degenerate labels: only {present} of {} classes present; returning a constant-probability model",
            labels.len()
        ));
        return Ok(TrainOutcome { model, report });
    }

    let (mut loss, mut grad) = loss_and_gradient(&model, xs, ys, cfg)?;
    if !loss.is_finite() || grad.intercepts.iter().any(|g| !g.is_finite()) {
        return Err(GlmError::NonFinite);
    }
    report.losses.push(loss);
    let mut lr = cfg.learning_rate;

    for _ in 0..cfg.max_iters {
        let mut accepted = false;
        while lr > MIN_STEP {
            let candidate = stepped(&model, &grad, lr);
            let (cand_loss, cand_grad) = loss_and_gradient(&candidate, xs, ys, cfg)?;
            if cand_loss.is_finite() && cand_loss <= loss {
                let rel = (loss - cand_loss) / loss.abs().max(f64::EPSILON);
                model = candidate;
                loss = cand_loss;
                grad = cand_grad;
                report.losses.push(loss);
                report.iterations += 1;
                accepted = true;
                if rel < cfg.tolerance {
                    report.converged = true;
                }
                break;
            }
            lr /= 2.0;
        }
        if !accepted {
            report.converged = true;
        }
        if report.converged {
            break;
        }
    }
    Ok(TrainOutcome { model, report })
}

// ---------------------------------------------------------------------------
// Persistence: a line-oriented text format. Floats are written in Rust's
// shortest round-trip form, so a loaded model predicts bit-identically.

fn fmt_sparse_row(row: &[f64]) -> String {
    let mut parts = Vec::new();
    for (i, &v) in row.iter().enumerate() {
        if v != 0.0 {
            parts.push(format!("{i}:{v}"));
        }
    }
    parts.join(" ")
}

pub fn model_to_string(model: &GlmModel) -> String {
    let mut out = String::new();
    out.push_str("offlens glm v1\n");
    out.push_str(&format!("kind\t{}\n", model.kind));
    let labels: Vec<&str> = model.labels.iter().map(|l| l.as_str()).collect();
    out.push_str(&format!("labels\t{}\n", labels.join(",")));
    out.push_str(&format!("lambda\t{}\n", model.l2_lambda));
    out.push_str(&format!("scheme\t{}\n", model.features.scheme));
    out.push_str(&format!("lowercase\t{}\n", model.features.lowercase));
    out.push_str(&format!("dim\t{}\n", model.dim()));
    let intercepts: Vec<String> = model.intercepts.iter().map(|b| b.to_string()).collect();
    out.push_str(&format!("intercepts\t{}\n", intercepts.join(",")));
    for (k, row) in model.weights.iter().enumerate() {
        out.push_str(&format!("w\t{k}\t{}\n", fmt_sparse_row(row)));
    }
    out.push_str(&format!(
        "vocab\t{}\t{}\n",
        model.vocab.size(),
        model.vocab.min_df()
    ));
    out.push_str(&model.vocab.to_tsv());
    out.push_str("end\n");
    out
}

pub fn save_model(model: &GlmModel, path: &Path) -> Result<(), GlmError> {
    fs::write(path, model_to_string(model))?;
    Ok(())
}

fn format_err(line: usize, reason: impl Into<String>) -> GlmError {
    GlmError::ModelFormat {
        line,
        reason: reason.into(),
    }
}

struct LineCursor<'a> {
    lines: Vec<&'a str>,
    pos: usize,
}

impl<'a> LineCursor<'a> {
    fn line_no(&self) -> usize {
        self.pos
    }

    fn err(&self, reason: impl Into<String>) -> GlmError {
        format_err(self.pos, reason)
    }

    fn raw(&mut self) -> Result<&'a str, GlmError> {
        let line = self
            .lines
            .get(self.pos)
            .ok_or_else(|| format_err(self.pos + 1, "unexpected end of file"))?;
        self.pos += 1;
        Ok(line)
    }

    /// Consumes a `key\tvalue` line, returning the value.
    fn keyed(&mut self, expect: &str) -> Result<&'a str, GlmError> {
        let line = self.raw()?;
        let (key, rest) = line
            .split_once('\t')
            .ok_or_else(|| self.err(format!("expected `{expect}\\t...`")))?;
        if key != expect {
            return Err(self.err(format!("expected key {expect:?}, found {key:?}")));
        }
        Ok(rest)
    }
}

pub fn model_from_str(text: &str) -> Result<GlmModel, GlmError> {
    let mut cur = LineCursor {
        lines: text.lines().collect(),
        pos: 0,
    };

    if cur.raw()? != "offlens glm v1" {
        return Err(format_err(1, "not an offlens glm v1 model file"));
    }
    let kind: ModelKind = cur.keyed("kind")?.parse().map_err(|e: String| cur.err(e))?;
    let labels: Vec<Label> = cur
        .keyed("labels")?
        .split(',')
        .map(|s| s.parse::<Label>())
        .collect::<Result<_, _>>()
        .map_err(|e| cur.err(e))?;
    let lambda: f64 = cur
        .keyed("lambda")?
        .parse()
        .map_err(|_| cur.err("bad lambda"))?;
    let scheme: FeatureScheme = cur
        .keyed("scheme")?
        .parse()
        .map_err(|e: String| cur.err(e))?;
    let lowercase: bool = cur
        .keyed("lowercase")?
        .parse()
        .map_err(|_| cur.err("bad lowercase flag"))?;
    let dim: usize = cur.keyed("dim")?.parse().map_err(|_| cur.err("bad dim"))?;
    let intercepts: Vec<f64> = cur
        .keyed("intercepts")?
        .split(',')
        .map(|s| s.parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| cur.err("bad intercepts"))?;
    let rows = match kind {
        ModelKind::Binary => 1,
        ModelKind::Multinomial => labels.len(),
    };
    if kind == ModelKind::Binary && labels.len() != 2 {
        return Err(cur.err("binary model must list exactly 2 labels"));
    }
    if intercepts.len() != rows {
        return Err(cur.err(format!("expected {rows} intercepts")));
    }
    let mut weights = vec![vec![0.0; dim]; rows];
    for (k, row) in weights.iter_mut().enumerate() {
        let rest = cur.keyed("w")?;
        let (row_no, entries) = rest
            .split_once('\t')
            .ok_or_else(|| cur.err("weight row needs `w\\t<k>\\t<entries>`"))?;
        let row_no: usize = row_no
            .parse()
            .map_err(|_| cur.err("bad weight row index"))?;
        if row_no != k {
            return Err(cur.err(format!("weight rows out of order: {row_no} != {k}")));
        }
        for entry in entries.split(' ').filter(|e| !e.is_empty()) {
            let (i, v) = entry
                .split_once(':')
                .ok_or_else(|| cur.err(format!("bad weight entry {entry:?}")))?;
            let i: usize = i.parse().map_err(|_| cur.err("bad weight index"))?;
            let v: f64 = v.parse().map_err(|_| cur.err("bad weight value"))?;
            if i >= dim {
                return Err(cur.err(format!("weight index {i} exceeds dim {dim}")));
            }
            row[i] = v;
        }
    }
    let vocab_header = cur.keyed("vocab")?;
    let (size, min_df) = vocab_header
        .split_once('\t')
        .ok_or_else(|| cur.err("vocab header needs `vocab\\t<size>\\t<min_df>`"))?;
    let size: usize = size.parse().map_err(|_| cur.err("bad vocab size"))?;
    let min_df: u32 = min_df.parse().map_err(|_| cur.err("bad vocab min_df"))?;
    if size != dim {
        return Err(cur.err(format!("vocab size {size} != dim {dim}")));
    }
    if cur.lines.len() < cur.pos + size + 1 {
        return Err(format_err(cur.lines.len(), "unexpected end of file"));
    }
    let start = cur.line_no();
    let vocab = Vocabulary::from_tsv_lines(cur.lines[start..start + size].iter().copied(), min_df)
        .map_err(|e| format_err(start + 1, e))?;
    cur.pos += size;
    if cur.raw()? != "end" {
        return Err(cur.err("missing end marker"));
    }
    Ok(GlmModel {
        kind,
        weights,
        intercepts,
        labels,
        vocab,
        features: FeatureConfig { scheme, lowercase },
        l2_lambda: lambda,
    })
}

pub fn load_model(path: &Path) -> Result<GlmModel, GlmError> {
    model_from_str(&fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;
    use crate::text::{fit_vocabulary, Token};

    fn vocab_of(dim: usize) -> Vocabulary {
        let docs: Vec<Vec<Token>> = (0..dim)
            .map(|i| vec![Token::new(format!("t{i:04}"))])
            .collect();
        let v = fit_vocabulary(&docs, 1);
        assert_eq!(v.size(), dim);
        v
    }

    fn sv(entries: &[(usize, f64)], dim: usize) -> SparseVector {
        SparseVector::new(entries.to_vec(), dim)
    }

    fn binary_labels() -> Vec<Label> {
        vec![Label::Off, Label::Not]
    }

    #[test]
    fn zero_model_loss_is_ln2_binary() {
        let vocab = vocab_of(3);
        let model = zero_model(
            ModelKind::Binary,
            &binary_labels(),
            &vocab,
            FeatureConfig::default(),
            0.0,
        );
        let cfg = GlmConfig {
            l2_lambda: 0.0,
            ..GlmConfig::default()
        };
        let (loss, _) =
            loss_and_gradient(&model, &[sv(&[(0, 1.0)], 3)], &[Label::Off], &cfg).unwrap();
        assert!((loss - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn zero_model_loss_is_ln3_multinomial() {
        let vocab = vocab_of(3);
        let labels = vec![Label::Ind, Label::Grp, Label::Oth];
        let model = zero_model(
            ModelKind::Multinomial,
            &labels,
            &vocab,
            FeatureConfig::default(),
            0.0,
        );
        let cfg = GlmConfig {
            l2_lambda: 0.0,
            ..GlmConfig::default()
        };
        let (loss, _) =
            loss_and_gradient(&model, &[sv(&[(1, 1.0)], 3)], &[Label::Grp], &cfg).unwrap();
        assert!((loss - 3f64.ln()).abs() < 1e-12);
    }

    /// Central finite differences over every parameter; independent of the
    /// analytic-gradient code path.
    fn finite_difference(
        model: &GlmModel,
        xs: &[SparseVector],
        ys: &[Label],
        cfg: &GlmConfig,
        h: f64,
    ) -> Gradient {
        let mut fd = Gradient {
            weights: vec![vec![0.0; model.dim()]; model.weights.len()],
            intercepts: vec![0.0; model.intercepts.len()],
        };
        let loss_at = |m: &GlmModel| loss_and_gradient(m, xs, ys, cfg).unwrap().0;
        for k in 0..model.weights.len() {
            for d in 0..model.dim() {
                let mut plus = model.clone();
                plus.weights[k][d] += h;
                let mut minus = model.clone();
                minus.weights[k][d] -= h;
                fd.weights[k][d] = (loss_at(&plus) - loss_at(&minus)) / (2.0 * h);
            }
            let mut plus = model.clone();
            plus.intercepts[k] += h;
            let mut minus = model.clone();
            minus.intercepts[k] -= h;
            fd.intercepts[k] = (loss_at(&plus) - loss_at(&minus)) / (2.0 * h);
        }
        fd
    }

    fn max_rel_err(analytic: &Gradient, fd: &Gradient) -> f64 {
        let mut worst = 0.0f64;
        let mut check = |a: f64, f: f64| {
            let rel = (a - f).abs() / a.abs().max(f.abs()).max(1e-5);
            worst = worst.max(rel);
        };
        for (ar, fr) in analytic.weights.iter().zip(fd.weights.iter()) {
            for (&a, &f) in ar.iter().zip(fr.iter()) {
                check(a, f);
            }
        }
        for (&a, &f) in analytic.intercepts.iter().zip(fd.intercepts.iter()) {
            check(a, f);
        }
        worst
    }

    /// Random sparse model + batch for the gradient check, driven by the
    /// deterministic stream.
    pub(crate) fn random_case(
        rng: &mut SplitMix64,
        multinomial: bool,
    ) -> (GlmModel, Vec<SparseVector>, Vec<Label>, GlmConfig) {
        let dim = 3 + rng.next_below(12) as usize;
        let vocab = vocab_of(dim);
        let (kind, labels) = if multinomial {
            (
                ModelKind::Multinomial,
                vec![Label::Ind, Label::Grp, Label::Oth],
            )
        } else {
            (ModelKind::Binary, binary_labels())
        };
        let mut model = zero_model(kind, &labels, &vocab, FeatureConfig::default(), 0.0);
        for row in model.weights.iter_mut() {
            for w in row.iter_mut() {
                *w = rng.next_f64() * 4.0 - 2.0;
            }
        }
        for b in model.intercepts.iter_mut() {
            *b = rng.next_f64() * 2.0 - 1.0;
        }
        let n = 1 + rng.next_below(8) as usize;
        let mut xs = Vec::with_capacity(n);
        let mut ys = Vec::with_capacity(n);
        for _ in 0..n {
            let mut entries = Vec::new();
            for d in 0..dim {
                if rng.next_f64() < 0.4 {
                    entries.push((d, 1.0));
                }
            }
            xs.push(SparseVector::new(entries, dim));
            ys.push(labels[rng.next_below(labels.len() as u64) as usize]);
        }
        let lambda = [0.0, 1e-4, 0.1][rng.next_below(3) as usize];
        let cfg = GlmConfig {
            l2_lambda: lambda,
            ..GlmConfig::default()
        };
        (model, xs, ys, cfg)
    }

    pub(crate) fn gradient_check_once(rng: &mut SplitMix64, multinomial: bool) -> f64 {
        let (model, xs, ys, cfg) = random_case(rng, multinomial);
        let (_, analytic) = loss_and_gradient(&model, &xs, &ys, &cfg).unwrap();
        let fd = finite_difference(&model, &xs, &ys, &cfg, 1e-5);
        max_rel_err(&analytic, &fd)
    }

    #[test]
    fn analytic_gradient_matches_finite_differences() {
        let mut rng = SplitMix64::new(2020);
        for i in 0..20 {
            let err = gradient_check_once(&mut rng, i % 2 == 1);
            assert!(err < 1e-4, "case {i}: relative error {err}");
        }
    }

    #[test]
    fn weighted_gradient_matches_finite_differences() {
        let mut rng = SplitMix64::new(2021);
        for i in 0..10 {
            let (model, xs, ys, mut cfg) = random_case(&mut rng, i % 2 == 1);
            cfg.class_weights = Some(
                model
                    .labels
                    .iter()
                    .map(|_| 0.5 + rng.next_f64() * 3.0)
                    .collect(),
            );
            let (_, analytic) = loss_and_gradient(&model, &xs, &ys, &cfg).unwrap();
            let fd = finite_difference(&model, &xs, &ys, &cfg, 1e-5);
            let err = max_rel_err(&analytic, &fd);
            assert!(err < 1e-4, "weighted case {i}: relative error {err}");
        }
    }

    #[test]
    fn class_weights_tilt_the_intercept_gradient() {
        let vocab = vocab_of(2);
        let model = zero_model(
            ModelKind::Binary,
            &binary_labels(),
            &vocab,
            FeatureConfig::default(),
            0.0,
        );
        let xs = vec![sv(&[(0, 1.0)], 2), sv(&[(1, 1.0)], 2)];
        let ys = vec![Label::Off, Label::Not];
        // Uniform weights balance the residuals exactly.
        let cfg = GlmConfig {
            l2_lambda: 0.0,
            ..GlmConfig::default()
        };
        let (_, g) = loss_and_gradient(&model, &xs, &ys, &cfg).unwrap();
        assert!(g.intercepts[0].abs() < 1e-15);
        // Doubling the positive class weight: (2*(0.5-1) + (0.5-0)) / 3.
        let cfg = GlmConfig {
            l2_lambda: 0.0,
            class_weights: Some(vec![2.0, 1.0]),
            ..GlmConfig::default()
        };
        let (_, g) = loss_and_gradient(&model, &xs, &ys, &cfg).unwrap();
        assert!((g.intercepts[0] - (-1.0 / 6.0)).abs() < 1e-12);
    }

    #[test]
    fn recovers_empirical_log_odds() {
        // x=1: 3 positive, 1 negative; x=0: 1 positive, 3 negative.
        let vocab = vocab_of(1);
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for (x, label, copies) in [
            (1.0, Label::Off, 3),
            (1.0, Label::Not, 1),
            (0.0, Label::Off, 1),
            (0.0, Label::Not, 3),
        ] {
            for _ in 0..copies {
                let entries = if x > 0.0 { vec![(0, 1.0)] } else { vec![] };
                xs.push(sv(&entries, 1));
                ys.push(label);
            }
        }
        let cfg = GlmConfig {
            l2_lambda: 0.0,
            learning_rate: 0.5,
            max_iters: 20_000,
            tolerance: 1e-14,
            ..GlmConfig::default()
        };
        let out = train(
            &xs,
            &ys,
            &binary_labels(),
            ModelKind::Binary,
            &vocab,
            FeatureConfig::default(),
            &cfg,
        )
        .unwrap();
        let b = out.model.intercepts[0];
        let w = out.model.weights[0][0];
        assert!((b - (1.0f64 / 3.0).ln()).abs() < 1e-3, "intercept {b}");
        assert!((w - 2.0 * 3.0f64.ln()).abs() < 1e-3, "weight {w}");
    }

    #[test]
    fn separable_data_fits_perfectly() {
        let vocab = vocab_of(2);
        let xs: Vec<SparseVector> = (0..8)
            .map(|i| {
                if i % 2 == 0 {
                    sv(&[(0, 1.0)], 2)
                } else {
                    sv(&[(1, 1.0)], 2)
                }
            })
            .collect();
        let ys: Vec<Label> = (0..8)
            .map(|i| if i % 2 == 0 { Label::Off } else { Label::Not })
            .collect();
        let cfg = GlmConfig {
            l2_lambda: 0.0,
            max_iters: 500,
            ..GlmConfig::default()
        };
        let out = train(
            &xs,
            &ys,
            &binary_labels(),
            ModelKind::Binary,
            &vocab,
            FeatureConfig::default(),
            &cfg,
        )
        .unwrap();
        for (x, y) in xs.iter().zip(ys.iter()) {
            assert_eq!(out.model.predict(x, 0.5).unwrap(), *y);
        }
    }

    #[test]
    fn single_class_dataset_gives_constant_model() {
        let vocab = vocab_of(2);
        let xs = vec![sv(&[(0, 1.0)], 2), sv(&[(1, 1.0)], 2)];
        let ys = vec![Label::Off, Label::Off];
        let out = train(
            &xs,
            &ys,
            &binary_labels(),
            ModelKind::Binary,
            &vocab,
            FeatureConfig::default(),
            &GlmConfig::default(),
        )
        .unwrap();
        assert_eq!(out.report.warnings.len(), 1);
        assert!(out.model.weights[0].iter().all(|&w| w == 0.0));
        // Laplace: p = 3/4, both inputs get the same probability.
        let p = out.model.predict_proba(&xs[0]).unwrap();
        assert!((p[0] - 0.75).abs() < 1e-12);
        assert_eq!(out.model.predict(&xs[1], 0.5).unwrap(), Label::Off);
    }

    #[test]
    fn zero_weight_probabilities_are_uniform() {
        let vocab = vocab_of(4);
        let bin = zero_model(
            ModelKind::Binary,
            &binary_labels(),
            &vocab,
            FeatureConfig::default(),
            0.0,
        );
        let x = sv(&[(2, 1.0)], 4);
        assert_eq!(bin.predict_proba(&x).unwrap(), vec![0.5, 0.5]);

        let multi = zero_model(
            ModelKind::Multinomial,
            &[Label::Ind, Label::Grp, Label::Oth],
            &vocab,
            FeatureConfig::default(),
            0.0,
        );
        for p in multi.predict_proba(&x).unwrap() {
            assert!((p - 1.0 / 3.0).abs() < 1e-12);
        }
        // Uniform tie resolves to the first label in order.
        assert_eq!(multi.predict(&x, 0.5).unwrap(), Label::Ind);
    }

    #[test]
    fn softmax_is_shift_invariant() {
        let vocab = vocab_of(3);
        let labels = vec![Label::Ind, Label::Grp, Label::Oth];
        let mut model = zero_model(
            ModelKind::Multinomial,
            &labels,
            &vocab,
            FeatureConfig::default(),
            0.0,
        );
        let mut rng = SplitMix64::new(5);
        for row in model.weights.iter_mut() {
            for w in row.iter_mut() {
                *w = rng.next_f64() * 2.0 - 1.0;
            }
        }
        let x = sv(&[(0, 1.0), (2, 1.0)], 3);
        let before = model.predict_proba(&x).unwrap();
        let c = 0.7;
        for row in model.weights.iter_mut() {
            for w in row.iter_mut() {
                *w += c;
            }
        }
        for b in model.intercepts.iter_mut() {
            *b += c;
        }
        let after = model.predict_proba(&x).unwrap();
        for (p, q) in before.iter().zip(after.iter()) {
            assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn binary_threshold_is_inclusive() {
        let vocab = vocab_of(1);
        let model = zero_model(
            ModelKind::Binary,
            &binary_labels(),
            &vocab,
            FeatureConfig::default(),
            0.0,
        );
        // Zero weights give p = 0.5 exactly; at threshold 0.5 the positive
        // label wins.
        let x = sv(&[], 1);
        assert_eq!(model.predict(&x, 0.5).unwrap(), Label::Off);
        assert_eq!(model.predict(&x, 0.51).unwrap(), Label::Not);
    }

    #[test]
    fn loss_sequence_is_non_increasing() {
        let mut rng = SplitMix64::new(11);
        let (_, xs, ys, _) = random_case(&mut rng, false);
        let vocab = vocab_of(xs[0].dim());
        let cfg = GlmConfig {
            max_iters: 100,
            tolerance: 1e-12,
            ..GlmConfig::default()
        };
        let out = train(
            &xs,
            &ys,
            &binary_labels(),
            ModelKind::Binary,
            &vocab,
            FeatureConfig::default(),
            &cfg,
        )
        .unwrap();
        for pair in out.report.losses.windows(2) {
            assert!(pair[1] <= pair[0], "loss increased: {pair:?}");
        }
    }

    #[test]
    fn different_step_sizes_reach_the_same_optimum() {
        let mut rng = SplitMix64::new(17);
        let (_, xs, ys, _) = random_case(&mut rng, true);
        let vocab = vocab_of(xs[0].dim());
        let labels = vec![Label::Ind, Label::Grp, Label::Oth];
        let run = |lr: f64| {
            let cfg = GlmConfig {
                l2_lambda: 0.1,
                learning_rate: lr,
                max_iters: 5000,
                tolerance: 1e-12,
                ..GlmConfig::default()
            };
            let out = train(
                &xs,
                &ys,
                &labels,
                ModelKind::Multinomial,
                &vocab,
                FeatureConfig::default(),
                &cfg,
            )
            .unwrap();
            *out.report.losses.last().unwrap()
        };
        let a = run(0.05);
        let b = run(0.4);
        assert!((a - b).abs() < 1e-5, "final losses diverge: {a} vs {b}");
    }

    #[test]
    fn training_is_deterministic() {
        let mut rng = SplitMix64::new(23);
        let (_, xs, ys, _) = random_case(&mut rng, false);
        let vocab = vocab_of(xs[0].dim());
        let run = || {
            train(
                &xs,
                &ys,
                &binary_labels(),
                ModelKind::Binary,
                &vocab,
                FeatureConfig::default(),
                &GlmConfig::default(),
            )
            .unwrap()
        };
        assert_eq!(model_to_string(&run().model), model_to_string(&run().model));
    }

    #[test]
    fn probabilities_sum_to_one() {
        let mut rng = SplitMix64::new(31);
        for i in 0..50 {
            let (model, xs, _, _) = random_case(&mut rng, i % 2 == 0);
            for x in &xs {
                let p = model.predict_proba(x).unwrap();
                let sum: f64 = p.iter().sum();
                assert!((sum - 1.0).abs() < 1e-9);
                assert!(p.iter().all(|&v| v > 0.0));
            }
        }
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let vocab = vocab_of(3);
        let model = zero_model(
            ModelKind::Binary,
            &binary_labels(),
            &vocab,
            FeatureConfig::default(),
            0.0,
        );
        let err = model.predict_proba(&sv(&[(0, 1.0)], 5)).unwrap_err();
        assert!(matches!(
            err,
            GlmError::DimensionMismatch {
                expected: 3,
                found: 5
            }
        ));
    }

    #[test]
    fn model_round_trips_through_text_format() {
        let mut rng = SplitMix64::new(47);
        let (model, xs, _, _) = random_case(&mut rng, true);
        let text = model_to_string(&model);
        let back = model_from_str(&text).unwrap();
        assert_eq!(back, model);
        for x in &xs {
            let p1 = model.predict_proba(x).unwrap();
            let p2 = back.predict_proba(x).unwrap();
            assert_eq!(p1, p2, "probabilities must be bit-identical");
        }
        assert_eq!(model_to_string(&back), text);
    }

    #[test]
    fn model_parser_rejects_garbage() {
        assert!(matches!(
            model_from_str("not a model"),
            Err(GlmError::ModelFormat { .. })
        ));
        let mut rng = SplitMix64::new(47);
        let (model, _, _, _) = random_case(&mut rng, false);
        let text = model_to_string(&model);
        let truncated = &text[..text.len() - 5];
        assert!(matches!(
            model_from_str(truncated),
            Err(GlmError::ModelFormat { .. })
        ));
    }
}
