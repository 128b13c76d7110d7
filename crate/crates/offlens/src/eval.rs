//! Confusion matrices, classification metrics, and table auditing.
//!
//! Orientation convention: gold answers on the columns, system predictions
//! on the rows. Metrics are computed from the integer counts with the
//! division deferred to the very end — F1 is `2*tp / (row + col)` rather
//! than a harmonic mean of already-rounded ratios — so published
//! three-decimal table values can be checked at tight tolerances. The
//! audit recomputes every metric from the counts and flags published
//! values that disagree, which is how internally inconsistent table cells
//! are detected.

use crate::corpus::Label;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("gold has {gold} labels but predictions have {pred}")]
    LengthMismatch { gold: usize, pred: usize },
    #[error("label {0} not in the matrix label set")]
    UnknownLabel(Label),
    #[error("label set must contain at least 2 distinct labels")]
    DegenerateLabelSet,
    #[error("matrix is empty (total count 0)")]
    EmptyMatrix,
    #[error("malformed table: {0}")]
    BadTable(String),
}

/// K×K counts; cell (r, c) is the number of instances predicted r whose
/// gold label is c.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    labels: Vec<Label>,
    counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn from_counts(labels: Vec<Label>, counts: Vec<Vec<u64>>) -> Result<Self, EvalError> {
        let k = labels.len();
        if k < 2 {
            return Err(EvalError::DegenerateLabelSet);
        }
        let mut distinct = labels.clone();
        distinct.sort();
        distinct.dedup();
        if distinct.len() != k {
            return Err(EvalError::DegenerateLabelSet);
        }
        if counts.len() != k || counts.iter().any(|row| row.len() != k) {
            return Err(EvalError::BadTable(format!("counts must be {k}x{k}")));
        }
        Ok(ConfusionMatrix { labels, counts })
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn cell(&self, pred: usize, gold: usize) -> u64 {
        self.counts[pred][gold]
    }

    /// Predicted-as-k total (sum of row k).
    pub fn row_marginal(&self, k: usize) -> u64 {
        self.counts[k].iter().sum()
    }

    /// Gold-k total (sum of column k).
    pub fn col_marginal(&self, k: usize) -> u64 {
        self.counts.iter().map(|row| row[k]).sum()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    fn index_of(&self, label: Label) -> Option<usize> {
        self.labels.iter().position(|&l| l == label)
    }
}

/// Tallies paired gold/prediction sequences into a confusion matrix.
pub fn build_confusion(
    gold: &[Label],
    pred: &[Label],
    labels: &[Label],
) -> Result<ConfusionMatrix, EvalError> {
    if gold.len() != pred.len() {
        return Err(EvalError::LengthMismatch {
            gold: gold.len(),
            pred: pred.len(),
        });
    }
    let k = labels.len();
    let mut cm = ConfusionMatrix::from_counts(labels.to_vec(), vec![vec![0; k]; k])?;
    for (&g, &p) in gold.iter().zip(pred.iter()) {
        let gi = cm.index_of(g).ok_or(EvalError::UnknownLabel(g))?;
        let pi = cm.index_of(p).ok_or(EvalError::UnknownLabel(p))?;
        cm.counts[pi][gi] += 1;
    }
    Ok(cm)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassMetrics {
    pub label: Label,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub per_class: Vec<ClassMetrics>,
    pub accuracy: f64,
    pub macro_f1: f64,
    /// Accuracy of always predicting the most frequent gold class.
    pub majority_baseline: f64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Per-class precision/recall/F1 plus accuracy, macro-F1, and the majority
/// baseline. Undefined ratios (empty row or column) are 0 by convention,
/// which keeps macro-F1 a total function.
pub fn metrics(cm: &ConfusionMatrix) -> Result<MetricsReport, EvalError> {
    let total = cm.total();
    if total == 0 {
        return Err(EvalError::EmptyMatrix);
    }
    let k = cm.labels.len();
    let mut per_class = Vec::with_capacity(k);
    let mut trace = 0u64;
    let mut max_col = 0u64;
    for i in 0..k {
        let tp = cm.cell(i, i);
        trace += tp;
        let row = cm.row_marginal(i);
        let col = cm.col_marginal(i);
        max_col = max_col.max(col);
        per_class.push(ClassMetrics {
            label: cm.labels[i],
            precision: ratio(tp, row),
            recall: ratio(tp, col),
            f1: ratio(2 * tp, row + col),
        });
    }
    let macro_f1 = per_class.iter().map(|c| c.f1).sum::<f64>() / k as f64;
    Ok(MetricsReport {
        per_class,
        accuracy: trace as f64 / total as f64,
        macro_f1,
        majority_baseline: max_col as f64 / total as f64,
    })
}

/// Published per-class values to audit; `None` means the value was not
/// printed and is skipped.
#[derive(Debug, Clone, PartialEq)]
pub struct PublishedClass {
    pub label: Label,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PublishedMetrics {
    pub per_class: Vec<PublishedClass>,
    pub accuracy: Option<f64>,
    pub macro_f1: Option<f64>,
    pub majority_baseline: Option<f64>,
}

/// One published value that disagrees with recomputation from the counts.
#[derive(Debug, Clone, PartialEq)]
pub struct Discrepancy {
    pub metric: String,
    pub published: f64,
    pub computed: f64,
}

/// Recomputes every metric from the matrix and reports each published
/// value differing by more than `tolerance`.
pub fn audit_table(
    cm: &ConfusionMatrix,
    published: &PublishedMetrics,
    tolerance: f64,
) -> Result<Vec<Discrepancy>, EvalError> {
    let report = metrics(cm)?;
    let mut out = Vec::new();
    let mut check = |metric: String, published: Option<f64>, computed: f64| {
        if let Some(p) = published {
            if (p - computed).abs() > tolerance {
                out.push(Discrepancy {
                    metric,
                    published: p,
                    computed,
                });
            }
        }
    };
    for pc in &published.per_class {
        let idx = cm
            .index_of(pc.label)
            .ok_or(EvalError::UnknownLabel(pc.label))?;
        let computed = &report.per_class[idx];
        check(
            format!("{} precision", pc.label),
            pc.precision,
            computed.precision,
        );
        check(format!("{} recall", pc.label), pc.recall, computed.recall);
        check(format!("{} F1", pc.label), pc.f1, computed.f1);
    }
    check("accuracy".into(), published.accuracy, report.accuracy);
    check("macro-F1".into(), published.macro_f1, report.macro_f1);
    check(
        "majority".into(),
        published.majority_baseline,
        report.majority_baseline,
    );
    Ok(out)
}

/// Parses a counts table: a tab-separated label header, then one row of
/// tab-separated counts per predicted label.
pub fn parse_counts_tsv(text: &str) -> Result<ConfusionMatrix, EvalError> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| EvalError::BadTable("empty counts file".into()))?;
    let labels: Vec<Label> = header
        .split('\t')
        .map(|s| s.trim().parse::<Label>())
        .collect::<Result<_, _>>()
        .map_err(EvalError::BadTable)?;
    let mut counts = Vec::new();
    for line in lines {
        let row: Vec<u64> = line
            .split('\t')
            .map(|s| s.trim().parse::<u64>())
            .collect::<Result<_, _>>()
            .map_err(|e| EvalError::BadTable(format!("bad count: {e}")))?;
        counts.push(row);
    }
    ConfusionMatrix::from_counts(labels, counts)
}

fn parse_opt_metric(field: &str) -> Result<Option<f64>, EvalError> {
    let field = field.trim();
    if field == "-" {
        return Ok(None);
    }
    field
        .parse::<f64>()
        .map(Some)
        .map_err(|_| EvalError::BadTable(format!("bad metric value {field:?}")))
}

/// Parses published values: `LABEL \t P \t R \t F1` rows (with `-` for an
/// unprinted cell) plus optional `accuracy`, `majority`, and `macro_f1`
/// rows.
pub fn parse_published_tsv(text: &str) -> Result<PublishedMetrics, EvalError> {
    let mut published = PublishedMetrics::default();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let fields: Vec<&str> = line.split('\t').collect();
        if let Ok(label) = fields[0].trim().parse::<Label>() {
            if fields.len() != 4 {
                return Err(EvalError::BadTable(format!(
                    "class row for {label} needs 4 fields, found {}",
                    fields.len()
                )));
            }
            published.per_class.push(PublishedClass {
                label,
                precision: parse_opt_metric(fields[1])?,
                recall: parse_opt_metric(fields[2])?,
                f1: parse_opt_metric(fields[3])?,
            });
        } else {
            if fields.len() != 2 {
                return Err(EvalError::BadTable(format!(
                    "metric row needs 2 fields: {line:?}"
                )));
            }
            let value = parse_opt_metric(fields[1])?;
            match fields[0].trim() {
                "accuracy" => published.accuracy = value,
                "majority" => published.majority_baseline = value,
                "macro_f1" => published.macro_f1 = value,
                other => return Err(EvalError::BadTable(format!("unknown metric row {other:?}"))),
            }
        }
    }
    Ok(published)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) fn table_1() -> ConfusionMatrix {
        ConfusionMatrix::from_counts(
            vec![Label::Off, Label::Not],
            vec![vec![540, 63], vec![540, 2744]],
        )
        .unwrap()
    }

    pub(crate) fn table_3() -> ConfusionMatrix {
        ConfusionMatrix::from_counts(
            vec![Label::Unt, Label::Tin],
            vec![vec![533, 593], vec![39, 257]],
        )
        .unwrap()
    }

    pub(crate) fn table_5() -> ConfusionMatrix {
        ConfusionMatrix::from_counts(
            vec![Label::Ind, Label::Grp, Label::Oth],
            vec![vec![537, 69, 47], vec![36, 113, 21], vec![7, 8, 12]],
        )
        .unwrap()
    }

    #[test]
    fn marginals_of_binary_table() {
        let cm = table_1();
        assert_eq!(cm.row_marginal(0), 603);
        assert_eq!(cm.row_marginal(1), 3284);
        assert_eq!(cm.col_marginal(0), 1080);
        assert_eq!(cm.col_marginal(1), 2807);
        assert_eq!(cm.total(), 3887);
    }

    #[test]
    fn build_confusion_from_sequences() {
        let gold = vec![Label::Off, Label::Off, Label::Not, Label::Not];
        let pred = vec![Label::Off, Label::Not, Label::Not, Label::Off];
        let cm = build_confusion(&gold, &pred, &[Label::Off, Label::Not]).unwrap();
        assert_eq!(cm.cell(0, 0), 1);
        assert_eq!(cm.cell(1, 0), 1);
        assert_eq!(cm.cell(1, 1), 1);
        assert_eq!(cm.cell(0, 1), 1);
        assert_eq!(cm.total(), 4);
    }

    #[test]
    fn identical_sequences_are_diagonal() {
        let seq = vec![Label::Off, Label::Not, Label::Off];
        let cm = build_confusion(&seq, &seq, &[Label::Off, Label::Not]).unwrap();
        assert_eq!(cm.cell(0, 1), 0);
        assert_eq!(cm.cell(1, 0), 0);
        assert_eq!(cm.cell(0, 0) + cm.cell(1, 1), 3);
    }

    #[test]
    fn empty_sequences_build_but_have_no_metrics() {
        let cm = build_confusion(&[], &[], &[Label::Off, Label::Not]).unwrap();
        assert_eq!(cm.total(), 0);
        assert_eq!(metrics(&cm).unwrap_err(), EvalError::EmptyMatrix);
    }

    #[test]
    fn length_mismatch_is_an_error() {
        let err = build_confusion(&[Label::Off], &[], &[Label::Off, Label::Not]).unwrap_err();
        assert_eq!(err, EvalError::LengthMismatch { gold: 1, pred: 0 });
    }

    #[test]
    fn unknown_label_is_an_error() {
        let err =
            build_confusion(&[Label::Tin], &[Label::Tin], &[Label::Off, Label::Not]).unwrap_err();
        assert_eq!(err, EvalError::UnknownLabel(Label::Tin));
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn three_class_table_metrics() {
        let m = metrics(&table_5()).unwrap();
        // Integer arithmetic until the final division: accuracy is exactly
        // the rational trace/total.
        assert_eq!(m.accuracy, 662.0 / 850.0);
        assert_eq!(m.majority_baseline, 580.0 / 850.0);
        assert!(close(m.accuracy, 0.779, 1e-3));
        assert!(close(m.majority_baseline, 0.682, 1e-3));
        let [ind, grp, oth] = &m.per_class[..] else {
            panic!()
        };
        assert!(close(ind.precision, 0.822, 1e-3));
        assert!(close(ind.recall, 0.926, 1e-3));
        assert!(close(ind.f1, 0.871, 1e-3));
        assert!(close(grp.precision, 0.665, 1e-3));
        assert!(close(grp.recall, 0.595, 1e-3));
        assert!(close(grp.f1, 0.628, 1e-3));
        assert!(close(oth.precision, 0.444, 1e-3));
        assert!(close(oth.recall, 0.150, 1e-3));
        assert!(close(oth.f1, 0.224, 1e-3));
        assert!(close(m.macro_f1, 0.57437, 1e-5));
    }

    #[test]
    fn binary_table_metrics_recompute_the_broken_row() {
        let m = metrics(&table_1()).unwrap();
        let [off, not] = &m.per_class[..] else {
            panic!()
        };
        assert!(close(off.precision, 0.896, 1e-3));
        assert!(close(off.recall, 0.500, 1e-3));
        assert!(close(off.f1, 0.642, 1e-3));
        assert!(close(m.accuracy, 0.845, 1e-3));
        assert!(close(m.majority_baseline, 0.722, 1e-3));
        // The printed row gives .164/.281; recomputation says otherwise.
        assert!(close(not.precision, 2744.0 / 3284.0, 1e-12));
        assert!(close(not.f1, 5488.0 / 6091.0, 1e-12));
        assert!(close(m.macro_f1, 0.7713, 1e-4));
    }

    #[test]
    fn second_binary_table_metrics() {
        let m = metrics(&table_3()).unwrap();
        assert!(close(m.accuracy, 0.556, 1e-3));
        assert!(close(m.majority_baseline, 0.598, 1e-3));
        assert!(close(m.macro_f1, 0.53816, 1e-5));
        let tin = &m.per_class[1];
        assert!(close(tin.precision, 257.0 / 296.0, 1e-12));
        assert!(close(tin.recall, 257.0 / 850.0, 1e-12));
        assert!(close(tin.f1, 514.0 / 1146.0, 1e-12));
    }

    #[test]
    fn perfect_diagonal_scores_one_everywhere() {
        let cm = ConfusionMatrix::from_counts(
            vec![Label::Off, Label::Not],
            vec![vec![10, 0], vec![0, 7]],
        )
        .unwrap();
        let m = metrics(&cm).unwrap();
        assert_eq!(m.accuracy, 1.0);
        assert_eq!(m.macro_f1, 1.0);
        for c in &m.per_class {
            assert_eq!((c.precision, c.recall, c.f1), (1.0, 1.0, 1.0));
        }
    }

    #[test]
    fn zero_division_conventions() {
        // Row OFF empty: precision 0. Column NOT empty: recall 0.
        let cm = ConfusionMatrix::from_counts(
            vec![Label::Off, Label::Not],
            vec![vec![0, 0], vec![5, 0]],
        )
        .unwrap();
        let m = metrics(&cm).unwrap();
        assert_eq!(m.per_class[0].precision, 0.0);
        assert_eq!(m.per_class[0].f1, 0.0);
        assert_eq!(m.per_class[1].recall, 0.0);
        assert_eq!(m.per_class[1].f1, 0.0);
    }

    fn published_table_1() -> PublishedMetrics {
        PublishedMetrics {
            per_class: vec![
                PublishedClass {
                    label: Label::Off,
                    precision: Some(0.896),
                    recall: Some(0.500),
                    f1: Some(0.642),
                },
                PublishedClass {
                    label: Label::Not,
                    precision: Some(0.164),
                    recall: Some(0.978),
                    f1: Some(0.281),
                },
            ],
            accuracy: Some(0.845),
            macro_f1: None,
            majority_baseline: Some(0.722),
        }
    }

    #[test]
    fn audit_flags_inconsistent_binary_rows() {
        let found = audit_table(&table_1(), &published_table_1(), 0.001).unwrap();
        let names: Vec<&str> = found.iter().map(|d| d.metric.as_str()).collect();
        assert_eq!(names, vec!["NOT precision", "NOT F1"]);
        assert!(close(found[0].computed, 0.836, 5e-4));
        assert!(close(found[1].computed, 0.901, 5e-4));
    }

    #[test]
    fn audit_flags_second_table_and_clears_third() {
        let published_3 = PublishedMetrics {
            per_class: vec![
                PublishedClass {
                    label: Label::Unt,
                    precision: Some(0.473),
                    recall: Some(0.932),
                    f1: Some(0.628),
                },
                PublishedClass {
                    label: Label::Tin,
                    precision: Some(0.132),
                    recall: Some(0.068),
                    f1: Some(0.090),
                },
            ],
            accuracy: Some(0.556),
            macro_f1: Some(0.53816),
            majority_baseline: Some(0.598),
        };
        let found = audit_table(&table_3(), &published_3, 0.001).unwrap();
        let names: Vec<&str> = found.iter().map(|d| d.metric.as_str()).collect();
        assert_eq!(names, vec!["TIN precision", "TIN recall", "TIN F1"]);

        let published_5 = PublishedMetrics {
            per_class: vec![
                PublishedClass {
                    label: Label::Ind,
                    precision: Some(0.822),
                    recall: Some(0.926),
                    f1: Some(0.871),
                },
                PublishedClass {
                    label: Label::Grp,
                    precision: Some(0.665),
                    recall: Some(0.595),
                    f1: Some(0.628),
                },
                PublishedClass {
                    label: Label::Oth,
                    precision: Some(0.444),
                    recall: Some(0.150),
                    f1: Some(0.224),
                },
            ],
            accuracy: Some(0.779),
            macro_f1: Some(0.57437),
            majority_baseline: Some(0.682),
        };
        assert!(audit_table(&table_5(), &published_5, 0.001)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn tables_parse_from_tsv() {
        let cm = parse_counts_tsv("UNT\tTIN\n533\t593\n39\t257\n").unwrap();
        assert_eq!(cm, table_3());
        let p =
            parse_published_tsv("UNT\t.473\t.932\t.628\naccuracy\t.556\nmacro_f1\t-\n").unwrap();
        assert_eq!(p.per_class.len(), 1);
        assert_eq!(p.per_class[0].precision, Some(0.473));
        assert_eq!(p.accuracy, Some(0.556));
        assert_eq!(p.macro_f1, None);
        assert!(parse_counts_tsv("OFF\tNOT\n1\t2\n").is_err());
        assert!(parse_published_tsv("bogus\t1\t2\t3\n").is_err());
    }

    fn arb_matrix() -> impl Strategy<Value = ConfusionMatrix> {
        proptest::collection::vec(0u64..50, 9).prop_filter_map("non-empty", |v| {
            if v.iter().sum::<u64>() == 0 {
                return None;
            }
            let counts = vec![
                vec![v[0], v[1], v[2]],
                vec![v[3], v[4], v[5]],
                vec![v[6], v[7], v[8]],
            ];
            Some(
                ConfusionMatrix::from_counts(vec![Label::Ind, Label::Grp, Label::Oth], counts)
                    .unwrap(),
            )
        })
    }

    proptest! {
        #[test]
        fn metrics_survive_label_permutation(cm in arb_matrix(), a in 0usize..3, b in 0usize..3) {
            let m1 = metrics(&cm).unwrap();
            // Swap labels a and b together with their rows and columns.
            let mut labels = cm.labels().to_vec();
            labels.swap(a, b);
            let k = labels.len();
            let mut counts = vec![vec![0u64; k]; k];
            #[allow(clippy::needless_range_loop)]
            for r in 0..k {
                for c in 0..k {
                    let (mut r2, mut c2) = (r, c);
                    if r2 == a { r2 = b } else if r2 == b { r2 = a }
                    if c2 == a { c2 = b } else if c2 == b { c2 = a }
                    counts[r2][c2] = cm.cell(r, c);
                }
            }
            let m2 = metrics(&ConfusionMatrix::from_counts(labels, counts).unwrap()).unwrap();
            prop_assert!((m1.accuracy - m2.accuracy).abs() < 1e-15);
            prop_assert!((m1.macro_f1 - m2.macro_f1).abs() < 1e-15);
            prop_assert!((m1.majority_baseline - m2.majority_baseline).abs() < 1e-15);
            for c1 in &m1.per_class {
                let c2 = m2.per_class.iter().find(|c| c.label == c1.label).unwrap();
                prop_assert!((c1.f1 - c2.f1).abs() < 1e-15);
            }
        }

        #[test]
        fn micro_f1_equals_accuracy(cm in arb_matrix()) {
            // Single-label classification: micro P = micro R = trace/total.
            let trace: u64 = (0..3).map(|i| cm.cell(i, i)).sum();
            let micro_p = trace as f64 / cm.total() as f64;
            let micro_f1 = 2.0 * micro_p * micro_p / (micro_p + micro_p).max(f64::MIN_POSITIVE);
            let m = metrics(&cm).unwrap();
            if trace > 0 {
                prop_assert!((micro_f1 - m.accuracy).abs() < 1e-12);
            } else {
                prop_assert_eq!(m.accuracy, 0.0);
            }
        }

        #[test]
        fn macro_f1_is_the_mean_of_class_f1(cm in arb_matrix()) {
            let m = metrics(&cm).unwrap();
            let mean = m.per_class.iter().map(|c| c.f1).sum::<f64>() / m.per_class.len() as f64;
            prop_assert!((m.macro_f1 - mean).abs() < 1e-12);
        }

        #[test]
        fn cells_sum_to_sequence_length(pairs in proptest::collection::vec((0usize..2, 0usize..2), 0..60)) {
            let labels = [Label::Off, Label::Not];
            let gold: Vec<Label> = pairs.iter().map(|&(g, _)| labels[g]).collect();
            let pred: Vec<Label> = pairs.iter().map(|&(_, p)| labels[p]).collect();
            let cm = build_confusion(&gold, &pred, &labels).unwrap();
            prop_assert_eq!(cm.total() as usize, pairs.len());
        }
    }
}
