//! Confusion-matrix based evaluation and the accuracy / precision / recall /
//! F1 tables.

use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Counts with rows indexed by true class and columns by predicted class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    n_classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth * self.n_classes + predicted]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.n_classes).map(|c| self.get(c, c)).sum()
    }

    pub fn to_rows(&self) -> Vec<Vec<u64>> {
        self.counts.chunks(self.n_classes).map(<[u64]>::to_vec).collect()
    }
}

pub fn confusion(y_true: &[usize], y_pred: &[usize], n_classes: usize) -> Result<ConfusionMatrix> {
    if n_classes < 2 {
        return Err(Error::invalid("confusion matrix needs at least 2 classes"));
    }
    if y_true.len() != y_pred.len() {
        return Err(Error::shape(format!(
            "{} true labels but {} predictions",
            y_true.len(),
            y_pred.len()
        )));
    }
    let mut counts = vec![0u64; n_classes * n_classes];
    for (&t, &p) in y_true.iter().zip(y_pred) {
        if t >= n_classes || p >= n_classes {
            return Err(Error::invalid(format!(
                "label pair ({t}, {p}) out of range for {n_classes} classes"
            )));
        }
        counts[t * n_classes + p] += 1;
    }
    Ok(ConfusionMatrix { n_classes, counts })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub per_class: Vec<ClassMetrics>,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub confusion: Vec<Vec<u64>>,
}

impl MetricsReport {
    pub fn n_classes(&self) -> usize {
        self.per_class.len()
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Per-class precision, recall and F1 with every `0/0` taken as 0, plus
/// accuracy and unweighted macro means.
pub fn compute_metrics(cm: &ConfusionMatrix) -> Result<MetricsReport> {
    let n = cm.total();
    if n == 0 {
        return Err(Error::invalid("cannot compute metrics on an empty confusion matrix"));
    }
    let k = cm.n_classes();
    let per_class: Vec<ClassMetrics> = (0..k)
        .map(|c| {
            let tp = cm.get(c, c);
            let predicted: u64 = (0..k).map(|t| cm.get(t, c)).sum();
            let support: u64 = (0..k).map(|p| cm.get(c, p)).sum();
            let precision = ratio(tp, predicted);
            let recall = ratio(tp, support);
            let f1 = if precision + recall > 0.0 {
                2.0 * precision * recall / (precision + recall)
            } else {
                0.0
            };
            ClassMetrics { precision, recall, f1, support }
        })
        .collect();
    let mean = |f: fn(&ClassMetrics) -> f64| per_class.iter().map(f).sum::<f64>() / k as f64;
    Ok(MetricsReport {
        accuracy: ratio(cm.trace(), n),
        macro_precision: mean(|m| m.precision),
        macro_recall: mean(|m| m.recall),
        macro_f1: mean(|m| m.f1),
        per_class,
        confusion: cm.to_rows(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Markdown,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedReport {
    pub model: String,
    pub report: MetricsReport,
}

/// Markdown renders two tables: accuracy with per-class precision, then
/// per-class recall and F1. Accuracy shows 4 decimals, per-class values 2.
/// JSON carries full precision.
pub fn render_report(reports: &[NamedReport], format: ReportFormat) -> Result<String> {
    let k = reports.first().map_or(0, |r| r.report.n_classes());
    if let Some(r) = reports.iter().find(|r| r.report.n_classes() != k) {
        return Err(Error::invalid(format!(
            "report {:?} has {} classes, expected {k}",
            r.model,
            r.report.n_classes()
        )));
    }
    match format {
        ReportFormat::Json => Ok(serde_json::to_string_pretty(reports)?),
        ReportFormat::Markdown => {
            let mut out = String::new();
            let classes = |label: &str| (0..k).map(|c| format!(" {label} ({c}) |")).collect::<String>();
            let rule = |cols: usize| format!("|{}\n", "---|".repeat(cols));

            writeln!(out, "| Model | Accuracy |{}", classes("Precision")).unwrap();
            out.push_str(&rule(k + 2));
            for r in reports {
                write!(out, "| {} | {:.4} |", r.model, r.report.accuracy).unwrap();
                for m in &r.report.per_class {
                    write!(out, " {:.2} |", m.precision).unwrap();
                }
                out.push('\n');
            }
            out.push('\n');
            writeln!(out, "| Model |{}{}", classes("Recall"), classes("F1")).unwrap();
            out.push_str(&rule(2 * k + 1));
            for r in reports {
                write!(out, "| {} |", r.model).unwrap();
                for m in &r.report.per_class {
                    write!(out, " {:.2} |", m.recall).unwrap();
                }
                for m in &r.report.per_class {
                    write!(out, " {:.2} |", m.f1).unwrap();
                }
                out.push('\n');
            }
            Ok(out)
        }
    }
}

pub fn evaluate(y_true: &[usize], y_pred: &[usize], n_classes: usize) -> Result<MetricsReport> {
    compute_metrics(&confusion(y_true, y_pred, n_classes)?)
}
