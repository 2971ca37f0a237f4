//! Precision, recall and F1 with micro and macro averaging.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("no labels to score")]
    Empty,
    #[error("gold and predicted label counts differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Averaging {
    Micro,
    Macro,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Scores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Per-class true positive, false positive and false negative counts.
pub fn confusion_counts(gold: &[usize], pred: &[usize], class: usize) -> (usize, usize, usize) {
    let mut tp = 0;
    let mut fp = 0;
    let mut fn_ = 0;
    for (&g, &p) in gold.iter().zip(pred) {
        match (g == class, p == class) {
            (true, true) => tp += 1,
            (false, true) => fp += 1,
            (true, false) => fn_ += 1,
            _ => {}
        }
    }
    (tp, fp, fn_)
}

/// Scores over `labels`, or over the classes occurring in `gold` when none
/// are given. Macro averages per-class scores without weighting; micro pools
/// the counts first.
pub fn metrics(gold: &[usize], pred: &[usize], averaging: Averaging, labels: Option<&[usize]>) -> Result<Scores, MetricsError> {
    if gold.len() != pred.len() {
        return Err(MetricsError::LengthMismatch(gold.len(), pred.len()));
    }
    if gold.is_empty() {
        return Err(MetricsError::Empty);
    }
    let classes: Vec<usize> = match labels {
        Some(l) => l.to_vec(),
        None => {
            let mut c = gold.to_vec();
            c.sort_unstable();
            c.dedup();
            c
        }
    };
    let counts: Vec<(usize, usize, usize)> = classes.iter().map(|&c| confusion_counts(gold, pred, c)).collect();
    Ok(match averaging {
        Averaging::Micro => {
            let (tp, fp, fn_) = counts
                .iter()
                .fold((0, 0, 0), |acc, c| (acc.0 + c.0, acc.1 + c.1, acc.2 + c.2));
            let p = ratio(tp, tp + fp);
            let r = ratio(tp, tp + fn_);
            Scores {
                precision: p,
                recall: r,
                f1: f1(p, r),
            }
        }
        Averaging::Macro => {
            let k = counts.len() as f64;
            let mut out = Scores::default();
            for &(tp, fp, fn_) in &counts {
                let p = ratio(tp, tp + fp);
                let r = ratio(tp, tp + fn_);
                out.precision += p / k;
                out.recall += r / k;
                out.f1 += f1(p, r) / k;
            }
            out
        }
    })
}
