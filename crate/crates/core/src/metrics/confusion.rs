use std::fmt::Write as _;
use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::BinaryMask;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionMatrix {
    pub fn new(tp: u64, tn: u64, fp: u64, fn_: u64) -> Self {
        ConfusionMatrix { tp, tn, fp, fn_ }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }

    pub fn positives(&self) -> u64 {
        self.tp + self.fn_
    }

    pub fn negatives(&self) -> u64 {
        self.tn + self.fp
    }

    fn add(self, o: Self) -> Self {
        ConfusionMatrix::new(self.tp + o.tp, self.tn + o.tn, self.fp + o.fp, self.fn_ + o.fn_)
    }

    fn count(&mut self, pred: bool, truth: bool) {
        match (pred, truth) {
            (true, true) => self.tp += 1,
            (false, false) => self.tn += 1,
            (true, false) => self.fp += 1,
            (false, true) => self.fn_ += 1,
        }
    }
}

/// Ratios derived from a confusion matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub fdr: f64,
    pub tpr: f64,
    pub tnr: f64,
    #[serde(rename = "for")]
    pub for_: f64,
    pub fpr: f64,
    pub precision: f64,
    pub recall: f64,
    pub accuracy: f64,
}

/// Counts over the pixels of `region` (a column interval spanning all rows).
pub fn confusion(pred: &BinaryMask, truth: &BinaryMask, region: &Range<usize>) -> Result<ConfusionMatrix> {
    let g = truth.geometry();
    if pred.geometry() != g {
        return Err(Error::Alignment("prediction and truth masks differ in geometry".into()));
    }
    if region.end > g.width || region.start > region.end {
        return Err(Error::Config(format!("region {region:?} outside width {}", g.width)));
    }
    let (p, t) = (pred.values(), truth.values());
    Ok((0..g.height)
        .into_par_iter()
        .map(|row| {
            let mut cm = ConfusionMatrix::default();
            for col in region.clone() {
                let i = row * g.width + col;
                cm.count(p[i] == 1, t[i] == 1);
            }
            cm
        })
        .reduce(ConfusionMatrix::default, ConfusionMatrix::add))
}

/// Counts for predictions `score >= threshold`.
pub fn confusion_at(scores: &[f64], truth: &[u8], threshold: f64) -> Result<ConfusionMatrix> {
    if scores.len() != truth.len() {
        return Err(Error::SizeMismatch {
            expected: truth.len() as u64,
            found: scores.len() as u64,
        });
    }
    let mut cm = ConfusionMatrix::default();
    for (&s, &t) in scores.iter().zip(truth) {
        cm.count(s >= threshold, t == 1);
    }
    Ok(cm)
}

fn ratio(num: u64, den: u64, empty: f64) -> f64 {
    if den == 0 {
        empty
    } else {
        num as f64 / den as f64
    }
}

/// FDR, TPR, TNR, FOR and accuracy. Empty denominators give FDR = 0,
/// FOR = 0, TPR = 1, TNR = 1 and accuracy = 1.
pub fn compute_metrics(cm: &ConfusionMatrix) -> MetricsReport {
    if cm.positives() == 0 && cm.total() > 0 {
        log::warn!("metrics: region has no positive pixels; TPR reported as 1");
    }
    let fdr = ratio(cm.fp, cm.tp + cm.fp, 0.0);
    let tpr = ratio(cm.tp, cm.positives(), 1.0);
    let tnr = ratio(cm.tn, cm.negatives(), 1.0);
    MetricsReport {
        fdr,
        tpr,
        tnr,
        for_: ratio(cm.fn_, cm.tn + cm.fn_, 0.0),
        fpr: 1.0 - tnr,
        precision: 1.0 - fdr,
        recall: tpr,
        accuracy: ratio(cm.tp + cm.tn, cm.total(), 1.0),
    }
}

/// Aligned plain-text table, one line per labelled matrix.
pub fn render_table(rows: &[(String, ConfusionMatrix)]) -> String {
    let label_w = rows.iter().map(|(l, _)| l.len()).max().unwrap_or(0).max(5);
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<label_w$}  {:>9} {:>9} {:>9} {:>9}  {:>6} {:>6} {:>6} {:>6} {:>8}",
        "", "TP", "TN", "FP", "FN", "FDR", "TPR", "TNR", "FOR", "accuracy"
    );
    for (label, cm) in rows {
        let m = compute_metrics(cm);
        let _ = writeln!(
            s,
            "{label:<label_w$}  {:>9} {:>9} {:>9} {:>9}  {:>6.3} {:>6.3} {:>6.3} {:>6.3} {:>8.3}",
            cm.tp, cm.tn, cm.fp, cm.fn_, m.fdr, m.tpr, m.tnr, m.for_, m.accuracy
        );
    }
    s
}
