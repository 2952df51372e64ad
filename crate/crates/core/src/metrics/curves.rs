use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::confusion::ConfusionMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CurveKind {
    Roc,
    Prc,
}

/// One threshold of the sweep. `tp` and `fp` count scores `>= threshold`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub threshold: f64,
    pub x: f64,
    pub y: f64,
    pub tp: u64,
    pub fp: u64,
}

/// ROC points are (FPR, TPR); PRC points are (recall, precision).
/// Thresholds strictly decrease along `points`; the first is `+inf`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSeries {
    pub kind: CurveKind,
    pub points: Vec<CurvePoint>,
    pub auc: f64,
    pub positives: u64,
    pub negatives: u64,
}

/// Cumulative (threshold, tp, fp) per distinct score, highest first, with a
/// leading `+inf` entry.
fn sweep(scores: &[f64], truth: &[u8]) -> Result<(Vec<(f64, u64, u64)>, u64, u64)> {
    if scores.len() != truth.len() {
        return Err(Error::SizeMismatch {
            expected: truth.len() as u64,
            found: scores.len() as u64,
        });
    }
    if let Some(i) = scores.iter().position(|s| s.is_nan()) {
        return Err(Error::Input(format!("score at index {i} is NaN")));
    }
    let positives = truth.iter().filter(|&&t| t == 1).count() as u64;
    let negatives = truth.len() as u64 - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::UndefinedCurve(format!(
            "need both classes, got {positives} positives and {negatives} negatives"
        )));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_unstable_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut out = vec![(f64::INFINITY, 0, 0)];
    let (mut tp, mut fp) = (0u64, 0u64);
    for group in order.chunk_by(|&a, &b| scores[a] == scores[b]) {
        for &i in group {
            if truth[i] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
        }
        out.push((scores[group[0]], tp, fp));
    }
    Ok((out, positives, negatives))
}

/// ROC curve over every distinct score with trapezoidal AUC. Tied scores
/// form a single step, so AUC equals P(s⁺ > s⁻) + ½ P(s⁺ = s⁻).
pub fn roc_curve(scores: &[f64], truth: &[u8]) -> Result<CurveSeries> {
    let (steps, pos, neg) = sweep(scores, truth)?;
    let points: Vec<CurvePoint> = steps
        .iter()
        .map(|&(threshold, tp, fp)| CurvePoint {
            threshold,
            x: fp as f64 / neg as f64,
            y: tp as f64 / pos as f64,
            tp,
            fp,
        })
        .collect();
    // twice the area in units of 1/(pos*neg), accumulated exactly
    let mut doubled: u128 = 0;
    for w in points.windows(2) {
        doubled += u128::from(w[1].fp - w[0].fp) * u128::from(w[0].tp + w[1].tp);
    }
    let auc = doubled as f64 / (2.0 * pos as f64 * neg as f64);
    Ok(CurveSeries {
        kind: CurveKind::Roc,
        points,
        auc,
        positives: pos,
        negatives: neg,
    })
}

/// Precision-recall curve over the same sweep. At recall 0 the precision is
/// that of the highest-scoring group. AUC is trapezoidal.
pub fn prc_curve(scores: &[f64], truth: &[u8]) -> Result<CurveSeries> {
    let (steps, pos, neg) = sweep(scores, truth)?;
    let precision = |tp: u64, fp: u64| tp as f64 / (tp + fp) as f64;
    let (_, tp1, fp1) = steps[1];
    let mut points = vec![CurvePoint {
        threshold: f64::INFINITY,
        x: 0.0,
        y: precision(tp1, fp1),
        tp: 0,
        fp: 0,
    }];
    points.extend(steps[1..].iter().map(|&(threshold, tp, fp)| CurvePoint {
        threshold,
        x: tp as f64 / pos as f64,
        y: precision(tp, fp),
        tp,
        fp,
    }));
    let auc = points
        .windows(2)
        .map(|w| (w[1].x - w[0].x) * (w[0].y + w[1].y) / 2.0)
        .sum();
    Ok(CurveSeries {
        kind: CurveKind::Prc,
        points,
        auc,
        positives: pos,
        negatives: neg,
    })
}

impl CurveSeries {
    /// Confusion matrix of predicting positive iff `score >= threshold`.
    pub fn operating_point(&self, threshold: f64) -> ConfusionMatrix {
        let p = self
            .points
            .iter()
            .rev()
            .find(|p| p.threshold >= threshold)
            .expect("first point has an infinite threshold");
        ConfusionMatrix::new(p.tp, self.negatives - p.fp, p.fp, self.positives - p.tp)
    }

    /// Highest TPR among thresholds whose FDR does not exceed `max_fdr`
    /// (the empty prediction counts as FDR 0, TPR 0).
    pub fn tpr_at_fdr(&self, max_fdr: f64) -> f64 {
        self.points
            .iter()
            .filter(|p| p.tp + p.fp == 0 || p.fp as f64 / (p.tp + p.fp) as f64 <= max_fdr)
            .map(|p| p.tp as f64 / self.positives as f64)
            .fold(0.0, f64::max)
    }

    /// `threshold,x,y` rows; the leading infinite threshold is written as `inf`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("threshold,x,y\n");
        for p in &self.points {
            let _ = writeln!(s, "{},{},{}", p.threshold, p.x, p.y);
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{compute_metrics, confusion_at};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pairwise_auc(scores: &[f64], truth: &[u8]) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for (i, &si) in scores.iter().enumerate() {
            for (j, &sj) in scores.iter().enumerate() {
                if truth[i] == 1 && truth[j] == 0 {
                    den += 1.0;
                    if si > sj {
                        num += 1.0;
                    } else if si == sj {
                        num += 0.5;
                    }
                }
            }
        }
        num / den
    }

    fn random_instance(rng: &mut ChaCha8Rng, n: usize) -> (Vec<f64>, Vec<u8>) {
        loop {
            // coarse scores so ties occur
            let scores: Vec<f64> = (0..n).map(|_| f64::from(rng.random_range(0..8u8)) / 8.0).collect();
            let truth: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
            if truth.contains(&0) && truth.contains(&1) {
                return (scores, truth);
            }
        }
    }

    #[test]
    fn perfect_and_constant_scores() {
        let truth = [0u8, 1, 1, 0, 1];
        let perfect: Vec<f64> = truth.iter().map(|&t| f64::from(t)).collect();
        assert_eq!(roc_curve(&perfect, &truth).unwrap().auc, 1.0);
        let prc = prc_curve(&perfect, &truth).unwrap();
        // each recall level is first reached with precision 1
        for w in prc.points.windows(2) {
            if w[1].x > w[0].x {
                assert_eq!(w[1].y, 1.0);
            }
        }
        assert_eq!(roc_curve(&[0.3; 5], &truth).unwrap().auc, 0.5);
    }

    #[test]
    fn single_class_is_undefined() {
        assert!(matches!(roc_curve(&[0.1, 0.2], &[1, 1]), Err(Error::UndefinedCurve(_))));
        assert!(matches!(prc_curve(&[0.1, 0.2], &[0, 0]), Err(Error::UndefinedCurve(_))));
    }

    #[test]
    fn auc_matches_pairwise_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        for _ in 0..50 {
            let (s, t) = random_instance(&mut rng, 20);
            let roc = roc_curve(&s, &t).unwrap();
            assert!((roc.auc - pairwise_auc(&s, &t)).abs() <= 1e-12);
        }
    }

    #[test]
    fn series_shape() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let (s, t) = random_instance(&mut rng, 40);
        let roc = roc_curve(&s, &t).unwrap();
        assert_eq!((roc.points[0].x, roc.points[0].y), (0.0, 0.0));
        let last = roc.points.last().unwrap();
        assert_eq!((last.x, last.y), (1.0, 1.0));
        for w in roc.points.windows(2) {
            assert!(w[1].threshold < w[0].threshold);
            assert!(w[1].x >= w[0].x);
        }
        let prc = prc_curve(&s, &t).unwrap();
        assert_eq!(prc.points[0].x, 0.0);
        assert_eq!(prc.points[0].y, prc.points[1].y);
    }

    #[test]
    fn operating_points_match_thresholded_metrics() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let s: Vec<f64> = (0..500).map(|_| rng.random()).collect();
        let t: Vec<u8> = s.iter().map(|&v| u8::from(v + rng.random_range(-0.4..0.4) > 0.5)).collect();
        let roc = roc_curve(&s, &t).unwrap();
        let prc = prc_curve(&s, &t).unwrap();
        for p in [0.9, 0.2, 0.5, 0.0, 1.0, 1.5] {
            let direct = confusion_at(&s, &t, p).unwrap();
            assert_eq!(roc.operating_point(p), direct);
            assert_eq!(prc.operating_point(p), direct);
            assert_eq!(compute_metrics(&roc.operating_point(p)), compute_metrics(&direct));
        }
    }

    #[test]
    fn tpr_at_fdr_is_monotone_in_budget() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let (s, t) = random_instance(&mut rng, 200);
        let roc = roc_curve(&s, &t).unwrap();
        let mut prev = 0.0;
        for k in 0..=10 {
            let v = roc.tpr_at_fdr(f64::from(k) / 10.0);
            assert!(v >= prev);
            prev = v;
        }
        assert_eq!(roc.tpr_at_fdr(1.0), 1.0);
    }

    #[test]
    fn csv_has_header_and_rows() {
        let roc = roc_curve(&[0.2, 0.8], &[0, 1]).unwrap();
        let csv = roc.to_csv();
        assert!(csv.starts_with("threshold,x,y\ninf,0,0\n"));
        assert_eq!(csv.lines().count(), 4);
    }

    proptest! {
        #[test]
        fn auc_invariant_under_monotone_transform(
            raw in proptest::collection::vec((0u8..16, 0u8..2), 2..60)
        ) {
            let s: Vec<f64> = raw.iter().map(|&(v, _)| f64::from(v) / 16.0).collect();
            let t: Vec<u8> = raw.iter().map(|&(_, y)| y).collect();
            prop_assume!(t.contains(&0) && t.contains(&1));
            let a = roc_curve(&s, &t).unwrap().auc;
            let warped: Vec<f64> = s.iter().map(|v| (3.0 * v).exp() - 7.0).collect();
            let b = roc_curve(&warped, &t).unwrap().auc;
            prop_assert!((a - b).abs() < 1e-12);
            prop_assert!((a - pairwise_auc(&s, &t)).abs() < 1e-12);
        }
    }
}
