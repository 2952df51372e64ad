//! Second-order gradient-boosted decision trees with a binary logistic
//! objective.
//!
//! Each round fits one regression tree to the gradient `g = p - y` and
//! hessian `h = p(1 - p)` of the logistic loss at the current predictions.
//! Splits maximise
//!
//! ```text
//! gain = ½ [GL²/(HL+λ) + GR²/(HR+λ) − (GL+GR)²/(HL+HR+λ)] − γ
//! ```
//!
//! and leaves carry `−η G/(H+λ)`. Gradient statistics are accumulated in
//! 128-bit fixed point, so node sums are exact and independent of the order
//! in which samples (or threads) contribute them.

mod binning;
mod grow;
mod io;

use serde::{Deserialize, Serialize};

use crate::dataset::FeatureMatrix;
use crate::error::{Error, Result};
use crate::math::{logit, sigmoid};

pub use grow::{train, train_with_history};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub max_depth: usize,
    pub rounds: usize,
    pub learning_rate: f64,
    pub l2_lambda: f64,
    pub gamma_min_gain: f64,
    pub min_child_weight: f64,
    pub base_score: f64,
    pub seed: u64,
    /// Features with at most this many distinct values are split exactly.
    pub exact_max_unique: usize,
    /// Quantile bin count for features above `exact_max_unique`.
    pub histogram_bins: usize,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            max_depth: 50,
            rounds: 40,
            learning_rate: 1.0,
            l2_lambda: 1.0,
            gamma_min_gain: 0.0,
            min_child_weight: 1.0,
            base_score: 0.5,
            seed: 0,
            exact_max_unique: 1024,
            histogram_bins: 256,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("training config: {m}")));
        if self.max_depth < 1 {
            return bad("max_depth must be >= 1");
        }
        if self.rounds < 1 {
            return bad("rounds must be >= 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return bad("learning_rate must be in (0, 1]");
        }
        if !(self.base_score > 0.0 && self.base_score < 1.0) {
            return bad("base_score must be in (0, 1)");
        }
        if !(self.l2_lambda >= 0.0 && self.gamma_min_gain >= 0.0 && self.min_child_weight >= 0.0) {
            return bad("l2_lambda, gamma_min_gain and min_child_weight must be non-negative");
        }
        if !(self.l2_lambda.is_finite() && self.gamma_min_gain.is_finite() && self.min_child_weight.is_finite()) {
            return bad("regularizers must be finite");
        }
        if self.histogram_bins < 2 || self.histogram_bins > 4096 || self.exact_max_unique > 4096 {
            return bad("histogram_bins must be in [2, 4096] and exact_max_unique <= 4096");
        }
        Ok(())
    }
}

/// One node of a regression tree. Rows go left when `x < threshold`;
/// missing (NaN) values follow `default_left`.
#[derive(Debug, Clone, PartialEq)]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        default_left: bool,
    },
    Leaf {
        weight: f64,
    },
}

/// Regression tree stored as a flat node array, root at index 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    nodes: Vec<TreeNode>,
}

impl Tree {
    pub fn new(nodes: Vec<TreeNode>) -> Result<Self> {
        let tree = Tree { nodes };
        tree.validate(usize::MAX, usize::MAX)
            .map_err(|(node, message)| Error::Model { tree: 0, node, message })?;
        Ok(tree)
    }

    pub fn leaf(weight: f64) -> Self {
        Tree {
            nodes: vec![TreeNode::Leaf { weight }],
        }
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    /// Leaf weight reached by `row`.
    pub fn predict_row(&self, row: &[f32]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                TreeNode::Leaf { weight } => return weight,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    default_left,
                } => {
                    let x = row[feature];
                    let go_left = if x.is_nan() { default_left } else { f64::from(x) < threshold };
                    i = if go_left { left } else { right };
                }
            }
        }
    }

    /// Number of edges on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        fn walk(nodes: &[TreeNode], i: usize) -> usize {
            match nodes[i] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn splits(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.nodes.iter().filter_map(|n| match *n {
            TreeNode::Split { feature, threshold, .. } => Some((feature, threshold)),
            TreeNode::Leaf { .. } => None,
        })
    }

    /// Structural check: children point forward, every node is reached exactly
    /// once, features are in range and depth is bounded.
    fn validate(&self, feature_count: usize, max_depth: usize) -> std::result::Result<(), (usize, String)> {
        let n = self.nodes.len();
        if n == 0 {
            return Err((0, "tree has no nodes".into()));
        }
        let mut parents = vec![0u32; n];
        let mut depth = vec![0usize; n];
        for (i, node) in self.nodes.iter().enumerate() {
            match *node {
                TreeNode::Leaf { weight } => {
                    if !weight.is_finite() {
                        return Err((i, "non-finite leaf weight".into()));
                    }
                }
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    if feature >= feature_count {
                        return Err((i, format!("feature {feature} out of range")));
                    }
                    if !threshold.is_finite() {
                        return Err((i, "non-finite threshold".into()));
                    }
                    for child in [left, right] {
                        if child <= i || child >= n {
                            return Err((i, format!("child index {child} invalid")));
                        }
                        parents[child] += 1;
                        depth[child] = depth[i] + 1;
                        if depth[child] > max_depth {
                            return Err((child, format!("depth exceeds {max_depth}")));
                        }
                    }
                    if left == right {
                        return Err((i, "left and right children coincide".into()));
                    }
                }
            }
        }
        if let Some(i) = (1..n).find(|&i| parents[i] != 1) {
            return Err((i, "node is not referenced exactly once".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GbtModel {
    pub trees: Vec<Tree>,
    pub base_score: f64,
    pub feature_count: usize,
    pub config: TrainingConfig,
}

impl GbtModel {
    /// Empty ensemble predicting `base_score` everywhere.
    pub fn empty(feature_count: usize, config: TrainingConfig) -> Self {
        GbtModel {
            trees: Vec::new(),
            base_score: config.base_score,
            feature_count,
            config,
        }
    }

    /// Raw log-odds for one row.
    pub fn margin_row(&self, row: &[f32]) -> f64 {
        logit(self.base_score) + self.trees.iter().map(|t| t.predict_row(row)).sum::<f64>()
    }

    pub fn predict_margin(&self, features: &FeatureMatrix) -> Result<Vec<f64>> {
        self.check_shape(features)?;
        use rayon::prelude::*;
        Ok((0..features.n_rows())
            .into_par_iter()
            .map(|i| self.margin_row(features.row(i)))
            .collect())
    }

    fn check_shape(&self, features: &FeatureMatrix) -> Result<()> {
        if features.n_cols() != self.feature_count {
            return Err(Error::Shape {
                expected: self.feature_count,
                found: features.n_cols(),
            });
        }
        Ok(())
    }
}

/// Probabilities clamped into the open unit interval.
pub(crate) fn prob_from_margin(z: f64) -> f64 {
    sigmoid(z).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

/// GDV probability for every row of `features`.
pub fn predict_proba(model: &GbtModel, features: &FeatureMatrix) -> Result<Vec<f64>> {
    Ok(model
        .predict_margin(features)?
        .into_iter()
        .map(prob_from_margin)
        .collect())
}

/// First and second derivative of the logistic loss with respect to the
/// margin, at predicted probability `p` and label `y`.
pub fn logistic_gradients(p: f64, y: f64) -> (f64, f64) {
    (p - y, p * (1.0 - p))
}

fn score_term(g: f64, h: f64, lambda: f64) -> f64 {
    let d = h + lambda;
    if d == 0.0 {
        0.0
    } else {
        g * g / d
    }
}

/// Loss reduction of splitting a node into (GL, HL) and (GR, HR).
pub fn split_gain(gl: f64, hl: f64, gr: f64, hr: f64, lambda: f64, gamma: f64) -> f64 {
    0.5 * (score_term(gl, hl, lambda) + score_term(gr, hr, lambda) - score_term(gl + gr, hl + hr, lambda)) - gamma
}

/// Newton leaf value `−η G/(H+λ)`, zero when the denominator vanishes.
pub fn leaf_weight(g: f64, h: f64, lambda: f64, eta: f64) -> f64 {
    let d = h + lambda;
    if d == 0.0 {
        0.0
    } else {
        -eta * g / d
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::log_loss;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn split_gain_examples() {
        assert_eq!(split_gain(0.0, 3.0, 0.0, 2.0, 1.0, 0.7), -0.7);
        assert!((split_gain(-2.0, 4.0, 2.0, 4.0, 1.0, 0.0) - 0.8).abs() < 1e-15);
        // 0/0 terms count as zero
        assert_eq!(split_gain(0.0, 0.0, 0.0, 0.0, 0.0, 0.0), 0.0);
    }

    #[test]
    fn split_gain_matches_independent_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let (gl, gr): (f64, f64) = (rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0));
            let (hl, hr): (f64, f64) = (rng.random_range(0.0..20.0), rng.random_range(0.0..20.0));
            let lambda: f64 = rng.random_range(0.0..3.0);
            let gamma: f64 = rng.random_range(0.0..1.0);
            let oracle = (gl.powi(2) / (hl + lambda)) / 2.0 + (gr.powi(2) / (hr + lambda)) / 2.0
                - ((gl + gr).powi(2) / (hl + hr + lambda)) / 2.0
                - gamma;
            let got = split_gain(gl, hl, gr, hr, lambda, gamma);
            assert!((got - oracle).abs() <= 1e-12 * oracle.abs().max(1.0), "{got} vs {oracle}");
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..100 {
            let z: f64 = rng.random_range(-6.0..6.0);
            let y = f64::from(rng.random_range(0..2u8));
            let p = sigmoid(z);
            let (g, h) = logistic_gradients(p, y);
            let eps = 1e-5;
            let fd_g = (log_loss(z + eps, y) - log_loss(z - eps, y)) / (2.0 * eps);
            let gp = logistic_gradients(sigmoid(z + eps), y).0;
            let gm = logistic_gradients(sigmoid(z - eps), y).0;
            let fd_h = (gp - gm) / (2.0 * eps);
            assert!((g - fd_g).abs() <= 1e-4 * g.abs().max(1e-3), "g {g} fd {fd_g}");
            assert!((h - fd_h).abs() <= 1e-4 * h.abs().max(1e-3), "h {h} fd {fd_h}");
        }
    }

    #[test]
    fn empty_ensemble_predicts_base_score() {
        let m = GbtModel::empty(3, TrainingConfig::default());
        let x = FeatureMatrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![-1.0, 0.0, 9.0]], None).unwrap();
        assert_eq!(predict_proba(&m, &x).unwrap(), vec![0.5, 0.5]);
    }

    #[test]
    fn appended_leaf_shifts_margin() {
        let mut m = GbtModel::empty(2, TrainingConfig::default());
        m.base_score = 0.3;
        let x = FeatureMatrix::from_rows(&[vec![1.0, 2.0], vec![5.0, -1.0]], None).unwrap();
        let before = m.predict_margin(&x).unwrap();
        m.trees.push(Tree::leaf(0.625));
        let after = m.predict_margin(&x).unwrap();
        for (a, b) in after.iter().zip(&before) {
            assert_eq!(a - b, 0.625);
        }
    }

    #[test]
    fn hand_built_stump() {
        let tree = Tree::new(vec![
            TreeNode::Split {
                feature: 3,
                threshold: 1.5,
                left: 1,
                right: 2,
                default_left: true,
            },
            TreeNode::Leaf { weight: -1.0 },
            TreeNode::Leaf { weight: 1.0 },
        ])
        .unwrap();
        let mut m = GbtModel::empty(4, TrainingConfig::default());
        m.trees.push(tree);
        let x = FeatureMatrix::from_rows(&[vec![0.0, 0.0, 0.0, 2.0], vec![0.0, 0.0, 0.0, f32::NAN]], None).unwrap();
        let p = predict_proba(&m, &x).unwrap();
        assert!((p[0] - 0.731_058_578_630_004_9).abs() < 1e-15);
        assert!((p[1] - sigmoid(-1.0)).abs() < 1e-15);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let m = GbtModel::empty(89, TrainingConfig::default());
        let x = FeatureMatrix::from_rows(&[vec![0.0; 88]], None).unwrap();
        assert!(matches!(predict_proba(&m, &x), Err(Error::Shape { expected: 89, found: 88 })));
    }

    #[test]
    fn malformed_tree_rejected() {
        let cyclic = Tree::new(vec![
            TreeNode::Split {
                feature: 0,
                threshold: 0.0,
                left: 0,
                right: 1,
                default_left: true,
            },
            TreeNode::Leaf { weight: 0.0 },
        ]);
        assert!(matches!(cyclic, Err(Error::Model { node: 0, .. })));
    }

    #[test]
    fn config_validation() {
        assert!(TrainingConfig::default().validate().is_ok());
        let c = TrainingConfig {
            learning_rate: 1.5,
            ..Default::default()
        };
        assert!(c.validate().is_err());
        let c = TrainingConfig {
            max_depth: 0,
            ..Default::default()
        };
        assert!(c.validate().is_err());
        let d = TrainingConfig::default();
        assert_eq!((d.max_depth, d.rounds, d.learning_rate), (50, 40, 1.0));
    }
}
