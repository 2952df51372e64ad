use rayon::prelude::*;

use super::binning::{bin_matrix, midpoint, BinnedMatrix, MISSING_BIN};
use super::{leaf_weight, logistic_gradients, split_gain, GbtModel, Tree, TrainingConfig, TreeNode};
use crate::dataset::FeatureMatrix;
use crate::error::{Error, Result};
use crate::math::{log_loss, logit, sigmoid};

/// 2^80: fixed-point scale for gradient statistics. |g| <= 1 and h <= 1/4,
/// so an i128 holds the sum of up to 2^46 samples.
const FIXED_SCALE: f64 = 1_208_925_819_614_629_174_706_176.0;

pub(crate) fn to_fixed(v: f64) -> i128 {
    (v * FIXED_SCALE).round() as i128
}

pub(crate) fn from_fixed(v: i128) -> f64 {
    v as f64 / FIXED_SCALE
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct Stats {
    g: i128,
    h: i128,
    n: usize,
}

impl Stats {
    fn push(&mut self, g: i128, h: i128) {
        self.g += g;
        self.h += h;
        self.n += 1;
    }

    fn plus(self, o: Stats) -> Stats {
        Stats {
            g: self.g + o.g,
            h: self.h + o.h,
            n: self.n + o.n,
        }
    }

    fn minus(self, o: Stats) -> Stats {
        Stats {
            g: self.g - o.g,
            h: self.h - o.h,
            n: self.n - o.n,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    gain: f64,
    feature: usize,
    /// Highest bin routed left (missing values aside).
    left_bin: u16,
    /// Lowest occupied bin routed right.
    right_bin: u16,
    default_left: bool,
}

struct Grower<'a> {
    binned: &'a BinnedMatrix,
    grad: &'a [i128],
    hess: &'a [i128],
    cfg: &'a TrainingConfig,
    nodes: Vec<TreeNode>,
    leaf_value: Vec<f64>,
}

/// Work threshold (samples x features) below which a node is scanned serially.
const PAR_WORK: usize = 1 << 15;

impl Grower<'_> {
    fn node_stats(&self, samples: &[usize]) -> Stats {
        let mut s = Stats::default();
        for &i in samples {
            s.push(self.grad[i], self.hess[i]);
        }
        s
    }

    fn grow(&mut self, samples: Vec<usize>, depth: usize) -> usize {
        let id = self.nodes.len();
        self.nodes.push(TreeNode::Leaf { weight: 0.0 });
        let total = self.node_stats(&samples);

        if depth < self.cfg.max_depth && samples.len() >= 2 {
            if let Some(best) = self.best_split(&samples, total) {
                let codes = &self.binned.bins[best.feature];
                let (left, right): (Vec<usize>, Vec<usize>) = samples.iter().partition(|&&i| {
                    let b = codes[i];
                    if b == MISSING_BIN {
                        best.default_left
                    } else {
                        b <= best.left_bin
                    }
                });
                let fb = &self.binned.features[best.feature];
                let threshold = if fb.is_exact() {
                    midpoint(fb.uniques[best.left_bin as usize], fb.uniques[best.right_bin as usize])
                } else {
                    fb.cuts[best.left_bin as usize]
                };
                drop(samples);
                let l = self.grow(left, depth + 1);
                let r = self.grow(right, depth + 1);
                self.nodes[id] = TreeNode::Split {
                    feature: best.feature,
                    threshold,
                    left: l,
                    right: r,
                    default_left: best.default_left,
                };
                return id;
            }
        }

        let w = leaf_weight(
            from_fixed(total.g),
            from_fixed(total.h),
            self.cfg.l2_lambda,
            self.cfg.learning_rate,
        );
        self.nodes[id] = TreeNode::Leaf { weight: w };
        for &i in &samples {
            self.leaf_value[i] = w;
        }
        id
    }

    fn best_split(&self, samples: &[usize], total: Stats) -> Option<Candidate> {
        let n_features = self.binned.features.len();
        let per_feature: Vec<Option<Candidate>> = if samples.len() * n_features >= PAR_WORK {
            (0..n_features)
                .into_par_iter()
                .map(|f| self.best_for_feature(f, samples, total))
                .collect()
        } else {
            (0..n_features)
                .map(|f| self.best_for_feature(f, samples, total))
                .collect()
        };
        let mut best: Option<Candidate> = None;
        for c in per_feature.into_iter().flatten() {
            if best.is_none_or(|b| c.gain > b.gain) {
                best = Some(c);
            }
        }
        best.filter(|b| b.gain >= 0.0)
    }

    /// Occupied bins of `feature` within the node, ascending, plus missing stats.
    fn bin_stats(&self, feature: usize, samples: &[usize]) -> (Vec<(u16, Stats)>, Stats) {
        let codes = &self.binned.bins[feature];
        let n_bins = self.binned.features[feature].n_bins();
        let mut missing = Stats::default();
        if samples.len() * 8 < n_bins {
            let mut keyed: Vec<(u16, usize)> = Vec::with_capacity(samples.len());
            for &i in samples {
                let b = codes[i];
                if b == MISSING_BIN {
                    missing.push(self.grad[i], self.hess[i]);
                } else {
                    keyed.push((b, i));
                }
            }
            keyed.sort_unstable();
            let mut out: Vec<(u16, Stats)> = Vec::new();
            for (b, i) in keyed {
                match out.last_mut() {
                    Some((lb, s)) if *lb == b => s.push(self.grad[i], self.hess[i]),
                    _ => {
                        let mut s = Stats::default();
                        s.push(self.grad[i], self.hess[i]);
                        out.push((b, s));
                    }
                }
            }
            (out, missing)
        } else {
            let mut hist = vec![Stats::default(); n_bins];
            for &i in samples {
                let b = codes[i];
                if b == MISSING_BIN {
                    missing.push(self.grad[i], self.hess[i]);
                } else {
                    hist[b as usize].push(self.grad[i], self.hess[i]);
                }
            }
            let out = hist
                .into_iter()
                .enumerate()
                .filter(|(_, s)| s.n > 0)
                .map(|(b, s)| (b as u16, s))
                .collect();
            (out, missing)
        }
    }

    fn best_for_feature(&self, feature: usize, samples: &[usize], total: Stats) -> Option<Candidate> {
        let (bins, missing) = self.bin_stats(feature, samples);
        if bins.len() < 2 {
            return None;
        }
        let present = total.minus(missing);
        let (lambda, gamma, mcw) = (self.cfg.l2_lambda, self.cfg.gamma_min_gain, self.cfg.min_child_weight);
        let directions: &[bool] = if missing.n > 0 { &[true, false] } else { &[true] };

        let mut best: Option<Candidate> = None;
        let mut left = Stats::default();
        for k in 0..bins.len() - 1 {
            left = left.plus(bins[k].1);
            let right = present.minus(left);
            for &default_left in directions {
                let (l, r) = if default_left {
                    (left.plus(missing), right)
                } else {
                    (left, right.plus(missing))
                };
                let (hl, hr) = (from_fixed(l.h), from_fixed(r.h));
                if l.n == 0 || r.n == 0 || hl < mcw || hr < mcw {
                    continue;
                }
                let gain = split_gain(from_fixed(l.g), hl, from_fixed(r.g), hr, lambda, gamma);
                if best.is_none_or(|b| gain > b.gain) {
                    best = Some(Candidate {
                        gain,
                        feature,
                        left_bin: bins[k].0,
                        right_bin: bins[k + 1].0,
                        default_left,
                    });
                }
            }
        }
        best
    }
}

fn mean_loss(margins: &[f64], labels: &[f64]) -> f64 {
    margins.iter().zip(labels).map(|(&z, &y)| log_loss(z, y)).sum::<f64>() / margins.len() as f64
}

/// Fits `config.rounds` trees to labelled `features`.
pub fn train(features: &FeatureMatrix, config: &TrainingConfig) -> Result<GbtModel> {
    train_with_history(features, config).map(|(m, _)| m)
}

/// As [`train`], also returning the mean training log-loss before the first
/// round and after every round.
pub fn train_with_history(features: &FeatureMatrix, config: &TrainingConfig) -> Result<(GbtModel, Vec<f64>)> {
    config.validate()?;
    let n = features.n_rows();
    if n == 0 {
        return Err(Error::EmptyInput("training matrix has no rows".into()));
    }
    let labels: Vec<f64> = features
        .labels()
        .ok_or_else(|| Error::Input("training matrix has no labels".into()))?
        .iter()
        .map(|&y| f64::from(y))
        .collect();

    let binned = bin_matrix(features, config.exact_max_unique, config.histogram_bins);
    let mut margins = vec![logit(config.base_score); n];
    let mut history = vec![mean_loss(&margins, &labels)];
    let mut model = GbtModel::empty(features.n_cols(), config.clone());

    for round in 0..config.rounds {
        let (grad, hess): (Vec<i128>, Vec<i128>) = margins
            .par_iter()
            .zip(&labels)
            .map(|(&z, &y)| {
                let (g, h) = logistic_gradients(sigmoid(z), y);
                (to_fixed(g), to_fixed(h))
            })
            .unzip();
        let mut grower = Grower {
            binned: &binned,
            grad: &grad,
            hess: &hess,
            cfg: config,
            nodes: Vec::new(),
            leaf_value: vec![0.0; n],
        };
        grower.grow((0..n).collect(), 0);
        for (z, w) in margins.iter_mut().zip(&grower.leaf_value) {
            *z += w;
        }
        let tree = Tree { nodes: grower.nodes };
        log::debug!(
            "round {round}: {} nodes, depth {}, loss {:.6}",
            tree.nodes.len(),
            tree.depth(),
            mean_loss(&margins, &labels)
        );
        model.trees.push(tree);
        history.push(mean_loss(&margins, &labels));
    }
    Ok((model, history))
}
