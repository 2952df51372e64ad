//! Unregularized logistic regression, the linear benchmark for the boosted
//! model.
//!
//! Columns are standardized before fitting and the mean/std pairs are stored
//! in the model, so predictions on raw features use the same scaling.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::FeatureMatrix;
use crate::error::{Error, Result};
use crate::math::{log_loss, sigmoid};

pub const LOGREG_SCHEMA_VERSION: u32 = 1;
const CHUNK: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LogRegConfig {
    pub max_iters: usize,
    pub tolerance: f64,
}

impl Default for LogRegConfig {
    fn default() -> Self {
        LogRegConfig {
            max_iters: 5000,
            tolerance: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingMeta {
    pub iterations: usize,
    pub step_size: f64,
    pub converged: bool,
    pub final_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRegModel {
    /// Weights on standardized columns; 0 for dropped zero-variance columns.
    pub weights: Vec<f64>,
    pub bias: f64,
    pub means: Vec<f64>,
    /// 0 marks a dropped column.
    pub stds: Vec<f64>,
    pub meta: TrainingMeta,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    schema_version: u32,
    kind: String,
    #[serde(flatten)]
    model: LogRegModel,
}

impl LogRegModel {
    /// Model with the given weights acting on already-standardized features.
    pub fn from_weights(weights: Vec<f64>, bias: f64) -> Self {
        let n = weights.len();
        LogRegModel {
            weights,
            bias,
            means: vec![0.0; n],
            stds: vec![1.0; n],
            meta: TrainingMeta {
                iterations: 0,
                step_size: 0.0,
                converged: false,
                final_loss: f64::NAN,
            },
        }
    }

    pub fn feature_count(&self) -> usize {
        self.weights.len()
    }

    pub fn margin_row(&self, row: &[f32]) -> f64 {
        let mut z = self.bias;
        for (j, &x) in row.iter().enumerate() {
            if self.stds[j] > 0.0 {
                z += self.weights[j] * (f64::from(x) - self.means[j]) / self.stds[j];
            }
        }
        z
    }

    pub fn to_json_string(&self) -> Result<String> {
        let f = ModelFile {
            schema_version: LOGREG_SCHEMA_VERSION,
            kind: "logreg".into(),
            model: self.clone(),
        };
        serde_json::to_string(&f).map_err(|e| Error::parse("logreg model", e))
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let f: ModelFile = serde_json::from_str(s).map_err(|e| Error::parse("logreg model", e))?;
        if f.schema_version != LOGREG_SCHEMA_VERSION || f.kind != "logreg" {
            return Err(Error::parse("logreg model", "not a version-1 logreg model"));
        }
        let m = f.model;
        let n = m.weights.len();
        if m.means.len() != n || m.stds.len() != n {
            return Err(Error::parse("logreg model", "weights, means and stds differ in length"));
        }
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        if !finite(&m.weights) || !finite(&m.means) || !finite(&m.stds) || !m.bias.is_finite() {
            return Err(Error::parse("logreg model", "non-finite parameter"));
        }
        if m.stds.iter().any(|&s| s < 0.0) {
            return Err(Error::parse("logreg model", "negative std"));
        }
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json_string()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&s)
    }
}

/// Mean logistic loss and its gradient for row-major `rows` (`n_cols` wide)
/// at `params = [w_1, ..., w_n, b]`. The gradient has the same layout.
///
/// Rows are reduced in fixed chunks, so the result does not depend on the
/// number of worker threads.
pub fn loss_and_gradient(rows: &[f64], n_cols: usize, labels: &[f64], params: &[f64]) -> (f64, Vec<f64>) {
    let n = labels.len();
    let partials: Vec<(f64, Vec<f64>)> = rows
        .par_chunks(CHUNK * n_cols.max(1))
        .zip(labels.par_chunks(CHUNK))
        .map(|(chunk, ys)| {
            let mut loss = 0.0;
            let mut grad = vec![0.0; n_cols + 1];
            for (k, &y) in ys.iter().enumerate() {
                let x = &chunk[k * n_cols..(k + 1) * n_cols];
                let z = params[n_cols] + x.iter().zip(params).map(|(a, w)| a * w).sum::<f64>();
                loss += log_loss(z, y);
                let r = sigmoid(z) - y;
                for (g, a) in grad.iter_mut().zip(x) {
                    *g += r * a;
                }
                grad[n_cols] += r;
            }
            (loss, grad)
        })
        .collect();
    let mut loss = 0.0;
    let mut grad = vec![0.0; n_cols + 1];
    for (l, g) in partials {
        loss += l;
        for (a, b) in grad.iter_mut().zip(g) {
            *a += b;
        }
    }
    let inv = 1.0 / n as f64;
    grad.iter_mut().for_each(|g| *g *= inv);
    (loss * inv, grad)
}

fn loss_only(rows: &[f64], n_cols: usize, labels: &[f64], params: &[f64]) -> f64 {
    let partials: Vec<f64> = rows
        .par_chunks(CHUNK * n_cols.max(1))
        .zip(labels.par_chunks(CHUNK))
        .map(|(chunk, ys)| {
            ys.iter()
                .enumerate()
                .map(|(k, &y)| {
                    let x = &chunk[k * n_cols..(k + 1) * n_cols];
                    let z = params[n_cols] + x.iter().zip(params).map(|(a, w)| a * w).sum::<f64>();
                    log_loss(z, y)
                })
                .sum()
        })
        .collect();
    partials.iter().sum::<f64>() / labels.len() as f64
}

/// Fits the model by gradient descent with Armijo backtracking.
pub fn train_logreg(features: &FeatureMatrix, config: &LogRegConfig) -> Result<LogRegModel> {
    train_logreg_with_history(features, config).map(|(m, _)| m)
}

/// As [`train_logreg`], also returning the loss after every accepted step
/// (the first entry is the loss at zero parameters).
pub fn train_logreg_with_history(features: &FeatureMatrix, config: &LogRegConfig) -> Result<(LogRegModel, Vec<f64>)> {
    if !(config.tolerance > 0.0) {
        return Err(Error::Config("logreg tolerance must be positive".into()));
    }
    let n = features.n_rows();
    let d = features.n_cols();
    if n == 0 {
        return Err(Error::EmptyInput("logreg training matrix has no rows".into()));
    }
    let labels: Vec<f64> = features
        .labels()
        .ok_or_else(|| Error::Input("logreg training matrix has no labels".into()))?
        .iter()
        .map(|&y| f64::from(y))
        .collect();

    let mut means = vec![0.0; d];
    let mut stds = vec![0.0; d];
    for j in 0..d {
        let col = (0..n).map(|i| f64::from(features.get(i, j)));
        let mean = col.clone().sum::<f64>() / n as f64;
        let var = col.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        if !mean.is_finite() || !var.is_finite() {
            return Err(Error::Input(format!("column {j} has non-finite values")));
        }
        means[j] = mean;
        stds[j] = var.sqrt();
        if stds[j] == 0.0 {
            log::warn!("logreg: column {} has zero variance; dropped", features.column_names()[j]);
        }
    }
    let kept: Vec<usize> = (0..d).filter(|&j| stds[j] > 0.0).collect();
    let k = kept.len();
    let mut rows = Vec::with_capacity(n * k);
    for i in 0..n {
        for &j in &kept {
            rows.push((f64::from(features.get(i, j)) - means[j]) / stds[j]);
        }
    }

    let mut params = vec![0.0; k + 1];
    let (mut loss, mut grad) = loss_and_gradient(&rows, k, &labels, &params);
    let mut history = vec![loss];
    let mut step = 1.0;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < config.max_iters {
        let gmax = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        if gmax < config.tolerance {
            converged = true;
            break;
        }
        let gsq: f64 = grad.iter().map(|g| g * g).sum();
        let mut t = step;
        let mut accepted = None;
        while t > 1e-20 {
            let trial: Vec<f64> = params.iter().zip(&grad).map(|(p, g)| p - t * g).collect();
            let trial_loss = loss_only(&rows, k, &labels, &trial);
            if trial_loss <= loss - 0.5 * t * gsq {
                accepted = Some((trial, trial_loss));
                break;
            }
            t *= 0.5;
        }
        let Some((next, next_loss)) = accepted else {
            log::warn!("logreg: line search failed at iteration {iterations}");
            break;
        };
        params = next;
        (loss, grad) = loss_and_gradient(&rows, k, &labels, &params);
        debug_assert!(loss <= next_loss + 1e-12 || next_loss.is_nan());
        history.push(loss);
        step = t * 2.0;
        iterations += 1;
    }
    if !converged {
        let gmax = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        converged = gmax < config.tolerance;
    }
    log::info!("logreg: {iterations} iterations, loss {loss:.6}, converged {converged}");

    let mut weights = vec![0.0; d];
    for (slot, &j) in kept.iter().enumerate() {
        weights[j] = params[slot];
    }
    Ok((
        LogRegModel {
            weights,
            bias: params[k],
            means,
            stds,
            meta: TrainingMeta {
                iterations,
                step_size: step / 2.0,
                converged,
                final_loss: loss,
            },
        },
        history,
    ))
}

pub fn predict_logreg(model: &LogRegModel, features: &FeatureMatrix) -> Result<Vec<f64>> {
    if features.n_cols() != model.feature_count() {
        return Err(Error::Shape {
            expected: model.feature_count(),
            found: features.n_cols(),
        });
    }
    Ok((0..features.n_rows())
        .into_par_iter()
        .map(|i| sigmoid(model.margin_row(features.row(i))))
        .collect())
}
