//! Grid Potts CRF smoothing of per-pixel GDV probabilities.
//!
//! Minimizes
//!
//! ```text
//! E(x) = Σᵢ U(xᵢ) + β Σ_{i~j} 1[xᵢ ≠ xⱼ]
//! U(0) = −ln max(1 − p, floor)
//! U(1) = −ln max(p, floor) + ln(t / (1 − t))
//! ```
//!
//! where `t` is the initial threshold. The `ln(t / (1 − t))` term places the
//! unary decision boundary at `p = t`, so with `β = 0` the result is the
//! thresholded map `p >= t`.
//!
//! by iterated conditional modes. Pixels are updated one colour class at a
//! time (two classes for the 4-neighbourhood, four for the 8-neighbourhood);
//! no two pixels of a class are neighbours, so each class update is an exact
//! coordinate step and the energy cannot increase.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{BinaryMask, FloatRaster, GridGeometry};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Neighborhood {
    Four,
    Eight,
}

impl TryFrom<u8> for Neighborhood {
    type Error = String;

    fn try_from(v: u8) -> std::result::Result<Self, String> {
        match v {
            4 => Ok(Neighborhood::Four),
            8 => Ok(Neighborhood::Eight),
            _ => Err(format!("neighborhood must be 4 or 8, got {v}")),
        }
    }
}

impl From<Neighborhood> for u8 {
    fn from(n: Neighborhood) -> u8 {
        match n {
            Neighborhood::Four => 4,
            Neighborhood::Eight => 8,
        }
    }
}

impl Neighborhood {
    fn offsets(self) -> &'static [(isize, isize)] {
        match self {
            Neighborhood::Four => &[(-1, 0), (0, -1), (0, 1), (1, 0)],
            Neighborhood::Eight => &[(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)],
        }
    }

    /// Offsets to the "forward" half of the neighbourhood, so each edge is
    /// counted once.
    fn forward(self) -> &'static [(isize, isize)] {
        match self {
            Neighborhood::Four => &[(0, 1), (1, 0)],
            Neighborhood::Eight => &[(0, 1), (1, -1), (1, 0), (1, 1)],
        }
    }

    fn colors(self) -> usize {
        match self {
            Neighborhood::Four => 2,
            Neighborhood::Eight => 4,
        }
    }

    fn color(self, row: usize, col: usize) -> usize {
        match self {
            Neighborhood::Four => (row + col) % 2,
            Neighborhood::Eight => (row % 2) * 2 + col % 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CrfParams {
    pub beta: f64,
    pub neighborhood: Neighborhood,
    pub max_iters: usize,
    pub prob_floor: f64,
    pub init_threshold: f64,
}

impl Default for CrfParams {
    fn default() -> Self {
        CrfParams {
            beta: 1.5,
            neighborhood: Neighborhood::Four,
            max_iters: 50,
            prob_floor: 1e-6,
            init_threshold: 0.9,
        }
    }
}

impl CrfParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::Config(format!("crf beta {} must be finite and >= 0", self.beta)));
        }
        if !(self.prob_floor > 0.0 && self.prob_floor <= 0.5) {
            return Err(Error::Config(format!("crf prob_floor {} outside (0, 0.5]", self.prob_floor)));
        }
        if !(self.init_threshold > 0.0 && self.init_threshold < 1.0) {
            return Err(Error::Config(format!(
                "crf init_threshold {} outside (0, 1)",
                self.init_threshold
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SmoothOutcome {
    pub mask: BinaryMask,
    /// Energy of the initial labelling followed by the energy after each sweep.
    pub energies: Vec<f64>,
    pub sweeps: usize,
    pub converged: bool,
}

struct Field<'a> {
    width: usize,
    height: usize,
    /// Per pixel: U(0) and the preference for label 1, U(0) − U(1).
    unary: &'a [(f64, f64)],
    params: &'a CrfParams,
}

impl Field<'_> {
    fn neighbors(&self, row: usize, col: usize, offsets: &'static [(isize, isize)]) -> impl Iterator<Item = usize> + '_ {
        offsets.iter().filter_map(move |&(dr, dc)| {
            let r = row.checked_add_signed(dr).filter(|&r| r < self.height)?;
            let c = col.checked_add_signed(dc).filter(|&c| c < self.width)?;
            Some(r * self.width + c)
        })
    }

    fn energy(&self, labels: &[u8]) -> f64 {
        let rows: Vec<f64> = (0..self.height)
            .into_par_iter()
            .map(|row| {
                let mut unary = 0.0;
                let mut disagreements = 0u64;
                for col in 0..self.width {
                    let i = row * self.width + col;
                    let (u0, delta) = self.unary[i];
                    unary += if labels[i] == 1 { u0 - delta } else { u0 };
                    disagreements += self
                        .neighbors(row, col, self.params.neighborhood.forward())
                        .filter(|&j| labels[j] != labels[i])
                        .count() as u64;
                }
                unary + self.params.beta * disagreements as f64
            })
            .collect();
        rows.iter().sum()
    }

    /// Updates every pixel of one colour class; returns the number changed.
    fn half_sweep(&self, labels: &mut [u8], color: usize) -> usize {
        let nb = self.params.neighborhood;
        let snapshot: &[u8] = labels;
        let changes: Vec<Vec<(usize, u8)>> = (0..self.height)
            .into_par_iter()
            .map(|row| {
                let mut out = Vec::new();
                for col in (0..self.width).filter(|&c| nb.color(row, c) == color) {
                    let i = row * self.width + col;
                    let mut ones = 0usize;
                    let mut total = 0usize;
                    for j in self.neighbors(row, col, nb.offsets()) {
                        ones += usize::from(snapshot[j]);
                        total += 1;
                    }
                    // cost(1) − cost(0) = β (zeros − ones) − delta
                    let pairwise = self.params.beta * (total as f64 - 2.0 * ones as f64);
                    let delta = self.unary[i].1;
                    let best = match delta.partial_cmp(&pairwise) {
                        Some(std::cmp::Ordering::Greater) => 1,
                        Some(std::cmp::Ordering::Less) => 0,
                        _ => snapshot[i],
                    };
                    if best != snapshot[i] {
                        out.push((i, best));
                    }
                }
                out
            })
            .collect();
        let mut n = 0;
        for (i, v) in changes.into_iter().flatten() {
            labels[i] = v;
            n += 1;
        }
        n
    }
}

/// `(U(0), U(0) − U(1))` per pixel, rejecting NaN with the pixel's position.
/// The preference is forced to agree in sign with `p − t` so that rounding
/// cannot move a pixel across the threshold.
fn unary_costs(width: usize, probs: &[f32], floor: f64, t: f64) -> Result<Vec<(f64, f64)>> {
    let prior = (t / (1.0 - t)).ln();
    probs
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            if p.is_nan() || !(0.0..=1.0).contains(&p) {
                return Err(Error::Input(format!(
                    "crf: probability {p} at pixel {i} (row {}, col {}) is not in [0, 1]",
                    i / width,
                    i % width
                )));
            }
            let p = f64::from(p);
            let u0 = -(1.0 - p).max(floor).ln();
            let u1 = -p.max(floor).ln() + prior;
            let delta = u0 - u1;
            let delta = if p >= t { delta.max(0.0) } else { delta.min(0.0) };
            Ok((u0, delta))
        })
        .collect()
}

/// Smooths a probability raster into a binary mask.
pub fn smooth(probs: &FloatRaster, params: &CrfParams) -> Result<BinaryMask> {
    smooth_traced(probs.geometry(), probs.values(), params).map(|o| o.mask)
}

/// As [`smooth`], also reporting per-sweep energies.
pub fn smooth_traced(geometry: &GridGeometry, probs: &[f32], params: &CrfParams) -> Result<SmoothOutcome> {
    let init: Vec<u8> = probs
        .iter()
        .map(|&p| u8::from(f64::from(p) >= params.init_threshold))
        .collect();
    smooth_from(geometry, probs, init, params)
}

/// Runs ICM from the labelling `init` instead of thresholded probabilities.
pub fn smooth_from(geometry: &GridGeometry, probs: &[f32], init: Vec<u8>, params: &CrfParams) -> Result<SmoothOutcome> {
    params.validate()?;
    if probs.is_empty() {
        return Err(Error::EmptyInput("crf: probability raster is empty".into()));
    }
    for len in [probs.len(), init.len()] {
        if len != geometry.pixel_count() {
            return Err(Error::SizeMismatch {
                expected: geometry.pixel_count() as u64,
                found: len as u64,
            });
        }
    }
    let unary = unary_costs(geometry.width, probs, params.prob_floor, params.init_threshold)?;
    let field = Field {
        width: geometry.width,
        height: geometry.height,
        unary: &unary,
        params,
    };
    let mut labels = init;
    let mut energies = vec![field.energy(&labels)];
    let mut sweeps = 0;
    let mut converged = false;
    while sweeps < params.max_iters {
        let changed: usize = (0..params.neighborhood.colors())
            .map(|c| field.half_sweep(&mut labels, c))
            .sum();
        sweeps += 1;
        let e = field.energy(&labels);
        let prev = *energies.last().expect("initial energy recorded");
        if e > prev + 1e-9 * prev.abs().max(1.0) {
            return Err(Error::invariant(
                "crf",
                format!("energy rose from {prev} to {e} in sweep {sweeps}"),
            ));
        }
        energies.push(e);
        if changed == 0 {
            converged = true;
            break;
        }
    }
    log::debug!("crf: {sweeps} sweeps, converged {converged}, energy {:?}", energies.last());
    Ok(SmoothOutcome {
        mask: BinaryMask::new(*geometry, labels)?,
        energies,
        sweeps,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn run(w: usize, h: usize, probs: &[f32], params: &CrfParams) -> SmoothOutcome {
        smooth_traced(&GridGeometry::unit(w, h).unwrap(), probs, params).unwrap()
    }

    fn params(beta: f64) -> CrfParams {
        CrfParams {
            beta,
            ..Default::default()
        }
    }

    /// Direct energy evaluation over all unordered neighbour pairs.
    fn oracle_energy(w: usize, h: usize, probs: &[f32], labels: &[u8], p: &CrfParams) -> f64 {
        let mut e = 0.0;
        for i in 0..w * h {
            let q = f64::from(probs[i]);
            let t = p.init_threshold;
            e += if labels[i] == 1 {
                -q.max(p.prob_floor).ln() + (t / (1.0 - t)).ln()
            } else {
                -(1.0 - q).max(p.prob_floor).ln()
            };
        }
        for i in 0..w * h {
            for j in i + 1..w * h {
                let (ri, ci, rj, cj) = ((i / w) as i64, (i % w) as i64, (j / w) as i64, (j % w) as i64);
                let (dr, dc) = ((ri - rj).abs(), (ci - cj).abs());
                let adjacent = match p.neighborhood {
                    Neighborhood::Four => dr + dc == 1,
                    Neighborhood::Eight => dr.max(dc) == 1,
                };
                if adjacent && labels[i] != labels[j] {
                    e += p.beta;
                }
            }
        }
        e
    }

    #[test]
    fn uniform_confident_field_is_fixed() {
        let out = run(6, 5, &[0.99; 30], &params(2.0));
        assert!(out.mask.values().iter().all(|&v| v == 1));
        assert_eq!(out.sweeps, 1);
    }

    #[test]
    fn zero_beta_is_thresholding() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let probs: Vec<f32> = (0..400).map(|_| rng.random()).collect();
        for nb in [Neighborhood::Four, Neighborhood::Eight] {
            let p = CrfParams {
                beta: 0.0,
                neighborhood: nb,
                ..Default::default()
            };
            let out = run(20, 20, &probs, &p);
            let expected: Vec<u8> = probs.iter().map(|&q| u8::from(f64::from(q) >= 0.9)).collect();
            assert_eq!(out.mask.values(), &expected[..]);
        }
    }

    #[test]
    fn isolated_pixel_flips() {
        let mut probs = vec![0.01f32; 9];
        probs[4] = 0.95;
        // U(0) - U(1) = ln(0.95 / 0.05) - ln(0.9 / 0.1) ~ 0.747 < 4 * beta = 8
        let out = run(3, 3, &probs, &params(2.0));
        assert_eq!(out.mask.count_ones(), 0);
    }

    #[test]
    fn block_interior_is_kept() {
        let (w, h) = (30, 30);
        let mut probs = vec![0.01f32; w * h];
        for r in 10..20 {
            for c in 10..20 {
                probs[r * w + c] = 0.95;
            }
        }
        let out = run(w, h, &probs, &params(1.5));
        for r in 11..19 {
            for c in 11..19 {
                assert_eq!(out.mask.at(r, c), 1, "({r}, {c})");
            }
        }
    }

    #[test]
    fn energy_matches_oracle_and_never_rises() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for nb in [Neighborhood::Four, Neighborhood::Eight] {
            let (w, h) = (9, 7);
            let probs: Vec<f32> = (0..w * h).map(|_| rng.random()).collect();
            let p = CrfParams {
                beta: 0.8,
                neighborhood: nb,
                init_threshold: 0.5,
                ..Default::default()
            };
            let out = run(w, h, &probs, &p);
            let e_final = oracle_energy(w, h, &probs, out.mask.values(), &p);
            assert!((out.energies.last().unwrap() - e_final).abs() < 1e-9);
            for win in out.energies.windows(2) {
                assert!(win[1] <= win[0]);
            }
        }
    }

    #[test]
    fn converged_output_is_a_fixed_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let (w, h) = (32, 32);
        let probs: Vec<f32> = (0..w * h).map(|_| rng.random()).collect();
        let p = params(1.0);
        let first = run(w, h, &probs, &p);
        assert!(first.converged);
        let second = smooth_from(
            &GridGeometry::unit(w, h).unwrap(),
            &probs,
            first.mask.values().to_vec(),
            &p,
        )
        .unwrap();
        assert_eq!(second.sweeps, 1);
        assert_eq!(first.mask, second.mask);
    }

    #[test]
    fn nan_probability_names_pixel() {
        let mut probs = vec![0.5f32; 6];
        probs[4] = f32::NAN;
        let err = smooth_traced(&GridGeometry::unit(3, 2).unwrap(), &probs, &params(1.0)).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("pixel 4") && msg.contains("row 1, col 1"), "{msg}");
    }

    #[test]
    fn salt_noise_false_positives_drop() {
        let (w, h) = (64, 64);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let truth: Vec<u8> = (0..w * h)
            .map(|i| u8::from((20..40).contains(&(i / w)) && (10..50).contains(&(i % w))))
            .collect();
        let probs: Vec<f32> = truth
            .iter()
            .map(|&t| {
                let flip = rng.random::<f64>() < 0.02;
                if (t == 1) != flip { 0.97 } else { 0.03 }
            })
            .collect();
        let fp = |m: &[u8]| m.iter().zip(&truth).filter(|(&a, &b)| a == 1 && b == 0).count();
        let raw: Vec<u8> = probs.iter().map(|&p| u8::from(p >= 0.9)).collect();
        let out = run(w, h, &probs, &params(1.5));
        assert!(fp(out.mask.values()) < fp(&raw));
    }

    #[test]
    fn params_validated() {
        assert!(CrfParams::default().validate().is_ok());
        assert!(params(-1.0).validate().is_err());
        let p: CrfParams = serde_json::from_str(r#"{"neighborhood": 8}"#).unwrap();
        assert_eq!(p.neighborhood, Neighborhood::Eight);
        assert!(serde_json::from_str::<CrfParams>(r#"{"neighborhood": 6}"#).is_err());
    }
}
