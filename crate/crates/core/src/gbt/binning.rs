//! Per-feature candidate thresholds and the binned view of the training matrix.

use rayon::prelude::*;

use crate::dataset::FeatureMatrix;

pub(crate) const MISSING_BIN: u16 = u16::MAX;

pub(crate) struct FeatureBins {
    /// Ascending thresholds; a value's bin is the number of cuts `<= x`.
    pub cuts: Vec<f64>,
    /// Distinct values when the feature is split exactly (bin `b` holds
    /// exactly `uniques[b]`); empty in histogram mode.
    pub uniques: Vec<f32>,
}

impl FeatureBins {
    pub fn bin_of(&self, x: f32) -> u16 {
        if x.is_nan() {
            MISSING_BIN
        } else {
            let x = f64::from(x);
            self.cuts.partition_point(|&c| c <= x) as u16
        }
    }

    pub fn n_bins(&self) -> usize {
        self.cuts.len() + 1
    }

    pub fn is_exact(&self) -> bool {
        !self.uniques.is_empty()
    }
}

pub(crate) struct BinnedMatrix {
    pub features: Vec<FeatureBins>,
    /// Column-major bin codes, `bins[feature][row]`.
    pub bins: Vec<Vec<u16>>,
}

pub(crate) fn midpoint(a: f32, b: f32) -> f64 {
    0.5 * (f64::from(a) + f64::from(b))
}

fn feature_bins(column: &[f32], exact_max_unique: usize, histogram_bins: usize) -> FeatureBins {
    let mut sorted: Vec<f32> = column.iter().copied().filter(|v| !v.is_nan()).collect();
    sorted.sort_unstable_by(|a, b| a.total_cmp(b));
    let mut uniques = sorted.clone();
    uniques.dedup_by(|a, b| a == b);

    if uniques.len() <= exact_max_unique {
        let cuts = uniques.windows(2).map(|w| midpoint(w[0], w[1])).collect();
        return FeatureBins { cuts, uniques };
    }

    // Quantile cuts: place a boundary after the first distinct value whose
    // cumulative count reaches each k/bins fraction of the data.
    let n = sorted.len();
    let mut cuts = Vec::with_capacity(histogram_bins);
    let mut u = 0usize;
    let mut seen = 0usize;
    for k in 1..histogram_bins {
        let target = (k * n).div_ceil(histogram_bins);
        while u < uniques.len() && seen < target {
            let v = uniques[u];
            seen = sorted.partition_point(|&x| x <= v);
            u += 1;
        }
        if u < uniques.len() {
            let c = midpoint(uniques[u - 1], uniques[u]);
            if cuts.last().is_none_or(|&last| c > last) {
                cuts.push(c);
            }
        }
    }
    FeatureBins {
        cuts,
        uniques: Vec::new(),
    }
}

pub(crate) fn bin_matrix(x: &FeatureMatrix, exact_max_unique: usize, histogram_bins: usize) -> BinnedMatrix {
    let (n, m) = (x.n_rows(), x.n_cols());
    let per_feature: Vec<(FeatureBins, Vec<u16>)> = (0..m)
        .into_par_iter()
        .map(|j| {
            let column: Vec<f32> = (0..n).map(|i| x.get(i, j)).collect();
            let fb = feature_bins(&column, exact_max_unique, histogram_bins);
            let codes = column.iter().map(|&v| fb.bin_of(v)).collect();
            (fb, codes)
        })
        .collect();
    let (features, bins) = per_feature.into_iter().unzip();
    BinnedMatrix { features, bins }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_bins_follow_unique_values() {
        let fb = feature_bins(&[3.0, 1.0, 2.0, 1.0, f32::NAN], 1024, 256);
        assert_eq!(fb.uniques, vec![1.0, 2.0, 3.0]);
        assert_eq!(fb.cuts, vec![1.5, 2.5]);
        assert_eq!(fb.bin_of(1.0), 0);
        assert_eq!(fb.bin_of(2.0), 1);
        assert_eq!(fb.bin_of(3.0), 2);
        assert_eq!(fb.bin_of(f32::NAN), MISSING_BIN);
    }

    #[test]
    fn signed_zeros_share_a_bin() {
        let fb = feature_bins(&[-0.0, 0.0, 1.0], 1024, 256);
        assert_eq!(fb.uniques.len(), 2);
        assert_eq!(fb.bin_of(-0.0), fb.bin_of(0.0));
    }

    #[test]
    fn histogram_mode_caps_bin_count() {
        let col: Vec<f32> = (0..5000).map(|i| (i as f32 * 0.37).sin()).collect();
        let fb = feature_bins(&col, 1024, 256);
        assert!(!fb.is_exact());
        assert!(fb.n_bins() <= 256 && fb.n_bins() > 200, "{}", fb.n_bins());
        assert!(fb.cuts.windows(2).all(|w| w[0] < w[1]));
        // roughly equal-frequency bins
        let mut counts = vec![0usize; fb.n_bins()];
        for &v in &col {
            counts[fb.bin_of(v) as usize] += 1;
        }
        assert!(counts.iter().all(|&c| c <= 3 * 5000 / 256), "{counts:?}");
    }
}
