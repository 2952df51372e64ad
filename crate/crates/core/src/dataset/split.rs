use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::GridGeometry;

/// Which side of the ROI holds the training columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrainSide {
    #[default]
    Left,
    Right,
}

/// Vertical partition of the ROI into two contiguous column intervals.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionSplit {
    pub train_cols: Range<usize>,
    pub validation_cols: Range<usize>,
}

impl RegionSplit {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let split: RegionSplit = serde_json::from_str(text).map_err(|e| Error::parse("region split", e))?;
        let (t, v) = (&split.train_cols, &split.validation_cols);
        let contiguous = t.end == v.start || v.end == t.start;
        if t.is_empty() || v.is_empty() || !contiguous || t.start.min(v.start) != 0 {
            return Err(Error::parse("region split", "intervals must be non-empty, contiguous and start at 0"));
        }
        Ok(split)
    }

    /// Total width covered by both intervals.
    pub fn width(&self) -> usize {
        self.train_cols.len() + self.validation_cols.len()
    }
}

/// Splits `[0, width)` into a training interval of `ceil(width * fraction)`
/// columns and a validation interval holding the rest.
pub fn split_regions(geometry: &GridGeometry, train_fraction: f64, side: TrainSide) -> Result<RegionSplit> {
    let width = geometry.width;
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Config(format!("train fraction {train_fraction} not in (0, 1)")));
    }
    // 3 * (2/3) rounds to 2.0000000000000004 in some spellings; ignore such dust
    let train = ((width as f64 * train_fraction) - 1e-9).ceil().max(0.0) as usize;
    if train == 0 || train >= width {
        return Err(Error::Config(format!(
            "split of width {width} at fraction {train_fraction} leaves an empty region"
        )));
    }
    Ok(match side {
        TrainSide::Left => RegionSplit {
            train_cols: 0..train,
            validation_cols: train..width,
        },
        TrainSide::Right => RegionSplit {
            train_cols: width - train..width,
            validation_cols: 0..width - train,
        },
    })
}
