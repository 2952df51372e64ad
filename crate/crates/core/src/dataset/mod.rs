//! Supervised dataset construction: label rasterization, the training /
//! validation column split, class-balanced undersampling and feature
//! assembly from the three SAR cubes.

mod features;
mod polygon;
mod sampling;
mod split;

pub use features::{assemble_features, write_exclusions, Assembled, FeatureMatrix, PixelRequest};
pub use polygon::{coverage_fractions, rasterize_polygons, Polygon, PolygonSet, COVERAGE_THRESHOLD};
pub use sampling::{undersample, undersample_valid, SampleEntry, SampleIndex};
pub use split::{split_regions, RegionSplit, TrainSide};
