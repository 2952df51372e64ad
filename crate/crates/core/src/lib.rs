//! Groundwater-dependent vegetation (GDV) mapping from Sentinel-1 SAR data
//! cubes.
//!
//! The pipeline turns three co-registered one-year cubes (VV and VH
//! intensity, 30 bands each; interferometric coherence, 29 bands) and a set
//! of GDV polygons into per-pixel GDV predictions:
//!
//! 1. [`dataset::rasterize_polygons`] builds the binary label raster,
//! 2. [`dataset::split_regions`] and [`dataset::undersample`] build a
//!    class-balanced training set from the left part of the ROI,
//! 3. [`gbt::train`] fits a second-order boosted tree ensemble, with
//!    [`logreg`] as the linear benchmark,
//! 4. [`crf::smooth`] removes isolated detections with a grid Potts CRF,
//! 5. [`metrics`] scores both outputs and traces ROC / precision-recall
//!    curves, and [`idw`] interpolates borehole depth to water.
//!
//! [`synth`] generates cubes with planted GDV patches for desk-scale runs and
//! [`pipeline`] wires the stages together behind the `sargdv` CLI.

pub mod crf;
pub mod dataset;
pub mod error;
pub mod gbt;
pub mod idw;
pub mod logreg;
pub mod math;
pub mod metrics;
pub mod pipeline;
pub mod raster;
pub mod synth;

pub use error::{Error, Result};
