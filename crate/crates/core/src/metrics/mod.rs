//! Confusion matrices, derived rates, ROC / precision-recall curves and
//! their text, CSV and SVG renderings.
//!
//! A pixel is predicted positive iff its score is `>= p`.

mod confusion;
mod curves;
mod plot;

pub use confusion::{compute_metrics, confusion, confusion_at, render_table, ConfusionMatrix, MetricsReport};
pub use curves::{prc_curve, roc_curve, CurveKind, CurvePoint, CurveSeries};
pub use plot::render_svg;
