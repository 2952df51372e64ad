use std::io::Write;
use std::ops::Range;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::raster::{BinaryMask, CubeKind, DataCube};

use super::sampling::SampleIndex;

/// Row-major `f32` design matrix with optional binary labels.
///
/// Columns built from cubes are ordered VV bands, then VH bands, then CC
/// bands, each in acquisition order.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    n_rows: usize,
    n_cols: usize,
    values: Vec<f32>,
    labels: Option<Vec<u8>>,
    pixel_indices: Vec<usize>,
    column_names: Vec<String>,
}

impl FeatureMatrix {
    /// Matrix from raw row-major values; pixel indices default to row numbers.
    pub fn new(n_cols: usize, values: Vec<f32>, labels: Option<Vec<u8>>) -> Result<Self> {
        if n_cols == 0 {
            return Err(Error::EmptyInput("feature matrix needs at least one column".into()));
        }
        if !values.len().is_multiple_of(n_cols) {
            return Err(Error::Shape {
                expected: n_cols,
                found: values.len() % n_cols,
            });
        }
        let n_rows = values.len() / n_cols;
        if let Some(l) = &labels {
            if l.len() != n_rows {
                return Err(Error::Input(format!("{} labels for {n_rows} rows", l.len())));
            }
            if l.iter().any(|&y| y > 1) {
                return Err(Error::Input("labels must be 0 or 1".into()));
            }
        }
        Ok(FeatureMatrix {
            n_rows,
            n_cols,
            values,
            labels,
            pixel_indices: (0..n_rows).collect(),
            column_names: (0..n_cols).map(|j| format!("f{j}")).collect(),
        })
    }

    /// Convenience constructor from per-row vectors.
    pub fn from_rows(rows: &[Vec<f32>], labels: Option<Vec<u8>>) -> Result<Self> {
        let n_cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_cols) {
            return Err(Error::Input("ragged rows".into()));
        }
        Self::new(n_cols, rows.concat(), labels)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.values[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.values[row * self.n_cols + col]
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn labels(&self) -> Option<&[u8]> {
        self.labels.as_deref()
    }

    /// Linear raster index of the pixel each row came from.
    pub fn pixel_indices(&self) -> &[usize] {
        &self.pixel_indices
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn with_labels(mut self, labels: Vec<u8>) -> Result<Self> {
        if labels.len() != self.n_rows || labels.iter().any(|&y| y > 1) {
            return Err(Error::Input("labels must be 0/1, one per row".into()));
        }
        self.labels = Some(labels);
        Ok(self)
    }
}

/// Which pixels to turn into feature rows.
#[derive(Debug, Clone)]
pub enum PixelRequest<'a> {
    /// Rows in sample order, labelled from the sample index.
    Samples(&'a SampleIndex),
    /// Every pixel of a column interval in row-major order, optionally labelled.
    Region {
        cols: Range<usize>,
        labels: Option<&'a BinaryMask>,
    },
}

#[derive(Debug, Clone)]
pub struct Assembled {
    pub matrix: FeatureMatrix,
    /// Requested pixels dropped because some band held nodata.
    pub excluded: Vec<usize>,
}

const CHUNK: usize = 4096;

/// Gathers one row of band values per requested pixel from the VV, VH and
/// CC cubes. Pixels with nodata in any band are dropped and reported.
pub fn assemble_features(
    vv: &DataCube,
    vh: &DataCube,
    cc: &DataCube,
    request: PixelRequest<'_>,
) -> Result<Assembled> {
    for (cube, kind) in [(vv, CubeKind::VV), (vh, CubeKind::VH), (cc, CubeKind::CC)] {
        if cube.kind() != kind {
            return Err(Error::Alignment(format!("expected a {kind} cube, got {}", cube.kind())));
        }
    }
    let g = vv.geometry();
    if vh.geometry() != g || cc.geometry() != g {
        return Err(Error::Alignment("VV, VH and CC cubes have different grid geometry".into()));
    }

    let (pixels, labels): (Vec<usize>, Option<Vec<u8>>) = match request {
        PixelRequest::Samples(s) => {
            if let Some(e) = s.entries.iter().find(|e| e.index >= g.pixel_count()) {
                return Err(Error::Bounds {
                    row: e.index / g.width,
                    col: e.index % g.width,
                    height: g.height,
                    width: g.width,
                });
            }
            (
                s.entries.iter().map(|e| e.index).collect(),
                Some(s.entries.iter().map(|e| e.label).collect()),
            )
        }
        PixelRequest::Region { cols, labels } => {
            if cols.end > g.width {
                return Err(Error::Config(format!("columns {cols:?} outside width {}", g.width)));
            }
            if let Some(m) = labels {
                if m.geometry() != g {
                    return Err(Error::Alignment("label mask geometry differs from cubes".into()));
                }
            }
            let px: Vec<usize> = (0..g.height)
                .flat_map(|r| cols.clone().map(move |c| r * g.width + c))
                .collect();
            let lab = labels.map(|m| px.iter().map(|&i| m.get(i)).collect());
            (px, lab)
        }
    };

    let cubes = [vv, vh, cc];
    let n_cols: usize = cubes.iter().map(|c| c.band_count()).sum();
    let column_names: Vec<String> = cubes
        .iter()
        .flat_map(|c| (1..=c.band_count()).map(move |b| format!("{}_{b:02}", c.kind())))
        .collect();

    struct Chunk {
        values: Vec<f32>,
        kept: Vec<usize>,
        excluded: Vec<usize>,
    }
    let chunks: Vec<Chunk> = pixels
        .par_chunks(CHUNK)
        .enumerate()
        .map(|(ci, chunk)| {
            let mut out = Chunk {
                values: Vec::with_capacity(chunk.len() * n_cols),
                kept: Vec::with_capacity(chunk.len()),
                excluded: Vec::new(),
            };
            let mut row = Vec::with_capacity(n_cols);
            for (k, &px) in chunk.iter().enumerate() {
                row.clear();
                let mut ok = true;
                for cube in cubes {
                    for b in 0..cube.band_count() {
                        let v = cube.value(b, px);
                        if cube.is_nodata(v) {
                            ok = false;
                        }
                        row.push(v);
                    }
                }
                if ok {
                    out.values.extend_from_slice(&row);
                    out.kept.push(ci * CHUNK + k);
                } else {
                    out.excluded.push(px);
                }
            }
            out
        })
        .collect();

    let mut values = Vec::new();
    let mut kept_pos = Vec::new();
    let mut excluded = Vec::new();
    for c in chunks {
        values.extend(c.values);
        kept_pos.extend(c.kept);
        excluded.extend(c.excluded);
    }
    let n_rows = kept_pos.len();
    let matrix = FeatureMatrix {
        n_rows,
        n_cols,
        values,
        labels: labels.map(|l| kept_pos.iter().map(|&p| l[p]).collect()),
        pixel_indices: kept_pos.iter().map(|&p| pixels[p]).collect(),
        column_names,
    };
    Ok(Assembled { matrix, excluded })
}

/// Exclusion report: one dropped pixel index per line under an `index` header.
pub fn write_exclusions<W: Write>(excluded: &[usize], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["index"]).map_err(|e| Error::parse("exclusion csv", e))?;
    for i in excluded {
        w.write_record([i.to_string()]).map_err(|e| Error::parse("exclusion csv", e))?;
    }
    w.flush().map_err(|e| Error::io("<exclusion csv>", e))
}
