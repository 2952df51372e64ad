//! Raster grids, SAR data cubes, masks and their on-disk format.
//!
//! Every raster is stored as a JSON header next to a raw payload file. The
//! payload is little-endian `f32`, band-sequential (band 0 row 0 col 0
//! first), except for masks which carry one `u8` per pixel over `{0, 1}`.
//! Pixels are addressed row-major with row 0 at the northern edge.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Affine, axis-aligned placement of a pixel grid in WGS84 degrees.
///
/// `origin_lon`/`origin_lat` is the outer corner of pixel (0, 0). For a
/// north-up raster `pixel_size_lat` is negative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridGeometry {
    pub width: usize,
    pub height: usize,
    pub origin_lon: f64,
    pub origin_lat: f64,
    pub pixel_size_lon: f64,
    pub pixel_size_lat: f64,
}

impl GridGeometry {
    pub fn new(
        width: usize,
        height: usize,
        origin_lon: f64,
        origin_lat: f64,
        pixel_size_lon: f64,
        pixel_size_lat: f64,
    ) -> Result<Self> {
        let g = GridGeometry {
            width,
            height,
            origin_lon,
            origin_lat,
            pixel_size_lon,
            pixel_size_lat,
        };
        g.validate()?;
        Ok(g)
    }

    /// Unit-pixel grid anchored at the origin, handy for synthetic data.
    pub fn unit(width: usize, height: usize) -> Result<Self> {
        Self::new(width, height, 0.0, 0.0, 1.0, -1.0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::Geometry(format!(
                "dimensions must be positive, got {}x{}",
                self.width, self.height
            )));
        }
        if self.width.checked_mul(self.height).is_none() {
            return Err(Error::Geometry("pixel count overflows".into()));
        }
        if !(self.pixel_size_lon.is_finite() && self.pixel_size_lon > 0.0) {
            return Err(Error::Geometry(format!(
                "pixel_size_lon must be positive, got {}",
                self.pixel_size_lon
            )));
        }
        if !self.pixel_size_lat.is_finite() || self.pixel_size_lat == 0.0 {
            return Err(Error::Geometry(format!(
                "pixel_size_lat must be non-zero, got {}",
                self.pixel_size_lat
            )));
        }
        if !self.origin_lon.is_finite() || !self.origin_lat.is_finite() {
            return Err(Error::Geometry("origin must be finite".into()));
        }
        Ok(())
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn linear_index(&self, row: usize, col: usize) -> Result<usize> {
        if row >= self.height || col >= self.width {
            return Err(Error::Bounds {
                row,
                col,
                height: self.height,
                width: self.width,
            });
        }
        Ok(row * self.width + col)
    }

    /// Inverse of [`linear_index`](Self::linear_index).
    pub fn row_col(&self, index: usize) -> Result<(usize, usize)> {
        if index >= self.pixel_count() {
            return Err(Error::Bounds {
                row: index / self.width,
                col: index % self.width,
                height: self.height,
                width: self.width,
            });
        }
        Ok((index / self.width, index % self.width))
    }

    /// Longitude/latitude of the centre of pixel (row, col).
    pub fn pixel_center(&self, row: usize, col: usize) -> (f64, f64) {
        (
            self.origin_lon + (col as f64 + 0.5) * self.pixel_size_lon,
            self.origin_lat + (row as f64 + 0.5) * self.pixel_size_lat,
        )
    }

    /// Continuous pixel coordinates `(x, y)` of a lon/lat position; pixel
    /// (row, col) spans `[col, col + 1) x [row, row + 1)`.
    pub fn to_pixel_space(&self, lon: f64, lat: f64) -> (f64, f64) {
        (
            (lon - self.origin_lon) / self.pixel_size_lon,
            (lat - self.origin_lat) / self.pixel_size_lat,
        )
    }

    pub fn from_pixel_space(&self, x: f64, y: f64) -> (f64, f64) {
        (
            self.origin_lon + x * self.pixel_size_lon,
            self.origin_lat + y * self.pixel_size_lat,
        )
    }

    /// Latitude of the grid's vertical midpoint.
    pub fn center_lat(&self) -> f64 {
        self.origin_lat + 0.5 * self.height as f64 * self.pixel_size_lat
    }
}

/// Row-major sample index of pixel (row, col).
pub fn linear_index(row: usize, col: usize, geometry: &GridGeometry) -> Result<usize> {
    geometry.linear_index(row, col)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RasterKind {
    VV,
    VH,
    CC,
    #[serde(rename = "MASK")]
    Mask,
    #[serde(rename = "PROB")]
    Prob,
    #[serde(rename = "DTW")]
    Dtw,
}

impl fmt::Display for RasterKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            RasterKind::VV => "VV",
            RasterKind::VH => "VH",
            RasterKind::CC => "CC",
            RasterKind::Mask => "MASK",
            RasterKind::Prob => "PROB",
            RasterKind::Dtw => "DTW",
        };
        f.write_str(s)
    }
}

/// Polarisation / product of a SAR data cube.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CubeKind {
    VV,
    VH,
    CC,
}

impl CubeKind {
    /// Band count of a full one-year stack: 30 intensity acquisitions, and 29
    /// coherence images formed from consecutive acquisition pairs.
    pub fn canonical_bands(self) -> usize {
        match self {
            CubeKind::VV | CubeKind::VH => 30,
            CubeKind::CC => 29,
        }
    }

    pub fn raster_kind(self) -> RasterKind {
        match self {
            CubeKind::VV => RasterKind::VV,
            CubeKind::VH => RasterKind::VH,
            CubeKind::CC => RasterKind::CC,
        }
    }

    fn from_raster_kind(kind: RasterKind) -> Option<Self> {
        match kind {
            RasterKind::VV => Some(CubeKind::VV),
            RasterKind::VH => Some(CubeKind::VH),
            RasterKind::CC => Some(CubeKind::CC),
            _ => None,
        }
    }
}

impl fmt::Display for CubeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.raster_kind().fmt(f)
    }
}

/// JSON header shared by every raster file. `nodata: null` encodes NaN.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RasterHeader {
    pub kind: RasterKind,
    pub width: usize,
    pub height: usize,
    pub bands: usize,
    pub nodata: Option<f32>,
    pub dates: Vec<NaiveDate>,
    pub origin_lon: f64,
    pub origin_lat: f64,
    pub pixel_size_lon: f64,
    pub pixel_size_lat: f64,
    pub payload: String,
}

impl RasterHeader {
    pub fn from_json_str(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::parse("raster header", e))
    }

    pub fn to_json_string(&self) -> String {
        // Header fields are plain numbers and strings; serialization cannot fail.
        serde_json::to_string_pretty(self).expect("header serializes")
    }

    pub fn geometry(&self) -> Result<GridGeometry> {
        GridGeometry::new(
            self.width,
            self.height,
            self.origin_lon,
            self.origin_lat,
            self.pixel_size_lon,
            self.pixel_size_lat,
        )
    }

    fn nodata_value(&self) -> f32 {
        self.nodata.unwrap_or(f32::NAN)
    }

    fn bytes_per_value(&self) -> u64 {
        match self.kind {
            RasterKind::Mask => 1,
            _ => 4,
        }
    }

    /// Payload length implied by the header, or `None` on overflow.
    pub fn expected_payload_len(&self) -> Option<u64> {
        (self.width as u64)
            .checked_mul(self.height as u64)?
            .checked_mul(self.bands as u64)?
            .checked_mul(self.bytes_per_value())
    }

    fn check_payload_len(&self, found: usize) -> Result<()> {
        let expected = self
            .expected_payload_len()
            .ok_or_else(|| Error::Geometry("payload size overflows".into()))?;
        if expected != found as u64 {
            return Err(Error::SizeMismatch {
                expected,
                found: found as u64,
            });
        }
        Ok(())
    }

    fn new(
        kind: RasterKind,
        geometry: &GridGeometry,
        bands: usize,
        nodata: f32,
        dates: Vec<NaiveDate>,
        payload: String,
    ) -> Self {
        RasterHeader {
            kind,
            width: geometry.width,
            height: geometry.height,
            bands,
            nodata: if nodata.is_nan() { None } else { Some(nodata) },
            dates,
            origin_lon: geometry.origin_lon,
            origin_lat: geometry.origin_lat,
            pixel_size_lon: geometry.pixel_size_lon,
            pixel_size_lat: geometry.pixel_size_lat,
            payload,
        }
    }
}

fn check_dates(dates: &[NaiveDate]) -> Result<()> {
    for (i, w) in dates.windows(2).enumerate() {
        if w[1] <= w[0] {
            return Err(Error::DateOrder { index: i + 1 });
        }
    }
    Ok(())
}

fn is_nodata(value: f32, nodata: f32) -> bool {
    value.is_nan() || value == nodata
}

/// Chronologically ordered stack of co-registered bands over one grid.
#[derive(Debug, Clone)]
pub struct DataCube {
    geometry: GridGeometry,
    kind: CubeKind,
    data: Vec<f32>,
    band_count: usize,
    dates: Vec<NaiveDate>,
    nodata: f32,
}

impl PartialEq for DataCube {
    /// Bitwise payload comparison so NaN nodata pixels compare equal.
    fn eq(&self, other: &Self) -> bool {
        self.geometry == other.geometry
            && self.kind == other.kind
            && self.band_count == other.band_count
            && self.dates == other.dates
            && self.nodata.to_bits() == other.nodata.to_bits()
            && self.data.len() == other.data.len()
            && self
                .data
                .iter()
                .zip(&other.data)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

impl DataCube {
    pub fn new(
        geometry: GridGeometry,
        kind: CubeKind,
        bands: Vec<Vec<f32>>,
        dates: Vec<NaiveDate>,
        nodata: f32,
    ) -> Result<Self> {
        let n = geometry.pixel_count();
        let band_count = bands.len();
        let mut data = Vec::with_capacity(n * band_count);
        for (i, band) in bands.into_iter().enumerate() {
            if band.len() != n {
                return Err(Error::Geometry(format!(
                    "band {i} has {} values, grid has {n} pixels",
                    band.len()
                )));
            }
            data.extend(band);
        }
        Self::from_band_sequential(geometry, kind, data, dates, nodata)
    }

    /// Builds a cube from a band-sequential buffer of `bands * height * width` values.
    pub fn from_band_sequential(
        geometry: GridGeometry,
        kind: CubeKind,
        data: Vec<f32>,
        dates: Vec<NaiveDate>,
        nodata: f32,
    ) -> Result<Self> {
        geometry.validate()?;
        let n = geometry.pixel_count();
        let band_count = dates.len();
        if band_count == 0 {
            return Err(Error::Geometry("cube has no bands".into()));
        }
        if data.len() != n * band_count {
            return Err(Error::Geometry(format!(
                "{} values for {band_count} dates over {n} pixels",
                data.len()
            )));
        }
        check_dates(&dates)?;
        if kind == CubeKind::CC {
            for (i, &v) in data.iter().enumerate() {
                if !is_nodata(v, nodata) && !(0.0..=1.0).contains(&v) {
                    return Err(Error::Range {
                        band: i / n,
                        pixel: i % n,
                        value: v,
                    });
                }
            }
        }
        Ok(DataCube {
            geometry,
            kind,
            data,
            band_count,
            dates,
            nodata,
        })
    }

    /// Decodes a cube from a parsed header and its raw payload bytes.
    pub fn from_header_and_payload(header: &RasterHeader, payload: &[u8], strict: bool) -> Result<Self> {
        let kind = CubeKind::from_raster_kind(header.kind).ok_or_else(|| {
            Error::parse("raster header", format!("kind {} is not a data cube", header.kind))
        })?;
        let geometry = header.geometry()?;
        header.check_payload_len(payload.len())?;
        if header.dates.len() != header.bands {
            return Err(Error::parse(
                "raster header",
                format!("{} dates for {} bands", header.dates.len(), header.bands),
            ));
        }
        check_dates(&header.dates)?;
        let data = decode_f32(payload);
        let cube = Self::from_band_sequential(
            geometry,
            kind,
            data,
            header.dates.clone(),
            header.nodata_value(),
        )?;
        if strict {
            cube.check_canonical()?;
        }
        Ok(cube)
    }

    /// Checks the canonical band count for the cube's kind.
    pub fn check_canonical(&self) -> Result<()> {
        let want = self.kind.canonical_bands();
        if self.band_count != want {
            return Err(Error::Config(format!(
                "{} cube has {} bands, strict mode requires {want}",
                self.kind, self.band_count
            )));
        }
        Ok(())
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn kind(&self) -> CubeKind {
        self.kind
    }

    pub fn band_count(&self) -> usize {
        self.band_count
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn nodata(&self) -> f32 {
        self.nodata
    }

    pub fn band(&self, band: usize) -> &[f32] {
        let n = self.geometry.pixel_count();
        &self.data[band * n..(band + 1) * n]
    }

    pub fn value(&self, band: usize, index: usize) -> f32 {
        self.data[band * self.geometry.pixel_count() + index]
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn is_nodata(&self, value: f32) -> bool {
        is_nodata(value, self.nodata)
    }

    /// True when pixel `index` has a valid value in every band.
    pub fn is_valid_pixel(&self, index: usize) -> bool {
        (0..self.band_count).all(|b| !self.is_nodata(self.value(b, index)))
    }

    pub fn header(&self, payload: impl Into<String>) -> RasterHeader {
        RasterHeader::new(
            self.kind.raster_kind(),
            &self.geometry,
            self.band_count,
            self.nodata,
            self.dates.clone(),
            payload.into(),
        )
    }

    pub fn payload_bytes(&self) -> Vec<u8> {
        encode_f32(&self.data)
    }
}

/// Per-pixel label or prediction over `{0, 1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryMask {
    geometry: GridGeometry,
    values: Vec<u8>,
}

impl BinaryMask {
    pub fn new(geometry: GridGeometry, values: Vec<u8>) -> Result<Self> {
        geometry.validate()?;
        if values.len() != geometry.pixel_count() {
            return Err(Error::Geometry(format!(
                "mask has {} values, grid has {} pixels",
                values.len(),
                geometry.pixel_count()
            )));
        }
        if let Some(i) = values.iter().position(|&v| v > 1) {
            return Err(Error::Input(format!(
                "mask value {} at pixel {i} is not 0 or 1",
                values[i]
            )));
        }
        Ok(BinaryMask { geometry, values })
    }

    pub fn zeros(geometry: GridGeometry) -> Self {
        let n = geometry.pixel_count();
        BinaryMask {
            geometry,
            values: vec![0; n],
        }
    }

    pub fn from_header_and_payload(header: &RasterHeader, payload: &[u8]) -> Result<Self> {
        if header.kind != RasterKind::Mask {
            return Err(Error::parse(
                "raster header",
                format!("expected MASK, found {}", header.kind),
            ));
        }
        if header.bands != 1 {
            return Err(Error::parse("raster header", "mask must have exactly one band"));
        }
        let geometry = header.geometry()?;
        header.check_payload_len(payload.len())?;
        Self::new(geometry, payload.to_vec())
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn values(&self) -> &[u8] {
        &self.values
    }

    pub fn get(&self, index: usize) -> u8 {
        self.values[index]
    }

    pub fn at(&self, row: usize, col: usize) -> u8 {
        self.values[row * self.geometry.width + col]
    }

    pub fn count_ones(&self) -> usize {
        self.values.iter().filter(|&&v| v == 1).count()
    }

    pub fn header(&self, payload: impl Into<String>) -> RasterHeader {
        RasterHeader::new(
            RasterKind::Mask,
            &self.geometry,
            1,
            f32::NAN,
            Vec::new(),
            payload.into(),
        )
    }

    /// Binary PGM (P5) rendering, 1 → white.
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.geometry.width, self.geometry.height).into_bytes();
        out.extend(self.values.iter().map(|&v| if v == 1 { 255u8 } else { 0 }));
        out
    }
}

/// Single-band float raster: class probabilities (`PROB`) or depth to water (`DTW`).
#[derive(Debug, Clone)]
pub struct FloatRaster {
    geometry: GridGeometry,
    kind: RasterKind,
    values: Vec<f32>,
    nodata: f32,
}

impl PartialEq for FloatRaster {
    fn eq(&self, other: &Self) -> bool {
        self.geometry == other.geometry
            && self.kind == other.kind
            && self.nodata.to_bits() == other.nodata.to_bits()
            && self.values.len() == other.values.len()
            && self
                .values
                .iter()
                .zip(&other.values)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

impl FloatRaster {
    pub fn new(geometry: GridGeometry, kind: RasterKind, values: Vec<f32>) -> Result<Self> {
        geometry.validate()?;
        if !matches!(kind, RasterKind::Prob | RasterKind::Dtw) {
            return Err(Error::Input(format!("{kind} is not a single-band float raster kind")));
        }
        if values.len() != geometry.pixel_count() {
            return Err(Error::Geometry(format!(
                "raster has {} values, grid has {} pixels",
                values.len(),
                geometry.pixel_count()
            )));
        }
        if kind == RasterKind::Prob {
            if let Some(i) = values.iter().position(|v| !v.is_nan() && !(0.0..=1.0).contains(v)) {
                return Err(Error::Range {
                    band: 0,
                    pixel: i,
                    value: values[i],
                });
            }
        }
        Ok(FloatRaster {
            geometry,
            kind,
            values,
            nodata: f32::NAN,
        })
    }

    pub fn from_header_and_payload(header: &RasterHeader, payload: &[u8]) -> Result<Self> {
        if header.bands != 1 {
            return Err(Error::parse("raster header", "float raster must have exactly one band"));
        }
        let geometry = header.geometry()?;
        header.check_payload_len(payload.len())?;
        let mut raster = Self::new(geometry, header.kind, decode_f32(payload))?;
        raster.nodata = header.nodata_value();
        Ok(raster)
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn kind(&self) -> RasterKind {
        self.kind
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn header(&self, payload: impl Into<String>) -> RasterHeader {
        RasterHeader::new(self.kind, &self.geometry, 1, self.nodata, Vec::new(), payload.into())
    }
}

fn decode_f32(bytes: &[u8]) -> Vec<f32> {
    bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect()
}

fn encode_f32(values: &[f32]) -> Vec<u8> {
    let mut out = Vec::with_capacity(values.len() * 4);
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn read_header(header_path: &Path) -> Result<(RasterHeader, Vec<u8>)> {
    let text = fs::read_to_string(header_path).map_err(|e| Error::io(header_path, e))?;
    let header = RasterHeader::from_json_str(&text)?;
    let payload_path = payload_path(header_path, &header.payload);
    let payload = fs::read(&payload_path).map_err(|e| Error::io(&payload_path, e))?;
    Ok((header, payload))
}

fn payload_path(header_path: &Path, payload: &str) -> PathBuf {
    let p = Path::new(payload);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        header_path.parent().unwrap_or(Path::new(".")).join(p)
    }
}

/// Payload file name written next to a header: `vv.json` → `vv.bin`.
fn default_payload_name(header_path: &Path) -> String {
    let stem = header_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "raster".into());
    format!("{stem}.bin")
}

fn write_pair(header_path: &Path, header: &RasterHeader, payload: &[u8]) -> Result<()> {
    if let Some(dir) = header_path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    let payload_path = payload_path(header_path, &header.payload);
    fs::write(&payload_path, payload).map_err(|e| Error::io(&payload_path, e))?;
    fs::write(header_path, header.to_json_string()).map_err(|e| Error::io(header_path, e))
}

pub fn load_cube(header_path: impl AsRef<Path>, strict: bool) -> Result<DataCube> {
    let (header, payload) = read_header(header_path.as_ref())?;
    DataCube::from_header_and_payload(&header, &payload, strict)
}

pub fn save_cube(cube: &DataCube, header_path: impl AsRef<Path>) -> Result<()> {
    let header_path = header_path.as_ref();
    let header = cube.header(default_payload_name(header_path));
    write_pair(header_path, &header, &cube.payload_bytes())
}

pub fn load_mask(header_path: impl AsRef<Path>) -> Result<BinaryMask> {
    let (header, payload) = read_header(header_path.as_ref())?;
    BinaryMask::from_header_and_payload(&header, &payload)
}

pub fn save_mask(mask: &BinaryMask, header_path: impl AsRef<Path>) -> Result<()> {
    let header_path = header_path.as_ref();
    let header = mask.header(default_payload_name(header_path));
    write_pair(header_path, &header, mask.values())
}

pub fn load_float_raster(header_path: impl AsRef<Path>) -> Result<FloatRaster> {
    let (header, payload) = read_header(header_path.as_ref())?;
    FloatRaster::from_header_and_payload(&header, &payload)
}

pub fn save_float_raster(raster: &FloatRaster, header_path: impl AsRef<Path>) -> Result<()> {
    let header_path = header_path.as_ref();
    let header = raster.header(default_payload_name(header_path));
    write_pair(header_path, &header, &encode_f32(raster.values()))
}

/// Imports a headerless band-sequential little-endian `f32` file (as exported
/// by most raster tools' "raw" drivers) given its geometry and dates.
pub fn import_raw_cube(
    raw_path: impl AsRef<Path>,
    kind: CubeKind,
    geometry: GridGeometry,
    dates: Vec<NaiveDate>,
    nodata: f32,
) -> Result<DataCube> {
    let raw_path = raw_path.as_ref();
    let bytes = fs::read(raw_path).map_err(|e| Error::io(raw_path, e))?;
    let header = RasterHeader::new(
        kind.raster_kind(),
        &geometry,
        dates.len(),
        nodata,
        dates,
        raw_path.to_string_lossy().into_owned(),
    );
    DataCube::from_header_and_payload(&header, &bytes, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dates(n: usize) -> Vec<NaiveDate> {
        let start = NaiveDate::from_ymd_opt(2017, 1, 4).unwrap();
        (0..n)
            .map(|i| start + chrono::Duration::days(12 * i as i64))
            .collect()
    }

    fn header(kind: RasterKind, w: usize, h: usize, bands: usize) -> RasterHeader {
        RasterHeader {
            kind,
            width: w,
            height: h,
            bands,
            nodata: None,
            dates: dates(bands),
            origin_lon: 140.5,
            origin_lat: -37.6,
            pixel_size_lon: 0.00027,
            pixel_size_lat: -0.00027,
            payload: "x.bin".into(),
        }
    }

    #[test]
    fn linear_index_examples() {
        let g = GridGeometry::unit(2044, 1433).unwrap();
        assert_eq!(linear_index(0, 0, &g).unwrap(), 0);
        assert_eq!(linear_index(1, 0, &g).unwrap(), 2044);
        assert_eq!(linear_index(1432, 2043, &g).unwrap(), 2_929_051);
        assert!(matches!(linear_index(1433, 0, &g), Err(Error::Bounds { .. })));
        assert!(matches!(linear_index(0, 2044, &g), Err(Error::Bounds { .. })));
    }

    #[test]
    fn full_size_header_accepts_matching_payload() {
        let h = header(RasterKind::VV, 2044, 1433, 30);
        assert_eq!(h.expected_payload_len(), Some(2044 * 1433 * 30 * 4));
        let payload = vec![0u8; 2044 * 1433 * 30 * 4];
        let cube = DataCube::from_header_and_payload(&h, &payload, true).unwrap();
        assert_eq!(cube.band_count(), 30);
        assert_eq!(cube.geometry().width, 2044);
        assert_eq!(cube.geometry().height, 1433);
    }

    #[test]
    fn band_count_mismatch_is_size_error() {
        let h = header(RasterKind::VV, 4, 3, 29);
        let payload = vec![0u8; 4 * 3 * 30 * 4];
        assert!(matches!(
            DataCube::from_header_and_payload(&h, &payload, false),
            Err(Error::SizeMismatch { .. })
        ));
    }

    #[test]
    fn coherence_out_of_range_rejected() {
        let h = header(RasterKind::CC, 2, 1, 1);
        let payload = encode_f32(&[0.5, 1.5]);
        match DataCube::from_header_and_payload(&h, &payload, false) {
            Err(Error::Range { pixel, .. }) => assert_eq!(pixel, 1),
            other => panic!("expected range error, got {other:?}"),
        }
        // NaN is nodata, not out of range
        let payload = encode_f32(&[0.5, f32::NAN]);
        assert!(DataCube::from_header_and_payload(&h, &payload, false).is_ok());
    }

    #[test]
    fn non_increasing_dates_rejected() {
        let mut h = header(RasterKind::VH, 1, 1, 3);
        h.dates[2] = h.dates[1];
        let payload = vec![0u8; 12];
        assert!(matches!(
            DataCube::from_header_and_payload(&h, &payload, false),
            Err(Error::DateOrder { index: 2 })
        ));
    }

    #[test]
    fn strict_mode_checks_canonical_bands() {
        let h = header(RasterKind::CC, 1, 1, 30);
        let payload = vec![0u8; 30 * 4];
        assert!(DataCube::from_header_and_payload(&h, &payload, false).is_ok());
        assert!(matches!(
            DataCube::from_header_and_payload(&h, &payload, true),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn single_pixel_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let g = GridGeometry::unit(1, 1).unwrap();
        let cube = DataCube::new(g, CubeKind::VV, vec![vec![0.0]], dates(1), f32::NAN).unwrap();
        let path = dir.path().join("vv.json");
        save_cube(&cube, &path).unwrap();
        let back = load_cube(&path, false).unwrap();
        assert_eq!(cube, back);
    }

    #[test]
    fn header_rejects_unknown_keys() {
        let mut v = serde_json::to_value(header(RasterKind::VV, 1, 1, 1)).unwrap();
        v["extra"] = serde_json::json!(1);
        assert!(RasterHeader::from_json_str(&v.to_string()).is_err());
    }

    #[test]
    fn header_keys_are_exact() {
        let v = serde_json::to_value(header(RasterKind::Mask, 1, 1, 1)).unwrap();
        let mut keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        keys.sort();
        assert_eq!(
            keys,
            [
                "bands",
                "dates",
                "height",
                "kind",
                "nodata",
                "origin_lat",
                "origin_lon",
                "payload",
                "pixel_size_lat",
                "pixel_size_lon",
                "width"
            ]
        );
        assert_eq!(v["kind"], "MASK");
    }

    #[test]
    fn mask_round_trip_and_validation() {
        let dir = tempfile::tempdir().unwrap();
        let g = GridGeometry::unit(3, 2).unwrap();
        let m = BinaryMask::new(g, vec![0, 1, 1, 0, 0, 1]).unwrap();
        let path = dir.path().join("labels.json");
        save_mask(&m, &path).unwrap();
        assert_eq!(load_mask(&path).unwrap(), m);
        assert!(BinaryMask::new(g, vec![0, 2, 1, 0, 0, 1]).is_err());
        let pgm = m.to_pgm();
        assert!(pgm.starts_with(b"P5\n3 2\n255\n"));
        assert_eq!(&pgm[pgm.len() - 6..], &[0, 255, 255, 0, 0, 255]);
    }

    #[test]
    fn prob_raster_range_checked() {
        let g = GridGeometry::unit(2, 1).unwrap();
        assert!(FloatRaster::new(g, RasterKind::Prob, vec![0.2, 1.2]).is_err());
        assert!(FloatRaster::new(g, RasterKind::Dtw, vec![-16.8, 7.68]).is_ok());
    }

    proptest! {
        #[test]
        fn linear_index_inverts(w in 1usize..300, h in 1usize..300, r in 0usize..300, c in 0usize..300) {
            let g = GridGeometry::unit(w, h).unwrap();
            let (r, c) = (r % h, c % w);
            let idx = g.linear_index(r, c).unwrap();
            prop_assert_eq!(idx, r * w + c);
            prop_assert_eq!(g.row_col(idx).unwrap(), (r, c));
        }

        #[test]
        fn cube_round_trip_is_bit_exact(
            w in 1usize..6, h in 1usize..6, bands in 1usize..4,
            seed in proptest::collection::vec(any::<u32>(), 1..200),
        ) {
            let n = w * h * bands;
            let data: Vec<f32> = (0..n).map(|i| f32::from_bits(seed[i % seed.len()].wrapping_mul(i as u32 + 1))).collect();
            let g = GridGeometry::unit(w, h).unwrap();
            let cube = DataCube::from_band_sequential(g, CubeKind::VH, data, dates(bands), -9999.0).unwrap();
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("vh.json");
            save_cube(&cube, &path).unwrap();
            let bytes = fs::read(dir.path().join("vh.bin")).unwrap();
            prop_assert_eq!(&bytes, &cube.payload_bytes());
            let back = load_cube(&path, false).unwrap();
            prop_assert_eq!(back, cube);
        }
    }
}
