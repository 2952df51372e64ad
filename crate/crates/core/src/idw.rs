//! Borehole depth-to-water (DTW) filtering and inverse-distance-weighted
//! interpolation onto a raster grid.

use std::io::Read;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{FloatRaster, GridGeometry, RasterKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoreholeRecord {
    pub id: String,
    pub lon: f64,
    pub lat: f64,
    /// Metres below ground; negative when water stands above the surface.
    pub dtw_m: Option<f64>,
    /// Raw observation date, parsed as ISO-8601 when filtering.
    pub obs_date: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FilterReport {
    pub input: usize,
    pub kept: usize,
    pub missing_dtw: usize,
    pub before_cutoff: usize,
    pub bad_date: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IdwParams {
    pub power: f64,
}

impl Default for IdwParams {
    fn default() -> Self {
        IdwParams { power: 2.0 }
    }
}

/// Parses `id,lon,lat,dtw_m,obs_date` CSV. An empty `dtw_m` is a missing
/// reading.
pub fn read_boreholes<R: Read>(input: R) -> Result<Vec<BoreholeRecord>> {
    #[derive(Deserialize)]
    struct Row {
        id: String,
        lon: f64,
        lat: f64,
        dtw_m: Option<f64>,
        obs_date: String,
    }
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = rdr.headers().map_err(|e| Error::parse("borehole csv", e))?;
    if headers != vec!["id", "lon", "lat", "dtw_m", "obs_date"] {
        return Err(Error::parse("borehole csv", "expected columns id,lon,lat,dtw_m,obs_date"));
    }
    let mut out = Vec::new();
    for (i, row) in rdr.deserialize::<Row>().enumerate() {
        let r = row.map_err(|e| Error::parse("borehole csv", format!("record {}: {e}", i + 1)))?;
        if !r.lon.is_finite() || !r.lat.is_finite() || r.dtw_m.is_some_and(|d| !d.is_finite()) {
            return Err(Error::parse("borehole csv", format!("record {} ({}): non-finite value", i + 1, r.id)));
        }
        out.push(BoreholeRecord {
            id: r.id,
            lon: r.lon,
            lat: r.lat,
            dtw_m: r.dtw_m,
            obs_date: r.obs_date,
        });
    }
    Ok(out)
}

/// Keeps records that have a DTW reading and were observed on or after
/// `cutoff`, preserving order. Unparseable dates are dropped and counted.
pub fn filter_boreholes(records: &[BoreholeRecord], cutoff: NaiveDate) -> (Vec<BoreholeRecord>, FilterReport) {
    let mut report = FilterReport {
        input: records.len(),
        kept: 0,
        missing_dtw: 0,
        before_cutoff: 0,
        bad_date: 0,
    };
    let mut kept = Vec::new();
    for r in records {
        if r.dtw_m.is_none() {
            report.missing_dtw += 1;
            continue;
        }
        match NaiveDate::parse_from_str(r.obs_date.trim(), "%Y-%m-%d") {
            Err(e) => {
                log::warn!("borehole {}: bad date {:?}: {e}", r.id, r.obs_date);
                report.bad_date += 1;
            }
            Ok(d) if d < cutoff => report.before_cutoff += 1,
            Ok(_) => kept.push(r.clone()),
        }
    }
    report.kept = kept.len();
    (kept, report)
}

/// IDW surface at every cell centre, row-major. Distances use an
/// equirectangular projection about the grid's central latitude; a cell
/// that coincides with records takes their mean value.
pub fn idw_values(records: &[BoreholeRecord], geometry: &GridGeometry, params: &IdwParams) -> Result<Vec<f64>> {
    if !(params.power > 0.0 && params.power.is_finite()) {
        return Err(Error::Config(format!("idw power {} must be positive", params.power)));
    }
    let pts: Vec<(f64, f64, f64)> = records
        .iter()
        .filter_map(|r| r.dtw_m.map(|v| (r.lon, r.lat, v)))
        .collect();
    if pts.is_empty() {
        return Err(Error::EmptyInput("idw: no records with a DTW value".into()));
    }
    let lo = pts.iter().map(|p| p.2).fold(f64::INFINITY, f64::min);
    let hi = pts.iter().map(|p| p.2).fold(f64::NEG_INFINITY, f64::max);
    let kx = geometry.center_lat().to_radians().cos();
    let half_power = params.power / 2.0;
    let w = geometry.width;
    Ok((0..geometry.pixel_count())
        .into_par_iter()
        .map(|i| {
            let (lon, lat) = geometry.pixel_center(i / w, i % w);
            let (mut num, mut den) = (0.0, 0.0);
            let (mut exact_sum, mut exact_n) = (0.0, 0u32);
            for &(plon, plat, v) in &pts {
                let dx = (plon - lon) * kx;
                let dy = plat - lat;
                let d2 = dx * dx + dy * dy;
                if d2 == 0.0 {
                    exact_sum += v;
                    exact_n += 1;
                } else {
                    let wt = d2.powf(-half_power);
                    num += wt * v;
                    den += wt;
                }
            }
            let v = if exact_n > 0 { exact_sum / f64::from(exact_n) } else { num / den };
            v.clamp(lo, hi)
        })
        .collect())
}

/// [`idw_values`] as a DTW raster.
pub fn idw_interpolate(records: &[BoreholeRecord], geometry: &GridGeometry, params: &IdwParams) -> Result<FloatRaster> {
    let v = idw_values(records, geometry, params)?;
    FloatRaster::new(*geometry, RasterKind::Dtw, v.into_iter().map(|x| x as f32).collect())
}
