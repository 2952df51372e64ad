//! Synthetic VV / VH / CC cubes with planted GDV patches.
//!
//! Three land covers are simulated:
//!
//! * GDV blobs: weak VH seasonality, high and steady coherence,
//! * seasonal background: strong VH seasonality, low and noisy coherence,
//! * stable "confuser" blobs: weak seasonality like GDV but coherence above
//!   the GDV level.
//!
//! Every pixel draws its own seasonal phase, so seasonal amplitude is only
//! visible through the spread of a time series and not through any fixed
//! linear combination of bands. Coherence separates GDV from background on
//! one side and from the confuser on the other. Together these make the task
//! learnable by trees but not by a linear model.

use std::f64::consts::TAU;
use std::path::Path;

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::{rasterize_polygons, Polygon, PolygonSet};
use crate::error::{Error, Result};
use crate::idw::BoreholeRecord;
use crate::raster::{BinaryMask, CubeKind, DataCube, GridGeometry};

const BLOB_VERTICES: usize = 48;
const PLACEMENT_RETRIES: usize = 1000;
pub const BOREHOLE_COUNT: usize = 46;
pub const BOREHOLES_BEFORE_2019: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassSignal {
    pub vv_mean: f64,
    pub vh_mean: f64,
    pub vh_seasonal_amplitude: f64,
    pub cc_mean: f64,
    pub cc_sd: f64,
}

impl Default for ClassSignal {
    fn default() -> Self {
        ClassSignal {
            vv_mean: -9.0,
            vh_mean: -15.0,
            vh_seasonal_amplitude: 0.5,
            cc_mean: 0.6,
            cc_sd: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub width: usize,
    pub height: usize,
    pub blob_count: usize,
    pub blob_radius_min: f64,
    pub blob_radius_max: f64,
    pub confuser_count: usize,
    pub gdv: ClassSignal,
    pub background: ClassSignal,
    pub confuser: ClassSignal,
    /// Amplitude of the VV seasonal cycle, shared by all classes.
    pub vv_seasonal_amplitude: f64,
    /// Standard deviation of the i.i.d. noise added to every VV / VH value.
    pub noise_sigma: f64,
    pub origin_lon: f64,
    pub origin_lat: f64,
    pub pixel_size: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            width: 256,
            height: 256,
            blob_count: 12,
            blob_radius_min: 9.0,
            blob_radius_max: 17.0,
            confuser_count: 8,
            gdv: ClassSignal::default(),
            background: ClassSignal {
                vv_mean: -10.0,
                vh_mean: -16.0,
                vh_seasonal_amplitude: 3.0,
                cc_mean: 0.35,
                cc_sd: 0.3,
            },
            confuser: ClassSignal {
                vv_mean: -9.0,
                vh_mean: -15.0,
                vh_seasonal_amplitude: 0.5,
                cc_mean: 0.85,
                cc_sd: 0.25,
            },
            vv_seasonal_amplitude: 1.0,
            noise_sigma: 3.0,
            origin_lon: 150.0,
            origin_lat: -33.0,
            pixel_size: 0.00027,
            seed: 2019,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(format!("synth spec: {m}")));
        if self.width < 8 || self.height < 8 {
            return bad(format!("dimensions {}x{} below 8", self.width, self.height));
        }
        let limit = self.width.min(self.height) as f64 / 2.0;
        if !(self.blob_radius_min > 0.0 && self.blob_radius_min <= self.blob_radius_max && self.blob_radius_max < limit) {
            return bad(format!(
                "blob radius range [{}, {}] must satisfy 0 < min <= max < {limit}",
                self.blob_radius_min, self.blob_radius_max
            ));
        }
        for (name, c) in [("gdv", &self.gdv), ("background", &self.background), ("confuser", &self.confuser)] {
            let vals = [c.vv_mean, c.vh_mean, c.vh_seasonal_amplitude, c.cc_mean, c.cc_sd];
            if vals.iter().any(|v| !v.is_finite()) || c.cc_sd < 0.0 || c.vh_seasonal_amplitude < 0.0 {
                return bad(format!("{name} signal has invalid parameters"));
            }
            if !(0.0..=1.0).contains(&c.cc_mean) {
                return bad(format!("{name} cc_mean {} outside [0, 1]", c.cc_mean));
            }
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) || !(self.pixel_size > 0.0) {
            return bad("noise_sigma must be >= 0 and pixel_size > 0".into());
        }
        Ok(())
    }

    pub fn geometry(&self) -> Result<GridGeometry> {
        GridGeometry::new(
            self.width,
            self.height,
            self.origin_lon,
            self.origin_lat,
            self.pixel_size,
            -self.pixel_size,
        )
    }
}

#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub vv: DataCube,
    pub vh: DataCube,
    pub cc: DataCube,
    pub truth: BinaryMask,
    pub polygons: PolygonSet,
    pub boreholes: Vec<BoreholeRecord>,
}

/// 30 acquisition dates, 12 days apart from 2017-01-04.
pub fn acquisition_dates() -> Vec<NaiveDate> {
    let start = NaiveDate::from_ymd_opt(2017, 1, 4).expect("valid date");
    (0..30).map(|i| start + chrono::Duration::days(12 * i)).collect()
}

fn disc(g: &GridGeometry, cx: f64, cy: f64, r: f64) -> Result<Polygon> {
    let ring: Vec<(f64, f64)> = (0..BLOB_VERTICES)
        .map(|k| {
            let a = TAU * k as f64 / BLOB_VERTICES as f64;
            g.from_pixel_space(cx + r * a.cos(), cy + r * a.sin())
        })
        .collect();
    Polygon::from_open_ring(ring)
}

/// Discs fully inside the extent. Centres are drawn over the whole grid and
/// redrawn when the disc would cross the edge.
fn place_blobs(rng: &mut ChaCha8Rng, spec: &SynthSpec, g: &GridGeometry, count: usize) -> Result<Vec<Polygon>> {
    let (w, h) = (spec.width as f64, spec.height as f64);
    let mut out = Vec::with_capacity(count);
    for b in 0..count {
        let r = rng.random_range(spec.blob_radius_min..=spec.blob_radius_max);
        let mut placed = None;
        for _ in 0..PLACEMENT_RETRIES {
            let (cx, cy) = (rng.random_range(0.0..w), rng.random_range(0.0..h));
            if cx - r >= 0.0 && cx + r <= w && cy - r >= 0.0 && cy + r <= h {
                placed = Some((cx, cy));
                break;
            }
        }
        let (cx, cy) = placed.ok_or_else(|| {
            Error::Config(format!("synth: could not place blob {b} of radius {r:.1} after {PLACEMENT_RETRIES} tries"))
        })?;
        out.push(disc(g, cx, cy, r)?);
    }
    Ok(out)
}

fn boreholes(rng: &mut ChaCha8Rng, g: &GridGeometry, truth: &BinaryMask) -> Vec<BoreholeRecord> {
    let first = NaiveDate::from_ymd_opt(2019, 1, 1).expect("valid date");
    (0..BOREHOLE_COUNT)
        .map(|i| {
            let (x, y) = (rng.random_range(0.0..g.width as f64), rng.random_range(0.0..g.height as f64));
            let (lon, lat) = g.from_pixel_space(x, y);
            let near_gdv = truth.at(y as usize, x as usize) == 1;
            let dtw = if near_gdv {
                rng.random_range(-16.8..0.5)
            } else {
                rng.random_range(0.5..7.68)
            };
            let date = if i < BOREHOLES_BEFORE_2019 {
                first - chrono::Duration::days(rng.random_range(30..700))
            } else {
                first + chrono::Duration::days(rng.random_range(0..1000))
            };
            BoreholeRecord {
                id: format!("BH{:03}", i + 1),
                lon,
                lat,
                dtw_m: Some((dtw * 100.0f64).round() / 100.0),
                obs_date: date.format("%Y-%m-%d").to_string(),
            }
        })
        .collect()
}

/// Generates cubes, truth mask, polygons and boreholes from `spec`. The
/// same spec always yields bit-identical output.
pub fn generate(spec: &SynthSpec) -> Result<SynthOutput> {
    spec.validate()?;
    let g = spec.geometry()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let gdv_polys = place_blobs(&mut rng, spec, &g, spec.blob_count)?;
    let confuser_polys = place_blobs(&mut rng, spec, &g, spec.confuser_count)?;
    let polygons = PolygonSet::new(gdv_polys);
    let truth = rasterize_polygons(&polygons, &g);
    let confuser = rasterize_polygons(&PolygonSet::new(confuser_polys), &g);

    let dates = acquisition_dates();
    let n = g.pixel_count();
    let t_count = dates.len();
    let noise = Normal::new(0.0, spec.noise_sigma).map_err(|e| Error::Config(e.to_string()))?;
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut vv = vec![0f32; t_count * n];
    let mut vh = vec![0f32; t_count * n];
    let mut cc = vec![0f32; (t_count - 1) * n];
    for i in 0..n {
        let class = if truth.get(i) == 1 {
            &spec.gdv
        } else if confuser.get(i) == 1 {
            &spec.confuser
        } else {
            &spec.background
        };
        let phase = rng.random_range(0.0..TAU);
        for t in 0..t_count {
            let season = (TAU * t as f64 / t_count as f64 + phase).sin();
            vv[t * n + i] = (class.vv_mean + spec.vv_seasonal_amplitude * season + noise.sample(&mut rng)) as f32;
            vh[t * n + i] = (class.vh_mean + class.vh_seasonal_amplitude * season + noise.sample(&mut rng)) as f32;
        }
        for t in 0..t_count - 1 {
            let v = class.cc_mean + class.cc_sd * std_normal.sample(&mut rng);
            cc[t * n + i] = v.clamp(0.0, 1.0) as f32;
        }
    }
    let bh = boreholes(&mut rng, &g, &truth);
    Ok(SynthOutput {
        vv: DataCube::from_band_sequential(g, CubeKind::VV, vv, dates.clone(), f32::NAN)?,
        vh: DataCube::from_band_sequential(g, CubeKind::VH, vh, dates.clone(), f32::NAN)?,
        cc: DataCube::from_band_sequential(g, CubeKind::CC, cc, dates[1..].to_vec(), f32::NAN)?,
        truth,
        polygons,
        boreholes: bh,
    })
}

/// Writes boreholes as `id,lon,lat,dtw_m,obs_date` CSV.
pub fn write_boreholes(records: &[BoreholeRecord], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::parse("borehole csv", e))?;
    w.write_record(["id", "lon", "lat", "dtw_m", "obs_date"])
        .map_err(|e| Error::parse("borehole csv", e))?;
    for r in records {
        let dtw = r.dtw_m.map(|v| v.to_string()).unwrap_or_default();
        w.write_record([r.id.clone(), r.lon.to_string(), r.lat.to_string(), dtw, r.obs_date.clone()])
            .map_err(|e| Error::parse("borehole csv", e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
