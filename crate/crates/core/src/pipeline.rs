//! File-based pipeline stages behind the `sargdv` CLI.
//!
//! Every stage reads its inputs from the run configuration or from earlier
//! artifacts in the output directory, writes its own artifacts there, and
//! leaves a `<artifact>.prov.json` sidecar recording input digests, the
//! configuration hash, the seed and the crate version.

use std::fs;
use std::ops::Range;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::crf::{smooth, CrfParams};
use crate::dataset::{
    assemble_features, rasterize_polygons, split_regions, undersample_valid, write_exclusions, PixelRequest,
    PolygonSet, RegionSplit, SampleIndex, TrainSide,
};
use crate::error::{Error, Result};
use crate::gbt::{self, GbtModel, TrainingConfig};
use crate::idw::{filter_boreholes, idw_interpolate, read_boreholes, IdwParams};
use crate::logreg::{predict_logreg, train_logreg_with_history, LogRegConfig, LogRegModel};
use crate::metrics::{
    compute_metrics, confusion, confusion_at, prc_curve, render_svg, render_table, roc_curve, ConfusionMatrix, CurveSeries,
};
use crate::raster::{
    load_cube, load_float_raster, load_mask, save_cube, save_float_raster, save_mask, BinaryMask, DataCube,
    FloatRaster, GridGeometry, RasterHeader, RasterKind,
};
use crate::synth::{generate, write_boreholes, SynthSpec};

pub const SCHEMA_VERSION: u32 = 1;

/// Column strip width used when predicting over the whole grid.
const PREDICT_STRIP: usize = 128;

pub mod artifacts {
    pub const LABELS: &str = "labels.json";
    pub const SPLIT: &str = "split.json";
    pub const SAMPLES: &str = "samples.csv";
    pub const EXCLUDED: &str = "excluded_pixels.csv";
    pub const GBT_MODEL: &str = "gbt_model.json";
    pub const LOGREG_MODEL: &str = "logreg_model.json";
    pub const TRAINING_LOG: &str = "training_log.json";
    pub const PROB_GBT: &str = "prob_gbt.json";
    pub const PROB_LOGREG: &str = "prob_logreg.json";
    pub const PRED_UNSMOOTHED: &str = "pred_unsmoothed.json";
    pub const PRED_SMOOTHED: &str = "pred_smoothed.json";
    pub const METRICS: &str = "metrics.json";
    pub const METRICS_TABLE: &str = "metrics.txt";
    pub const CURVES_SVG: &str = "curves.svg";
    pub const DTW: &str = "dtw.json";
    pub const BOREHOLES_KEPT: &str = "boreholes_filtered.csv";
    pub const IDW_REPORT: &str = "idw_report.json";
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub vv: PathBuf,
    pub vh: PathBuf,
    pub cc: PathBuf,
    pub polygons: PathBuf,
    pub boreholes: Option<PathBuf>,
    pub output_dir: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Paths {
            vv: "vv.json".into(),
            vh: "vh.json".into(),
            cc: "cc.json".into(),
            polygons: "polygons.geojson".into(),
            boreholes: None,
            output_dir: "out".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IdwConfig {
    pub power: f64,
    pub cutoff_date: NaiveDate,
}

impl Default for IdwConfig {
    fn default() -> Self {
        IdwConfig {
            power: 2.0,
            cutoff_date: NaiveDate::from_ymd_opt(2019, 1, 1).expect("valid date"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub paths: Paths,
    pub train_fraction: f64,
    pub train_side: TrainSide,
    /// Seed for undersampling.
    pub seed: u64,
    /// Require canonical band counts (30 / 30 / 29).
    pub strict: bool,
    pub gbt: TrainingConfig,
    pub logreg: LogRegConfig,
    pub crf: CrfParams,
    /// Operating thresholds; the first one produces the unsmoothed mask.
    pub thresholds: Vec<f64>,
    pub idw: IdwConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            schema_version: SCHEMA_VERSION,
            paths: Paths::default(),
            train_fraction: 2.0 / 3.0,
            train_side: TrainSide::Left,
            seed: 42,
            strict: true,
            gbt: TrainingConfig::default(),
            logreg: LogRegConfig::default(),
            crf: CrfParams::default(),
            thresholds: vec![0.9, 0.2],
            idw: IdwConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let c: RunConfig = serde_json::from_str(text).map_err(|e| Error::parse("run config", e))?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!("unsupported schema_version {}", self.schema_version)));
        }
        if self.thresholds.is_empty() || self.thresholds.iter().any(|&p| !(p > 0.0 && p < 1.0)) {
            return Err(Error::Config("thresholds must be non-empty and inside (0, 1)".into()));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Config(format!("train_fraction {} not in (0, 1)", self.train_fraction)));
        }
        if !(self.idw.power > 0.0 && self.idw.power.is_finite()) {
            return Err(Error::Config("idw power must be positive".into()));
        }
        self.gbt.validate()?;
        self.crf.validate()
    }

    /// Loads a config file; relative paths are taken relative to its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut c = Self::from_json_str(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut c.paths.vv);
        resolve(&mut c.paths.vh);
        resolve(&mut c.paths.cc);
        resolve(&mut c.paths.polygons);
        resolve(&mut c.paths.output_dir);
        if let Some(b) = c.paths.boreholes.as_mut() {
            resolve(b);
        }
        Ok(c)
    }

    /// SHA-256 of the settings that affect results (paths excluded).
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.paths = Paths::default();
        sha256_hex(serde_json::to_string(&c).expect("config serializes").as_bytes())
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn to_pretty(v: &impl Serialize) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable value");
    s.push('\n');
    s
}

fn read_json(path: &Path) -> Result<Value> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path.display().to_string(), e))
}

fn read_header(path: &Path) -> Result<RasterHeader> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    RasterHeader::from_json_str(&text)
}

/// A raster header and, when it parses, the payload it references.
fn raster_files(header: &Path) -> Vec<PathBuf> {
    let mut v = vec![header.to_path_buf()];
    if let Ok(h) = read_header(header) {
        let p = Path::new(&h.payload);
        v.push(if p.is_absolute() {
            p.to_path_buf()
        } else {
            header.parent().unwrap_or(Path::new("")).join(p)
        });
    }
    v
}

fn ensure_exists(path: &Path) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::io(
            path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "stage input does not exist"),
        ))
    }
}

#[derive(Debug, Serialize)]
struct InputDigest {
    path: String,
    sha256: String,
}

/// Stage runner bound to one configuration and output directory.
#[derive(Debug, Clone)]
pub struct Pipeline {
    pub config: RunConfig,
    pub out: PathBuf,
}

impl Pipeline {
    /// `out` and `seed` override the configuration when given.
    pub fn new(mut config: RunConfig, out: Option<PathBuf>, seed: Option<u64>) -> Result<Self> {
        if let Some(s) = seed {
            config.seed = s;
            config.gbt.seed = s;
        }
        config.validate()?;
        let out = out.unwrap_or_else(|| config.paths.output_dir.clone());
        fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
        Ok(Pipeline { config, out })
    }

    pub fn artifact(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn provenance(&self, stage: &str, artifact: &Path, inputs: &[PathBuf]) -> Result<()> {
        let mut digests = Vec::new();
        for p in inputs {
            let bytes = fs::read(p).map_err(|e| Error::io(p, e))?;
            digests.push(InputDigest {
                path: p.display().to_string(),
                sha256: sha256_hex(&bytes),
            });
        }
        let record = json!({
            "schema_version": SCHEMA_VERSION,
            "stage": stage,
            "artifact": artifact.file_name().map(|n| n.to_string_lossy().into_owned()),
            "inputs": digests,
            "config_sha256": self.config.hash(),
            "seed": self.config.seed,
            "version": env!("CARGO_PKG_VERSION"),
        });
        let mut name = artifact.as_os_str().to_owned();
        name.push(".prov.json");
        write_text(Path::new(&name), &to_pretty(&record))
    }

    fn cube_paths(&self) -> Vec<PathBuf> {
        let p = &self.config.paths;
        [&p.vv, &p.vh, &p.cc].iter().flat_map(|h| raster_files(h)).collect()
    }

    fn load_cubes(&self) -> Result<(DataCube, DataCube, DataCube)> {
        let p = &self.config.paths;
        for h in [&p.vv, &p.vh, &p.cc] {
            ensure_exists(h)?;
        }
        Ok((
            load_cube(&p.vv, self.config.strict)?,
            load_cube(&p.vh, self.config.strict)?,
            load_cube(&p.cc, self.config.strict)?,
        ))
    }

    fn geometry(&self) -> Result<GridGeometry> {
        ensure_exists(&self.config.paths.vv)?;
        read_header(&self.config.paths.vv)?.geometry()
    }

    fn load_split(&self) -> Result<RegionSplit> {
        let path = self.artifact(artifacts::SPLIT);
        let v = read_json(&path)?;
        let inner = v
            .get("split")
            .ok_or_else(|| Error::parse("split.json", "missing split"))?;
        RegionSplit::from_json_str(&inner.to_string())
    }

    fn load_artifact_mask(&self, name: &str) -> Result<BinaryMask> {
        let p = self.artifact(name);
        ensure_exists(&p)?;
        load_mask(&p)
    }

    fn load_artifact_prob(&self, name: &str) -> Result<FloatRaster> {
        let p = self.artifact(name);
        ensure_exists(&p)?;
        load_float_raster(&p)
    }

    /// Validates the three cubes and reports their shape and nodata counts.
    pub fn ingest(&self) -> Result<()> {
        let (vv, vh, cc) = self.load_cubes()?;
        let g = *vv.geometry();
        for c in [&vh, &cc] {
            if *c.geometry() != g {
                return Err(Error::Alignment(format!("{} cube geometry differs from VV", c.kind())));
            }
        }
        let invalid = (0..g.pixel_count())
            .filter(|&i| !(vv.is_valid_pixel(i) && vh.is_valid_pixel(i) && cc.is_valid_pixel(i)))
            .count();
        let cube = |c: &DataCube| {
            json!({
                "kind": c.kind().to_string(),
                "bands": c.band_count(),
                "first_date": c.dates().first(),
                "last_date": c.dates().last(),
            })
        };
        let report = json!({
            "schema_version": SCHEMA_VERSION,
            "width": g.width,
            "height": g.height,
            "cubes": [cube(&vv), cube(&vh), cube(&cc)],
            "nodata_pixels": invalid,
            "feature_count": vv.band_count() + vh.band_count() + cc.band_count(),
        });
        let out = self.artifact("ingest.json");
        write_text(&out, &to_pretty(&report))?;
        self.provenance("ingest", &out, &self.cube_paths())
    }

    pub fn rasterize(&self) -> Result<()> {
        let g = self.geometry()?;
        let poly_path = &self.config.paths.polygons;
        ensure_exists(poly_path)?;
        let text = fs::read_to_string(poly_path).map_err(|e| Error::io(poly_path, e))?;
        let polys = PolygonSet::from_geojson_str(&text)?;
        let mask = rasterize_polygons(&polys, &g);
        log::info!("rasterize: {} polygons, {} GDV pixels", polys.len(), mask.count_ones());
        let out = self.artifact(artifacts::LABELS);
        save_mask(&mask, &out)?;
        let pgm = self.artifact("labels.pgm");
        fs::write(&pgm, mask.to_pgm()).map_err(|e| Error::io(&pgm, e))?;
        self.provenance("rasterize", &out, &[self.config.paths.vv.clone(), poly_path.clone()])
    }

    pub fn split(&self) -> Result<()> {
        let g = self.geometry()?;
        let split = split_regions(&g, self.config.train_fraction, self.config.train_side)?;
        let out = self.artifact(artifacts::SPLIT);
        let doc = json!({
            "schema_version": SCHEMA_VERSION,
            "width": g.width,
            "height": g.height,
            "train_fraction": self.config.train_fraction,
            "split": split,
        });
        write_text(&out, &to_pretty(&doc))?;
        self.provenance("split", &out, std::slice::from_ref(&self.config.paths.vv))
    }

    pub fn sample(&self) -> Result<()> {
        let labels = self.load_artifact_mask(artifacts::LABELS)?;
        let split = self.load_split()?;
        let (vv, vh, cc) = self.load_cubes()?;
        let valid: Vec<bool> = (0..labels.geometry().pixel_count())
            .map(|i| vv.is_valid_pixel(i) && vh.is_valid_pixel(i) && cc.is_valid_pixel(i))
            .collect();
        let samples = undersample_valid(&labels, &split.train_cols, self.config.seed, Some(&valid))?;
        log::info!(
            "sample: {} positives, {} negatives",
            samples.count_label(1),
            samples.count_label(0)
        );
        let out = self.artifact(artifacts::SAMPLES);
        let f = fs::File::create(&out).map_err(|e| Error::io(&out, e))?;
        samples.write_csv(std::io::BufWriter::new(f))?;
        let mut inputs = raster_files(&self.artifact(artifacts::LABELS));
        inputs.push(self.artifact(artifacts::SPLIT));
        inputs.extend(self.cube_paths());
        self.provenance("sample", &out, &inputs)
    }

    pub fn train(&self) -> Result<()> {
        let sp = self.artifact(artifacts::SAMPLES);
        ensure_exists(&sp)?;
        let f = fs::File::open(&sp).map_err(|e| Error::io(&sp, e))?;
        let samples = SampleIndex::read_csv(std::io::BufReader::new(f))?;
        let (vv, vh, cc) = self.load_cubes()?;
        let assembled = assemble_features(&vv, &vh, &cc, PixelRequest::Samples(&samples))?;
        if !assembled.excluded.is_empty() {
            let ex = self.artifact(artifacts::EXCLUDED);
            let f = fs::File::create(&ex).map_err(|e| Error::io(&ex, e))?;
            write_exclusions(&assembled.excluded, f)?;
            log::warn!("train: {} sampled pixels had nodata and were dropped", assembled.excluded.len());
        }
        let x = assembled.matrix;
        let (model, gbt_loss) = gbt::train_with_history(&x, &self.config.gbt)?;
        let (lr, lr_loss) = train_logreg_with_history(&x, &self.config.logreg)?;
        let mut inputs = vec![sp];
        inputs.extend(self.cube_paths());

        let gbt_path = self.artifact(artifacts::GBT_MODEL);
        model.save(&gbt_path)?;
        self.provenance("train", &gbt_path, &inputs)?;
        let lr_path = self.artifact(artifacts::LOGREG_MODEL);
        lr.save(&lr_path)?;
        self.provenance("train", &lr_path, &inputs)?;
        let log_doc = json!({
            "schema_version": SCHEMA_VERSION,
            "rows": x.n_rows(),
            "features": x.n_cols(),
            "gbt_mean_loss_per_round": gbt_loss,
            "logreg_iterations": lr.meta.iterations,
            "logreg_converged": lr.meta.converged,
            "logreg_initial_loss": lr_loss.first(),
            "logreg_final_loss": lr_loss.last(),
        });
        let log_path = self.artifact(artifacts::TRAINING_LOG);
        write_text(&log_path, &to_pretty(&log_doc))?;
        self.provenance("train", &log_path, &inputs)
    }

    pub fn predict(&self) -> Result<()> {
        let gp = self.artifact(artifacts::GBT_MODEL);
        let lp = self.artifact(artifacts::LOGREG_MODEL);
        ensure_exists(&gp)?;
        ensure_exists(&lp)?;
        let model = GbtModel::load(&gp)?;
        let lr = LogRegModel::load(&lp)?;
        let (vv, vh, cc) = self.load_cubes()?;
        let g = *vv.geometry();
        let n = g.pixel_count();
        // nodata pixels keep probability 0
        let mut p_gbt = vec![0f32; n];
        let mut p_lr = vec![0f32; n];
        let mut start = 0;
        while start < g.width {
            let cols = start..(start + PREDICT_STRIP).min(g.width);
            let a = assemble_features(&vv, &vh, &cc, PixelRequest::Region { cols: cols.clone(), labels: None })?;
            let pg = gbt::predict_proba(&model, &a.matrix)?;
            let pl = predict_logreg(&lr, &a.matrix)?;
            for (k, &idx) in a.matrix.pixel_indices().iter().enumerate() {
                p_gbt[idx] = pg[k] as f32;
                p_lr[idx] = pl[k] as f32;
            }
            start = cols.end;
        }
        let threshold = self.config.thresholds[0];
        let mask_vals: Vec<u8> = p_gbt.iter().map(|&p| u8::from(f64::from(p) >= threshold)).collect();
        let mut inputs = vec![gp, lp];
        inputs.extend(self.cube_paths());

        let out = self.artifact(artifacts::PROB_GBT);
        save_float_raster(&FloatRaster::new(g, RasterKind::Prob, p_gbt)?, &out)?;
        self.provenance("predict", &out, &inputs)?;
        let out = self.artifact(artifacts::PROB_LOGREG);
        save_float_raster(&FloatRaster::new(g, RasterKind::Prob, p_lr)?, &out)?;
        self.provenance("predict", &out, &inputs)?;
        let mask = BinaryMask::new(g, mask_vals)?;
        let out = self.artifact(artifacts::PRED_UNSMOOTHED);
        save_mask(&mask, &out)?;
        let pgm = self.artifact("pred_unsmoothed.pgm");
        fs::write(&pgm, mask.to_pgm()).map_err(|e| Error::io(&pgm, e))?;
        self.provenance("predict", &out, &inputs)
    }

    pub fn smooth(&self) -> Result<()> {
        let prob = self.load_artifact_prob(artifacts::PROB_GBT)?;
        let mask = smooth(&prob, &self.config.crf)?;
        let out = self.artifact(artifacts::PRED_SMOOTHED);
        save_mask(&mask, &out)?;
        let pgm = self.artifact("pred_smoothed.pgm");
        fs::write(&pgm, mask.to_pgm()).map_err(|e| Error::io(&pgm, e))?;
        self.provenance("smooth", &out, &raster_files(&self.artifact(artifacts::PROB_GBT)))
    }

    fn region_scores(prob: &FloatRaster, truth: &BinaryMask, cols: &Range<usize>) -> (Vec<f64>, Vec<u8>) {
        let w = truth.geometry().width;
        let mut s = Vec::with_capacity(cols.len() * truth.geometry().height);
        let mut t = Vec::with_capacity(s.capacity());
        for row in 0..truth.geometry().height {
            for col in cols.clone() {
                let i = row * w + col;
                s.push(f64::from(prob.values()[i]));
                t.push(truth.get(i));
            }
        }
        (s, t)
    }

    fn validation_curves(&self, truth: &BinaryMask, split: &RegionSplit) -> Result<[(String, CurveSeries, CurveSeries); 2]> {
        let mut out = Vec::new();
        for (name, file) in [("gbt", artifacts::PROB_GBT), ("logreg", artifacts::PROB_LOGREG)] {
            let prob = self.load_artifact_prob(file)?;
            if prob.geometry() != truth.geometry() {
                return Err(Error::Alignment(format!("{file} and labels differ in geometry")));
            }
            let (s, t) = Self::region_scores(&prob, truth, &split.validation_cols);
            out.push((name.to_string(), roc_curve(&s, &t)?, prc_curve(&s, &t)?));
        }
        let mut it = out.into_iter();
        Ok([it.next().expect("gbt curves"), it.next().expect("logreg curves")])
    }

    /// Validation AUCs per model, and both models' TPR at the FDR the boosted
    /// model reaches at threshold `p0`.
    fn curve_summary(scores: &[(&str, Vec<f64>, Vec<u8>)], p0: f64) -> Result<(Value, Value)> {
        let mut auc = serde_json::Map::new();
        let mut rocs = Vec::new();
        for (model, s, t) in scores {
            let roc = roc_curve(s, t)?;
            let prc = prc_curve(s, t)?;
            auc.insert(model.to_string(), json!({"roc": roc.auc, "prc": prc.auc}));
            rocs.push(roc);
        }
        let fdr = compute_metrics(&rocs[0].operating_point(p0)).fdr;
        let matched = json!({
            "threshold": p0,
            "fdr": fdr,
            "gbt_tpr": rocs[0].tpr_at_fdr(fdr),
            "logreg_tpr": rocs[1].tpr_at_fdr(fdr),
        });
        Ok((Value::Object(auc), matched))
    }

    /// Confusion matrices and rates for both regions and both outputs, plus
    /// per-threshold operating points and curve summaries on validation.
    pub fn eval(&self) -> Result<()> {
        let truth = self.load_artifact_mask(artifacts::LABELS)?;
        let split = self.load_split()?;
        let unsmoothed = self.load_artifact_mask(artifacts::PRED_UNSMOOTHED)?;
        let smoothed = self.load_artifact_mask(artifacts::PRED_SMOOTHED)?;
        let regions = [("training", &split.train_cols), ("validation", &split.validation_cols)];
        let h = truth.geometry().height;

        let mut rows = Vec::new();
        let mut table_rows = Vec::new();
        for (region, cols) in regions {
            for (output, mask) in [("unsmoothed", &unsmoothed), ("smoothed", &smoothed)] {
                let cm = confusion(mask, &truth, cols)?;
                if cm.total() != (cols.len() * h) as u64 {
                    return Err(Error::invariant("eval", "confusion total differs from region size"));
                }
                rows.push(json!({
                    "region": region,
                    "output": output,
                    "confusion": cm,
                    "metrics": compute_metrics(&cm),
                }));
                table_rows.push((format!("{region} {output}"), cm));
            }
        }

        let mut ops = Vec::new();
        let mut scores = Vec::new();
        for (model, file) in [("gbt", artifacts::PROB_GBT), ("logreg", artifacts::PROB_LOGREG)] {
            let prob = self.load_artifact_prob(file)?;
            if prob.geometry() != truth.geometry() {
                return Err(Error::Alignment(format!("{file} and labels differ in geometry")));
            }
            let (s, t) = Self::region_scores(&prob, &truth, &split.validation_cols);
            for &p in &self.config.thresholds {
                let cm = confusion_at(&s, &t, p)?;
                ops.push(json!({
                    "model": model,
                    "region": "validation",
                    "threshold": p,
                    "confusion": cm,
                    "metrics": compute_metrics(&cm),
                }));
                table_rows.push((format!("validation {model} p>={p}"), cm));
            }
            scores.push((model, s, t));
        }
        let (auc, matched) = match Self::curve_summary(&scores, self.config.thresholds[0]) {
            Ok(v) => v,
            Err(Error::UndefinedCurve(msg)) => {
                log::warn!("eval: validation curves undefined: {msg}");
                (Value::Null, Value::Null)
            }
            Err(e) => return Err(e),
        };
        let doc = json!({
            "schema_version": SCHEMA_VERSION,
            "regions": {
                "training": {"cols": [split.train_cols.start, split.train_cols.end], "pixels": split.train_cols.len() * h},
                "validation": {"cols": [split.validation_cols.start, split.validation_cols.end], "pixels": split.validation_cols.len() * h},
            },
            "confusion": rows,
            "operating_points": ops,
            "validation_auc": auc,
            "matched_fdr": matched,
        });
        let out = self.artifact(artifacts::METRICS);
        write_text(&out, &to_pretty(&doc))?;
        let table = self.artifact(artifacts::METRICS_TABLE);
        write_text(&table, &render_table(&table_rows))?;
        let mut inputs = Vec::new();
        for a in [
            artifacts::LABELS,
            artifacts::PRED_UNSMOOTHED,
            artifacts::PRED_SMOOTHED,
            artifacts::PROB_GBT,
            artifacts::PROB_LOGREG,
        ] {
            inputs.extend(raster_files(&self.artifact(a)));
        }
        inputs.push(self.artifact(artifacts::SPLIT));
        self.provenance("eval", &out, &inputs)?;
        self.provenance("eval", &table, &inputs)
    }

    /// ROC and precision-recall curves on the validation region as CSV and SVG.
    pub fn curves(&self) -> Result<()> {
        let truth = self.load_artifact_mask(artifacts::LABELS)?;
        let split = self.load_split()?;
        let curves = self.validation_curves(&truth, &split)?;
        let mut inputs = raster_files(&self.artifact(artifacts::LABELS));
        inputs.extend(raster_files(&self.artifact(artifacts::PROB_GBT)));
        inputs.extend(raster_files(&self.artifact(artifacts::PROB_LOGREG)));
        inputs.push(self.artifact(artifacts::SPLIT));
        for (model, roc, prc) in &curves {
            for (kind, c) in [("roc", roc), ("prc", prc)] {
                let out = self.artifact(&format!("{kind}_{model}.csv"));
                write_text(&out, &c.to_csv())?;
                self.provenance("curves", &out, &inputs)?;
            }
        }
        let roc: Vec<(&str, &CurveSeries)> = curves.iter().map(|(m, r, _)| (m.as_str(), r)).collect();
        let prc: Vec<(&str, &CurveSeries)> = curves.iter().map(|(m, _, p)| (m.as_str(), p)).collect();
        let out = self.artifact(artifacts::CURVES_SVG);
        write_text(&out, &render_svg(&roc, &prc, &self.config.thresholds))?;
        self.provenance("curves", &out, &inputs)
    }

    pub fn idw(&self) -> Result<()> {
        let path = self
            .config
            .paths
            .boreholes
            .clone()
            .ok_or_else(|| Error::Config("paths.boreholes is not set".into()))?;
        ensure_exists(&path)?;
        let g = self.geometry()?;
        let f = fs::File::open(&path).map_err(|e| Error::io(&path, e))?;
        let records = read_boreholes(f)?;
        let (kept, report) = filter_boreholes(&records, self.config.idw.cutoff_date);
        log::info!("idw: {} of {} boreholes kept", report.kept, report.input);
        let params = IdwParams {
            power: self.config.idw.power,
        };
        let raster = idw_interpolate(&kept, &g, &params)?;
        let inputs = vec![path, self.config.paths.vv.clone()];
        let out = self.artifact(artifacts::DTW);
        save_float_raster(&raster, &out)?;
        self.provenance("idw", &out, &inputs)?;
        let kept_path = self.artifact(artifacts::BOREHOLES_KEPT);
        write_boreholes(&kept, &kept_path)?;
        self.provenance("idw", &kept_path, &inputs)?;
        let rep = self.artifact(artifacts::IDW_REPORT);
        let doc = json!({
            "schema_version": SCHEMA_VERSION,
            "cutoff_date": self.config.idw.cutoff_date,
            "power": params.power,
            "filter": report,
        });
        write_text(&rep, &to_pretty(&doc))?;
        self.provenance("idw", &rep, &inputs)
    }

    /// rasterize → split → sample → train → predict → smooth → eval → curves,
    /// then idw when boreholes are configured.
    pub fn run_all(&self) -> Result<()> {
        let paths = &self.config.paths;
        for p in [&paths.vv, &paths.vh, &paths.cc, &paths.polygons].into_iter().chain(paths.boreholes.as_ref()) {
            ensure_exists(p)?;
        }
        self.rasterize()?;
        self.split()?;
        self.sample()?;
        self.train()?;
        self.predict()?;
        self.smooth()?;
        self.eval()?;
        match self.curves() {
            Err(Error::UndefinedCurve(msg)) => log::warn!("curves skipped: {msg}"),
            r => r?,
        }
        if self.config.paths.boreholes.is_some() {
            self.idw()?;
        }
        Ok(())
    }
}

/// Scores an arbitrary prediction mask against a truth mask over the full grid.
pub fn eval_masks(pred: &Path, truth: &Path, out: &Path) -> Result<ConfusionMatrix> {
    ensure_exists(pred)?;
    ensure_exists(truth)?;
    let p = load_mask(pred)?;
    let t = load_mask(truth)?;
    let cm = confusion(&p, &t, &(0..t.geometry().width))?;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let doc = json!({
        "schema_version": SCHEMA_VERSION,
        "confusion": [{"region": "full", "output": "prediction", "confusion": cm, "metrics": compute_metrics(&cm)}],
    });
    write_text(&out.join(artifacts::METRICS), &to_pretty(&doc))?;
    write_text(
        &out.join(artifacts::METRICS_TABLE),
        &render_table(&[("full".to_string(), cm)]),
    )?;
    Ok(cm)
}

/// Writes a synthetic dataset and a ready-to-run config into `dir`.
pub fn write_synthetic(spec: &SynthSpec, dir: &Path) -> Result<PathBuf> {
    let data = generate(spec)?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    save_cube(&data.vv, dir.join("vv.json"))?;
    save_cube(&data.vh, dir.join("vh.json"))?;
    save_cube(&data.cc, dir.join("cc.json"))?;
    save_mask(&data.truth, dir.join("truth.json"))?;
    write_text(&dir.join("polygons.geojson"), &data.polygons.to_geojson_string())?;
    write_boreholes(&data.boreholes, &dir.join("boreholes.csv"))?;
    write_text(&dir.join("synth_spec.json"), &to_pretty(spec))?;
    let config = RunConfig {
        paths: Paths {
            boreholes: Some("boreholes.csv".into()),
            output_dir: "run".into(),
            ..Paths::default()
        },
        ..RunConfig::default()
    };
    let path = dir.join("config.json");
    write_text(&path, &to_pretty(&config))?;
    Ok(path)
}
