//! Vector label polygons and their rasterization to a binary label mask.
//!
//! A pixel is labelled 1 when at least half of its cell is covered by the
//! union of all polygons. Coverage is computed exactly: each one-pixel-wide
//! column strip is cut into vertical slabs at every vertex, every edge/edge
//! intersection and every crossing of a row boundary. Inside a slab the
//! covered length of each row is linear in `x`, so evaluating the union
//! cross-section at the slab midpoint integrates it without error.

use log::warn;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::raster::{BinaryMask, GridGeometry};

/// Coverage threshold for a GDV pixel, inclusive.
pub const COVERAGE_THRESHOLD: f64 = 0.5;

/// Absorbs rounding in the lon/lat → pixel transform so an exact half
/// coverage is not lost to the last bit.
const COVERAGE_EPS: f64 = 1e-9;

type Ring = Vec<(f64, f64)>;

/// Simple polygon with optional holes, vertices as (lon, lat). Rings are
/// stored closed (first vertex repeated at the end).
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    exterior: Ring,
    holes: Vec<Ring>,
}

fn validate_ring(ring: &[(f64, f64)]) -> Result<()> {
    if ring.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(Error::parse("polygon", "non-finite coordinate"));
    }
    if ring.len() < 4 || ring.first() != ring.last() {
        return Err(Error::parse("polygon", "ring must be closed with at least 4 positions"));
    }
    let mut distinct: Vec<(f64, f64)> = ring[..ring.len() - 1].to_vec();
    distinct.sort_by(|a, b| a.partial_cmp(b).unwrap());
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::parse("polygon", "ring needs at least 3 distinct vertices"));
    }
    Ok(())
}

fn shoelace(ring: &[(f64, f64)]) -> f64 {
    ring.windows(2)
        .map(|w| w[0].0 * w[1].1 - w[1].0 * w[0].1)
        .sum::<f64>()
        * 0.5
}

impl Polygon {
    pub fn new(exterior: Vec<(f64, f64)>, holes: Vec<Vec<(f64, f64)>>) -> Result<Self> {
        validate_ring(&exterior)?;
        for h in &holes {
            validate_ring(h)?;
        }
        Ok(Polygon { exterior, holes })
    }

    /// Axis-aligned rectangle `[lon0, lon1] x [lat0, lat1]`.
    pub fn rectangle(lon0: f64, lat0: f64, lon1: f64, lat1: f64) -> Result<Self> {
        Self::new(
            vec![(lon0, lat0), (lon1, lat0), (lon1, lat1), (lon0, lat1), (lon0, lat0)],
            Vec::new(),
        )
    }

    /// Closes an open vertex list and builds a polygon without holes.
    pub fn from_open_ring(mut vertices: Vec<(f64, f64)>) -> Result<Self> {
        if let Some(&first) = vertices.first() {
            vertices.push(first);
        }
        Self::new(vertices, Vec::new())
    }

    pub fn exterior(&self) -> &[(f64, f64)] {
        &self.exterior
    }

    pub fn holes(&self) -> &[Vec<(f64, f64)>] {
        &self.holes
    }

    /// Planar area in coordinate units, holes subtracted.
    pub fn area(&self) -> f64 {
        shoelace(&self.exterior).abs() - self.holes.iter().map(|h| shoelace(h).abs()).sum::<f64>()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PolygonSet {
    pub polygons: Vec<Polygon>,
}

impl PolygonSet {
    pub fn new(polygons: Vec<Polygon>) -> Self {
        PolygonSet { polygons }
    }

    pub fn is_empty(&self) -> bool {
        self.polygons.is_empty()
    }

    pub fn len(&self) -> usize {
        self.polygons.len()
    }

    /// Parses a GeoJSON FeatureCollection (or a bare Feature / geometry).
    /// Polygon and MultiPolygon geometries are collected; other geometry
    /// types and null geometries are skipped with a warning.
    pub fn from_geojson_str(text: &str) -> Result<Self> {
        let root: Value = serde_json::from_str(text).map_err(|e| Error::parse("geojson", e))?;
        let mut polygons = Vec::new();
        match root.get("type").and_then(Value::as_str) {
            Some("FeatureCollection") => {
                let features = root
                    .get("features")
                    .and_then(Value::as_array)
                    .ok_or_else(|| Error::parse("geojson", "FeatureCollection without features array"))?;
                for (i, f) in features.iter().enumerate() {
                    collect_feature(f, i, &mut polygons)?;
                }
            }
            Some("Feature") => collect_feature(&root, 0, &mut polygons)?,
            Some(_) => collect_geometry(&root, 0, &mut polygons)?,
            None => return Err(Error::parse("geojson", "missing \"type\"")),
        }
        Ok(PolygonSet { polygons })
    }

    pub fn to_geojson_string(&self) -> String {
        let ring = |r: &[(f64, f64)]| -> Value { Value::Array(r.iter().map(|&(x, y)| json!([x, y])).collect()) };
        let features: Vec<Value> = self
            .polygons
            .iter()
            .map(|p| {
                let mut rings = vec![ring(&p.exterior)];
                rings.extend(p.holes.iter().map(|h| ring(h)));
                json!({
                    "type": "Feature",
                    "properties": {},
                    "geometry": {"type": "Polygon", "coordinates": rings},
                })
            })
            .collect();
        serde_json::to_string(&json!({"type": "FeatureCollection", "features": features}))
            .expect("geojson serializes")
    }
}

fn collect_feature(feature: &Value, index: usize, out: &mut Vec<Polygon>) -> Result<()> {
    match feature.get("geometry") {
        None | Some(Value::Null) => {
            warn!("feature {index}: null geometry skipped");
            Ok(())
        }
        Some(g) => collect_geometry(g, index, out),
    }
}

fn parse_ring(value: &Value, index: usize) -> Result<Ring> {
    let positions = value
        .as_array()
        .ok_or_else(|| Error::parse("geojson", format!("feature {index}: ring is not an array")))?;
    positions
        .iter()
        .map(|p| {
            let xy = p.as_array().filter(|a| a.len() >= 2);
            match xy.map(|a| (a[0].as_f64(), a[1].as_f64())) {
                Some((Some(x), Some(y))) => Ok((x, y)),
                _ => Err(Error::parse("geojson", format!("feature {index}: bad position {p}"))),
            }
        })
        .collect()
}

fn parse_polygon(value: &Value, index: usize) -> Result<Polygon> {
    let rings = value
        .as_array()
        .ok_or_else(|| Error::parse("geojson", format!("feature {index}: polygon is not an array")))?;
    let mut rings = rings.iter().map(|r| parse_ring(r, index));
    let exterior = rings
        .next()
        .ok_or_else(|| Error::parse("geojson", format!("feature {index}: polygon without rings")))??;
    let holes = rings.collect::<Result<Vec<_>>>()?;
    Polygon::new(exterior, holes).map_err(|e| Error::parse("geojson", format!("feature {index}: {e}")))
}

fn collect_geometry(geometry: &Value, index: usize, out: &mut Vec<Polygon>) -> Result<()> {
    let kind = geometry.get("type").and_then(Value::as_str).unwrap_or("");
    let coords = geometry.get("coordinates");
    match (kind, coords) {
        ("Polygon", Some(c)) => out.push(parse_polygon(c, index)?),
        ("MultiPolygon", Some(c)) => {
            let parts = c
                .as_array()
                .ok_or_else(|| Error::parse("geojson", format!("feature {index}: bad MultiPolygon")))?;
            for p in parts {
                out.push(parse_polygon(p, index)?);
            }
        }
        ("GeometryCollection", _) => {
            if let Some(gs) = geometry.get("geometries").and_then(Value::as_array) {
                for g in gs {
                    collect_geometry(g, index, out)?;
                }
            }
        }
        ("Polygon" | "MultiPolygon", None) => {
            return Err(Error::parse("geojson", format!("feature {index}: missing coordinates")))
        }
        (other, _) => warn!("feature {index}: geometry type {other:?} skipped"),
    }
    Ok(())
}

#[derive(Debug, Clone, Copy)]
struct Edge {
    x0: f64,
    y0: f64,
    x1: f64,
    y1: f64,
    polygon: usize,
}

impl Edge {
    fn y_at(&self, x: f64) -> f64 {
        self.y0 + (x - self.x0) * (self.y1 - self.y0) / (self.x1 - self.x0)
    }

    fn x_min(&self) -> f64 {
        self.x0.min(self.x1)
    }

    fn x_max(&self) -> f64 {
        self.x0.max(self.x1)
    }

    /// x of the proper crossing with `other` inside the open x-overlap, if any.
    fn crossing_x(&self, other: &Edge) -> Option<f64> {
        let lo = self.x_min().max(other.x_min());
        let hi = self.x_max().min(other.x_max());
        if hi <= lo {
            return None;
        }
        let s1 = (self.y1 - self.y0) / (self.x1 - self.x0);
        let s2 = (other.y1 - other.y0) / (other.x1 - other.x0);
        if s1 == s2 {
            return None;
        }
        let x = (other.y_at(0.0) - self.y_at(0.0)) / (s1 - s2);
        let x = if x.is_finite() && x > lo && x < hi {
            x
        } else {
            // Intercept form loses precision far from the origin; fall back to
            // solving relative to the overlap start.
            let d0 = self.y_at(lo) - other.y_at(lo);
            let d1 = self.y_at(hi) - other.y_at(hi);
            if d0 == 0.0 || d1 == 0.0 || (d0 > 0.0) == (d1 > 0.0) {
                return None;
            }
            lo + (hi - lo) * d0 / (d0 - d1)
        };
        Some(x)
    }
}

/// Pixel-space edges of every usable polygon; degenerate rings are dropped.
fn pixel_edges(polygons: &PolygonSet, geometry: &GridGeometry) -> Vec<Edge> {
    let mut edges = Vec::new();
    for (pi, poly) in polygons.polygons.iter().enumerate() {
        if shoelace(&poly.exterior) == 0.0 {
            warn!("polygon {pi}: zero-area exterior ring ignored");
            continue;
        }
        let rings = std::iter::once(&poly.exterior).chain(poly.holes.iter().filter(|h| {
            let keep = shoelace(h) != 0.0;
            if !keep {
                warn!("polygon {pi}: zero-area hole ignored");
            }
            keep
        }));
        for ring in rings {
            for w in ring.windows(2) {
                let (x0, y0) = geometry.to_pixel_space(w[0].0, w[0].1);
                let (x1, y1) = geometry.to_pixel_space(w[1].0, w[1].1);
                if x0 != x1 {
                    edges.push(Edge {
                        x0,
                        y0,
                        x1,
                        y1,
                        polygon: pi,
                    });
                }
            }
        }
    }
    edges
}

/// Covered fraction of every pixel (row-major), by the union of `polygons`.
pub fn coverage_fractions(polygons: &PolygonSet, geometry: &GridGeometry) -> Vec<f64> {
    let (w, h) = (geometry.width, geometry.height);
    let edges = pixel_edges(polygons, geometry);

    let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); w];
    for (i, e) in edges.iter().enumerate() {
        if e.x_max() <= 0.0 || e.x_min() >= w as f64 {
            continue;
        }
        let c0 = e.x_min().max(0.0).floor() as usize;
        let c1 = (e.x_max().ceil() as usize).min(w);
        for bucket in &mut buckets[c0.min(w - 1)..c1] {
            bucket.push(i);
        }
    }

    let columns: Vec<Vec<f64>> = buckets
        .par_iter()
        .enumerate()
        .map(|(col, idx)| {
            let strip: Vec<Edge> = idx.iter().map(|&i| edges[i]).collect();
            strip_coverage(&strip, col as f64, h)
        })
        .collect();

    let mut out = vec![0.0; w * h];
    for (col, column) in columns.iter().enumerate() {
        for (row, &v) in column.iter().enumerate() {
            out[row * w + col] = v;
        }
    }
    out
}

fn strip_coverage(edges: &[Edge], x_lo: f64, height: usize) -> Vec<f64> {
    let mut cov = vec![0.0; height];
    if edges.is_empty() {
        return cov;
    }
    let x_hi = x_lo + 1.0;
    let inside = |x: f64| x > x_lo && x < x_hi;

    let mut cuts = vec![x_lo, x_hi];
    for e in edges {
        for x in [e.x0, e.x1] {
            if inside(x) {
                cuts.push(x);
            }
        }
        let (ya, yb) = (e.y0.min(e.y1), e.y0.max(e.y1));
        let k0 = ya.ceil().max(0.0) as i64;
        let k1 = yb.floor().min(height as f64) as i64;
        for k in k0..=k1 {
            let k = k as f64;
            if k > ya && k < yb {
                let x = e.x0 + (k - e.y0) * (e.x1 - e.x0) / (e.y1 - e.y0);
                if inside(x) {
                    cuts.push(x);
                }
            }
        }
    }
    for (i, a) in edges.iter().enumerate() {
        for b in &edges[i + 1..] {
            if let Some(x) = a.crossing_x(b) {
                if inside(x) {
                    cuts.push(x);
                }
            }
        }
    }
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup();

    let mut per_polygon: Vec<(usize, f64)> = Vec::with_capacity(edges.len());
    let mut intervals: Vec<(f64, f64)> = Vec::new();
    for slab in cuts.windows(2) {
        let dx = slab[1] - slab[0];
        if dx <= 0.0 {
            continue;
        }
        let xm = 0.5 * (slab[0] + slab[1]);
        per_polygon.clear();
        for e in edges {
            if e.x_min() < xm && xm < e.x_max() {
                per_polygon.push((e.polygon, e.y_at(xm)));
            }
        }
        per_polygon.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.partial_cmp(&b.1).unwrap()));

        // even-odd pairing within each polygon, then union across polygons
        intervals.clear();
        for group in per_polygon.chunk_by(|a, b| a.0 == b.0) {
            for pair in group.chunks_exact(2) {
                intervals.push((pair[0].1, pair[1].1));
            }
        }
        intervals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut merged: Option<(f64, f64)> = None;
        for &(a, b) in intervals.iter() {
            match merged {
                Some((ma, mb)) if a <= mb => merged = Some((ma, mb.max(b))),
                Some(m) => {
                    add_interval(&mut cov, m, dx);
                    merged = Some((a, b));
                }
                None => merged = Some((a, b)),
            }
        }
        if let Some(m) = merged {
            add_interval(&mut cov, m, dx);
        }
    }
    cov
}

fn add_interval(cov: &mut [f64], (a, b): (f64, f64), dx: f64) {
    let h = cov.len() as f64;
    let (a, b) = (a.max(0.0), b.min(h));
    if b <= a {
        return;
    }
    let r0 = a.floor() as usize;
    let r1 = (b.ceil() as usize).min(cov.len());
    for (r, c) in cov.iter_mut().enumerate().take(r1).skip(r0) {
        let lo = a.max(r as f64);
        let hi = b.min(r as f64 + 1.0);
        if hi > lo {
            *c += (hi - lo) * dx;
        }
    }
}

/// Binary label mask: 1 where the polygon union covers at least half the cell.
pub fn rasterize_polygons(polygons: &PolygonSet, geometry: &GridGeometry) -> BinaryMask {
    let values = coverage_fractions(polygons, geometry)
        .into_iter()
        .map(|c| u8::from(c >= COVERAGE_THRESHOLD - COVERAGE_EPS))
        .collect();
    BinaryMask::new(*geometry, values).expect("mask matches geometry")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit(w: usize, h: usize) -> GridGeometry {
        GridGeometry::unit(w, h).unwrap()
    }

    /// Rectangle in pixel space (x right, y down) on the unit grid.
    fn px_rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Polygon {
        Polygon::rectangle(x0, -y0, x1, -y1).unwrap()
    }

    #[test]
    fn full_extent_polygon_fills_mask() {
        let g = unit(7, 5);
        let set = PolygonSet::new(vec![px_rect(-1.0, -1.0, 8.0, 6.0)]);
        assert_eq!(rasterize_polygons(&set, &g).count_ones(), 35);
    }

    #[test]
    fn empty_set_gives_zero_mask() {
        let g = unit(7, 5);
        assert_eq!(rasterize_polygons(&PolygonSet::default(), &g).count_ones(), 0);
    }

    #[test]
    fn exact_half_coverage_is_inclusive() {
        let g = unit(3, 3);
        let set = PolygonSet::new(vec![px_rect(1.0, 1.0, 1.5, 2.0)]);
        let cov = coverage_fractions(&set, &g);
        assert_eq!(cov[4], 0.5);
        let m = rasterize_polygons(&set, &g);
        assert_eq!(m.at(1, 1), 1);
        assert_eq!(m.count_ones(), 1);
    }

    #[test]
    fn exact_half_on_georeferenced_grid() {
        let g = GridGeometry::new(4, 4, 140.5, -37.6, 0.00027, -0.00027).unwrap();
        let (lon0, lat0) = g.from_pixel_space(2.0, 1.0);
        let (lon1, lat1) = g.from_pixel_space(2.5, 2.0);
        let set = PolygonSet::new(vec![Polygon::rectangle(lon0, lat0, lon1, lat1).unwrap()]);
        let m = rasterize_polygons(&set, &g);
        assert_eq!(m.at(1, 2), 1);
    }

    #[test]
    fn polygon_outside_extent_contributes_nothing() {
        let g = unit(4, 4);
        let set = PolygonSet::new(vec![px_rect(10.0, 10.0, 12.0, 12.0)]);
        assert!(coverage_fractions(&set, &g).iter().all(|&c| c == 0.0));
    }

    #[test]
    fn degenerate_ring_is_ignored() {
        let g = unit(4, 4);
        let flat = Polygon::new(
            vec![(0.0, 0.0), (2.0, -2.0), (4.0, -4.0), (0.0, 0.0)],
            Vec::new(),
        )
        .unwrap();
        let set = PolygonSet::new(vec![flat, px_rect(0.0, 0.0, 1.0, 1.0)]);
        assert_eq!(rasterize_polygons(&set, &g).count_ones(), 1);
    }

    #[test]
    fn hole_is_subtracted() {
        let g = unit(3, 3);
        let outer = vec![(0.0, 0.0), (3.0, 0.0), (3.0, -3.0), (0.0, -3.0), (0.0, 0.0)];
        let hole = vec![(1.0, -1.0), (2.0, -1.0), (2.0, -2.0), (1.0, -2.0), (1.0, -1.0)];
        let set = PolygonSet::new(vec![Polygon::new(outer, vec![hole]).unwrap()]);
        let m = rasterize_polygons(&set, &g);
        assert_eq!(m.count_ones(), 8);
        assert_eq!(m.at(1, 1), 0);
    }

    #[test]
    fn overlapping_polygons_use_union_area() {
        let g = unit(1, 1);
        // two identical 0.3-wide strips overlap completely: union 0.3, not 0.6
        let set = PolygonSet::new(vec![px_rect(0.0, 0.0, 0.3, 1.0), px_rect(0.0, 0.0, 0.3, 1.0)]);
        let cov = coverage_fractions(&set, &g);
        assert!((cov[0] - 0.3).abs() < 1e-12);
        assert_eq!(rasterize_polygons(&set, &g).count_ones(), 0);
    }

    #[test]
    fn triangle_coverage_is_exact() {
        let g = unit(2, 2);
        // right triangle over the whole 2x2 grid, hypotenuse on the diagonal
        let tri = Polygon::from_open_ring(vec![(0.0, 0.0), (2.0, 0.0), (0.0, -2.0)]).unwrap();
        let cov = coverage_fractions(&PolygonSet::new(vec![tri]), &g);
        for (got, want) in cov.iter().zip([1.0, 0.5, 0.5, 0.0]) {
            assert!((got - want).abs() < 1e-12, "{cov:?}");
        }
    }

    #[test]
    fn geojson_round_trip() {
        let set = PolygonSet::new(vec![
            px_rect(0.0, 0.0, 1.0, 1.0),
            Polygon::from_open_ring(vec![(0.0, 0.0), (2.0, 0.5), (1.0, 2.0)]).unwrap(),
        ]);
        let back = PolygonSet::from_geojson_str(&set.to_geojson_string()).unwrap();
        assert_eq!(back, set);
    }

    #[test]
    fn geojson_multipolygon_and_skips() {
        let text = r#"{"type":"FeatureCollection","features":[
            {"type":"Feature","properties":{},"geometry":null},
            {"type":"Feature","properties":{},"geometry":{"type":"Point","coordinates":[0,0]}},
            {"type":"Feature","properties":{},"geometry":{"type":"MultiPolygon","coordinates":[
                [[[0,0],[1,0],[1,1],[0,0]]],
                [[[2,2],[3,2],[3,3],[2,2]]]
            ]}}
        ]}"#;
        assert_eq!(PolygonSet::from_geojson_str(text).unwrap().len(), 2);
    }

    #[test]
    fn geojson_unclosed_ring_rejected() {
        let text = r#"{"type":"Polygon","coordinates":[[[0,0],[1,0],[1,1],[0,1]]]}"#;
        assert!(PolygonSet::from_geojson_str(text).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn adding_a_polygon_is_monotone(
            rects in proptest::collection::vec((0.0f64..12.0, 0.0f64..12.0, 0.2f64..6.0, 0.2f64..6.0), 1..6),
            extra in (0.0f64..12.0, 0.0f64..12.0, 0.2f64..6.0, 0.2f64..6.0),
        ) {
            let g = unit(12, 12);
            let mk = |(x, y, w, h): (f64, f64, f64, f64)| px_rect(x, y, x + w, y + h);
            let mut set = PolygonSet::new(rects.into_iter().map(mk).collect());
            let before = rasterize_polygons(&set, &g);
            set.polygons.push(mk(extra));
            let after = rasterize_polygons(&set, &g);
            for (b, a) in before.values().iter().zip(after.values()) {
                prop_assert!(a >= b);
            }
        }

        #[test]
        fn coverage_sums_to_clipped_area(x in -3.0f64..10.0, y in -3.0f64..10.0, w in 0.1f64..8.0, h in 0.1f64..8.0) {
            let g = unit(8, 8);
            let set = PolygonSet::new(vec![px_rect(x, y, x + w, y + h)]);
            let total: f64 = coverage_fractions(&set, &g).iter().sum();
            let cw = ((x + w).min(8.0) - x.max(0.0)).max(0.0);
            let ch = ((y + h).min(8.0) - y.max(0.0)).max(0.0);
            prop_assert!((total - cw * ch).abs() < 1e-9);
        }
    }
}
