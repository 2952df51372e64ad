#![no_main]

use libfuzzer_sys::fuzz_target;
use sargdv::dataset::{rasterize_polygons, PolygonSet};
use sargdv::raster::GridGeometry;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(set) = PolygonSet::from_geojson_str(text) {
        let g = GridGeometry::new(16, 16, 0.0, 16.0, 1.0, -1.0).unwrap();
        let mask = rasterize_polygons(&set, &g);
        assert_eq!(mask.values().len(), 256);
        let again = PolygonSet::from_geojson_str(&set.to_geojson_string()).unwrap();
        assert_eq!(again.len(), set.len());
    }
});
