#![no_main]

use libfuzzer_sys::fuzz_target;
use sargdv::raster::{BinaryMask, DataCube, FloatRaster, RasterHeader};

// Input: JSON header, a NUL byte, then the payload bytes.
fuzz_target!(|data: &[u8]| {
    let split = data.iter().position(|&b| b == 0).unwrap_or(data.len());
    let Ok(text) = std::str::from_utf8(&data[..split]) else {
        return;
    };
    let payload = data.get(split + 1..).unwrap_or(&[]);
    if let Ok(header) = RasterHeader::from_json_str(text) {
        if header.expected_payload_len().is_some_and(|n| n > 1 << 20) {
            return;
        }
        let _ = DataCube::from_header_and_payload(&header, payload, false);
        let _ = BinaryMask::from_header_and_payload(&header, payload);
        let _ = FloatRaster::from_header_and_payload(&header, payload);
    }
});
