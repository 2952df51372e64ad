#![no_main]

use libfuzzer_sys::fuzz_target;
use sargdv::gbt::GbtModel;
use sargdv::logreg::LogRegModel;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(model) = GbtModel::from_json_str(text) {
        let row = vec![0.5f32; model.feature_count];
        let _ = model.margin_row(&row);
        if let Ok(s) = model.to_json_string() {
            assert_eq!(GbtModel::from_json_str(&s).unwrap(), model);
        }
    }
    if let Ok(model) = LogRegModel::from_json_str(text) {
        let row = vec![0.5f32; model.feature_count()];
        let _ = model.margin_row(&row);
    }
});
