#![no_main]

use libfuzzer_sys::fuzz_target;
use sargdv::dataset::SampleIndex;
use sargdv::idw::{filter_boreholes, read_boreholes};

fuzz_target!(|data: &[u8]| {
    if let Ok(records) = read_boreholes(data) {
        let cutoff = chrono::NaiveDate::from_ymd_opt(2019, 1, 1).unwrap();
        let (kept, report) = filter_boreholes(&records, cutoff);
        assert_eq!(kept.len(), report.kept);
        assert!(report.kept + report.missing_dtw + report.before_cutoff + report.bad_date == records.len());
    }
    if let Ok(samples) = SampleIndex::read_csv(data) {
        let mut out = Vec::new();
        samples.write_csv(&mut out).unwrap();
        let again = SampleIndex::read_csv(out.as_slice()).unwrap();
        assert_eq!(again.len(), samples.len());
    }
});
