#![no_main]

use factorseg::DetectionReport;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(report) = DetectionReport::from_json(text) {
        let json = report.to_json().unwrap();
        assert_eq!(DetectionReport::from_json(&json).unwrap().to_json().unwrap(), json);
    }
});
