#![no_main]

use factorseg::{parse_csv, Orientation};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    for orientation in [Orientation::RowsAreSeries, Orientation::RowsAreTime] {
        if let Ok(panel) = parse_csv(text, orientation) {
            assert!(panel.values().iter().all(|v| v.is_finite()));
            let mut buf = Vec::new();
            panel.write_csv(&mut buf, orientation).unwrap();
            let again = parse_csv(std::str::from_utf8(&buf).unwrap(), orientation).unwrap();
            assert_eq!(again.values(), panel.values());
        }
    }
});
