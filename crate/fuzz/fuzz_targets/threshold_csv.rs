#![no_main]

use libfuzzer_sys::fuzz_target;
use prnn_core::metrics::{parse_thresholds_csv, write_thresholds_csv};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(table) = parse_thresholds_csv(text) {
        let mut out = Vec::new();
        write_thresholds_csv(&mut out, &table).expect("re-serialize");
        assert_eq!(
            parse_thresholds_csv(std::str::from_utf8(&out).unwrap()).expect("re-parse"),
            table
        );
    }
});
