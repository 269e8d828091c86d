#![no_main]

use libfuzzer_sys::fuzz_target;
use prnn_core::reports::{
    auroc_csv, comparison_csv, parse_auroc, parse_comparison, parse_pipeup, parse_training_log,
    parse_variation, pipeup_csv, training_log_csv, variation_csv,
};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let reparse = |bytes: Vec<u8>| String::from_utf8(bytes).expect("utf-8 report");
    if let Ok(rows) = parse_variation(text) {
        assert_eq!(
            parse_variation(&reparse(variation_csv(&rows).unwrap())).unwrap(),
            rows
        );
    }
    if let Ok(rows) = parse_pipeup(text) {
        assert_eq!(
            parse_pipeup(&reparse(pipeup_csv(&rows).unwrap())).unwrap(),
            rows
        );
    }
    if let Ok(rows) = parse_auroc(text) {
        assert_eq!(
            parse_auroc(&reparse(auroc_csv(&rows).unwrap())).unwrap(),
            rows
        );
    }
    if let Ok(rows) = parse_training_log(text) {
        assert_eq!(
            parse_training_log(&reparse(training_log_csv(&rows).unwrap())).unwrap(),
            rows
        );
    }
    if let Ok(rows) = parse_comparison(text) {
        assert_eq!(
            parse_comparison(&reparse(comparison_csv(&rows).unwrap())).unwrap(),
            rows
        );
    }
});
