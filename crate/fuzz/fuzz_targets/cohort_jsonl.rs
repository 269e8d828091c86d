#![no_main]

use libfuzzer_sys::fuzz_target;
use prnn_core::data::{parse_cohort, write_cohort};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(episodes) = parse_cohort(text) {
        for ep in &episodes {
            ep.validate().expect("parsed episodes are valid");
        }
        let mut out = Vec::new();
        write_cohort(&mut out, &episodes).expect("re-serialize");
        let again = parse_cohort(std::str::from_utf8(&out).unwrap()).expect("re-parse");
        assert_eq!(again, episodes);
    }
});
