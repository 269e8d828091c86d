#![no_main]

use libfuzzer_sys::fuzz_target;
use prnn_core::data::{parse_split, write_split};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(split) = parse_split(text) {
        let mut out = Vec::new();
        write_split(&mut out, &split).expect("re-serialize");
        assert_eq!(
            parse_split(std::str::from_utf8(&out).unwrap()).expect("re-parse"),
            split
        );
    }
});
