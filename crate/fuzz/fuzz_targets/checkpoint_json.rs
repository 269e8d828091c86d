#![no_main]

use libfuzzer_sys::fuzz_target;
use prnn_core::checkpoint::parse_checkpoint;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(ck) = parse_checkpoint(text) {
        assert!(ck.params.is_finite());
        let json = ck.to_json().expect("re-serialize");
        assert_eq!(parse_checkpoint(&json).expect("re-parse"), ck);
    }
});
