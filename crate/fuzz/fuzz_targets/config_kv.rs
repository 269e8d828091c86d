#![no_main]

use libfuzzer_sys::fuzz_target;
use prnn_core::data::GeneratorConfig;
use prnn_core::kv::parse_key_values;
use prnn_core::trainer::TrainingConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let _ = parse_key_values(text);
    if let Ok(c) = GeneratorConfig::from_text(text) {
        c.validate().expect("accepted generator config validates");
    }
    if let Ok(c) = TrainingConfig::from_text(text) {
        c.validate().expect("accepted training config validates");
    }
});
