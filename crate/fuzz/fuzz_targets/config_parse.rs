#![no_main]

use imbalseg::config::PipelineConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        let _ = PipelineConfig::parse(s, "/nonexistent");
    }
});
