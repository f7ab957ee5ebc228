#![no_main]

use imbalseg::inference::PostProcessConfig;
use imbalseg::ClassSet;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(m) = PostProcessConfig::parse_multipliers(s, &ClassSet::default()) {
            assert!(m.iter().all(|v| v.is_finite() && *v > 0.0));
        }
    }
});
