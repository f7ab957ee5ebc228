#![no_main]

use imbalseg::inference::TtaConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(cfg) = TtaConfig::parse(s) {
            // Display output parses back to the same set.
            assert_eq!(TtaConfig::parse(&cfg.to_string()).unwrap(), cfg);
        }
    }
});
