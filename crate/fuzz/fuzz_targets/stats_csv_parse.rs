#![no_main]

use imbalseg::stats::parse_stats_csv;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        let _ = parse_stats_csv(s);
    }
});
