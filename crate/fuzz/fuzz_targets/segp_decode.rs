#![no_main]

use imbalseg::io::segp;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(map) = segp::decode(data) {
        // Anything that decodes must re-encode to the same bytes.
        assert_eq!(segp::encode(&map), data);
    }
});
