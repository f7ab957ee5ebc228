#![no_main]

use imbalseg::io::png_io::decode_raster;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = decode_raster(data);
});
