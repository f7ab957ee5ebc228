#![no_main]

use imbalseg::io::png_io::{decode_label_map, encode_label_map};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Some((&c, bytes)) = data.split_first() else { return };
    if let Ok(labels) = decode_label_map(bytes, usize::from(c % 12) + 1) {
        let again = encode_label_map(&labels).unwrap();
        assert_eq!(decode_label_map(&again, usize::from(c % 12) + 1).unwrap(), labels);
    }
});
