#![no_main]

use libfuzzer_sys::fuzz_target;
use sal::beamform::{decode_map, encode_map};

fuzz_target!(|data: &[u8]| {
    if let Ok(map) = decode_map(data) {
        assert_eq!(encode_map(&map), data);
    }
});
