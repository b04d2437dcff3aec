#![no_main]

use libfuzzer_sys::fuzz_target;
use sal::beamform::decode_pgm;

fuzz_target!(|data: &[u8]| {
    if let Ok((w, h, px)) = decode_pgm(data) {
        assert_eq!(px.len(), w * h);
    }
});
