#![no_main]

use libfuzzer_sys::fuzz_target;
use sal::taskmodel::{decode_checkpoint, encode_checkpoint};

fuzz_target!(|data: &[u8]| {
    if let Ok(m) = decode_checkpoint(data) {
        assert_eq!(encode_checkpoint(&m), data);
    }
});
