#![no_main]

use libfuzzer_sys::fuzz_target;
use sal::radar::{decode_dataset, encode_dataset};

fuzz_target!(|data: &[u8]| {
    if let Ok(ds) = decode_dataset(data) {
        // anything accepted must re-encode to a decodable file
        let again = encode_dataset(&ds);
        assert_eq!(decode_dataset(&again).unwrap().train().len(), ds.train().len());
    }
});
