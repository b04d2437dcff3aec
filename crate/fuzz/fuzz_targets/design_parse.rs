#![no_main]

use libfuzzer_sys::fuzz_target;
use sal::subsample::{export_design, parse_design};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok((meta, acq)) = parse_design(text) {
        let again = export_design(&acq, meta.n_rx).unwrap();
        assert_eq!(parse_design(&again).unwrap().1, acq);
    }
});
