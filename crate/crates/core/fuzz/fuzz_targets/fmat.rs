#![no_main]

use libfuzzer_sys::fuzz_target;
use mmdinf::io::{encode_fmat, parse_fmat};

fuzz_target!(|data: &[u8]| {
    if let Ok(m) = parse_fmat(data) {
        // Decoded values came from f32, so re-encoding reproduces the input.
        assert_eq!(encode_fmat(&m).unwrap(), data);
    }
});
