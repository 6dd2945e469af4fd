#![no_main]

use libfuzzer_sys::fuzz_target;
use mmdinf::io::{encode_csv, parse_csv};

fuzz_target!(|data: &[u8]| {
    if let Ok(m) = parse_csv(data) {
        assert_eq!(parse_csv(encode_csv(&m).as_bytes()).unwrap(), m);
    }
});
