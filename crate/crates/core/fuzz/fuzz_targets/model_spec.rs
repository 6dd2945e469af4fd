#![no_main]

use libfuzzer_sys::fuzz_target;
use mmdinf::simulate::{parse_model_spec, SyntheticDistribution};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(d) = text.parse::<SyntheticDistribution>() {
        let again: SyntheticDistribution = d.to_string().parse().unwrap();
        assert_eq!(again.to_string(), d.to_string());
    }
    let _ = parse_model_spec(text, 4);
});
