#![no_main]

use std::path::Path;

use libfuzzer_sys::fuzz_target;
use mmdinf::io::parse_manifest;

fuzz_target!(|data: &[u8]| {
    if let Ok(m) = parse_manifest(data, Path::new("/base")) {
        assert!(m.real_path.is_absolute());
        assert!(!m.model_entries.is_empty());
        for (i, e) in m.model_entries.iter().enumerate() {
            assert!(e.path.is_absolute() && !e.label.is_empty());
            assert!(m.model_entries[..i].iter().all(|p| p.label != e.label));
        }
    }
});
