//! Replays the checked-in fuzz corpus through the same invariants as the
//! fuzz targets.

use std::path::{Path, PathBuf};

use mmdinf::io::{encode_csv, encode_fmat, parse_csv, parse_fmat, parse_manifest};
use mmdinf::simulate::{parse_model_spec, SyntheticDistribution};

fn seeds(target: &str) -> Vec<(PathBuf, Vec<u8>)> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fuzz/corpus").join(target);
    let mut out: Vec<_> = std::fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| e.unwrap().path())
        .map(|p| {
            let bytes = std::fs::read(&p).unwrap();
            (p, bytes)
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

#[test]
fn fmat_seeds() {
    let mut accepted = 0;
    for (path, bytes) in seeds("fmat") {
        if let Ok(m) = parse_fmat(&bytes) {
            assert_eq!(encode_fmat(&m).unwrap(), bytes, "{}", path.display());
            accepted += 1;
        }
    }
    assert!(accepted >= 2);
}

#[test]
fn csv_seeds() {
    for (path, bytes) in seeds("csv") {
        if let Ok(m) = parse_csv(&bytes) {
            assert_eq!(parse_csv(encode_csv(&m).as_bytes()).unwrap(), m, "{}", path.display());
        }
    }
}

#[test]
fn manifest_seeds() {
    for (_, bytes) in seeds("manifest") {
        if let Ok(m) = parse_manifest(&bytes, Path::new("/base")) {
            assert!(m.real_path.is_absolute());
            assert!(m.model_entries.iter().all(|e| e.path.is_absolute()));
        }
    }
}

#[test]
fn model_spec_seeds() {
    for (_, bytes) in seeds("model_spec") {
        let Ok(text) = std::str::from_utf8(&bytes) else { continue };
        if let Ok(d) = text.parse::<SyntheticDistribution>() {
            let again: SyntheticDistribution = d.to_string().parse().unwrap();
            assert_eq!(again.to_string(), d.to_string());
        }
        let _ = parse_model_spec(text, 4);
    }
}
