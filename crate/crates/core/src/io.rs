//! Feature files, dataset manifests and line-oriented study reports.
//!
//! FMAT layout (all integers and floats little-endian):
//!
//! ```text
//! offset 0   b"FMAT"
//! offset 4   version byte 0x01
//! offset 5   u32 n (rows)
//! offset 9   u32 d (columns)
//! offset 13  n * d IEEE-754 f32 values, row-major
//! ```
//!
//! CSV is one sample per line, comma-separated decimal fields, no header.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Serialize, Serializer};

use crate::error::{Error, ParseError, Result};
use crate::mmd::FeatureMatrix;
use crate::simulate::{StudySummary, TrialReport};

pub const FMAT_MAGIC: &[u8; 4] = b"FMAT";
pub const FMAT_VERSION: u8 = 0x01;
pub const FMAT_HEADER_LEN: usize = 13;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureFormat {
    Csv,
    Fmat,
}

impl std::str::FromStr for FeatureFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(FeatureFormat::Csv),
            "fmat" => Ok(FeatureFormat::Fmat),
            other => Err(Error::input(format!("unknown feature format {other:?}"))),
        }
    }
}

fn read_u32(bytes: &[u8], offset: usize) -> u32 {
    u32::from_le_bytes(bytes[offset..offset + 4].try_into().unwrap())
}

/// Decodes an FMAT buffer.
pub fn parse_fmat(bytes: &[u8]) -> Result<FeatureMatrix> {
    let need = |offset: usize, expected: usize| -> Result<()> {
        let found = bytes.len().saturating_sub(offset);
        if found < expected {
            return Err(ParseError::Truncated {
                offset,
                expected,
                found,
            }
            .into());
        }
        Ok(())
    };
    need(0, 4)?;
    if &bytes[..4] != FMAT_MAGIC {
        return Err(ParseError::BadMagic.into());
    }
    need(4, 1)?;
    if bytes[4] != FMAT_VERSION {
        return Err(ParseError::UnsupportedVersion { found: bytes[4] }.into());
    }
    need(5, 8)?;
    let n = read_u32(bytes, 5) as u64;
    let d = read_u32(bytes, 9) as u64;
    if n < 2 || d < 1 {
        return Err(ParseError::BadShape { offset: 5, n, d }.into());
    }
    let payload = n as u128 * d as u128 * 4;
    let available = (bytes.len() - FMAT_HEADER_LEN) as u128;
    if available < payload {
        return Err(ParseError::Truncated {
            offset: FMAT_HEADER_LEN,
            expected: usize::try_from(payload).unwrap_or(usize::MAX),
            found: available as usize,
        }
        .into());
    }
    if available > payload {
        return Err(ParseError::TrailingBytes {
            offset: FMAT_HEADER_LEN + payload as usize,
            extra: (available - payload) as usize,
        }
        .into());
    }
    let (n, d) = (n as usize, d as usize);
    let mut data = Vec::with_capacity(n * d);
    for (idx, chunk) in bytes[FMAT_HEADER_LEN..].chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes(chunk.try_into().unwrap());
        if !v.is_finite() {
            return Err(Error::NonFinite {
                position: format!(
                    "byte {} (row {}, column {})",
                    FMAT_HEADER_LEN + 4 * idx,
                    idx / d,
                    idx % d
                ),
            });
        }
        data.push(v as f64);
    }
    FeatureMatrix::new(n, d, data)
}

/// Encodes as FMAT. Values are stored as f32; a value outside the f32 range
/// is an error.
pub fn encode_fmat(matrix: &FeatureMatrix) -> Result<Vec<u8>> {
    let (n, d) = (matrix.rows(), matrix.dim());
    let n32 = u32::try_from(n).map_err(|_| Error::input("row count exceeds u32"))?;
    let d32 = u32::try_from(d).map_err(|_| Error::input("column count exceeds u32"))?;
    let mut out = Vec::with_capacity(FMAT_HEADER_LEN + 4 * n * d);
    out.extend_from_slice(FMAT_MAGIC);
    out.push(FMAT_VERSION);
    out.extend_from_slice(&n32.to_le_bytes());
    out.extend_from_slice(&d32.to_le_bytes());
    for (idx, &v) in matrix.as_slice().iter().enumerate() {
        let f = v as f32;
        if !f.is_finite() {
            return Err(Error::NonFinite {
                position: format!("row {}, column {} (outside f32 range)", idx / d, idx % d),
            });
        }
        out.extend_from_slice(&f.to_le_bytes());
    }
    Ok(out)
}

/// Decodes CSV text. Blank lines are skipped; line numbers in errors are 1-based.
pub fn parse_csv(bytes: &[u8]) -> Result<FeatureMatrix> {
    let text = std::str::from_utf8(bytes).map_err(|e| ParseError::Utf8 {
        offset: e.valid_up_to(),
    })?;
    let mut data = Vec::new();
    let mut width: Option<usize> = None;
    let mut rows = 0usize;
    for (idx, raw) in text.split('\n').enumerate() {
        let line_no = idx + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.trim().is_empty() {
            continue;
        }
        let mut count = 0usize;
        for (field, cell) in line.split(',').enumerate() {
            let cell = cell.trim();
            let v: f64 = cell.parse().map_err(|_| ParseError::BadNumber {
                line: line_no,
                field: field + 1,
                text: cell.chars().take(32).collect(),
            })?;
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    position: format!("line {line_no}, field {}", field + 1),
                });
            }
            data.push(v);
            count += 1;
        }
        match width {
            None => width = Some(count),
            Some(w) if w != count => {
                return Err(ParseError::RaggedRow {
                    line: line_no,
                    expected: w,
                    found: count,
                }
                .into())
            }
            _ => {}
        }
        rows += 1;
    }
    FeatureMatrix::new(rows, width.unwrap_or(0), data)
}

/// Encodes as CSV with the shortest decimal rendering that round-trips.
pub fn encode_csv(matrix: &FeatureMatrix) -> String {
    let mut out = String::new();
    for i in 0..matrix.rows() {
        for (j, v) in matrix.row(i).iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            out.push_str(&format!("{v:?}"));
        }
        out.push('\n');
    }
    out
}

pub fn decode_features(bytes: &[u8], format: FeatureFormat) -> Result<FeatureMatrix> {
    match format {
        FeatureFormat::Csv => parse_csv(bytes),
        FeatureFormat::Fmat => parse_fmat(bytes),
    }
}

pub fn load_features(path: &Path, format: FeatureFormat) -> Result<FeatureMatrix> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_features(&bytes, format).map_err(|e| Error::InFile {
        path: path.to_path_buf(),
        source: Box::new(e),
    })
}

pub fn write_features(path: &Path, matrix: &FeatureMatrix, format: FeatureFormat) -> Result<()> {
    let bytes = match format {
        FeatureFormat::Csv => encode_csv(matrix).into_bytes(),
        FeatureFormat::Fmat => encode_fmat(matrix)?,
    };
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelEntry {
    pub label: String,
    pub path: PathBuf,
}

/// Real set plus labelled candidate files.
///
/// Text form, one `key = value` per line, `#` starts a comment:
///
/// ```text
/// format = fmat
/// real = features/real.fmat
/// model.DFM = features/dfm.fmat
/// model.DCGAN = features/dcgan.fmat
/// ```
///
/// `format` defaults to `csv`. Relative paths are resolved against the
/// manifest's directory. Models keep their file order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetManifest {
    pub real_path: PathBuf,
    pub model_entries: Vec<ModelEntry>,
    pub format: FeatureFormat,
}

pub fn parse_manifest(bytes: &[u8], base_dir: &Path) -> Result<DatasetManifest> {
    let text = std::str::from_utf8(bytes).map_err(|e| ParseError::Utf8 {
        offset: e.valid_up_to(),
    })?;
    let syntax = |line: usize, message: String| Error::from(ParseError::Syntax { line, message });
    let mut real = None;
    let mut format = None;
    let mut models: Vec<ModelEntry> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw.find('#') {
            Some(p) => &raw[..p],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| syntax(line_no, "expected key = value".into()))?;
        let (key, value) = (key.trim(), value.trim());
        if value.is_empty() {
            return Err(syntax(line_no, format!("empty value for {key:?}")));
        }
        let resolve = |v: &str| {
            let p = Path::new(v);
            if p.is_absolute() {
                p.to_path_buf()
            } else {
                base_dir.join(p)
            }
        };
        if key == "format" {
            if format.is_some() {
                return Err(syntax(line_no, "duplicate format".into()));
            }
            format = Some(
                value
                    .parse::<FeatureFormat>()
                    .map_err(|_| syntax(line_no, format!("unknown format {value:?}")))?,
            );
        } else if key == "real" {
            if real.is_some() {
                return Err(syntax(line_no, "duplicate real entry".into()));
            }
            real = Some(resolve(value));
        } else if let Some(label) = key.strip_prefix("model.") {
            let label = label.trim();
            if label.is_empty() {
                return Err(syntax(line_no, "empty model label".into()));
            }
            if models.iter().any(|m| m.label == label) {
                return Err(syntax(line_no, format!("duplicate model label {label:?}")));
            }
            models.push(ModelEntry {
                label: label.to_string(),
                path: resolve(value),
            });
        } else {
            return Err(syntax(line_no, format!("unknown key {key:?}")));
        }
    }
    let real_path = real.ok_or_else(|| syntax(0, "manifest has no real entry".into()))?;
    if models.is_empty() {
        return Err(syntax(0, "manifest lists no models".into()));
    }
    Ok(DatasetManifest {
        real_path,
        model_entries: models,
        format: format.unwrap_or(FeatureFormat::Csv),
    })
}

pub fn load_manifest(path: &Path) -> Result<DatasetManifest> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or_else(|| Path::new(""));
    parse_manifest(&bytes, base)
}

/// Infinite values become the strings `"inf"` / `"-inf"`.
pub(crate) fn extended<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else if v.is_nan() {
        s.serialize_none()
    } else if *v > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_str("-inf")
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ReportOptions {
    /// Adds `elapsed_ms` to trial records. Off by default so repeated runs
    /// produce identical files.
    pub timing: bool,
}

#[derive(Serialize)]
struct TrialRecord<'a> {
    record: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    delta: Option<f64>,
    trial: usize,
    seed: u64,
    labels: &'a [String],
    z: &'a [f64],
    gamma: f64,
    #[serde(serialize_with = "extended")]
    sigma_log_det: f64,
    selected: &'a str,
    #[serde(serialize_with = "extended")]
    v_lower: f64,
    #[serde(serialize_with = "extended")]
    v_upper: f64,
    p_value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    elapsed_ms: Option<f64>,
}

#[derive(Serialize)]
struct SummaryRecord<'a> {
    record: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    delta: Option<f64>,
    trials: usize,
    alpha: f64,
    ks_distance: Option<f64>,
    rejection_rate: Option<f64>,
    histogram_bins: usize,
    histogram: &'a [u64],
}

/// Streams JSON-lines records to a file.
pub struct ReportWriter {
    path: PathBuf,
    out: BufWriter<File>,
    options: ReportOptions,
}

impl ReportWriter {
    pub fn create(path: &Path, options: ReportOptions) -> Result<Self> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        Ok(ReportWriter {
            path: path.to_path_buf(),
            out: BufWriter::new(file),
            options,
        })
    }

    fn line<T: Serialize>(&mut self, record: &T) -> Result<()> {
        let text = serde_json::to_string(record).expect("report records serialize");
        writeln!(self.out, "{text}").map_err(|e| Error::io(&self.path, e))
    }

    pub fn trial(&mut self, report: &TrialReport, delta: Option<f64>) -> Result<()> {
        self.line(&TrialRecord {
            record: "trial",
            delta,
            trial: report.trial,
            seed: report.seed,
            labels: &report.labels,
            z: &report.z,
            gamma: report.gamma,
            sigma_log_det: report.sigma_log_det,
            selected: &report.selected_label,
            v_lower: report.lower,
            v_upper: report.upper,
            p_value: report.p_value,
            elapsed_ms: self.options.timing.then_some(report.elapsed.as_secs_f64() * 1e3),
        })
    }

    pub fn summary(&mut self, summary: &StudySummary, delta: Option<f64>) -> Result<()> {
        self.line(&SummaryRecord {
            record: "summary",
            delta,
            trials: summary.trials,
            alpha: summary.alpha,
            ks_distance: summary.ks_distance,
            rejection_rate: summary.rejection_rate,
            histogram_bins: summary.histogram.len(),
            histogram: &summary.histogram,
        })
    }

    /// Writes an arbitrary serializable record on its own line.
    pub fn record<T: Serialize>(&mut self, record: &T) -> Result<()> {
        self.line(record)
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush().map_err(|e| Error::io(&self.path, e))
    }
}

/// One record per trial followed by a summary record.
pub fn write_report(
    path: &Path,
    reports: &[TrialReport],
    summary: &StudySummary,
    options: ReportOptions,
) -> Result<()> {
    let mut w = ReportWriter::create(path, options)?;
    for r in reports {
        w.trial(r, None)?;
    }
    w.summary(summary, None)?;
    w.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fmat(n: u32, d: u32, vals: &[f32]) -> Vec<u8> {
        let mut b = b"FMAT\x01".to_vec();
        b.extend_from_slice(&n.to_le_bytes());
        b.extend_from_slice(&d.to_le_bytes());
        for v in vals {
            b.extend_from_slice(&v.to_le_bytes());
        }
        b
    }

    #[test]
    fn minimal_fmat() {
        let bytes = fmat(2, 1, &[0.0, 1.0]);
        assert_eq!(bytes.len(), 21);
        let m = parse_fmat(&bytes).unwrap();
        assert_eq!((m.rows(), m.dim()), (2, 1));
        assert_eq!(m.as_slice(), &[0.0, 1.0]);
        assert_eq!(encode_fmat(&m).unwrap(), bytes);
    }

    #[test]
    fn fmat_errors_are_distinct() {
        assert!(matches!(parse_fmat(b"FMA"), Err(Error::Parse(ParseError::Truncated { .. }))));
        assert!(matches!(parse_fmat(b"XMAT\x01"), Err(Error::Parse(ParseError::BadMagic))));
        assert!(matches!(
            parse_fmat(b"FMAT\x02"),
            Err(Error::Parse(ParseError::UnsupportedVersion { found: 2 }))
        ));
        let mut short = fmat(2, 2, &[0.0, 1.0, 2.0]);
        assert!(matches!(
            parse_fmat(&short),
            Err(Error::Parse(ParseError::Truncated { offset: 13, expected: 16, found: 12 }))
        ));
        short.extend_from_slice(&[0; 5]);
        assert!(matches!(
            parse_fmat(&short),
            Err(Error::Parse(ParseError::TrailingBytes { offset: 29, extra: 1 }))
        ));
        assert!(matches!(
            parse_fmat(&fmat(1, 1, &[0.0])),
            Err(Error::Parse(ParseError::BadShape { .. }))
        ));
        assert!(matches!(
            parse_fmat(&fmat(2, 1, &[0.0, f32::NAN])),
            Err(Error::NonFinite { .. })
        ));
        // Huge declared shape with a tiny payload must fail without allocating.
        assert!(matches!(
            parse_fmat(&fmat(u32::MAX, u32::MAX, &[])),
            Err(Error::Parse(ParseError::Truncated { .. }))
        ));
    }

    #[test]
    fn csv_basic_and_errors() {
        let m = parse_csv(b"1.5,2.5\n3.5,4.5\n").unwrap();
        assert_eq!(m.as_slice(), &[1.5, 2.5, 3.5, 4.5]);
        let m = parse_csv(b"1, 2\r\n\n3 ,4").unwrap();
        assert_eq!(m.as_slice(), &[1.0, 2.0, 3.0, 4.0]);
        assert!(matches!(
            parse_csv(b"1,2\n3\n"),
            Err(Error::Parse(ParseError::RaggedRow { line: 2, expected: 2, found: 1 }))
        ));
        assert!(matches!(
            parse_csv(b"1,x\n3,4\n"),
            Err(Error::Parse(ParseError::BadNumber { line: 1, field: 2, .. }))
        ));
        assert!(matches!(parse_csv(b"1,NaN\n3,4\n"), Err(Error::NonFinite { .. })));
        assert!(matches!(parse_csv(b"1,inf\n3,4\n"), Err(Error::NonFinite { .. })));
        assert!(matches!(parse_csv(b"1e999\n3\n"), Err(Error::NonFinite { .. })));
        assert!(matches!(parse_csv(b"1,2\n"), Err(Error::Input(_))));
        assert!(matches!(parse_csv(b"\xff\n"), Err(Error::Parse(ParseError::Utf8 { .. }))));
    }

    #[test]
    fn csv_round_trip_full_precision() {
        let m = FeatureMatrix::new(2, 2, vec![0.1, 1e-300, -3.25e12, std::f64::consts::PI]).unwrap();
        assert_eq!(parse_csv(encode_csv(&m).as_bytes()).unwrap(), m);
    }

    #[test]
    fn manifest_parsing() {
        let text = b"# demo\nformat = fmat\nreal = r.fmat\nmodel.A = a.fmat\nmodel.B=/abs/b.fmat # trailing\n";
        let m = parse_manifest(text, Path::new("/data")).unwrap();
        assert_eq!(m.format, FeatureFormat::Fmat);
        assert_eq!(m.real_path, PathBuf::from("/data/r.fmat"));
        assert_eq!(m.model_entries[0].label, "A");
        assert_eq!(m.model_entries[1].path, PathBuf::from("/abs/b.fmat"));

        let dup = b"real = r\nmodel.A = a\nmodel.A = b\n";
        assert!(matches!(
            parse_manifest(dup, Path::new("")),
            Err(Error::Parse(ParseError::Syntax { line: 3, .. }))
        ));
        assert!(parse_manifest(b"model.A = a\n", Path::new("")).is_err());
        assert!(parse_manifest(b"real = r\n", Path::new("")).is_err());
        assert!(parse_manifest(b"real = r\nmodel.A = a\nbogus = 1\n", Path::new("")).is_err());
        assert!(parse_manifest(b"real r\n", Path::new("")).is_err());
        let csv_default = parse_manifest(b"real = r\nmodel.A = a\n", Path::new("")).unwrap();
        assert_eq!(csv_default.format, FeatureFormat::Csv);
    }
}
