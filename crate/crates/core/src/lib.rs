//! Compare candidate generative models against a real sample with an
//! incomplete U-statistic estimate of squared MMD, select the closest one and
//! test it with a p-value that accounts for the selection.
//!
//! The usual entry point is [`pipeline::analyze`]:
//!
//! ```
//! use mmdinf::mmd::FeatureMatrix;
//! use mmdinf::pipeline::{analyze, PipelineConfig};
//!
//! let wave = |phase: f64| {
//!     let data = (0..200).map(|i| ((i as f64) * 0.37 + phase).sin()).collect();
//!     FeatureMatrix::new(100, 2, data).unwrap()
//! };
//! let (real, a, b) = (wave(0.0), wave(0.1), wave(1.5));
//! let result = analyze(&[&a, &b], &real, &PipelineConfig::default()).unwrap();
//! assert!((0.0..=1.0).contains(&result.selection.p_value));
//! ```

// Negated comparisons are used so that NaN fails validity checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod io;
pub mod kernel;
pub mod linalg;
pub mod mmd;
pub mod normal;
pub mod pipeline;
pub mod psi;
pub mod reduce;
pub mod rng;
pub mod simulate;
pub mod stats;

pub use error::{Error, ParseError, Result};
