//! Synthetic studies: null calibration, power and score ranking.
//!
//! The real distribution is the standard Gaussian in `dim` dimensions. Trial
//! `t` of a study with master seed `seed` uses `derive_seed(seed, t)` as its
//! own seed; within the trial, the real set, every model and the pipeline
//! (bandwidth subsample, design) draw from separate ChaCha streams of that
//! seed, so no two sample sets share random numbers.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, ParseError, Result};
use crate::mmd::{mmd_incomplete, DesignMode, FeatureMatrix};
use crate::normal;
use crate::pipeline::{analyze, score_models, PipelineConfig};
use crate::psi::Sidedness;
use crate::rng::{derive_seed, role, stream_rng};
use crate::stats::{histogram_unit, ks_uniform};

/// Default significance level.
pub const DEFAULT_ALPHA: f64 = 0.05;
/// Number of p-value histogram bins in study summaries.
pub const HISTOGRAM_BINS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SyntheticDistribution {
    /// `N(delta * 1, I)`: every coordinate shifted by `delta`.
    GaussianMeanShift { delta: f64 },
    /// `N(0, factor^2 I)`.
    GaussianScale { factor: f64 },
    /// The first coordinate's law is cut into `total` equal-probability
    /// slabs and only the lowest `modes_kept` are sampled.
    GaussianMixtureDrop { modes_kept: u32, total: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticModelSpec {
    pub distribution: SyntheticDistribution,
    pub dim: usize,
    pub label: String,
}

impl SyntheticModelSpec {
    pub fn new(distribution: SyntheticDistribution, dim: usize, label: impl Into<String>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::input("synthetic model dimension must be >= 1"));
        }
        match distribution {
            SyntheticDistribution::GaussianMeanShift { delta } if !delta.is_finite() => {
                return Err(Error::input("mean shift must be finite"));
            }
            SyntheticDistribution::GaussianScale { factor } if !(factor.is_finite() && factor > 0.0) => {
                return Err(Error::input("scale factor must be positive"));
            }
            SyntheticDistribution::GaussianMixtureDrop { modes_kept, total }
                if modes_kept == 0 || modes_kept > total =>
            {
                return Err(Error::input("mode drop needs 1 <= modes_kept <= total"));
            }
            _ => {}
        }
        Ok(SyntheticModelSpec {
            distribution,
            dim,
            label: label.into(),
        })
    }

    pub fn oracle(dim: usize, label: impl Into<String>) -> Self {
        SyntheticModelSpec {
            distribution: SyntheticDistribution::GaussianMeanShift { delta: 0.0 },
            dim,
            label: label.into(),
        }
    }

    /// Draws `n` samples.
    pub fn sample(&self, n: usize, rng: &mut ChaCha8Rng) -> Result<FeatureMatrix> {
        let d = self.dim;
        let mut data = Vec::with_capacity(n * d);
        for _ in 0..n {
            match self.distribution {
                SyntheticDistribution::GaussianMeanShift { delta } => {
                    data.extend((0..d).map(|_| rng.sample::<f64, _>(StandardNormal) + delta));
                }
                SyntheticDistribution::GaussianScale { factor } => {
                    data.extend((0..d).map(|_| rng.sample::<f64, _>(StandardNormal) * factor));
                }
                SyntheticDistribution::GaussianMixtureDrop { modes_kept, total } => {
                    let first = loop {
                        let v: f64 = rng.sample(StandardNormal);
                        let slab = ((normal::cdf(v) * total as f64) as u32).min(total - 1);
                        if slab < modes_kept {
                            break v;
                        }
                    };
                    data.push(first);
                    data.extend((1..d).map(|_| rng.sample::<f64, _>(StandardNormal)));
                }
            }
        }
        FeatureMatrix::new(n, d, data)
    }
}

/// Compact text form used on the command line:
/// `shift:<delta>`, `scale:<factor>`, `drop:<kept>/<total>`, optionally
/// followed by `@<label>`.
impl fmt::Display for SyntheticDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            SyntheticDistribution::GaussianMeanShift { delta } => write!(f, "shift:{delta}"),
            SyntheticDistribution::GaussianScale { factor } => write!(f, "scale:{factor}"),
            SyntheticDistribution::GaussianMixtureDrop { modes_kept, total } => {
                write!(f, "drop:{modes_kept}/{total}")
            }
        }
    }
}

impl FromStr for SyntheticDistribution {
    type Err = ParseError;

    fn from_str(s: &str) -> std::result::Result<Self, ParseError> {
        let syntax = |message: &str| ParseError::Syntax {
            line: 1,
            message: format!("{message} in model spec {s:?}"),
        };
        let number = |text: &str| -> std::result::Result<f64, ParseError> {
            text.trim().parse::<f64>().map_err(|_| ParseError::BadNumber {
                line: 1,
                field: 2,
                text: text.to_string(),
            })
        };
        let (kind, arg) = s.split_once(':').ok_or_else(|| syntax("missing ':'"))?;
        match kind.trim() {
            "shift" => Ok(SyntheticDistribution::GaussianMeanShift { delta: number(arg)? }),
            "scale" => Ok(SyntheticDistribution::GaussianScale { factor: number(arg)? }),
            "drop" => {
                let (kept, total) = arg.split_once('/').ok_or_else(|| syntax("expected kept/total"))?;
                let count = |t: &str| t.trim().parse::<u32>().map_err(|_| syntax("bad mode count"));
                Ok(SyntheticDistribution::GaussianMixtureDrop {
                    modes_kept: count(kept)?,
                    total: count(total)?,
                })
            }
            _ => Err(syntax("unknown distribution kind")),
        }
    }
}

/// Parses `kind:arg[@label]` into a spec of dimension `dim`.
pub fn parse_model_spec(text: &str, dim: usize) -> Result<SyntheticModelSpec> {
    let (dist, label) = match text.split_once('@') {
        Some((d, l)) => (d, l.to_string()),
        None => (text, text.to_string()),
    };
    let distribution: SyntheticDistribution = dist.parse()?;
    SyntheticModelSpec::new(distribution, dim, label)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyParams {
    pub n: usize,
    pub r: usize,
    pub dim: usize,
    pub trials: usize,
    pub seed: u64,
    pub alpha: f64,
    pub design: DesignMode,
    pub sided: Sidedness,
}

impl Default for StudyParams {
    fn default() -> Self {
        StudyParams {
            n: 500,
            r: 5,
            dim: 8,
            trials: 1000,
            seed: 1,
            alpha: DEFAULT_ALPHA,
            design: DesignMode::RandomWithoutReplacement,
            sided: Sidedness::OneSided,
        }
    }
}

impl StudyParams {
    fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::input("trials must be >= 1"));
        }
        if self.n < 2 || self.dim == 0 || self.r == 0 {
            return Err(Error::input("study needs n >= 2, dim >= 1 and r >= 1"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::input(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        Ok(())
    }

    fn pipeline(&self, trial_seed: u64) -> PipelineConfig {
        PipelineConfig {
            r: self.r,
            design: self.design,
            seed: trial_seed,
            sided: self.sided,
            ..PipelineConfig::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub trial: usize,
    pub seed: u64,
    pub labels: Vec<String>,
    pub selected: usize,
    pub selected_label: String,
    pub z: Vec<f64>,
    pub gamma: f64,
    pub sigma_log_det: f64,
    pub lower: f64,
    pub upper: f64,
    pub p_value: f64,
    pub elapsed: Duration,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudySummary {
    pub trials: usize,
    pub alpha: f64,
    pub ks_distance: Option<f64>,
    pub rejection_rate: Option<f64>,
    pub histogram: Vec<u64>,
}

impl StudySummary {
    pub fn from_p_values(p: &[f64], alpha: f64) -> Self {
        let (ks, rate) = if p.is_empty() {
            (None, None)
        } else {
            let rejected = p.iter().filter(|&&v| v < alpha).count();
            (Some(ks_uniform(p)), Some(rejected as f64 / p.len() as f64))
        };
        StudySummary {
            trials: p.len(),
            alpha,
            ks_distance: ks,
            rejection_rate: rate,
            histogram: histogram_unit(p, HISTOGRAM_BINS),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Study {
    pub reports: Vec<TrialReport>,
    pub summary: StudySummary,
}

/// Samples the real set (role `REAL`) and one set per model (roles
/// `MODEL_BASE + s`) for a trial.
fn draw_trial_data(
    specs: &[SyntheticModelSpec],
    n: usize,
    dim: usize,
    trial_seed: u64,
) -> Result<(FeatureMatrix, Vec<FeatureMatrix>)> {
    let real = SyntheticModelSpec::oracle(dim, "real").sample(n, &mut stream_rng(trial_seed, role::REAL))?;
    let models = specs
        .iter()
        .enumerate()
        .map(|(s, spec)| spec.sample(n, &mut stream_rng(trial_seed, role::MODEL_BASE + s as u64)))
        .collect::<Result<Vec<_>>>()?;
    Ok((real, models))
}

fn check_specs(specs: &[SyntheticModelSpec], dim: usize) -> Result<()> {
    if let Some(s) = specs.iter().find(|s| s.dim != dim) {
        return Err(Error::input(format!(
            "model {} has dimension {}, study uses {dim}",
            s.label, s.dim
        )));
    }
    Ok(())
}

/// Runs every trial of a selection study in parallel; results come back in
/// trial order and the first failing trial (by index) is reported.
pub fn run_selection_trials(specs: &[SyntheticModelSpec], params: &StudyParams) -> Result<Vec<TrialReport>> {
    params.validate()?;
    if specs.len() < 2 {
        return Err(Error::input("selection requires at least two models"));
    }
    check_specs(specs, params.dim)?;
    let labels: Vec<String> = specs.iter().map(|s| s.label.clone()).collect();
    let results: Vec<Result<TrialReport>> = (0..params.trials)
        .into_par_iter()
        .map(|trial| {
            let seed = derive_seed(params.seed, trial as u64);
            let started = Instant::now();
            let wrap = |e: Error| Error::Trial {
                trial,
                seed,
                source: Box::new(e),
            };
            let (real, models) = draw_trial_data(specs, params.n, params.dim, seed).map_err(wrap)?;
            let refs: Vec<&FeatureMatrix> = models.iter().collect();
            let a = analyze(&refs, &real, &params.pipeline(seed)).map_err(wrap)?;
            let k = a.selection.selected;
            Ok(TrialReport {
                trial,
                seed,
                labels: labels.clone(),
                selected: k,
                selected_label: labels[k].clone(),
                z: a.selection.z.clone(),
                gamma: a.scored.kernel.gamma(),
                sigma_log_det: a.scores.sigma.log_det_spd().unwrap_or(f64::NAN),
                lower: a.selection.interval.lower,
                upper: a.selection.interval.upper,
                p_value: a.selection.p_value,
                elapsed: started.elapsed(),
            })
        })
        .collect();
    results.into_iter().collect()
}

/// `s_models` oracle generators sampling the real distribution itself.
pub fn run_null_calibration(s_models: usize, params: &StudyParams) -> Result<Study> {
    let specs: Vec<SyntheticModelSpec> = (0..s_models)
        .map(|s| SyntheticModelSpec::oracle(params.dim, format!("oracle{s}")))
        .collect();
    let reports = run_selection_trials(&specs, params)?;
    let p: Vec<f64> = reports.iter().map(|r| r.p_value).collect();
    Ok(Study {
        summary: StudySummary::from_p_values(&p, params.alpha),
        reports,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerPoint {
    pub delta: f64,
    pub rejections: usize,
    pub trials: usize,
    pub rejection_rate: f64,
}

impl PowerPoint {
    /// Binomial standard error of the rejection rate.
    pub fn standard_error(&self) -> f64 {
        let p = self.rejection_rate;
        (p * (1.0 - p) / self.trials as f64).sqrt()
    }
}

/// For each delta every candidate is shifted by delta; trials reuse the same
/// seeds across deltas.
pub fn run_power_study(shift_grid: &[f64], s_models: usize, params: &StudyParams) -> Result<Vec<(PowerPoint, Study)>> {
    if shift_grid.is_empty() {
        return Err(Error::input("power study needs at least one delta"));
    }
    shift_grid
        .iter()
        .map(|&delta| {
            if !(delta >= 0.0 && delta.is_finite()) {
                return Err(Error::input(format!("delta must be >= 0, got {delta}")));
            }
            let specs = (0..s_models)
                .map(|s| {
                    SyntheticModelSpec::new(
                        SyntheticDistribution::GaussianMeanShift { delta },
                        params.dim,
                        format!("shift{s}"),
                    )
                })
                .collect::<Result<Vec<_>>>()?;
            let reports = run_selection_trials(&specs, params)?;
            let p: Vec<f64> = reports.iter().map(|r| r.p_value).collect();
            let rejections = p.iter().filter(|&&v| v < params.alpha).count();
            let point = PowerPoint {
                delta,
                rejections,
                trials: p.len(),
                rejection_rate: rejections as f64 / p.len() as f64,
            };
            Ok((
                point,
                Study {
                    summary: StudySummary::from_p_values(&p, params.alpha),
                    reports,
                },
            ))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingRow {
    pub label: String,
    pub mean: f64,
    pub std_dev: f64,
    pub trials: usize,
}

impl RankingRow {
    pub fn standard_error(&self) -> f64 {
        self.std_dev / (self.trials as f64).sqrt()
    }
}

/// Mean and standard deviation of each model's score over trials, sorted by
/// ascending mean.
pub fn run_ranking_study(specs: &[SyntheticModelSpec], params: &StudyParams) -> Result<Vec<RankingRow>> {
    params.validate()?;
    if specs.len() < 2 {
        return Err(Error::input("ranking needs at least two models"));
    }
    check_specs(specs, params.dim)?;
    let per_trial: Vec<Result<Vec<f64>>> = (0..params.trials)
        .into_par_iter()
        .map(|trial| {
            let seed = derive_seed(params.seed, trial as u64);
            let wrap = |e: Error| Error::Trial {
                trial,
                seed,
                source: Box::new(e),
            };
            let (real, models) = draw_trial_data(specs, params.n, params.dim, seed).map_err(wrap)?;
            let refs: Vec<&FeatureMatrix> = models.iter().collect();
            let scored = score_models(&refs, &real, &params.pipeline(seed)).map_err(wrap)?;
            Ok(mmd_incomplete(&scored.h))
        })
        .collect();
    let scores: Vec<Vec<f64>> = per_trial.into_iter().collect::<Result<_>>()?;
    let t = scores.len() as f64;
    let mut rows: Vec<RankingRow> = specs
        .iter()
        .enumerate()
        .map(|(s, spec)| {
            let mean = scores.iter().map(|z| z[s]).sum::<f64>() / t;
            let var = if scores.len() > 1 {
                scores.iter().map(|z| (z[s] - mean).powi(2)).sum::<f64>() / (t - 1.0)
            } else {
                0.0
            };
            RankingRow {
                label: spec.label.clone(),
                mean,
                std_dev: var.sqrt(),
                trials: scores.len(),
            }
        })
        .collect();
    rows.sort_by(|a, b| a.mean.total_cmp(&b.mean));
    Ok(rows)
}
