//! Command implementations behind the `mmdinf` binary.
//!
//! Each command returns its standard output as a [`CommandOutput`] so that
//! nothing is printed when a later step fails.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::io::{load_features, load_manifest, ReportOptions, ReportWriter};
use crate::mmd::{column_standard_errors, estimate_scores, mmd_incomplete, DesignMode, FeatureMatrix};
use crate::pipeline::{analyze, score_models, PipelineConfig};
use crate::psi::Sidedness;
use crate::simulate::{
    parse_model_spec, run_null_calibration, run_power_study, run_ranking_study, StudyParams,
    DEFAULT_ALPHA,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DesignArg {
    Random,
    Linear,
    Full,
}

impl From<DesignArg> for DesignMode {
    fn from(d: DesignArg) -> Self {
        match d {
            DesignArg::Random => DesignMode::RandomWithoutReplacement,
            DesignArg::Linear => DesignMode::Linear,
            DesignArg::Full => DesignMode::Full,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SidedArg {
    One,
    Two,
}

impl From<SidedArg> for Sidedness {
    fn from(s: SidedArg) -> Self {
        match s {
            SidedArg::One => Sidedness::OneSided,
            SidedArg::Two => Sidedness::TwoSided,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "mmdinf", version, about = "Select the closest generative model by incomplete MMD and test it")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Incomplete MMD^2 score and standard error of every model.
    Score(ManifestArgs),
    /// Select the lowest-scoring model and compute its selective p-value.
    SelectTest(ManifestArgs),
    /// Null calibration with oracle generators.
    Calibrate(StudyArgs),
    /// Rejection rate when every candidate is mean-shifted.
    Power(PowerArgs),
    /// Average scores of synthetic models.
    Ranking(RankingArgs),
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Significance level.
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    pub alpha: f64,
    /// Subsample multiplier (ell = r * n).
    #[arg(long, default_value_t = 5)]
    pub r: usize,
    #[arg(long, value_enum, default_value_t = DesignArg::Random)]
    pub design: DesignArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Fixed kernel gamma instead of the median heuristic.
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long, value_enum, default_value_t = SidedArg::One)]
    pub sided: SidedArg,
    /// Report file (JSON lines).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Include per-trial wall time in report files.
    #[arg(long)]
    pub timing: bool,
}

#[derive(Debug, Clone, Args)]
pub struct ManifestArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Clone, Args)]
pub struct StudyArgs {
    /// Number of candidate models S.
    #[arg(long, default_value_t = 7)]
    pub models: usize,
    #[arg(long, default_value_t = 500)]
    pub n: usize,
    #[arg(long, default_value_t = 8)]
    pub dim: usize,
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Clone, Args)]
pub struct PowerArgs {
    /// Mean shifts to evaluate.
    #[arg(long, value_delimiter = ',', default_value = "0,0.1,0.5")]
    pub deltas: Vec<f64>,
    #[command(flatten)]
    pub study: StudyArgs,
}

#[derive(Debug, Clone, Args)]
pub struct RankingArgs {
    /// Model spec `shift:<d>`, `scale:<f>` or `drop:<kept>/<total>`, with an
    /// optional `@label`. Repeat for each model.
    #[arg(long = "model", default_values_t = ["shift:0".to_string(), "shift:0.2".to_string(), "shift:0.5".to_string()])]
    pub models: Vec<String>,
    #[arg(long, default_value_t = 500)]
    pub n: usize,
    #[arg(long, default_value_t = 8)]
    pub dim: usize,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[command(flatten)]
    pub run: RunArgs,
}

/// Validated analysis settings shared by all commands.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub alpha: f64,
    pub r: usize,
    pub design: DesignMode,
    pub seed: u64,
    pub gamma: Option<f64>,
    pub sided: Sidedness,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            alpha: DEFAULT_ALPHA,
            r: 5,
            design: DesignMode::RandomWithoutReplacement,
            seed: 0,
            gamma: None,
            sided: Sidedness::OneSided,
        }
    }
}

impl RunConfig {
    pub fn from_args(args: &RunArgs) -> Result<Self> {
        let c = RunConfig {
            alpha: args.alpha,
            r: args.r,
            design: args.design.into(),
            seed: args.seed,
            gamma: args.gamma,
            sided: args.sided.into(),
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::input(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.r < 1 {
            return Err(Error::input("r must be >= 1"));
        }
        if let Some(g) = self.gamma {
            if !(g.is_finite() && g > 0.0) {
                return Err(Error::input(format!("gamma must be positive, got {g}")));
            }
        }
        Ok(())
    }

    pub fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            r: self.r,
            design: self.design,
            seed: self.seed,
            gamma: self.gamma,
            sided: self.sided,
            ..PipelineConfig::default()
        }
    }

    fn study(&self, n: usize, dim: usize, trials: usize) -> StudyParams {
        StudyParams {
            n,
            r: self.r,
            dim,
            trials,
            seed: self.seed,
            alpha: self.alpha,
            design: self.design,
            sided: self.sided,
        }
    }
}

#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub struct CommandOutput {
    pub stdout: String,
    pub warnings: Vec<String>,
}

struct LoadedManifest {
    labels: Vec<String>,
    models: Vec<FeatureMatrix>,
    real: FeatureMatrix,
}

fn load_all(manifest: &Path) -> Result<LoadedManifest> {
    let m = load_manifest(manifest)?;
    let real = load_features(&m.real_path, m.format)?;
    let mut labels = Vec::new();
    let mut models = Vec::new();
    for entry in &m.model_entries {
        let x = load_features(&entry.path, m.format)?;
        if x.rows() != real.rows() || x.dim() != real.dim() {
            return Err(Error::input(format!(
                "{}: model {} is {}x{}, real set is {}x{}",
                entry.path.display(),
                entry.label,
                x.rows(),
                x.dim(),
                real.rows(),
                real.dim()
            )));
        }
        labels.push(entry.label.clone());
        models.push(x);
    }
    Ok(LoadedManifest {
        labels,
        models,
        real,
    })
}

fn fmt_bound(v: f64) -> String {
    if v == f64::INFINITY {
        "+inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v:.6e}")
    }
}

#[derive(Serialize)]
struct ScoreRecord<'a> {
    record: &'static str,
    labels: &'a [String],
    z: &'a [f64],
    std_err: &'a [f64],
    gamma: f64,
    pairs: usize,
}

pub fn cmd_score(manifest: &Path, config: &RunConfig, out: Option<&Path>) -> Result<CommandOutput> {
    config.validate()?;
    let data = load_all(manifest)?;
    let refs: Vec<&FeatureMatrix> = data.models.iter().collect();
    let scored = score_models(&refs, &data.real, &config.pipeline())?;
    let z = mmd_incomplete(&scored.h);
    let se = column_standard_errors(&scored.h)?;

    let mut warnings = Vec::new();
    if refs.len() >= 2 {
        if let Err(e @ Error::DegenerateCovariance { .. }) = estimate_scores(&scored.h, crate::mmd::DEFAULT_RIDGE_SCALE) {
            warnings.push(format!("warning: {e}"));
        }
    }

    let mut order: Vec<usize> = (0..z.len()).collect();
    order.sort_by(|&a, &b| z[a].total_cmp(&z[b]).then(a.cmp(&b)));
    let mut stdout = String::new();
    writeln!(
        stdout,
        "# gamma = {:e}, pairs = {}",
        scored.kernel.gamma(),
        scored.h.pairs()
    )
    .unwrap();
    writeln!(stdout, "{:<24} {:>15} {:>15}", "model", "mmd2_inc", "std_err").unwrap();
    for &s in &order {
        writeln!(stdout, "{:<24} {:>15.6e} {:>15.6e}", data.labels[s], z[s], se[s]).unwrap();
    }

    if let Some(path) = out {
        let mut w = ReportWriter::create(path, ReportOptions::default())?;
        w.record(&ScoreRecord {
            record: "score",
            labels: &data.labels,
            z: &z,
            std_err: &se,
            gamma: scored.kernel.gamma(),
            pairs: scored.h.pairs(),
        })?;
        w.finish()?;
    }
    Ok(CommandOutput { stdout, warnings })
}

#[derive(Serialize)]
struct SelectRecord<'a> {
    record: &'static str,
    seed: u64,
    labels: &'a [String],
    z: &'a [f64],
    gamma: f64,
    sigma_log_det: Option<f64>,
    selected: &'a str,
    #[serde(serialize_with = "crate::io::extended")]
    v_lower: f64,
    #[serde(serialize_with = "crate::io::extended")]
    v_upper: f64,
    p_value: f64,
    alpha: f64,
    reject: bool,
}

pub fn cmd_select_test(manifest: &Path, config: &RunConfig, out: Option<&Path>) -> Result<CommandOutput> {
    config.validate()?;
    let data = load_all(manifest)?;
    if data.models.len() < 2 {
        return Err(Error::input("selection requires at least two models"));
    }
    let refs: Vec<&FeatureMatrix> = data.models.iter().collect();
    let a = analyze(&refs, &data.real, &config.pipeline())?;
    let sel = &a.selection;
    let label = &data.labels[sel.selected];
    let reject = sel.p_value < config.alpha;

    let mut stdout = String::new();
    writeln!(stdout, "selected: {label}").unwrap();
    for (l, v) in data.labels.iter().zip(&sel.z) {
        writeln!(stdout, "  z[{l}] = {v:.6e}").unwrap();
    }
    writeln!(
        stdout,
        "interval: [{}, {}]",
        fmt_bound(sel.interval.lower),
        fmt_bound(sel.interval.upper)
    )
    .unwrap();
    writeln!(stdout, "p-value: {:.6e}", sel.p_value).unwrap();
    if reject {
        writeln!(
            stdout,
            "decision: reject at alpha = {}: {label} does not match the real distribution",
            config.alpha
        )
        .unwrap();
    } else {
        writeln!(
            stdout,
            "decision: fail to reject at alpha = {}: no evidence of difference at level {}",
            config.alpha, config.alpha
        )
        .unwrap();
    }

    if let Some(path) = out {
        let mut w = ReportWriter::create(path, ReportOptions::default())?;
        w.record(&SelectRecord {
            record: "select_test",
            seed: config.seed,
            labels: &data.labels,
            z: &sel.z,
            gamma: a.scored.kernel.gamma(),
            sigma_log_det: a.scores.sigma.log_det_spd(),
            selected: label,
            v_lower: sel.interval.lower,
            v_upper: sel.interval.upper,
            p_value: sel.p_value,
            alpha: config.alpha,
            reject,
        })?;
        w.finish()?;
    }
    Ok(CommandOutput {
        stdout,
        warnings: Vec::new(),
    })
}

fn options(args: &RunArgs) -> ReportOptions {
    ReportOptions {
        timing: args.timing,
    }
}

pub fn cmd_calibrate(args: &StudyArgs) -> Result<CommandOutput> {
    let config = RunConfig::from_args(&args.run)?;
    if config.gamma.is_some() {
        return Err(Error::input("--gamma is not used by simulation studies"));
    }
    let params = config.study(args.n, args.dim, args.trials);
    let study = run_null_calibration(args.models, &params)?;
    if let Some(path) = &args.run.out {
        let mut w = ReportWriter::create(path, options(&args.run))?;
        for r in &study.reports {
            w.trial(r, None)?;
        }
        w.summary(&study.summary, None)?;
        w.finish()?;
    }
    let s = &study.summary;
    let stdout = format!(
        "calibrate: trials = {}, ks_distance = {:.5}, rejection_rate(alpha = {}) = {:.4}\nhistogram: {:?}\n",
        s.trials,
        s.ks_distance.unwrap_or(f64::NAN),
        s.alpha,
        s.rejection_rate.unwrap_or(f64::NAN),
        s.histogram
    );
    Ok(CommandOutput {
        stdout,
        warnings: Vec::new(),
    })
}

pub fn cmd_power(args: &PowerArgs) -> Result<CommandOutput> {
    let config = RunConfig::from_args(&args.study.run)?;
    if config.gamma.is_some() {
        return Err(Error::input("--gamma is not used by simulation studies"));
    }
    let params = config.study(args.study.n, args.study.dim, args.study.trials);
    let points = run_power_study(&args.deltas, args.study.models, &params)?;
    if let Some(path) = &args.study.run.out {
        let mut w = ReportWriter::create(path, options(&args.study.run))?;
        for (point, study) in &points {
            for r in &study.reports {
                w.trial(r, Some(point.delta))?;
            }
            w.summary(&study.summary, Some(point.delta))?;
        }
        w.finish()?;
    }
    let mut stdout = format!("{:>8} {:>10} {:>10} {:>10}\n", "delta", "rejected", "trials", "rate");
    for (p, _) in &points {
        writeln!(
            stdout,
            "{:>8} {:>10} {:>10} {:>10.4}",
            p.delta, p.rejections, p.trials, p.rejection_rate
        )
        .unwrap();
    }
    Ok(CommandOutput {
        stdout,
        warnings: Vec::new(),
    })
}

pub fn cmd_ranking(args: &RankingArgs) -> Result<CommandOutput> {
    let config = RunConfig::from_args(&args.run)?;
    if config.gamma.is_some() {
        return Err(Error::input("--gamma is not used by simulation studies"));
    }
    let specs = args
        .models
        .iter()
        .map(|m| parse_model_spec(m, args.dim))
        .collect::<Result<Vec<_>>>()?;
    let params = config.study(args.n, args.dim, args.trials);
    let rows = run_ranking_study(&specs, &params)?;
    if let Some(path) = &args.run.out {
        let mut w = ReportWriter::create(path, options(&args.run))?;
        for row in &rows {
            w.record(&serde_json::json!({
                "record": "ranking",
                "label": row.label,
                "mean": row.mean,
                "std_dev": row.std_dev,
                "trials": row.trials,
            }))?;
        }
        w.finish()?;
    }
    let mut stdout = format!("{:<24} {:>15} {:>15}\n", "model", "mean_mmd2_inc", "std_dev");
    for row in &rows {
        writeln!(stdout, "{:<24} {:>15.6e} {:>15.6e}", row.label, row.mean, row.std_dev).unwrap();
    }
    Ok(CommandOutput {
        stdout,
        warnings: Vec::new(),
    })
}

pub fn run(cli: &Cli) -> Result<CommandOutput> {
    match &cli.command {
        Command::Score(a) => cmd_score(&a.manifest, &RunConfig::from_args(&a.run)?, a.run.out.as_deref()),
        Command::SelectTest(a) => cmd_select_test(&a.manifest, &RunConfig::from_args(&a.run)?, a.run.out.as_deref()),
        Command::Calibrate(a) => cmd_calibrate(a),
        Command::Power(a) => cmd_power(a),
        Command::Ranking(a) => cmd_ranking(a),
    }
}
