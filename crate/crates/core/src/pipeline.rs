//! End-to-end analysis: bandwidth, shared design, scores, selective test.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{median_heuristic_gamma_pooled, KernelSpec, DEFAULT_MEDIAN_MAX_POINTS};
use crate::mmd::{
    compute_h_matrix, estimate_scores, sample_design, DesignMode, FeatureMatrix, HMatrix,
    PairDesign, ScoreVector, DEFAULT_R, DEFAULT_RIDGE_SCALE,
};
use crate::psi::{select_and_test, SelectionResult, Sidedness};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// Subsample multiplier, `ell = r * n` for the random design.
    pub r: usize,
    pub design: DesignMode,
    /// Seeds the bandwidth subsample and the pair design.
    pub seed: u64,
    /// Fixed kernel gamma; the median heuristic is used when absent.
    pub gamma: Option<f64>,
    pub ridge_scale: f64,
    pub median_max_points: usize,
    pub sided: Sidedness,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            r: DEFAULT_R,
            design: DesignMode::RandomWithoutReplacement,
            seed: 0,
            gamma: None,
            ridge_scale: DEFAULT_RIDGE_SCALE,
            median_max_points: DEFAULT_MEDIAN_MAX_POINTS,
            sided: Sidedness::OneSided,
        }
    }
}

/// Kernel, design and h-matrix shared by all candidate models.
#[derive(Debug, Clone)]
pub struct Scored {
    pub kernel: KernelSpec,
    pub h: HMatrix,
}

impl Scored {
    pub fn design(&self) -> &PairDesign {
        self.h.design()
    }
}

#[derive(Debug, Clone)]
pub struct Analysis {
    pub scored: Scored,
    pub scores: ScoreVector,
    pub selection: SelectionResult,
}

/// Chooses the kernel (one gamma shared by every model) and evaluates the
/// h-matrix over one shared design.
pub fn score_models(
    models: &[&FeatureMatrix],
    real: &FeatureMatrix,
    config: &PipelineConfig,
) -> Result<Scored> {
    if models.is_empty() {
        return Err(Error::input("at least one model is required"));
    }
    if config.r == 0 {
        return Err(Error::input("subsample multiplier r must be >= 1"));
    }
    let kernel = match config.gamma {
        Some(g) => KernelSpec::gaussian(g)?,
        None => {
            let mut pool = Vec::with_capacity(models.len() + 1);
            pool.push(real);
            pool.extend_from_slice(models);
            let g = median_heuristic_gamma_pooled(&pool, config.median_max_points, config.seed)?;
            KernelSpec::gaussian(g)?
        }
    };
    let n = real.rows();
    let ell = config
        .r
        .checked_mul(n)
        .ok_or_else(|| Error::input("r * n overflows"))?;
    let design = sample_design(n, ell, config.design, config.seed)?;
    let h = compute_h_matrix(&kernel, models, real, &design)?;
    Ok(Scored { kernel, h })
}

pub fn analyze(
    models: &[&FeatureMatrix],
    real: &FeatureMatrix,
    config: &PipelineConfig,
) -> Result<Analysis> {
    if models.len() < 2 {
        return Err(Error::input("selection requires at least two models"));
    }
    let scored = score_models(models, real, config)?;
    let scores = estimate_scores(&scored.h, config.ridge_scale)?;
    let selection = select_and_test(&scores, config.sided)?;
    Ok(Analysis {
        scored,
        scores,
        selection,
    })
}
