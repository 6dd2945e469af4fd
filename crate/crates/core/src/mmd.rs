//! Complete and incomplete U-statistic estimates of squared MMD.
//!
//! All candidate models are scored over one shared [`PairDesign`] and the
//! same real rows, so the per-pair summands of different models are
//! correlated and [`estimate_scores`] can estimate their joint covariance.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{check_pair, Kernel};
use crate::linalg::Matrix;
use crate::reduce::{mean, par_pairwise_sum, pairwise_sum};
use crate::rng::stream_rng;

/// Default subsample multiplier: `ell = r * n`.
pub const DEFAULT_R: usize = 5;
/// Default relative ridge added to the score covariance.
pub const DEFAULT_RIDGE_SCALE: f64 = 1e-8;

/// Squared correlation pivot below which two score columns are treated as collinear.
const COLLINEAR_PIVOT: f64 = 1e-10;

/// `n x d` sample matrix, one sample per row.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    data: Vec<f64>,
    n: usize,
    d: usize,
}

impl FeatureMatrix {
    /// Builds a matrix from row-major data. Requires `n >= 2`, `d >= 1` and
    /// finite entries.
    pub fn new(n: usize, d: usize, data: Vec<f64>) -> Result<Self> {
        if n < 2 || d < 1 {
            return Err(Error::input(format!(
                "feature matrix must have n >= 2 and d >= 1, got {n}x{d}"
            )));
        }
        if n.checked_mul(d) != Some(data.len()) {
            return Err(Error::input(format!(
                "feature data has {} values, expected {n}x{d}",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                position: format!("row {}, column {}", i / d, i % d),
            });
        }
        Ok(FeatureMatrix { data, n, d })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        let d = rows.first().map_or(0, Vec::len);
        if let Some(i) = rows.iter().position(|r| r.len() != d) {
            return Err(Error::input(format!(
                "row {i} has {} columns, expected {d}",
                rows[i].len()
            )));
        }
        FeatureMatrix::new(n, d, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Rows reordered by `perm` (row `i` of the result is row `perm[i]`).
    pub fn permuted(&self, perm: &[usize]) -> FeatureMatrix {
        assert_eq!(perm.len(), self.n);
        let data = perm.iter().flat_map(|&i| self.row(i).iter().copied()).collect();
        FeatureMatrix {
            data,
            n: self.n,
            d: self.d,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DesignMode {
    RandomWithoutReplacement,
    Linear,
    Full,
}

/// The index pairs `(i, j)`, `i != j`, summed by the incomplete estimator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairDesign {
    pairs: Vec<(u32, u32)>,
    n: usize,
    mode: DesignMode,
}

impl PairDesign {
    pub fn pairs(&self) -> &[(u32, u32)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn mode(&self) -> DesignMode {
        self.mode
    }
}

/// Number of distinct unordered pairs among `n` samples.
pub fn unordered_pair_count(n: usize) -> u64 {
    let n = n as u64;
    n * n.saturating_sub(1) / 2
}

/// Builds a pair design. `ell` is only read in random mode.
///
/// Random mode draws unordered pairs uniformly without replacement and
/// orients each as `(min, max)`; the result is a pure function of
/// `(n, ell, seed)`.
pub fn sample_design(n: usize, ell: usize, mode: DesignMode, seed: u64) -> Result<PairDesign> {
    if n < 2 {
        return Err(Error::input(format!("pair design needs n >= 2, got {n}")));
    }
    if n > u32::MAX as usize {
        return Err(Error::input(format!("sample count {n} exceeds u32 range")));
    }
    let pairs = match mode {
        DesignMode::Linear => (0..n as u32 / 2).map(|t| (2 * t, 2 * t + 1)).collect(),
        DesignMode::Full => {
            let n = n as u32;
            (0..n)
                .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
                .collect()
        }
        DesignMode::RandomWithoutReplacement => {
            let capacity = unordered_pair_count(n);
            if ell == 0 || ell as u64 > capacity {
                return Err(Error::input(format!(
                    "ell = {ell} must lie in [1, {capacity}] for n = {n}"
                )));
            }
            let mut rng = stream_rng(seed, crate::rng::role::DESIGN);
            if (ell as u64) <= capacity / 2 {
                let mut seen = HashSet::with_capacity(ell);
                let mut pairs = Vec::with_capacity(ell);
                while pairs.len() < ell {
                    let i = rng.random_range(0..n as u32);
                    let j = rng.random_range(0..n as u32);
                    if i == j {
                        continue;
                    }
                    let p = (i.min(j), i.max(j));
                    if seen.insert(p) {
                        pairs.push(p);
                    }
                }
                pairs
            } else {
                // Dense request: a partial shuffle of the enumerated pairs.
                let n = n as u32;
                let mut all: Vec<(u32, u32)> = (0..n)
                    .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
                    .collect();
                let (chosen, _) = all.partial_shuffle(&mut rng, ell);
                chosen.to_vec()
            }
        }
    };
    Ok(PairDesign { pairs, n, mode })
}

/// The two-sample U-statistic kernel
/// `h(u, u2) = k(x, x2) + k(y, y2) - k(x, y2) - k(x2, y)` with `u = [x; y]`.
pub fn h_kernel<K: Kernel>(kernel: &K, x: &[f64], y: &[f64], x2: &[f64], y2: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    check_pair(x2, y2)?;
    check_pair(x, x2)?;
    Ok(h_unchecked(kernel, x, y, x2, y2))
}

#[inline]
fn h_unchecked<K: Kernel>(kernel: &K, x: &[f64], y: &[f64], x2: &[f64], y2: &[f64]) -> f64 {
    kernel.eval(x, x2) + kernel.eval(y, y2) - kernel.eval(x, y2) - kernel.eval(x2, y)
}

/// `ell x S` matrix of per-pair h values, one column per candidate model.
#[derive(Debug, Clone, PartialEq)]
pub struct HMatrix {
    values: Vec<f64>,
    models: usize,
    design: PairDesign,
}

impl HMatrix {
    /// Wraps precomputed row-major values (`ell` rows of `models` entries).
    pub fn from_values(values: Vec<f64>, models: usize, design: PairDesign) -> Result<Self> {
        if models == 0 || values.len() != models * design.len() {
            return Err(Error::input(format!(
                "h-matrix needs {} x {models} values, got {}",
                design.len(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                position: "h-matrix".into(),
            });
        }
        Ok(HMatrix {
            values,
            models,
            design,
        })
    }

    pub fn pairs(&self) -> usize {
        self.design.len()
    }

    pub fn models(&self) -> usize {
        self.models
    }

    pub fn design(&self) -> &PairDesign {
        &self.design
    }

    pub fn value(&self, pair: usize, model: usize) -> f64 {
        self.values[pair * self.models + model]
    }

    pub fn row(&self, pair: usize) -> &[f64] {
        &self.values[pair * self.models..(pair + 1) * self.models]
    }

    pub fn column(&self, model: usize) -> Vec<f64> {
        assert!(model < self.models);
        self.values
            .iter()
            .skip(model)
            .step_by(self.models)
            .copied()
            .collect()
    }
}

const PAIRS_PER_TASK: usize = 1024;

/// Evaluates h for every design pair and every model.
///
/// Pair `(i, j)` uses rows `i, j` of model `s` for the x-parts and rows
/// `i, j` of `real` for the y-parts; the real-side term `k(y_i, y_j)` is
/// shared by all columns.
pub fn compute_h_matrix<K: Kernel>(
    kernel: &K,
    models: &[&FeatureMatrix],
    real: &FeatureMatrix,
    design: &PairDesign,
) -> Result<HMatrix> {
    let s = models.len();
    if s == 0 {
        return Err(Error::input("at least one model is required"));
    }
    let n = real.rows();
    let d = real.dim();
    for (idx, m) in models.iter().enumerate() {
        if m.rows() != n || m.dim() != d {
            return Err(Error::input(format!(
                "model {idx} is {}x{}, real set is {n}x{d}",
                m.rows(),
                m.dim()
            )));
        }
    }
    if design.n() != n {
        return Err(Error::input(format!(
            "design refers to n = {}, data has n = {n}",
            design.n()
        )));
    }
    if design.is_empty() {
        return Err(Error::input("design has no pairs"));
    }

    // Row i of the packed table holds y_i followed by x_i of every model, so a
    // pair touches two contiguous blocks instead of 2 * (S + 1) scattered rows.
    let width = (s + 1) * d;
    let mut packed = vec![0.0; n * width];
    packed.par_chunks_mut(width).enumerate().for_each(|(i, block)| {
        block[..d].copy_from_slice(real.row(i));
        for (dst, m) in block[d..].chunks_exact_mut(d).zip(models) {
            dst.copy_from_slice(m.row(i));
        }
    });

    let mut values = vec![0.0; design.len() * s];
    values
        .par_chunks_mut(PAIRS_PER_TASK * s)
        .zip(design.pairs().par_chunks(PAIRS_PER_TASK))
        .for_each(|(out, pairs)| {
            for (row, &(i, j)) in out.chunks_exact_mut(s).zip(pairs) {
                let bi = &packed[i as usize * width..(i as usize + 1) * width];
                let bj = &packed[j as usize * width..(j as usize + 1) * width];
                let (yi, yj) = (&bi[..d], &bj[..d]);
                let kyy = kernel.eval(yi, yj);
                let xs = bi[d..].chunks_exact(d).zip(bj[d..].chunks_exact(d));
                for (slot, (xi, xj)) in row.iter_mut().zip(xs) {
                    *slot = kernel.eval(xi, xj) + kyy - kernel.eval(xi, yj) - kernel.eval(xj, yi);
                }
            }
        });
    HMatrix::from_values(values, s, design.clone())
}

/// Incomplete estimate `(1/ell) * sum h` per model, using the fixed pairwise
/// reduction order.
pub fn mmd_incomplete(h: &HMatrix) -> Vec<f64> {
    let ell = h.pairs() as f64;
    (0..h.models())
        .map(|s| par_pairwise_sum(&h.column(s)) / ell)
        .collect()
}

/// Complete U-statistic `1/(n(n-1)) * sum_{i != j} h(u_i, u_j)`.
///
/// Quadratic in `n`; the reference against which the incomplete estimator is
/// checked. Accumulates with Neumaier compensation.
pub fn mmd_complete<K: Kernel>(kernel: &K, x: &FeatureMatrix, y: &FeatureMatrix) -> Result<f64> {
    if x.rows() != y.rows() || x.dim() != y.dim() {
        return Err(Error::input(format!(
            "shape mismatch: {}x{} vs {}x{}",
            x.rows(),
            x.dim(),
            y.rows(),
            y.dim()
        )));
    }
    let n = x.rows();
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let t = h_unchecked(kernel, x.row(i), y.row(i), x.row(j), y.row(j));
            let s = sum + t;
            comp += if sum.abs() >= t.abs() {
                (sum - s) + t
            } else {
                (t - s) + sum
            };
            sum = s;
        }
    }
    Ok((sum + comp) / (n * (n - 1)) as f64)
}

/// Score vector `z` with its estimated covariance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreVector {
    pub z: Vec<f64>,
    pub sigma: Matrix,
    pub model_ids: Vec<String>,
}

impl ScoreVector {
    /// Validates `S >= 2`, matching shapes, symmetry and positive definiteness.
    pub fn new(z: Vec<f64>, sigma: Matrix, model_ids: Vec<String>) -> Result<Self> {
        let s = z.len();
        if s < 2 {
            return Err(Error::input("selection requires at least two models"));
        }
        if sigma.rows() != s || sigma.cols() != s || model_ids.len() != s {
            return Err(Error::input("score vector, covariance and ids disagree in size"));
        }
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                position: "score vector".into(),
            });
        }
        if !sigma.is_symmetric() {
            return Err(Error::input("covariance is not symmetric"));
        }
        if let Err(j) = sigma.cholesky() {
            return Err(Error::DegenerateCovariance {
                columns: vec![j],
                reason: "covariance is not positive definite".into(),
            });
        }
        Ok(ScoreVector {
            z,
            sigma,
            model_ids,
        })
    }

    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    pub fn with_ids(mut self, ids: Vec<String>) -> Result<Self> {
        if ids.len() != self.z.len() {
            return Err(Error::input("wrong number of model ids"));
        }
        self.model_ids = ids;
        Ok(self)
    }

    /// Standard error `sqrt(sigma_ss)` of each score.
    pub fn standard_errors(&self) -> Vec<f64> {
        (0..self.len()).map(|s| self.sigma[(s, s)].sqrt()).collect()
    }

    /// Multiplies scores by `c` and the covariance by `c^2`.
    pub fn rescaled(&self, c: f64) -> ScoreVector {
        ScoreVector {
            z: self.z.iter().map(|v| v * c).collect(),
            sigma: self.sigma.scaled(c * c),
            model_ids: self.model_ids.clone(),
        }
    }
}

/// Raw covariance of the column means: row covariance divided by `ell`.
fn mean_covariance(columns: &[Vec<f64>], means: &[f64]) -> Matrix {
    let s = columns.len();
    let ell = columns[0].len();
    let centered: Vec<Vec<f64>> = columns
        .iter()
        .zip(means)
        .map(|(c, m)| c.iter().map(|v| v - m).collect())
        .collect();
    let mut cov = Matrix::zeros(s, s);
    let mut prod = vec![0.0; ell];
    for a in 0..s {
        for b in 0..=a {
            for ((p, u), v) in prod.iter_mut().zip(&centered[a]).zip(&centered[b]) {
                *p = u * v;
            }
            let c = pairwise_sum(&prod) / ((ell - 1) as f64 * ell as f64);
            cov[(a, b)] = c;
            cov[(b, a)] = c;
        }
    }
    cov
}

/// Per-column standard errors `sqrt(var_rows / ell)`; needs only `S >= 1`.
pub fn column_standard_errors(h: &HMatrix) -> Result<Vec<f64>> {
    if h.pairs() < 2 {
        return Err(Error::input("standard errors need at least two pairs"));
    }
    let ell = h.pairs() as f64;
    Ok((0..h.models())
        .map(|s| {
            let col = h.column(s);
            let m = mean(&col);
            let sq: Vec<f64> = col.iter().map(|v| (v - m) * (v - m)).collect();
            (pairwise_sum(&sq) / ((ell - 1.0) * ell)).sqrt()
        })
        .collect())
}

/// Turns an h-matrix into scores `z` and covariance `sigma`.
///
/// `sigma = cov(rows) / ell + eps * I` with
/// `eps = ridge_scale * trace(cov(rows) / ell) / S`. Zero-variance or
/// (numerically) perfectly correlated columns are rejected before the ridge
/// is applied.
pub fn estimate_scores(h: &HMatrix, ridge_scale: f64) -> Result<ScoreVector> {
    let s = h.models();
    if s < 2 {
        return Err(Error::input("selection requires at least two models"));
    }
    if h.pairs() < 2 {
        return Err(Error::input("covariance estimation needs at least two pairs"));
    }
    if !(ridge_scale.is_finite() && ridge_scale >= 0.0) {
        return Err(Error::input(format!("ridge scale must be >= 0, got {ridge_scale}")));
    }
    let columns: Vec<Vec<f64>> = (0..s).map(|c| h.column(c)).collect();
    let z: Vec<f64> = columns.iter().map(|c| pairwise_sum(c) / c.len() as f64).collect();
    let raw = mean_covariance(&columns, &z);

    if let Some(c) = (0..s).find(|&c| !(raw[(c, c)] > 0.0)) {
        return Err(Error::DegenerateCovariance {
            columns: vec![c],
            reason: "column has zero variance".into(),
        });
    }
    let mut corr = Matrix::zeros(s, s);
    for a in 0..s {
        for b in 0..s {
            corr[(a, b)] = raw[(a, b)] / (raw[(a, a)] * raw[(b, b)]).sqrt();
        }
    }
    check_collinearity(&corr)?;

    let eps = ridge_scale * raw.trace() / s as f64;
    let mut sigma = raw;
    for c in 0..s {
        sigma[(c, c)] += eps;
    }
    let ids = (0..s).map(|c| format!("model{c}")).collect();
    ScoreVector::new(z, sigma, ids)
}

/// Cholesky of the correlation matrix with a collinearity threshold on the
/// squared pivots. On failure names the offending column and the earlier
/// column it is most correlated with.
fn check_collinearity(corr: &Matrix) -> Result<()> {
    let s = corr.rows();
    let mut l = Matrix::zeros(s, s);
    for j in 0..s {
        let mut diag = corr[(j, j)];
        for k in 0..j {
            diag -= l[(j, k)] * l[(j, k)];
        }
        if !(diag > COLLINEAR_PIVOT) {
            let partner = (0..j)
                .max_by(|&a, &b| corr[(j, a)].abs().total_cmp(&corr[(j, b)].abs()))
                .unwrap_or(j);
            let mut columns = vec![partner, j];
            columns.dedup();
            return Err(Error::DegenerateCovariance {
                columns,
                reason: format!(
                    "columns are collinear (correlation {:.12})",
                    corr[(j, partner)]
                ),
            });
        }
        let ljj = diag.sqrt();
        l[(j, j)] = ljj;
        for i in j + 1..s {
            let mut v = corr[(i, j)];
            for k in 0..j {
                v -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = v / ljj;
        }
    }
    Ok(())
}
