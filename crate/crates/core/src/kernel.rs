//! Positive-definite kernels and bandwidth selection.
//!
//! Estimators in [`crate::mmd`] are generic over [`Kernel`], so adding a
//! family means adding a [`KernelFamily`] variant (or a new `Kernel` impl)
//! without touching the estimator or inference code.

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mmd::FeatureMatrix;
use crate::rng::stream_rng;

/// Default cap on the number of rows used by [`median_heuristic_gamma`].
pub const DEFAULT_MEDIAN_MAX_POINTS: usize = 1000;

/// A symmetric positive-definite kernel on feature vectors.
///
/// `eval` is the unchecked hot path: callers guarantee equal lengths and
/// finite entries (every [`FeatureMatrix`] row satisfies this).
pub trait Kernel: Sync {
    fn eval(&self, x: &[f64], y: &[f64]) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KernelFamily {
    Gaussian,
}

/// Kernel family plus its inverse squared length-scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    family: KernelFamily,
    gamma: f64,
}

impl KernelSpec {
    pub fn gaussian(gamma: f64) -> Result<Self> {
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(Error::input(format!(
                "kernel gamma must be positive and finite, got {gamma}"
            )));
        }
        Ok(KernelSpec {
            family: KernelFamily::Gaussian,
            gamma,
        })
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }
}

#[inline]
fn squared_distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| {
            let t = a - b;
            t * t
        })
        .sum()
}

impl Kernel for KernelSpec {
    #[inline]
    fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        match self.family {
            KernelFamily::Gaussian => (-self.gamma * squared_distance(x, y)).exp(),
        }
    }
}

/// Checked kernel evaluation, `exp(-gamma * |x - x2|^2)` for the Gaussian family.
pub fn kernel_eval(spec: &KernelSpec, x: &[f64], x2: &[f64]) -> Result<f64> {
    check_pair(x, x2)?;
    Ok(spec.eval(x, x2))
}

pub(crate) fn check_pair(x: &[f64], x2: &[f64]) -> Result<()> {
    if x.is_empty() || x.len() != x2.len() {
        return Err(Error::input(format!(
            "dimension mismatch: {} vs {}",
            x.len(),
            x2.len()
        )));
    }
    for (name, v) in [("x", x), ("x2", x2)] {
        if let Some(i) = v.iter().position(|e| !e.is_finite()) {
            return Err(Error::NonFinite {
                position: format!("{name}[{i}]"),
            });
        }
    }
    Ok(())
}

/// Median heuristic bandwidth `gamma = 1 / (2 m^2)` over one matrix.
///
/// See [`median_heuristic_gamma_pooled`].
pub fn median_heuristic_gamma(pooled: &FeatureMatrix, max_points: usize, seed: u64) -> Result<f64> {
    median_heuristic_gamma_pooled(&[pooled], max_points, seed)
}

/// Median heuristic over the row-wise concatenation of `sets`.
///
/// `m` is the median pairwise Euclidean distance among up to `max_points`
/// rows drawn without replacement (all rows when the pool is small enough).
/// For an even number of distances the lower middle one is taken.
pub fn median_heuristic_gamma_pooled(
    sets: &[&FeatureMatrix],
    max_points: usize,
    seed: u64,
) -> Result<f64> {
    if max_points < 2 {
        return Err(Error::input("median heuristic needs max_points >= 2"));
    }
    let Some(first) = sets.first() else {
        return Err(Error::input("median heuristic needs at least one matrix"));
    };
    let d = first.dim();
    if sets.iter().any(|m| m.dim() != d) {
        return Err(Error::input("pooled matrices have different dimensions"));
    }
    let total: usize = sets.iter().map(|m| m.rows()).sum();
    if total < 2 {
        return Err(Error::input("median heuristic needs at least two rows"));
    }

    let row = |mut global: usize| -> &[f64] {
        for m in sets {
            if global < m.rows() {
                return m.row(global);
            }
            global -= m.rows();
        }
        unreachable!("row index within pooled total")
    };

    let chosen: Vec<usize> = if total <= max_points {
        (0..total).collect()
    } else {
        let mut rng = stream_rng(seed, crate::rng::role::BANDWIDTH);
        let mut idx = index::sample(&mut rng, total, max_points).into_vec();
        idx.sort_unstable();
        idx
    };

    let mut sq = Vec::with_capacity(chosen.len() * (chosen.len() - 1) / 2);
    for (a, &i) in chosen.iter().enumerate() {
        let xi = row(i);
        for &j in &chosen[a + 1..] {
            sq.push(squared_distance(xi, row(j)));
        }
    }
    let mid = (sq.len() - 1) / 2;
    let (_, &mut median_sq, _) = sq.select_nth_unstable_by(mid, f64::total_cmp);
    if median_sq <= 0.0 {
        return Err(Error::DegenerateData(
            "median pairwise distance is zero".into(),
        ));
    }
    Ok(1.0 / (2.0 * median_sq))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn col(v: &[f64]) -> FeatureMatrix {
        FeatureMatrix::from_rows(v.iter().map(|&x| vec![x]).collect()).unwrap()
    }

    #[test]
    fn gaussian_hand_values() {
        let k = KernelSpec::gaussian(1.0).unwrap();
        assert_eq!(kernel_eval(&k, &[0.0], &[0.0]).unwrap(), 1.0);
        let e = kernel_eval(&k, &[0.0], &[1.0]).unwrap();
        assert!((e - (-1.0f64).exp()).abs() < 1e-15);
        assert!((e - 0.367879).abs() < 1e-6);
        let k = KernelSpec::gaussian(0.125).unwrap();
        let v = kernel_eval(&k, &[0.0, 0.0], &[3.0, 4.0]).unwrap();
        assert!((v - (-3.125f64).exp()).abs() < 1e-15);
        assert!((v - 0.043937).abs() < 1e-6);
    }

    #[test]
    fn rejects_bad_inputs() {
        let k = KernelSpec::gaussian(1.0).unwrap();
        assert!(matches!(kernel_eval(&k, &[0.0], &[0.0, 1.0]), Err(Error::Input(_))));
        assert!(matches!(
            kernel_eval(&k, &[f64::NAN], &[0.0]),
            Err(Error::NonFinite { .. })
        ));
        assert!(KernelSpec::gaussian(0.0).is_err());
        assert!(KernelSpec::gaussian(f64::INFINITY).is_err());
        assert!(KernelSpec::gaussian(-1.0).is_err());
    }

    #[test]
    fn median_heuristic_hand_values() {
        let g = median_heuristic_gamma(&col(&[0.0, 1.0, 3.0]), 3, 0).unwrap();
        assert_eq!(g, 0.125);
        let g = median_heuristic_gamma(&col(&[0.0, 2.0]), 1000, 0).unwrap();
        assert_eq!(g, 0.125);
    }

    #[test]
    fn median_heuristic_lower_middle() {
        // distances {1, 2, 3, 1, 2, 1} for {0,1,2,3}: sorted 1,1,1,2,2,3 -> lower middle 1
        let g = median_heuristic_gamma(&col(&[0.0, 1.0, 2.0, 3.0]), 10, 0).unwrap();
        assert_eq!(g, 0.5);
    }

    #[test]
    fn median_heuristic_degenerate() {
        let err = median_heuristic_gamma(&col(&[5.0, 5.0, 5.0]), 3, 0).unwrap_err();
        assert!(matches!(err, Error::DegenerateData(_)));
    }

    #[test]
    fn median_heuristic_subsample_is_seeded() {
        let pts: Vec<f64> = (0..300).map(|i| ((i * 37) % 101) as f64 * 0.1).collect();
        let m = col(&pts);
        let a = median_heuristic_gamma(&m, 50, 9).unwrap();
        let b = median_heuristic_gamma(&m, 50, 9).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn pooled_matches_concatenation() {
        let a = col(&[0.0, 1.0]);
        let b = col(&[3.0, 4.5]);
        let g = median_heuristic_gamma_pooled(&[&a, &b], 4, 0).unwrap();
        assert_eq!(g, median_heuristic_gamma(&col(&[0.0, 1.0, 3.0, 4.5]), 4, 0).unwrap());
    }
}
