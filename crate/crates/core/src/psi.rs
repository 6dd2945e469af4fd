//! Selective inference for the argmin model.
//!
//! Conditional on the affine selection event `A z <= b`, the statistic
//! `eta' z` of a Gaussian score vector is normal truncated to `[V-, V+]`.
//! Here the event is "model k has the smallest score" and `eta = e_k`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};
use crate::mmd::ScoreVector;
use crate::normal::ln_interval_mass;

/// Relative threshold below which a component of `alpha` counts as zero.
const ALPHA_ZERO: f64 = 1e-12;
/// Relative slack allowed when checking `V- <= eta'z <= V+`.
const CONTAINMENT_SLACK: f64 = 1e-12;

/// Marginal-screening event: one row per unselected model `m`, `+1` at the
/// selected column, `-1` at `m`, with `b = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionEvent {
    pub a_matrix: Matrix,
    pub b: Vec<f64>,
    pub selected: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncatedInterval {
    /// `V-`, possibly `-inf`.
    pub lower: f64,
    /// `V+`, possibly `+inf`.
    pub upper: f64,
    pub eta_z: f64,
    pub eta_sigma_eta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Sidedness {
    /// Upper-tail p-value; large scores are evidence against equality.
    #[default]
    OneSided,
    TwoSided,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub selected: usize,
    pub z: Vec<f64>,
    pub interval: TruncatedInterval,
    pub p_value: f64,
}

/// Index of the smallest score; ties go to the lowest index.
pub fn select_best(z: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in z.iter().enumerate().skip(1) {
        if v < z[best] {
            best = i;
        }
    }
    best
}

pub fn build_selection_event(z: &[f64], k: usize) -> Result<SelectionEvent> {
    let s = z.len();
    if s < 2 {
        return Err(Error::input("selection requires at least two models"));
    }
    if k >= s {
        return Err(Error::input(format!("selected index {k} out of range for {s} models")));
    }
    if let Some(m) = (0..s).find(|&m| z[m] < z[k]) {
        return Err(Error::InconsistentEvent(format!(
            "model {k} is not the argmin (z[{m}] = {} < z[{k}] = {})",
            z[m], z[k]
        )));
    }
    let mut a = Matrix::zeros(s - 1, s);
    for (row, m) in (0..s).filter(|&m| m != k).enumerate() {
        a[(row, k)] = 1.0;
        a[(row, m)] = -1.0;
    }
    Ok(SelectionEvent {
        a_matrix: a,
        b: vec![0.0; s - 1],
        selected: k,
    })
}

/// Truncation limits of `eta' z` given the selection event.
pub fn truncation_points(
    event: &SelectionEvent,
    z: &[f64],
    sigma: &Matrix,
    eta: &[f64],
) -> Result<TruncatedInterval> {
    let s = z.len();
    if sigma.rows() != s || sigma.cols() != s || eta.len() != s || event.a_matrix.cols() != s {
        return Err(Error::input("selection event, scores, covariance and eta disagree in size"));
    }
    let sigma_eta = sigma.mul_vec(eta);
    let eta_sigma_eta = dot(eta, &sigma_eta);
    if !(eta_sigma_eta > 0.0) || !eta_sigma_eta.is_finite() {
        return Err(Error::DegenerateVariance(eta_sigma_eta));
    }
    let eta_z = dot(eta, z);
    let alpha: Vec<f64> = event
        .a_matrix
        .mul_vec(&sigma_eta)
        .into_iter()
        .map(|v| v / eta_sigma_eta)
        .collect();
    let a_z = event.a_matrix.mul_vec(z);
    let alpha_max = alpha.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let zero = ALPHA_ZERO * alpha_max;

    let (mut lower, mut upper) = (f64::NEG_INFINITY, f64::INFINITY);
    for ((&aj, &azj), &bj) in alpha.iter().zip(&a_z).zip(&event.b) {
        if aj.abs() <= zero {
            continue;
        }
        let bound = (bj - azj) / aj + eta_z;
        if aj < 0.0 {
            lower = lower.max(bound);
        } else {
            upper = upper.min(bound);
        }
    }

    let slack = CONTAINMENT_SLACK * eta_z.abs().max(f64::MIN_POSITIVE);
    if lower > eta_z + slack || upper < eta_z - slack {
        return Err(Error::NumericalFailure(format!(
            "observed statistic {eta_z} outside truncation interval [{lower}, {upper}]"
        )));
    }
    Ok(TruncatedInterval {
        lower: lower.min(eta_z),
        upper: upper.max(eta_z),
        eta_z,
        eta_sigma_eta,
    })
}

fn standardize(v: f64, mu: f64, sd: f64) -> f64 {
    if v.is_infinite() {
        v
    } else {
        (v - mu) / sd
    }
}

fn check_cdf_args(mu: f64, sigma2: f64, lower: f64, upper: f64) -> Result<f64> {
    if !(sigma2 > 0.0) || !sigma2.is_finite() || !mu.is_finite() {
        return Err(Error::input(format!(
            "truncated normal needs finite mean and positive variance, got ({mu}, {sigma2})"
        )));
    }
    if lower.is_nan() || upper.is_nan() || !(lower < upper) {
        return Err(Error::input(format!(
            "truncation bounds must satisfy lower < upper, got [{lower}, {upper}]"
        )));
    }
    Ok(sigma2.sqrt())
}

/// Probability ratio `P(lo < Z < hi) / P(a < Z < b)` in log space.
fn mass_ratio(lo: f64, hi: f64, a: f64, b: f64) -> Result<f64> {
    let den = ln_interval_mass(a, b);
    if !den.is_finite() {
        return Err(Error::NumericalFailure(format!(
            "truncation interval [{a}, {b}] (standardized) has no representable mass"
        )));
    }
    let num = ln_interval_mass(lo, hi);
    if num.is_nan() {
        return Err(Error::NumericalFailure("interval mass evaluated to NaN".into()));
    }
    Ok((num - den).exp().clamp(0.0, 1.0))
}

/// CDF at `x` of `N(mu, sigma2)` truncated to `[lower, upper]`.
pub fn truncated_normal_cdf(x: f64, mu: f64, sigma2: f64, lower: f64, upper: f64) -> Result<f64> {
    let sd = check_cdf_args(mu, sigma2, lower, upper)?;
    if x.is_nan() {
        return Err(Error::input("truncated normal CDF evaluated at NaN"));
    }
    if x <= lower {
        return Ok(0.0);
    }
    if x >= upper {
        return Ok(1.0);
    }
    let (a, b, t) = (standardize(lower, mu, sd), standardize(upper, mu, sd), (x - mu) / sd);
    mass_ratio(a, t, a, b)
}

/// Survival function `1 - F(x)`, evaluated directly for accuracy near the top.
pub fn truncated_normal_sf(x: f64, mu: f64, sigma2: f64, lower: f64, upper: f64) -> Result<f64> {
    let sd = check_cdf_args(mu, sigma2, lower, upper)?;
    if x.is_nan() {
        return Err(Error::input("truncated normal survival evaluated at NaN"));
    }
    if x <= lower {
        return Ok(1.0);
    }
    if x >= upper {
        return Ok(0.0);
    }
    let (a, b, t) = (standardize(lower, mu, sd), standardize(upper, mu, sd), (x - mu) / sd);
    mass_ratio(t, b, a, b)
}

/// Selective p-value under `eta' mu = 0`.
pub fn selective_p_value(interval: &TruncatedInterval, sided: Sidedness) -> Result<f64> {
    let TruncatedInterval {
        lower,
        upper,
        eta_z,
        eta_sigma_eta,
    } = *interval;
    if !(eta_sigma_eta > 0.0) {
        return Err(Error::DegenerateVariance(eta_sigma_eta));
    }
    if lower == upper {
        return Err(Error::NumericalFailure(format!(
            "truncation interval collapsed to the point {lower}"
        )));
    }
    let upper_tail = truncated_normal_sf(eta_z, 0.0, eta_sigma_eta, lower, upper)?;
    let p = match sided {
        Sidedness::OneSided => upper_tail,
        Sidedness::TwoSided => {
            let lower_tail = truncated_normal_cdf(eta_z, 0.0, eta_sigma_eta, lower, upper)?;
            2.0 * lower_tail.min(upper_tail)
        }
    };
    Ok(p.clamp(0.0, 1.0))
}

pub fn unit_vector(s: usize, k: usize) -> Vec<f64> {
    let mut e = vec![0.0; s];
    e[k] = 1.0;
    e
}

/// Selects the argmin model and tests it with `eta = e_k`.
pub fn select_and_test(scores: &ScoreVector, sided: Sidedness) -> Result<SelectionResult> {
    let z = &scores.z;
    let k = select_best(z);
    let event = build_selection_event(z, k)?;
    let eta = unit_vector(z.len(), k);
    let interval = truncation_points(&event, z, &scores.sigma, &eta)?;
    let p_value = selective_p_value(&interval, sided)?;
    Ok(SelectionResult {
        selected: k,
        z: z.clone(),
        interval,
        p_value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel_eq(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(f64::MIN_POSITIVE)
    }

    #[test]
    fn argmin_and_ties() {
        assert_eq!(select_best(&[0.3, 0.1, 0.2]), 1);
        assert_eq!(select_best(&[0.1, 0.1]), 0);
        assert_eq!(select_best(&[0.6, 0.2, 0.4].map(|v| v * 7.5)), 1);
    }

    #[test]
    fn event_rows() {
        let e = build_selection_event(&[0.1, 0.2, 0.3], 0).unwrap();
        assert_eq!(e.a_matrix.to_rows(), vec![vec![1.0, -1.0, 0.0], vec![1.0, 0.0, -1.0]]);
        assert_eq!(e.b, vec![0.0, 0.0]);
        let e = build_selection_event(&[0.5, 0.1], 1).unwrap();
        assert_eq!(e.a_matrix.to_rows(), vec![vec![-1.0, 1.0]]);
        assert_eq!(e.b, vec![0.0]);
        assert!(matches!(
            build_selection_event(&[0.2, 0.1, 0.3], 0),
            Err(Error::InconsistentEvent(_))
        ));
    }

    #[test]
    fn truncation_hand_cases() {
        let z = [0.1, 0.2, 0.3];
        let sigma = Matrix::identity(3).scaled(0.01);
        let e = build_selection_event(&z, 0).unwrap();
        let t = truncation_points(&e, &z, &sigma, &unit_vector(3, 0)).unwrap();
        assert_eq!(t.lower, f64::NEG_INFINITY);
        assert!(rel_eq(t.upper, 0.2, 1e-12));
        assert!(rel_eq(t.eta_sigma_eta, 0.01, 1e-15));

        let z = [0.5, 0.9];
        let e = build_selection_event(&z, 0).unwrap();
        let t = truncation_points(&e, &z, &Matrix::identity(2), &unit_vector(2, 0)).unwrap();
        assert_eq!(t.lower, f64::NEG_INFINITY);
        assert!(rel_eq(t.upper, 0.9, 1e-12));
    }

    #[test]
    fn negative_alpha_gives_lower_bound() {
        // Strong positive covariance: Sigma_km > Sigma_kk makes alpha negative.
        let z = [0.1, 0.3];
        let sigma = Matrix::from_rows(&[vec![1.0, 1.5], vec![1.5, 4.0]]).unwrap();
        let e = build_selection_event(&z, 0).unwrap();
        let t = truncation_points(&e, &z, &sigma, &unit_vector(2, 0)).unwrap();
        // alpha = (1 - 1.5) / 1 = -0.5; bound = (0 - (-0.2)) / -0.5 + 0.1 = -0.3
        assert!(rel_eq(t.lower, -0.3, 1e-12));
        assert_eq!(t.upper, f64::INFINITY);
    }

    #[test]
    fn zero_alpha_rows_skipped() {
        let z = [0.1, 0.2];
        let sigma = Matrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let e = build_selection_event(&z, 0).unwrap();
        let t = truncation_points(&e, &z, &sigma, &unit_vector(2, 0)).unwrap();
        assert_eq!((t.lower, t.upper), (f64::NEG_INFINITY, f64::INFINITY));
    }

    #[test]
    fn degenerate_variance() {
        let z = [0.1, 0.2];
        let e = build_selection_event(&z, 0).unwrap();
        let err = truncation_points(&e, &z, &Matrix::zeros(2, 2), &unit_vector(2, 0)).unwrap_err();
        assert!(matches!(err, Error::DegenerateVariance(_)));
    }

    #[test]
    fn cdf_basic_values() {
        let inf = f64::INFINITY;
        assert!(rel_eq(truncated_normal_cdf(0.0, 0.0, 1.0, -inf, inf).unwrap(), 0.5, 1e-15));
        for c in [1e-6, 0.3, 2.0, 40.0] {
            let v = truncated_normal_cdf(1.7, 1.7, 2.5, 1.7 - c, 1.7 + c).unwrap();
            assert!(rel_eq(v, 0.5, 1e-12), "c={c} v={v}");
        }
        // (Phi(1) - 1/2) / (1/2) = erf(1/sqrt 2)
        let v = truncated_normal_cdf(1.0, 0.0, 1.0, 0.0, inf).unwrap();
        assert!(rel_eq(v, 0.682_689_492_137_085_9, 1e-14));
        assert_eq!(truncated_normal_cdf(-1.0, 0.0, 1.0, 0.0, 1.0).unwrap(), 0.0);
        assert_eq!(truncated_normal_cdf(2.0, 0.0, 1.0, 0.0, 1.0).unwrap(), 1.0);
        assert!(truncated_normal_cdf(0.0, 0.0, 1.0, 1.0, 1.0).is_err());
        assert!(truncated_normal_cdf(0.0, 0.0, 0.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn p_value_boundaries() {
        let at_upper = TruncatedInterval {
            lower: f64::NEG_INFINITY,
            upper: 0.2,
            eta_z: 0.2,
            eta_sigma_eta: 0.01,
        };
        assert_eq!(selective_p_value(&at_upper, Sidedness::OneSided).unwrap(), 0.0);
        let near_lower = TruncatedInterval {
            lower: 0.1,
            upper: 0.5,
            eta_z: 0.1 + 1e-12,
            eta_sigma_eta: 0.01,
        };
        let p = selective_p_value(&near_lower, Sidedness::OneSided).unwrap();
        assert!(p > 1.0 - 1e-9 && p <= 1.0);
    }

    #[test]
    fn two_sided_is_twice_smaller_tail() {
        let iv = TruncatedInterval {
            lower: -1.0,
            upper: 2.0,
            eta_z: 1.2,
            eta_sigma_eta: 0.5,
        };
        let one = selective_p_value(&iv, Sidedness::OneSided).unwrap();
        let two = selective_p_value(&iv, Sidedness::TwoSided).unwrap();
        assert!(rel_eq(two, 2.0 * one, 1e-14));
    }

    #[test]
    fn select_and_test_far_runner_up() {
        let sv = ScoreVector::new(
            vec![0.0, 10.0],
            Matrix::identity(2).scaled(1e-4),
            vec!["a".into(), "b".into()],
        )
        .unwrap();
        let r = select_and_test(&sv, Sidedness::OneSided).unwrap();
        assert_eq!(r.selected, 0);
        assert!(rel_eq(r.interval.upper, 10.0, 1e-12));
        assert!((r.p_value - 0.5).abs() < 1e-12);
    }
}
