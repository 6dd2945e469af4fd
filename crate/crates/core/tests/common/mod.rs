//! Helpers shared by the integration tests.
#![allow(dead_code)]

use std::path::{Path, PathBuf};

use mmdinf::io::{write_features, FeatureFormat};
use mmdinf::mmd::FeatureMatrix;
use mmdinf::rng::stream_rng;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use serde_json::Value;

pub const POWER_SEED: u64 = 1;
pub const RANKING_SEED: u64 = 1;

pub fn golden() -> Value {
    let text = include_str!("../golden/studies.json");
    serde_json::from_str(text).expect("golden file is valid JSON")
}

/// Rejection counts for deltas 0, 0.1 and 0.5.
pub fn golden_power() -> Vec<usize> {
    golden()["power"]["rejections"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_u64().unwrap() as usize)
        .collect()
}

pub fn golden_ranking_means() -> Vec<f64> {
    golden()["ranking"]["means"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect()
}

pub fn gaussian_matrix(n: usize, d: usize, shift: f64, rng: &mut ChaCha8Rng) -> FeatureMatrix {
    let data = (0..n * d)
        .map(|_| rng.sample::<f64, _>(StandardNormal) + shift)
        .collect();
    FeatureMatrix::new(n, d, data).unwrap()
}

/// Writes `real.csv`, one CSV per shift and a manifest naming them `m0`, `m1`, ...
pub fn write_manifest(dir: &Path, shifts: &[f64], n: usize, d: usize, seed: u64) -> PathBuf {
    let real = gaussian_matrix(n, d, 0.0, &mut stream_rng(seed, 0));
    write_features(&dir.join("real.csv"), &real, FeatureFormat::Csv).unwrap();
    let mut manifest = String::from("# generated\nreal = real.csv\n");
    for (i, &shift) in shifts.iter().enumerate() {
        let m = gaussian_matrix(n, d, shift, &mut stream_rng(seed, 1 + i as u64));
        write_features(&dir.join(format!("m{i}.csv")), &m, FeatureFormat::Csv).unwrap();
        manifest.push_str(&format!("model.m{i} = m{i}.csv\n"));
    }
    let path = dir.join("manifest.txt");
    std::fs::write(&path, manifest).unwrap();
    path
}

/// A truncated-normal CDF evaluation point.
#[derive(Debug, Clone, Copy)]
pub struct CdfCase {
    pub x: f64,
    pub mu: f64,
    pub sigma2: f64,
    pub lower: f64,
    pub upper: f64,
}

impl CdfCase {
    /// Cases cycle through finite intervals, half-lines, far right tails and
    /// far left tails. The evaluation point is itself a draw from the
    /// truncated law.
    pub fn randomized(count: usize, seed: u64) -> Vec<CdfCase> {
        let mut rng = stream_rng(seed, 0);
        (0..count)
            .map(|i| {
                let (a, b) = match i % 5 {
                    0 => {
                        let a = rng.random_range(-3.0..1.0);
                        let w = if i % 2 == 0 { rng.random_range(0.2..4.0) } else { rng.random_range(0.001..0.2) };
                        (a, a + w)
                    }
                    1 => (f64::NEG_INFINITY, rng.random_range(-3.0..3.0)),
                    2 => (rng.random_range(-3.0..3.0), f64::INFINITY),
                    3 => {
                        let a = rng.random_range(5.0..30.0);
                        let b = if i % 2 == 0 { f64::INFINITY } else { a + rng.random_range(0.05..3.0) / a };
                        (a, b)
                    }
                    _ => {
                        let b = -rng.random_range(5.0..30.0);
                        let a = if i % 2 == 0 { f64::NEG_INFINITY } else { b - rng.random_range(0.05..3.0) / -b };
                        (a, b)
                    }
                };
                let mu = rng.random_range(-5.0..5.0);
                let sd: f64 = 10f64.powf(rng.random_range(-2.0..1.0));
                let t = sample_truncated(a, b, &mut rng);
                CdfCase {
                    x: mu + sd * t,
                    mu,
                    sigma2: sd * sd,
                    lower: mu + sd * a,
                    upper: mu + sd * b,
                }
            })
            .collect()
    }

    fn standardized(&self) -> (f64, f64, f64) {
        let sd = self.sigma2.sqrt();
        ((self.lower - self.mu) / sd, (self.upper - self.mu) / sd, (self.x - self.mu) / sd)
    }
}

/// Draws a standard normal restricted to `(a, b)` by rejection: plain normal
/// proposals for wide central intervals, uniform proposals for short ones and
/// a shifted exponential proposal for tails.
pub fn sample_truncated(a: f64, b: f64, rng: &mut ChaCha8Rng) -> f64 {
    if b <= 0.0 {
        return -sample_truncated(-b, -a, rng);
    }
    if a >= 0.5 {
        if b.is_finite() && (b - a) * a <= 2.0 {
            return uniform_proposal(a, b, a, rng);
        }
        let lambda = 0.5 * (a + (a * a + 4.0).sqrt());
        loop {
            let e: f64 = rng.sample(Exp1);
            let x = a + e / lambda;
            let u: f64 = rng.random();
            if u <= (-0.5 * (x - lambda).powi(2)).exp() && x < b {
                return x;
            }
        }
    }
    if b - a > 1.0 {
        loop {
            let z: f64 = rng.sample(StandardNormal);
            if z > a && z < b {
                return z;
            }
        }
    }
    uniform_proposal(a, b, 0.0f64.clamp(a, b), rng)
}

/// Uniform proposal on `(a, b)`; `mode` is where the density peaks on it.
fn uniform_proposal(a: f64, b: f64, mode: f64, rng: &mut ChaCha8Rng) -> f64 {
    loop {
        let x = rng.random_range(a..b);
        let u: f64 = rng.random();
        if u <= (-0.5 * (x - mode) * (x + mode)).exp() {
            return x;
        }
    }
}

/// Compares `f` with the empirical CDF of `draws` samples; returns the
/// deviation in binomial standard errors and the empirical value.
pub fn empirical_cdf_check(case: &CdfCase, f: f64, draws: usize, seed: u64) -> (f64, f64) {
    let (a, b, t) = case.standardized();
    let mut rng = stream_rng(seed, 1);
    let below = (0..draws).filter(|_| sample_truncated(a, b, &mut rng) <= t).count();
    let emp = below as f64 / draws as f64;
    let se = (f * (1.0 - f) / draws as f64).sqrt().max(1.0 / draws as f64);
    ((emp - f).abs() / se, emp)
}
