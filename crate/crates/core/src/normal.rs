//! Standard normal distribution functions that stay accurate in the tails.
//!
//! `erfc` and the scaled `erfcx(x) = exp(x^2) erfc(x)` follow W. J. Cody's
//! rational Chebyshev approximations (CALERF). Interval probabilities are
//! carried in log space: one-sided tail intervals go through the Mills ratio
//! `R(x) = Q(x) / phi(x)`, narrow intervals through Gauss-Legendre
//! quadrature of the density relative to its largest value.

#![allow(clippy::excessive_precision)]

use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};
use std::sync::OnceLock;

const SQRPI: f64 = 5.641_895_835_477_562_869_5e-1; // 1/sqrt(pi)
const THRESH: f64 = 0.46875;
const XSMALL: f64 = 1.11e-16;
const XBIG: f64 = 26.543;
const XHUGE: f64 = 6.71e7;
const XMAX: f64 = 2.53e307;
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

const A: [f64; 5] = [
    3.161_123_743_870_565_6e0,
    1.138_641_541_510_501_6e2,
    3.774_852_376_853_020_2e2,
    3.209_377_589_138_469_5e3,
    1.857_777_061_846_031_5e-1,
];
const B: [f64; 4] = [
    2.360_129_095_234_412_1e1,
    2.440_246_379_344_441_7e2,
    1.282_616_526_077_372_3e3,
    2.844_236_833_439_170_6e3,
];
const C: [f64; 9] = [
    5.641_884_969_886_700_9e-1,
    8.883_149_794_388_376e0,
    6.611_919_063_714_163e1,
    2.986_351_381_974_001_3e2,
    8.819_522_212_417_691e2,
    1.712_047_612_634_070_6e3,
    2.051_078_377_826_071_5e3,
    1.230_339_354_797_997_2e3,
    2.153_115_354_744_038_5e-8,
];
const D: [f64; 8] = [
    1.574_492_611_070_983_5e1,
    1.176_939_508_913_125e2,
    5.371_811_018_620_098_6e2,
    1.621_389_574_566_690_2e3,
    3.290_799_235_733_459_6e3,
    4.362_619_090_143_247e3,
    3.439_367_674_143_721_6e3,
    1.230_339_354_803_749_4e3,
];
const P: [f64; 6] = [
    3.053_266_349_612_323_4e-1,
    3.603_448_999_498_044_4e-1,
    1.257_817_261_112_292_5e-1,
    1.608_378_514_874_227_7e-2,
    6.587_491_615_298_378e-4,
    1.631_538_713_730_209_8e-2,
];
const Q: [f64; 5] = [
    2.568_520_192_289_822_4e0,
    1.872_952_849_923_467_3e0,
    5.279_051_029_514_284e-1,
    6.051_834_131_244_132e-2,
    2.335_204_976_268_691_8e-3,
];

#[derive(Clone, Copy, PartialEq)]
enum Flavor {
    Erf,
    Erfc,
    Erfcx,
}

fn calerf(x: f64, flavor: Flavor) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    let y = x.abs();
    let mut result: f64;
    if y <= THRESH {
        let ysq = if y > XSMALL { y * y } else { 0.0 };
        let mut xnum = A[4] * ysq;
        let mut xden = ysq;
        for i in 0..3 {
            xnum = (xnum + A[i]) * ysq;
            xden = (xden + B[i]) * ysq;
        }
        result = x * (xnum + A[3]) / (xden + B[3]);
        match flavor {
            Flavor::Erf => {}
            Flavor::Erfc => result = 1.0 - result,
            Flavor::Erfcx => result = ysq.exp() * (1.0 - result),
        }
        return result;
    }
    if y <= 4.0 {
        let mut xnum = C[8] * y;
        let mut xden = y;
        for i in 0..7 {
            xnum = (xnum + C[i]) * y;
            xden = (xden + D[i]) * y;
        }
        result = (xnum + C[7]) / (xden + D[7]);
        if flavor != Flavor::Erfcx {
            result *= scaled_exp_neg_sq(y);
        }
    } else {
        if y >= XBIG {
            if flavor != Flavor::Erfcx || y >= XMAX {
                return finish_tail(x, 0.0, flavor);
            }
            if y >= XHUGE {
                return finish_tail(x, SQRPI / y, flavor);
            }
        }
        let ysq = 1.0 / (y * y);
        let mut xnum = P[5] * ysq;
        let mut xden = ysq;
        for i in 0..4 {
            xnum = (xnum + P[i]) * ysq;
            xden = (xden + Q[i]) * ysq;
        }
        result = ysq * (xnum + P[4]) / (xden + Q[4]);
        result = (SQRPI - result) / y;
        if flavor != Flavor::Erfcx {
            result *= scaled_exp_neg_sq(y);
        }
    }
    finish_tail(x, result, flavor)
}

/// `exp(-y^2)` with the argument split to limit rounding error.
fn scaled_exp_neg_sq(y: f64) -> f64 {
    let ysq = (y * 16.0).trunc() / 16.0;
    let del = (y - ysq) * (y + ysq);
    (-ysq * ysq).exp() * (-del).exp()
}

/// Applies the reflection for negative arguments to a positive-argument
/// tail value.
fn finish_tail(x: f64, result: f64, flavor: Flavor) -> f64 {
    match flavor {
        Flavor::Erf => {
            let r = (0.5 - result) + 0.5;
            if x < 0.0 {
                -r
            } else {
                r
            }
        }
        Flavor::Erfc => {
            if x < 0.0 {
                2.0 - result
            } else {
                result
            }
        }
        Flavor::Erfcx => {
            if x < 0.0 {
                if x < -26.628 {
                    f64::INFINITY
                } else {
                    let ysq = (x * 16.0).trunc() / 16.0;
                    let del = (x - ysq) * (x + ysq);
                    let y = (ysq * ysq).exp() * del.exp();
                    (y + y) - result
                }
            } else {
                result
            }
        }
    }
}

pub fn erf(x: f64) -> f64 {
    calerf(x, Flavor::Erf)
}

pub fn erfc(x: f64) -> f64 {
    calerf(x, Flavor::Erfc)
}

/// Scaled complementary error function `exp(x^2) * erfc(x)`.
pub fn erfcx(x: f64) -> f64 {
    if x == f64::INFINITY {
        return 0.0;
    }
    calerf(x, Flavor::Erfcx)
}

/// Standard normal CDF.
pub fn cdf(x: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

/// Standard normal upper tail `Q(x) = 1 - cdf(x)`.
pub fn sf(x: f64) -> f64 {
    0.5 * erfc(x * FRAC_1_SQRT_2)
}

pub fn ln_pdf(x: f64) -> f64 {
    -0.5 * x * x - LN_SQRT_2PI
}

/// Mills ratio `Q(x) / phi(x)`; `+inf` input gives 0.
pub fn mills_ratio(x: f64) -> f64 {
    (PI / 2.0).sqrt() * erfcx(x / SQRT_2)
}

const GL_POINTS: usize = 16;

/// Gauss-Legendre nodes and weights on [-1, 1].
fn gauss_legendre() -> &'static [(f64, f64); GL_POINTS] {
    static RULE: OnceLock<[(f64, f64); GL_POINTS]> = OnceLock::new();
    RULE.get_or_init(|| {
        let n = GL_POINTS;
        let mut rule = [(0.0, 0.0); GL_POINTS];
        for i in 0..n.div_ceil(2) {
            let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, 0.0);
                for j in 0..n {
                    let p2 = p1;
                    p1 = p0;
                    p0 = ((2.0 * j as f64 + 1.0) * z * p1 - j as f64 * p2) / (j as f64 + 1.0);
                }
                dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
                let step = p0 / dp;
                z -= step;
                if step.abs() < 1e-16 {
                    break;
                }
            }
            let w = 2.0 / ((1.0 - z * z) * dp * dp);
            rule[i] = (-z, w);
            rule[n - 1 - i] = (z, w);
        }
        rule
    })
}

/// Largest width (scaled by the distance to the mode) treated by quadrature.
const NARROW: f64 = 0.5;

/// `ln P(lo < Z < hi)` for standard normal `Z`; `-inf` for an empty interval.
pub fn ln_interval_mass(lo: f64, hi: f64) -> f64 {
    if lo.is_nan() || hi.is_nan() {
        return f64::NAN;
    }
    if !(lo < hi) {
        return f64::NEG_INFINITY;
    }
    if hi <= 0.0 {
        return ln_interval_mass(-hi, -lo);
    }
    let width = hi - lo;
    let anchor = if lo >= 0.0 { lo } else { 0.0 };
    if width.is_finite() && width <= NARROW / anchor.max(1.0) {
        // Integrate exp(-(x^2 - anchor^2) / 2), which is at most 1 and at least
        // about exp(-0.625) on this interval.
        let mid = 0.5 * (lo + hi);
        let half = 0.5 * width;
        let integral: f64 = gauss_legendre()
            .iter()
            .map(|&(node, w)| {
                let x = mid + half * node;
                w * (-0.5 * (x - anchor) * (x + anchor)).exp()
            })
            .sum::<f64>()
            * half;
        return ln_pdf(anchor) + integral.ln();
    }
    if lo >= 0.0 {
        let upper = if hi.is_infinite() {
            0.0
        } else {
            mills_ratio(hi) * (-0.5 * (hi - lo) * (hi + lo)).exp()
        };
        return ln_pdf(lo) + (mills_ratio(lo) - upper).ln();
    }
    // Straddles zero and is wide: both tails are at most one half.
    (-(sf(hi) + sf(-lo))).ln_1p()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let rule = gauss_legendre();
        let w: f64 = rule.iter().map(|p| p.1).sum();
        assert!((w - 2.0).abs() < 1e-14);
        let x30: f64 = rule.iter().map(|&(x, w)| w * x.powi(30)).sum();
        assert!((x30 - 2.0 / 31.0).abs() < 1e-14);
    }

    #[test]
    fn symmetric_identities() {
        for &x in &[-3.0, -0.2, 0.0, 0.4, 1.7, 5.0] {
            assert!((cdf(x) + sf(x) - 1.0).abs() < 1e-15);
            assert!((erf(x) + erfc(x) - 1.0).abs() < 1e-15);
        }
        assert_eq!(cdf(0.0), 0.5);
        assert_eq!(erfcx(f64::INFINITY), 0.0);
        assert_eq!(mills_ratio(f64::INFINITY), 0.0);
    }

    #[test]
    fn interval_mass_limits() {
        assert_eq!(ln_interval_mass(1.0, 1.0), f64::NEG_INFINITY);
        assert_eq!(ln_interval_mass(f64::NEG_INFINITY, f64::INFINITY), 0.0);
        assert!((ln_interval_mass(0.0, f64::INFINITY) - 0.5f64.ln()).abs() < 1e-15);
        assert!((ln_interval_mass(f64::NEG_INFINITY, 0.0) - 0.5f64.ln()).abs() < 1e-15);
    }
}
