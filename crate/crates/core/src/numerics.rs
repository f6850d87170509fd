//! Scalar special functions and adaptive quadrature.

use std::collections::BinaryHeap;
use std::f64::consts::{PI, SQRT_2};

use crate::error::{Error, Result};

/// Gaussian tail probability `Q(x) = P(N(0,1) > x)`.
///
/// Evaluated through `erfc`, which keeps relative accuracy deep into the tail.
pub fn qfunc(x: f64) -> f64 {
    0.5 * libm::erfc(x / SQRT_2)
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    qfunc(-x)
}

/// Density of `N(0, var)` at `x`.
pub fn normal_pdf(x: f64, var: f64) -> f64 {
    (-x * x / (2.0 * var)).exp() / (2.0 * PI * var).sqrt()
}

/// `ln(1 + e^t)` without overflow.
#[inline]
pub fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

const GK_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const GK_WEIGHTS: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
// Gauss 7-point weights, attached to GK_NODES[1], [3], [5], [7].
const G_WEIGHTS: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(mid);
    let mut kronrod = fc * GK_WEIGHTS[7];
    let mut gauss = fc * G_WEIGHTS[3];
    for j in 0..7 {
        let dx = half * GK_NODES[j];
        let s = f(mid - dx) + f(mid + dx);
        kronrod += GK_WEIGHTS[j] * s;
        if j % 2 == 1 {
            gauss += G_WEIGHTS[j / 2] * s;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

struct Piece {
    lo: f64,
    hi: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.err.total_cmp(&other.err).is_eq()
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.err.total_cmp(&other.err)
    }
}

/// Globally adaptive Gauss-Kronrod (7/15) quadrature of `f` over `[a, b]`.
///
/// Refines the interval with the largest error estimate until the summed
/// estimate is below `abs_tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64) -> Result<f64> {
    const MAX_INTERVALS: usize = 20_000;
    let (value, err) = gk15(&f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Piece { lo: a, hi: b, value, err });
    let mut total_err = err;
    while !(total_err <= abs_tol) {
        if !total_err.is_finite() {
            total_err = heap.iter().map(|p| p.err).sum();
        }
        if heap.len() >= MAX_INTERVALS || !total_err.is_finite() {
            let estimate = heap.iter().map(|p| p.value).sum();
            return Err(Error::QuadratureFailure { tol: abs_tol, estimate, error: total_err });
        }
        let worst = heap.pop().expect("non-empty");
        let mid = 0.5 * (worst.lo + worst.hi);
        let (lv, le) = gk15(&f, worst.lo, mid);
        let (rv, re) = gk15(&f, mid, worst.hi);
        heap.push(Piece { lo: worst.lo, hi: mid, value: lv, err: le });
        heap.push(Piece { lo: mid, hi: worst.hi, value: rv, err: re });
        total_err += le + re - worst.err;
        // the running sum drifts; recompute before declaring convergence
        if total_err <= abs_tol {
            total_err = heap.iter().map(|p| p.err).sum();
        }
    }
    Ok(heap.iter().map(|p| p.value).sum())
}

/// Mean and standard error (sample std / sqrt(n)) of a slice.
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn qfunc_reference_values() {
        assert!((qfunc(0.0) - 0.5).abs() < 1e-15);
        // Q(5) = 2.866515718791939e-7
        assert!((qfunc(5.0) / 2.866_515_718_791_939e-7 - 1.0).abs() < 1e-12);
        // Q(10) = 7.619853024160527e-24
        assert!((qfunc(10.0) / 7.619_853_024_160_527e-24 - 1.0).abs() < 1e-12);
        assert!((qfunc(-1.0) + qfunc(1.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn integrates_polynomials_and_gaussians() {
        let v = integrate(|x| x * x, 0.0, 3.0, 1e-12).unwrap();
        assert!((v - 9.0).abs() < 1e-12);
        let g = integrate(|x| normal_pdf(x, 2.0), -30.0, 30.0, 1e-12).unwrap();
        assert!((g - 1.0).abs() < 1e-11);
    }

    #[test]
    fn reports_failure_when_tolerance_unmet() {
        let r = integrate(|x| if x < 0.3 { f64::NAN } else { x }, 0.0, 1.0, 1e-12);
        assert!(matches!(r, Err(Error::QuadratureFailure { .. })), "{r:?}");
        let r = integrate(|x| (x * 40.0).sin().exp(), 0.0, 1.0, 0.0);
        assert!(matches!(r, Err(Error::QuadratureFailure { .. })), "{r:?}");
    }

    #[test]
    fn softplus_is_stable() {
        assert!((softplus(0.0) - 2f64.ln()).abs() < 1e-15);
        assert_eq!(softplus(1000.0), 1000.0);
        assert!(softplus(-1000.0) >= 0.0);
    }
}
