//! Scalar modulo-lattice quantization with a shared dither.
//!
//! The encoder sees `x' = (alpha x + d) mod A`, picks an M-ASK point `u`
//! with probability proportional to `q((u - x') mod A)`, and the decoder
//! reconstructs `x^ = y + alpha ((u - y') mod A)` from `y' = (alpha y + d) mod A`.

mod bound;
mod entropy;
mod shaping;

pub use bound::{distortion_upper_bound, simulate_ideal_pipeline, BoundTerms, IdealPipeline, PipelineSample, PipelineStats};
pub use entropy::{achieved_rate, entropy_zprime_numeric, entropy_ztilde_numeric, ZprimeDensity};
pub use shaping::{
    bound_extrema, fold_density, sample_ztilde, shaping_posterior, shaping_posterior_into, tg_entropy_q,
    tg_second_moment, ShapingDensity, ZtildeSampler,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::qfunc;

/// Reduce `x` into `[-A/2, A/2)`; returns the residue and the shift count `k`
/// with `x = residue + k A`.
pub fn mod_reduce(x: f64, a: f64) -> (f64, i64) {
    debug_assert!(a > 0.0);
    let k = ((x + 0.5 * a) / a).floor();
    let mut r = x - k * a;
    let mut k = k as i64;
    // floor() can land one step off when x + A/2 rounds
    if r >= 0.5 * a {
        r -= a;
        k += 1;
    } else if r < -0.5 * a {
        r += a;
        k -= 1;
    }
    (r, k)
}

/// Residue of `x` in `[-A/2, A/2)`.
#[inline]
pub fn mod_a(x: f64, a: f64) -> f64 {
    mod_reduce(x, a).0
}

/// Modulo interval, ASK order and shaping/noise variances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct LatticeParams {
    a: f64,
    m: usize,
    sigma2_d: f64,
    sigma2_z: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParams {
    a: f64,
    m: usize,
    sigma2_d: f64,
    sigma2_z: f64,
}

impl TryFrom<RawParams> for LatticeParams {
    type Error = Error;
    fn try_from(r: RawParams) -> Result<Self> {
        LatticeParams::new(r.a, r.m, r.sigma2_d, r.sigma2_z)
    }
}

impl From<LatticeParams> for RawParams {
    fn from(p: LatticeParams) -> Self {
        RawParams { a: p.a, m: p.m, sigma2_d: p.sigma2_d, sigma2_z: p.sigma2_z }
    }
}

impl LatticeParams {
    pub fn new(a: f64, m: usize, sigma2_d: f64, sigma2_z: f64) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::InvalidParams(format!("A must be positive, got {a}")));
        }
        if m < 2 || !m.is_power_of_two() {
            return Err(Error::InvalidParams(format!("M must be a power of two >= 2, got {m}")));
        }
        if !(sigma2_z > 0.0 && sigma2_z.is_finite()) {
            return Err(Error::InvalidParams(format!("sigma2_z must be positive, got {sigma2_z}")));
        }
        if !(sigma2_d > 0.0 && sigma2_d < sigma2_z) {
            return Err(Error::InvalidParams(format!(
                "need 0 < sigma2_d < sigma2_z, got sigma2_d={sigma2_d}, sigma2_z={sigma2_z}"
            )));
        }
        let p = Self { a, m, sigma2_d, sigma2_z };
        if !(p.c() > 0.0 && p.c() <= 1.0) {
            return Err(Error::InvalidParams(format!("truncation mass c={} out of range", p.c())));
        }
        Ok(p)
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn sigma2_d(&self) -> f64 {
        self.sigma2_d
    }

    pub fn sigma2_z(&self) -> f64 {
        self.sigma2_z
    }

    /// Half the ASK spacing, `A / (2M)`.
    pub fn kappa(&self) -> f64 {
        self.a / (2.0 * self.m as f64)
    }

    /// Inflation factor `sqrt(1 - sigma2_d / sigma2_z)`.
    pub fn alpha(&self) -> f64 {
        (1.0 - self.sigma2_d / self.sigma2_z).sqrt()
    }

    /// Mass of `N(0, sigma2_d)` inside `[-A/2, A/2)`.
    pub fn c(&self) -> f64 {
        1.0 - 2.0 * qfunc(self.a / (2.0 * self.sigma2_d.sqrt()))
    }

    pub fn with_sigma2_d(&self, sigma2_d: f64) -> Result<Self> {
        Self::new(self.a, self.m, sigma2_d, self.sigma2_z)
    }

    /// Number of bit levels, `log2 M`.
    pub fn levels(&self) -> usize {
        self.m.trailing_zeros() as usize
    }
}

/// The M-ASK points `-A/2 + (2k+1) kappa`, `k = 0..M`.
pub fn ask_alphabet(p: &LatticeParams) -> Vec<f64> {
    let kappa = p.kappa();
    (0..p.m).map(|k| -0.5 * p.a + (2 * k + 1) as f64 * kappa).collect()
}

/// One draw of the derived (dithered, reduced) source.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedSample {
    pub x_prime: f64,
    pub y_prime: f64,
    pub dither: f64,
    pub raw_x: f64,
    pub raw_y: f64,
    pub raw_z: f64,
}

/// `x' = (alpha x + d) mod A`, `y' = (alpha y + d) mod A` with one shared dither.
pub fn derive_source(x: f64, y: f64, dither: f64, p: &LatticeParams) -> DerivedSample {
    let alpha = p.alpha();
    DerivedSample {
        x_prime: mod_a(alpha * x + dither, p.a),
        y_prime: mod_a(alpha * y + dither, p.a),
        dither,
        raw_x: x,
        raw_y: y,
        raw_z: x - y,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn mod_reduce_examples() {
        let (r, k) = mod_reduce(3.7, 2.0);
        assert!((r + 0.3).abs() < 1e-12 && k == 2);
        assert_eq!(mod_reduce(-1.0, 2.0), (-1.0, 0));
        assert_eq!(mod_reduce(1.0, 2.0), (-1.0, 1));
    }

    #[test]
    fn alphabet_examples() {
        let p = LatticeParams::new(10.0, 4, 1.0, 2.0).unwrap();
        assert_eq!(ask_alphabet(&p), vec![-3.75, -1.25, 1.25, 3.75]);
        let p = LatticeParams::new(2.0, 2, 0.1, 1.0).unwrap();
        assert_eq!(ask_alphabet(&p), vec![-0.5, 0.5]);
        let p = LatticeParams::new(12.0, 8, 0.5, 2.0).unwrap();
        assert!(ask_alphabet(&p).iter().sum::<f64>().abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_params() {
        assert!(LatticeParams::new(10.0, 8, 2.0, 2.0).is_err());
        assert!(LatticeParams::new(10.0, 6, 0.5, 2.0).is_err());
        assert!(LatticeParams::new(-1.0, 8, 0.5, 2.0).is_err());
        assert!(LatticeParams::new(10.0, 8, 0.0, 2.0).is_err());
    }

    #[test]
    fn derive_source_examples() {
        let p = LatticeParams::new(10.0, 8, 0.5, 2.0).unwrap();
        let s = derive_source(1.0, 1.0, 0.0, &p);
        assert_eq!(s.x_prime, p.alpha());
        assert_eq!(s.x_prime, s.y_prime);
        let s = derive_source(-3.0, 7.0, 1.2, &p);
        assert!(s.x_prime >= -5.0 && s.x_prime < 5.0);
        assert!(s.y_prime >= -5.0 && s.y_prime < 5.0);
        assert_eq!(s.raw_z, -10.0);
    }

    proptest! {
        #[test]
        fn mod_reduce_range_and_equivariance(x in -1e6f64..1e6, a in 0.01f64..100.0, k in -1000i64..1000) {
            let (r, shift) = mod_reduce(x, a);
            prop_assert!(r >= -0.5 * a && r < 0.5 * a);
            prop_assert!((r + shift as f64 * a - x).abs() <= 1e-9 * x.abs().max(a));
            // idempotent
            prop_assert_eq!(mod_reduce(r, a).0, r);
            let shifted = mod_a(x + k as f64 * a, a);
            let d = (shifted - r).abs();
            // equal up to rounding, or wrapped across the open right endpoint
            prop_assert!(d <= 1e-6 * (x.abs() + a * k.abs() as f64 + 1.0) || (d - a).abs() <= 1e-6 * (x.abs() + a * k.abs() as f64 + 1.0));
        }
    }
}
