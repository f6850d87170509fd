use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{ask_alphabet, bound_extrema, mod_a, shaping_posterior_into, tg_second_moment, LatticeParams, ShapingDensity};
use crate::error::Result;
use crate::numerics::{mean_stderr, normal_pdf, qfunc};

/// Term-by-term breakdown of the distortion upper bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundTerms {
    pub sigma2_d: f64,
    /// Bound on the modulo-shift cross term.
    pub t_iz: f64,
    /// `alpha^2 (P_q / d_min - sigma2_d)`.
    pub shaping_excess: f64,
    pub d_min: f64,
    pub total: f64,
}

/// Upper bound on `E[(X - X^)^2]` for truncated Gaussian shaping.
pub fn distortion_upper_bound(p: &LatticeParams) -> Result<BoundTerms> {
    let q = ShapingDensity::truncated_gaussian(p);
    let (d_min, _) = bound_extrema(&q, p)?;
    let a = p.a();
    let s2z = p.sigma2_z();
    let c = p.c();
    let t_iz = 4.0 / (c * d_min)
        * (1.5 * a * s2z * normal_pdf(a / 2.0, s2z) + (s2z + a * a / 4.0) * qfunc(a / (2.0 * s2z.sqrt())));
    let shaping_excess = p.alpha().powi(2) * (tg_second_moment(p) / d_min - p.sigma2_d());
    Ok(BoundTerms {
        sigma2_d: p.sigma2_d(),
        t_iz,
        shaping_excess,
        d_min,
        total: p.sigma2_d() + t_iz + shaping_excess,
    })
}

/// One pass through the quantizer with the symbol drawn from the shaping
/// posterior and decoded without error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineSample {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub u: f64,
    /// `(u - y') mod A`.
    pub z_prime: f64,
    pub x_hat: f64,
}

/// Per-pipeline working state; reuses the alphabet and posterior buffer.
pub struct IdealPipeline {
    params: LatticeParams,
    q: ShapingDensity,
    alphabet: Vec<f64>,
    post: Vec<f64>,
    sigma_y: f64,
}

impl IdealPipeline {
    pub fn new(p: &LatticeParams, q: &ShapingDensity, sigma2_y: f64) -> Self {
        Self {
            params: *p,
            q: q.clone(),
            alphabet: ask_alphabet(p),
            post: vec![0.0; p.m()],
            sigma_y: sigma2_y.max(0.0).sqrt(),
        }
    }

    pub fn sample<R: Rng>(&mut self, rng: &mut R) -> Result<PipelineSample> {
        let p = &self.params;
        let a = p.a();
        let alpha = p.alpha();
        let y = self.sigma_y * rng.sample::<f64, _>(StandardNormal);
        let z = Normal::new(0.0, p.sigma2_z().sqrt()).expect("positive variance").sample(rng);
        let x = y + z;
        let dither = rng.random_range(-0.5 * a..0.5 * a);
        let x_prime = mod_a(alpha * x + dither, a);
        shaping_posterior_into(x_prime, &self.q, a, &self.alphabet, &mut self.post)?;
        let r: f64 = rng.random();
        let mut acc = 0.0;
        let mut idx = self.post.len() - 1;
        for (i, &w) in self.post.iter().enumerate() {
            acc += w;
            if r < acc {
                idx = i;
                break;
            }
        }
        let u = self.alphabet[idx];
        let y_prime = mod_a(alpha * y + dither, a);
        let z_prime = mod_a(u - y_prime, a);
        Ok(PipelineSample { x, y, z, u, z_prime, x_hat: y + alpha * z_prime })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineStats {
    pub mse: f64,
    pub stderr: f64,
    pub n: usize,
}

/// Monte Carlo distortion of the rate-unconstrained pipeline.
pub fn simulate_ideal_pipeline<R: Rng>(p: &LatticeParams, sigma2_y: f64, n: usize, rng: &mut R) -> Result<PipelineStats> {
    let q = ShapingDensity::truncated_gaussian(p);
    let mut pipe = IdealPipeline::new(p, &q, sigma2_y);
    let mut errs = Vec::with_capacity(n);
    for _ in 0..n {
        let s = pipe.sample(rng)?;
        errs.push((s.x - s.x_hat).powi(2));
    }
    let (mse, stderr) = mean_stderr(&errs);
    Ok(PipelineStats { mse, stderr, n })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn bound_example() {
        let p = LatticeParams::new(10.0, 64, 0.5, 1.0).unwrap();
        let b = distortion_upper_bound(&p).unwrap();
        // oracle terms evaluated independently at high precision
        assert!((b.total - 0.52430).abs() < 5e-5, "{b:?}");
        assert!((b.t_iz - 1.305e-4).abs() < 1e-6);
        assert!((b.d_min - 0.91185).abs() < 1e-5);
    }

    #[test]
    fn bound_approaches_sigma2_d() {
        let mut prev = f64::INFINITY;
        for &(a, m) in &[(10.0, 256), (20.0, 4096), (30.0, 65536)] {
            let p = LatticeParams::new(a, m, 0.5, 1.0).unwrap();
            let gap = distortion_upper_bound(&p).unwrap().total - 0.5;
            assert!(gap > 0.0 && gap < prev);
            prev = gap;
        }
        assert!(prev < 1e-3);
    }

    #[test]
    fn reconstruction_identity_and_bound() {
        let p = LatticeParams::new(10.0, 64, 0.5, 1.0).unwrap();
        let q = ShapingDensity::truncated_gaussian(&p);
        let mut pipe = IdealPipeline::new(&p, &q, 1.0);
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let s = pipe.sample(&mut rng).unwrap();
            assert!(((s.x - s.x_hat) - (s.z - p.alpha() * s.z_prime)).abs() < 1e-12);
        }
        let stats = simulate_ideal_pipeline(&p, 1.0, 100_000, &mut rng).unwrap();
        let bound = distortion_upper_bound(&p).unwrap().total;
        assert!(stats.mse <= bound + 3.0 * stats.stderr, "{stats:?} {bound}");
    }
}
