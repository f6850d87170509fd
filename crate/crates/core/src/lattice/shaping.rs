use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{ask_alphabet, mod_a, LatticeParams};
use crate::error::{Error, Result};
use crate::numerics::qfunc;

/// Shaping density `q` on `[-A/2, A/2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ShapingDensity {
    TruncatedGaussian { sigma2_d: f64, a: f64 },
    Uniform { a: f64 },
    /// Periodic piecewise-linear interpolation of samples at
    /// `-A/2 + j A / len`; normalized on construction.
    Tabulated { a: f64, values: Vec<f64> },
}

impl ShapingDensity {
    pub fn truncated_gaussian(p: &LatticeParams) -> Self {
        ShapingDensity::TruncatedGaussian { sigma2_d: p.sigma2_d(), a: p.a() }
    }

    pub fn uniform(a: f64) -> Self {
        ShapingDensity::Uniform { a }
    }

    pub fn tabulated(a: f64, values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 || values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidParams("tabulated density needs >= 2 finite nonnegative samples".into()));
        }
        let h = a / values.len() as f64;
        let mass: f64 = values.iter().sum::<f64>() * h;
        if !(mass > 0.0) {
            return Err(Error::InvalidParams("tabulated density has zero mass".into()));
        }
        Ok(ShapingDensity::Tabulated { a, values: values.into_iter().map(|v| v / mass).collect() })
    }

    pub fn a(&self) -> f64 {
        match self {
            ShapingDensity::TruncatedGaussian { a, .. } | ShapingDensity::Uniform { a } | ShapingDensity::Tabulated { a, .. } => *a,
        }
    }

    /// `q(z)`; zero outside `[-A/2, A/2)`.
    pub fn evaluate(&self, z: f64) -> f64 {
        match self {
            ShapingDensity::TruncatedGaussian { sigma2_d, a } => {
                if z < -0.5 * a || z >= 0.5 * a {
                    return 0.0;
                }
                let c = 1.0 - 2.0 * qfunc(a / (2.0 * sigma2_d.sqrt()));
                (-z * z / (2.0 * sigma2_d)).exp() / (c * (2.0 * PI * sigma2_d).sqrt())
            }
            ShapingDensity::Uniform { a } => {
                if z < -0.5 * a || z >= 0.5 * a {
                    0.0
                } else {
                    1.0 / a
                }
            }
            ShapingDensity::Tabulated { a, values } => {
                if z < -0.5 * a || z >= 0.5 * a {
                    return 0.0;
                }
                let n = values.len();
                let t = (z + 0.5 * a) / a * n as f64;
                let j = (t.floor() as usize).min(n - 1);
                let frac = t - j as f64;
                values[j] * (1.0 - frac) + values[(j + 1) % n] * frac
            }
        }
    }

    /// `ln q(z)` up to a `z`-independent constant; `-inf` where `q` vanishes.
    fn log_weight(&self, z: f64) -> f64 {
        match self {
            ShapingDensity::TruncatedGaussian { sigma2_d, .. } => -z * z / (2.0 * sigma2_d),
            _ => self.evaluate(z).ln(),
        }
    }

    /// `q(0)` for symmetric unimodal kinds.
    pub fn peak(&self) -> Option<f64> {
        match self {
            ShapingDensity::Tabulated { .. } => None,
            _ => Some(self.evaluate(0.0)),
        }
    }
}

/// `d(x) = 2 kappa sum_k q((x + 2 k kappa) mod A)`, periodic with period `2 kappa`.
pub fn fold_density(x: f64, q: &ShapingDensity, p: &LatticeParams) -> f64 {
    let kappa = p.kappa();
    let a = p.a();
    let base = mod_a(x, 2.0 * kappa);
    // base + 2 k kappa for k = 0..M covers each residue class once
    let mut s = 0.0;
    for k in 0..p.m() {
        s += q.evaluate(mod_a(base + (2 * k) as f64 * kappa, a));
    }
    2.0 * kappa * s
}

/// `P(u | x') ∝ q((u - x') mod A)` over the ASK alphabet.
pub fn shaping_posterior(x_prime: f64, q: &ShapingDensity, p: &LatticeParams) -> Result<Vec<f64>> {
    let alphabet = ask_alphabet(p);
    let mut out = vec![0.0; alphabet.len()];
    shaping_posterior_into(x_prime, q, p.a(), &alphabet, &mut out)?;
    Ok(out)
}

/// Allocation-free form of [`shaping_posterior`]; `out.len() == alphabet.len()`.
pub fn shaping_posterior_into(x_prime: f64, q: &ShapingDensity, a: f64, alphabet: &[f64], out: &mut [f64]) -> Result<()> {
    debug_assert_eq!(alphabet.len(), out.len());
    let mut best = f64::NEG_INFINITY;
    for (o, &u) in out.iter_mut().zip(alphabet) {
        *o = q.log_weight(mod_a(u - x_prime, a));
        best = best.max(*o);
    }
    if !best.is_finite() {
        return Err(Error::DegenerateShaping(x_prime));
    }
    let mut total = 0.0;
    for o in out.iter_mut() {
        *o = (*o - best).exp();
        total += *o;
    }
    for o in out.iter_mut() {
        *o /= total;
    }
    Ok(())
}

/// `(d_min, d_max) = 1 ∓ (A/M) q(0)` for symmetric unimodal `q`.
pub fn bound_extrema(q: &ShapingDensity, p: &LatticeParams) -> Result<(f64, f64)> {
    let peak = q
        .peak()
        .ok_or_else(|| Error::InvalidRegime("fold bounds need a symmetric unimodal shaping density".into()))?;
    let spread = p.a() / p.m() as f64 * peak;
    let d_min = 1.0 - spread;
    if !(d_min > 0.0) {
        return Err(Error::InvalidRegime(format!("d_min = {d_min} is not positive; increase M")));
    }
    Ok((d_min, 1.0 + spread))
}

/// Second moment of the truncated Gaussian shaping density.
pub fn tg_second_moment(p: &LatticeParams) -> f64 {
    let s2 = p.sigma2_d();
    let a = p.a();
    s2 * (1.0 - a * (-a * a / (8.0 * s2)).exp() / (p.c() * (2.0 * PI * s2).sqrt()))
}

/// Differential entropy (nats) of the truncated Gaussian shaping density.
pub fn tg_entropy_q(p: &LatticeParams) -> f64 {
    let s2 = p.sigma2_d();
    let c = p.c();
    0.5 * (2.0 * PI * std::f64::consts::E * s2 * c * c).ln() - 0.5 * (1.0 - tg_second_moment(p) / s2)
}

/// Rejection sampler for `p(z~) = q(z~) / d(z~)`.
#[derive(Debug, Clone)]
pub struct ZtildeSampler {
    q: ShapingDensity,
    params: LatticeParams,
    /// Lower bound on `d` used as the envelope constant.
    d_floor: f64,
}

impl ZtildeSampler {
    pub fn new(q: &ShapingDensity, p: &LatticeParams) -> Self {
        let d_floor = match bound_extrema(q, p) {
            Ok((d_min, _)) => d_min,
            // fall back to a dense scan over one period, with margin
            Err(_) => {
                let period = 2.0 * p.kappa();
                let scan = (0..4096)
                    .map(|i| fold_density(-0.5 * p.a() + period * i as f64 / 4096.0, q, p))
                    .fold(f64::INFINITY, f64::min);
                0.9 * scan
            }
        };
        Self { q: q.clone(), params: *p, d_floor }
    }

    fn propose<R: Rng>(&self, rng: &mut R) -> f64 {
        let a = self.params.a();
        match &self.q {
            ShapingDensity::TruncatedGaussian { sigma2_d, .. } => {
                let normal = Normal::new(0.0, sigma2_d.sqrt()).expect("positive variance");
                loop {
                    let z = normal.sample(rng);
                    if (-0.5 * a..0.5 * a).contains(&z) {
                        return z;
                    }
                }
            }
            _ => rng.random_range(-0.5 * a..0.5 * a),
        }
    }

    /// Acceptance probability of a proposal at `z`.
    fn accept_prob(&self, z: f64) -> f64 {
        let d = fold_density(z, &self.q, &self.params);
        match &self.q {
            ShapingDensity::Tabulated { values, .. } => {
                // proposal is uniform; envelope is max(q) / d_floor
                let qmax = values.iter().cloned().fold(0.0, f64::max);
                (self.q.evaluate(z) / d) / (qmax / self.d_floor)
            }
            _ => self.d_floor / d,
        }
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        loop {
            let z = self.propose(rng);
            if rng.random::<f64>() < self.accept_prob(z) {
                return z;
            }
        }
    }
}

/// `n` deterministic draws of `Z~` from `seed`.
pub fn sample_ztilde(q: &ShapingDensity, p: &LatticeParams, n: usize, seed: u64) -> Vec<f64> {
    let sampler = ZtildeSampler::new(q, p);
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    (0..n).map(|_| sampler.sample(&mut rng)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    }

    #[test]
    fn densities_integrate_to_one() {
        for &(s2, a) in &[(1.0, 10.0), (0.5, 6.0), (2.0, 4.0)] {
            let p = LatticeParams::new(a, 8, s2, s2 * 2.0).unwrap();
            let q = ShapingDensity::truncated_gaussian(&p);
            assert!((simpson(|z| q.evaluate(z), -a / 2.0, a / 2.0 - 1e-15, 20_000) - 1.0).abs() < 1e-9);
        }
        let t = ShapingDensity::tabulated(4.0, vec![1.0, 2.0, 3.0, 2.0]).unwrap();
        // piecewise linear on a periodic grid integrates exactly like the trapezoid sum
        assert!((simpson(|z| t.evaluate(z), -2.0, 2.0 - 1e-12, 40_000) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn posterior_example() {
        let p = LatticeParams::new(10.0, 4, 1.0, 2.0).unwrap();
        let q = ShapingDensity::truncated_gaussian(&p);
        let post = shaping_posterior(0.0, &q, &p).unwrap();
        // oracle: q at (u - 0) for u in {-3.75, -1.25, 1.25, 3.75}
        let w: Vec<f64> = [-3.75f64, -1.25, 1.25, 3.75].iter().map(|u| (-u * u / 2.0).exp()).collect();
        let s: f64 = w.iter().sum();
        for (pp, ww) in post.iter().zip(&w) {
            assert!((pp - ww / s).abs() < 1e-14);
        }
        assert!((post[0] - 9.6e-4).abs() < 1e-5 && (post[1] - 0.49904).abs() < 1e-5);
        assert!((post.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn uniform_posterior_and_fold() {
        let p = LatticeParams::new(10.0, 8, 1.0, 2.0).unwrap();
        let q = ShapingDensity::uniform(10.0);
        for x in [-5.0, -1.3, 0.0, 4.99] {
            let post = shaping_posterior(x, &q, &p).unwrap();
            assert!(post.iter().all(|v| (v - 0.125).abs() < 1e-15));
            assert!((fold_density(x, &q, &p) - 1.0).abs() < 1e-12);
        }
        let (dmin, _) = bound_extrema(&q, &p).unwrap();
        assert!((dmin - (1.0 - 1.0 / 8.0)).abs() < 1e-15);
    }

    #[test]
    fn marginal_of_u_is_uniform() {
        let p = LatticeParams::new(10.0, 8, 1.0, 2.0).unwrap();
        let q = ShapingDensity::truncated_gaussian(&p);
        let n = 20_000;
        let mut marg = vec![0.0; 8];
        for i in 0..n {
            let x = -5.0 + 10.0 * (i as f64 + 0.5) / n as f64;
            for (m, v) in marg.iter_mut().zip(shaping_posterior(x, &q, &p).unwrap()) {
                *m += v / n as f64;
            }
        }
        assert!(marg.iter().all(|m| (m - 0.125).abs() < 1e-6), "{marg:?}");
    }

    #[test]
    fn extrema_example_and_grid_scan() {
        let p = LatticeParams::new(10.0, 8, 1.0, 2.0).unwrap();
        let q = ShapingDensity::truncated_gaussian(&p);
        let (dmin, dmax) = bound_extrema(&q, &p).unwrap();
        let peak = 1.0 / (p.c() * (2.0 * PI).sqrt());
        assert!((dmin - (1.0 - 1.25 * peak)).abs() < 1e-14);
        assert!((dmin - 0.50132).abs() < 1e-5 && (dmax - 1.49868).abs() < 1e-5);
        let period = 2.0 * p.kappa();
        for i in 0..=2000 {
            let d = fold_density(period * i as f64 / 2000.0, &q, &p);
            assert!(d >= dmin - 1e-12 && d <= dmax + 1e-12);
        }
        // periodicity
        assert!((fold_density(0.3, &q, &p) - fold_density(0.3 + period, &q, &p)).abs() < 1e-12);
        let p = LatticeParams::new(10.0, 2, 1.0, 2.0).unwrap();
        assert!(matches!(bound_extrema(&ShapingDensity::truncated_gaussian(&p), &p), Err(Error::InvalidRegime(_))));
    }

    #[test]
    fn fold_tends_to_one() {
        let p = LatticeParams::new(10.0, 1024, 1.0, 2.0).unwrap();
        let q = ShapingDensity::truncated_gaussian(&p);
        for x in [-0.004, 0.0, 0.001] {
            assert!((fold_density(x, &q, &p) - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn tg_closed_forms_match_quadrature() {
        for &s2 in &[0.1, 0.5, 1.0, 2.0] {
            for &a in &[4.0, 6.0, 10.0, 20.0] {
                let p = LatticeParams::new(a, 8, s2, 4.0).unwrap();
                let q = ShapingDensity::truncated_gaussian(&p);
                let m2 = simpson(|z| z * z * q.evaluate(z), -a / 2.0, a / 2.0 - 1e-13, 40_000);
                assert!((tg_second_moment(&p) - m2).abs() < 1e-8, "{s2} {a}");
                let h = simpson(
                    |z| {
                        let v = q.evaluate(z);
                        if v > 0.0 { -v * v.ln() } else { 0.0 }
                    },
                    -a / 2.0,
                    a / 2.0 - 1e-13,
                    40_000,
                );
                assert!((tg_entropy_q(&p) - h).abs() < 1e-8, "{s2} {a}");
            }
        }
        let p = LatticeParams::new(10.0, 8, 1.0, 2.0).unwrap();
        assert!((tg_second_moment(&p) - 0.999_985_1).abs() < 1e-7);
        let p = LatticeParams::new(10.0, 8, 0.5, 2.0).unwrap();
        assert!((tg_second_moment(&p) - (0.5 - 3.9e-11)).abs() < 1e-12);
    }

    #[test]
    fn sampler_respects_envelope_moment() {
        let p = LatticeParams::new(10.0, 8, 1.0, 2.0).unwrap();
        let q = ShapingDensity::truncated_gaussian(&p);
        let s = sample_ztilde(&q, &p, 50_000, 3);
        let m2 = s.iter().map(|z| z * z).sum::<f64>() / s.len() as f64;
        let (dmin, _) = bound_extrema(&q, &p).unwrap();
        assert!(m2 <= tg_second_moment(&p) / dmin);
        assert_eq!(s, sample_ztilde(&q, &p, 50_000, 3));
    }
}
