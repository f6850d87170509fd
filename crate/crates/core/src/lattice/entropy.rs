use std::f64::consts::{LN_2, PI};

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::{fold_density, LatticeParams, ShapingDensity};
use crate::error::{Error, Result};
use crate::numerics::integrate;

/// `h(Z~) = -∫ (q/d) ln(q/d)` over `[-A/2, A/2)`, integrated one fold period at a time
/// so that the integrand is smooth on every piece.
pub fn entropy_ztilde_numeric(q: &ShapingDensity, p: &LatticeParams) -> Result<f64> {
    const TOL: f64 = 1e-8;
    let a = p.a();
    let m = p.m();
    let period = 2.0 * p.kappa();
    let f = |z: f64| {
        let v = q.evaluate(z) / fold_density(z, q, p);
        if v > 0.0 {
            -v * v.ln()
        } else {
            0.0
        }
    };
    let mut total = 0.0;
    for j in 0..m {
        let lo = -0.5 * a + j as f64 * period;
        total += integrate(f, lo, lo + period, TOL / m as f64)?;
    }
    Ok(total)
}

/// Tabulated density of `Z' = (Z~ + alpha Z) mod A` on a uniform periodic grid.
#[derive(Debug, Clone)]
pub struct ZprimeDensity {
    a: f64,
    values: Vec<f64>,
}

impl ZprimeDensity {
    /// Grid size used by the decoder tables.
    pub const DEFAULT_GRID: usize = 1 << 14;

    /// Circular convolution of `p_Z~` with the wrapped `N(0, alpha^2 sigma2_z)` kernel
    /// on `n` points; `n` is a power of two and at least `M`.
    pub fn new(q: &ShapingDensity, p: &LatticeParams, n: usize) -> Result<Self> {
        if !n.is_power_of_two() || n < p.m() {
            return Err(Error::InvalidParams(format!("grid size {n} must be a power of two >= M")));
        }
        let a = p.a();
        let h = a / n as f64;
        let grid = |j: usize| -0.5 * a + j as f64 * h;

        // d has period A/M, which is an integer number of grid steps
        let steps = n / p.m();
        let fold: Vec<f64> = (0..steps).map(|j| fold_density(grid(j), q, p)).collect();
        let ztilde: Vec<f64> = (0..n).map(|j| q.evaluate(grid(j)) / fold[j % steps]).collect();

        let s2 = p.alpha().powi(2) * p.sigma2_z();
        let mut kernel: Vec<f64> = (0..n)
            .map(|m| {
                let t = if m < n / 2 { m as f64 * h } else { (m as f64 - n as f64) * h };
                wrapped_gaussian(t, s2, a)
            })
            .collect();
        // exact discrete normalization keeps a sub-grid kernel a unit impulse
        let mass: f64 = kernel.iter().sum::<f64>() * h;
        if !(mass > 0.0) {
            kernel.iter_mut().for_each(|k| *k = 0.0);
            kernel[0] = 1.0 / h;
        } else {
            kernel.iter_mut().for_each(|k| *k /= mass);
        }

        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let mut fa: Vec<Complex<f64>> = ztilde.iter().map(|&v| Complex::new(v, 0.0)).collect();
        let mut fb: Vec<Complex<f64>> = kernel.iter().map(|&v| Complex::new(v, 0.0)).collect();
        fwd.process(&mut fa);
        fwd.process(&mut fb);
        for (x, y) in fa.iter_mut().zip(&fb) {
            *x *= y;
        }
        inv.process(&mut fa);
        let scale = h / n as f64;
        let mut values: Vec<f64> = fa.iter().map(|c| (c.re * scale).max(0.0)).collect();
        let total: f64 = values.iter().sum::<f64>() * h;
        values.iter_mut().for_each(|v| *v /= total);
        Ok(Self { a, values })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn grid_len(&self) -> usize {
        self.values.len()
    }

    /// Density at `z`, linearly interpolated and periodic in `A`.
    pub fn eval(&self, z: f64) -> f64 {
        let n = self.values.len();
        let t = (z + 0.5 * self.a) / self.a * n as f64;
        let t = t.rem_euclid(n as f64);
        let j = (t.floor() as usize).min(n - 1);
        let frac = t - j as f64;
        self.values[j] * (1.0 - frac) + self.values[(j + 1) % n] * frac
    }

    /// Riemann-sum differential entropy in nats.
    pub fn entropy(&self) -> f64 {
        let h = self.a / self.values.len() as f64;
        -self.values.iter().filter(|&&v| v > 0.0).map(|&v| v * v.ln()).sum::<f64>() * h
    }
}

/// `sum_k N(t + kA; s2)`.
fn wrapped_gaussian(t: f64, s2: f64, a: f64) -> f64 {
    if s2 <= 0.0 {
        return 0.0;
    }
    let reach = (10.0 * s2.sqrt() / a).ceil() as i64 + 1;
    let norm = 1.0 / (2.0 * PI * s2).sqrt();
    (-reach..=reach).map(|k| {
        let u = t + k as f64 * a;
        (-u * u / (2.0 * s2)).exp()
    }).sum::<f64>()
        * norm
}

/// `h(Z')` in nats from the grid convolution, checked by doubling the grid.
pub fn entropy_zprime_numeric(q: &ShapingDensity, p: &LatticeParams) -> Result<f64> {
    const TOL: f64 = 1e-6;
    let coarse = ZprimeDensity::new(q, p, ZprimeDensity::DEFAULT_GRID)?.entropy();
    let fine = ZprimeDensity::new(q, p, 2 * ZprimeDensity::DEFAULT_GRID)?.entropy();
    let err = (fine - coarse).abs();
    if !(err <= TOL) {
        return Err(Error::QuadratureFailure { tol: TOL, estimate: fine, error: err });
    }
    Ok(fine)
}

/// `I(U;X') - I(U;Y') = (h(Z') - h(Z~)) / ln 2`, in bits.
pub fn achieved_rate(q: &ShapingDensity, p: &LatticeParams) -> Result<f64> {
    Ok((entropy_zprime_numeric(q, p)? - entropy_ztilde_numeric(q, p)?) / LN_2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{bound_extrema, sample_ztilde, tg_entropy_q};

    #[test]
    fn uniform_entropies_are_log_a() {
        let p = LatticeParams::new(10.0, 8, 0.5, 2.0).unwrap();
        let q = ShapingDensity::uniform(10.0);
        assert!((entropy_ztilde_numeric(&q, &p).unwrap() - 10f64.ln()).abs() < 1e-8);
        assert!((entropy_zprime_numeric(&q, &p).unwrap() - 10f64.ln()).abs() < 1e-6);
        assert!(achieved_rate(&q, &p).unwrap().abs() < 1e-6);
    }

    #[test]
    fn ztilde_tends_to_shaping_entropy() {
        let p = LatticeParams::new(10.0, 2048, 0.5, 2.0).unwrap();
        let q = ShapingDensity::truncated_gaussian(&p);
        assert!((entropy_ztilde_numeric(&q, &p).unwrap() - tg_entropy_q(&p)).abs() < 1e-6);
    }

    #[test]
    fn ztilde_matches_monte_carlo_plugin() {
        let p = LatticeParams::new(10.0, 8, 0.5, 2.0).unwrap();
        let q = ShapingDensity::truncated_gaussian(&p);
        let h = entropy_ztilde_numeric(&q, &p).unwrap();
        let (_, dmax) = bound_extrema(&q, &p).unwrap();
        // -E ln(q/d) over samples of Z~ estimates h(Z~)
        let s = sample_ztilde(&q, &p, 100_000, 11);
        let est = -s.iter().map(|&z| (q.evaluate(z) / fold_density(z, &q, &p)).ln()).sum::<f64>() / s.len() as f64;
        assert!((h - est).abs() < 0.01, "{h} vs {est}");
        assert!(h >= tg_entropy_q(&p) - dmax.ln() - 1e-9);
    }

    #[test]
    fn zprime_reduces_to_ztilde_without_channel_noise() {
        let p = LatticeParams::new(10.0, 16, 1.999_999_9, 2.0).unwrap();
        let q = ShapingDensity::truncated_gaussian(&p);
        let hz = entropy_ztilde_numeric(&q, &p).unwrap();
        let hp = ZprimeDensity::new(&q, &p, 1 << 15).unwrap().entropy();
        assert!((hz - hp).abs() < 1e-5, "{hz} {hp}");
    }

    #[test]
    fn rate_example_near_one_bit() {
        let p = LatticeParams::new(14.0, 32, 0.5, 2.0).unwrap();
        let q = ShapingDensity::truncated_gaussian(&p);
        let r = achieved_rate(&q, &p).unwrap();
        assert!((r - 1.0).abs() < 0.05, "{r}");
    }

    #[test]
    fn zprime_density_is_normalized_and_periodic() {
        let p = LatticeParams::new(12.0, 8, 0.8, 2.0).unwrap();
        let q = ShapingDensity::truncated_gaussian(&p);
        let d = ZprimeDensity::new(&q, &p, 4096).unwrap();
        assert!((d.eval(-6.0) - d.eval(6.0)).abs() < 1e-12);
        assert!((d.eval(1.3) - d.eval(1.3 + 12.0)).abs() < 1e-9);
        assert!(ZprimeDensity::new(&q, &p, 1000).is_err());
    }
}
