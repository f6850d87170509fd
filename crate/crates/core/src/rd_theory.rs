//! Gaussian rate-distortion functions, test channels and reverse waterfilling.
//!
//! Rates are in bits throughout.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check_distortion(d: f64) -> Result<()> {
    if d > 0.0 && d.is_finite() {
        Ok(())
    } else {
        Err(Error::DomainError(format!("distortion must be positive, got {d}")))
    }
}

fn check_variance(v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::DomainError(format!("variance must be positive, got {v}")))
    }
}

/// `R(D) = max(0, 1/2 log2(sigma2 / D))` for a Gaussian source.
pub fn rd_gaussian(sigma2: f64, d: f64) -> Result<f64> {
    check_variance(sigma2)?;
    check_distortion(d)?;
    Ok(if d < sigma2 { 0.5 * (sigma2 / d).log2() } else { 0.0 })
}

/// Conditional RD function; identical in form to [`rd_gaussian`] with the
/// conditional variance in place of the marginal one.
pub fn rd_conditional(sigma2_x_given_y: f64, d: f64) -> Result<f64> {
    rd_gaussian(sigma2_x_given_y, d)
}

/// Forward test channel `X^ = gain * X + Z^`; returns `(gain, var(Z^))`.
pub fn forward_channel_params(sigma2: f64, d: f64) -> Result<(f64, f64)> {
    check_variance(sigma2)?;
    check_distortion(d)?;
    if d < sigma2 {
        let gain = 1.0 - d / sigma2;
        Ok((gain, gain * d))
    } else {
        Ok((0.0, 0.0))
    }
}

/// One eigencomponent of a waterfilling allocation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaterfillComponent {
    pub lambda_i: f64,
    pub rate_i: f64,
    pub distortion_i: f64,
    pub active: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaterfillPlan {
    /// Water level; for an all-inactive plan this is the largest component
    /// variance.
    pub level_lambda: f64,
    pub per_component: Vec<WaterfillComponent>,
}

impl WaterfillPlan {
    pub fn total_rate(&self) -> f64 {
        self.per_component.iter().map(|c| c.rate_i).sum()
    }

    pub fn total_distortion(&self) -> f64 {
        self.per_component.iter().map(|c| c.distortion_i).sum()
    }
}

/// Reverse waterfilling over component variances `lambdas` for a total
/// distortion `d`.
pub fn reverse_waterfill(lambdas: &[f64], d: f64) -> Result<WaterfillPlan> {
    check_distortion(d)?;
    if lambdas.is_empty() {
        return Err(Error::DomainError("no components".into()));
    }
    for &l in lambdas {
        check_variance(l)?;
    }
    let total: f64 = lambdas.iter().sum();
    let max = lambdas.iter().cloned().fold(f64::MIN, f64::max);
    let min = lambdas.iter().cloned().fold(f64::MAX, f64::min);

    let level = if d >= total {
        max
    } else {
        let filled = |lev: f64| lambdas.iter().map(|&l| l.min(lev)).sum::<f64>();
        let (mut lo, mut hi) = (min * 1e-15, max);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if filled(mid) < d {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-15 * hi {
                break;
            }
        }
        // The filled curve is piecewise linear; solve exactly on the final
        // segment so the distortion constraint holds to rounding.
        let approx = 0.5 * (lo + hi);
        let below: Vec<f64> = lambdas.iter().cloned().filter(|&l| l <= approx).collect();
        let above = lambdas.len() - below.len();
        let exact = (d - below.iter().sum::<f64>()) / above.max(1) as f64;
        if above > 0 && (exact - approx).abs() <= 1e-9 * approx {
            exact
        } else {
            approx
        }
    };

    let per_component = lambdas
        .iter()
        .map(|&l| {
            let active = d < total && level < l;
            WaterfillComponent {
                lambda_i: l,
                rate_i: if active { 0.5 * (l / level).log2() } else { 0.0 },
                distortion_i: if active { level } else { l },
                active,
            }
        })
        .collect();
    Ok(WaterfillPlan { level_lambda: level, per_component })
}

/// Parameters of the Gaussian Wyner-Ziv test channel `U = X + Zcheck`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WzChannelParams {
    pub sigma2_x_given_y: f64,
    /// Description-noise variance.
    pub sigma2_check: f64,
    pub distortion: f64,
}

impl WzChannelParams {
    pub fn rate_bits(&self) -> f64 {
        0.5 * (self.sigma2_x_given_y / self.distortion).log2()
    }
}

pub fn wz_test_channel(sigma2_x_given_y: f64, d: f64) -> Result<WzChannelParams> {
    check_variance(sigma2_x_given_y)?;
    check_distortion(d)?;
    if d >= sigma2_x_given_y {
        return Err(Error::DomainError(format!(
            "distortion {d} must be below the conditional variance {sigma2_x_given_y}"
        )));
    }
    Ok(WzChannelParams {
        sigma2_x_given_y,
        sigma2_check: sigma2_x_given_y * d / (sigma2_x_given_y - d),
        distortion: d,
    })
}

/// MMSE estimate `E[X | U, Y]` under the Gaussian test channel.
pub fn wz_estimate(u: f64, ex_given_y: f64, params: &WzChannelParams) -> f64 {
    let s = params.sigma2_x_given_y;
    let c = params.sigma2_check;
    (s * u + c * ex_given_y) / (s + c)
}
