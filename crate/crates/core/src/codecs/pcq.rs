use rand::Rng;
use serde::{Deserialize, Serialize};

use super::pcqmod::check_len;
use super::{coder::MultilevelCoder, EncodedMessage, TrialResult, WeightModel};
use crate::error::{Error, Result};
use crate::polar::{BitAllocation, Mode, SymbolWeights};

/// Undithered ASK quantizer parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PcqParams {
    pub spacing: f64,
    pub m: usize,
    /// Width of the encoder's Gaussian shaping posterior.
    pub sigma2_d: f64,
    /// Description-noise variance used by the reconstruction.
    pub sigma2_check: f64,
}

impl PcqParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.spacing > 0.0 && self.spacing.is_finite()) {
            return Err(Error::InvalidParams(format!("spacing must be positive, got {}", self.spacing)));
        }
        if self.m < 2 || !self.m.is_power_of_two() {
            return Err(Error::InvalidParams(format!("M must be a power of two >= 2, got {}", self.m)));
        }
        if !(self.sigma2_d > 0.0 && self.sigma2_d.is_finite()) {
            return Err(Error::InvalidParams(format!("sigma2_d must be positive, got {}", self.sigma2_d)));
        }
        if !(self.sigma2_check >= 0.0 && self.sigma2_check.is_finite()) {
            return Err(Error::InvalidParams(format!("sigma2_check must be nonnegative, got {}", self.sigma2_check)));
        }
        Ok(())
    }

    /// ASK points `(k - (M-1)/2) * spacing`.
    pub fn alphabet(&self) -> Vec<f64> {
        (0..self.m).map(|k| (k as f64 - 0.5 * (self.m - 1) as f64) * self.spacing).collect()
    }
}

/// `P(u | y)` tabulated on a uniform `y` grid and linearly interpolated.
#[derive(Debug, Clone)]
struct ChannelTable {
    y0: f64,
    h: f64,
    m: usize,
    rows: Vec<f64>,
}

impl ChannelTable {
    /// `P(u | y) = ∫ N(x; y, sigma2_z) P(u | x) dx` with `P(u | x)` the
    /// encoder's Gaussian posterior.
    fn new(params: &PcqParams, alphabet: &[f64], sigma2_y: f64, sigma2_z: f64) -> Self {
        let (sy, sz, sd) = (sigma2_y.sqrt(), sigma2_z.sqrt(), params.sigma2_d.sqrt());
        let m = params.m;
        let hx = sd.min(sz) / 8.0;
        let reach = 8.0 * sz;
        let y_max = 8.0 * sy;
        let x_max = y_max + reach;
        let nx = (2.0 * x_max / hx).ceil() as usize + 1;
        let xs: Vec<f64> = (0..nx).map(|j| -x_max + j as f64 * hx).collect();
        let mut pux = vec![0.0; nx * m];
        for (j, &x) in xs.iter().enumerate() {
            let row = &mut pux[j * m..(j + 1) * m];
            let mut best = f64::NEG_INFINITY;
            for (r, &u) in row.iter_mut().zip(alphabet) {
                *r = -(x - u).powi(2) / (2.0 * params.sigma2_d);
                best = best.max(*r);
            }
            let mut s = 0.0;
            for r in row.iter_mut() {
                *r = (*r - best).exp();
                s += *r;
            }
            row.iter_mut().for_each(|r| *r /= s);
        }
        let h = if sy > 0.0 { (sz / 40.0).min(hx * 4.0) } else { 1.0 };
        let ny = if sy > 0.0 { (2.0 * y_max / h).ceil() as usize + 1 } else { 1 };
        let y0 = if sy > 0.0 { -y_max } else { 0.0 };
        let mut rows = vec![0.0; ny * m];
        for i in 0..ny {
            let y = y0 + i as f64 * h;
            let lo = (((y - reach) + x_max) / hx).floor().max(0.0) as usize;
            let hi = ((((y + reach) + x_max) / hx).ceil() as usize).min(nx - 1);
            let row = &mut rows[i * m..(i + 1) * m];
            for j in lo..=hi {
                let k = (-(xs[j] - y).powi(2) / (2.0 * sigma2_z)).exp();
                for (r, p) in row.iter_mut().zip(&pux[j * m..(j + 1) * m]) {
                    *r += k * p;
                }
            }
            let s: f64 = row.iter().sum();
            row.iter_mut().for_each(|r| *r /= s);
        }
        Self { y0, h, m, rows }
    }

    fn eval_into(&self, y: f64, out: &mut [f64]) {
        let ny = self.rows.len() / self.m;
        let t = ((y - self.y0) / self.h).clamp(0.0, (ny - 1) as f64);
        let i = (t.floor() as usize).min(ny.saturating_sub(2));
        let frac = if ny == 1 { 0.0 } else { t - i as f64 };
        let a = &self.rows[i * self.m..(i + 1) * self.m];
        let b = &self.rows[(i + 1).min(ny - 1) * self.m..((i + 1).min(ny - 1) + 1) * self.m];
        for ((o, &pa), &pb) in out.iter_mut().zip(a).zip(b) {
            *o = pa * (1.0 - frac) + pb * frac;
        }
    }
}

/// Polar coded quantization directly on an ASK grid, without dither or modulo.
#[derive(Debug, Clone)]
pub struct PcqCodec {
    params: PcqParams,
    sigma2_z: f64,
    alphabet: Vec<f64>,
    table: ChannelTable,
    coder: MultilevelCoder,
    weights: SymbolWeights,
}

impl PcqCodec {
    pub fn new(params: PcqParams, sigma2_y: f64, sigma2_z: f64, alloc: BitAllocation, list_size: usize, encoder_mode: Mode) -> Result<Self> {
        params.validate()?;
        let levels = params.m.trailing_zeros() as usize;
        if alloc.levels.len() != levels {
            return Err(Error::DimensionMismatch { expected: levels, got: alloc.levels.len() });
        }
        let alphabet = params.alphabet();
        let table = ChannelTable::new(&params, &alphabet, sigma2_y, sigma2_z);
        let weights = SymbolWeights::new(alloc.n, params.m)?;
        Ok(Self {
            params,
            sigma2_z,
            alphabet,
            table,
            coder: MultilevelCoder::new(alloc, list_size, encoder_mode)?,
            weights,
        })
    }

    pub fn params(&self) -> &PcqParams {
        &self.params
    }

    pub fn alphabet(&self) -> &[f64] {
        &self.alphabet
    }

    pub fn encode<R: Rng>(&mut self, x: &[f64], rng: &mut R) -> Result<(EncodedMessage, Vec<usize>)> {
        let mut w = std::mem::replace(&mut self.weights, SymbolWeights::new(1, 2)?);
        let res = self.encoder_weights(x, x, &mut w).and_then(|_| self.coder.encode(&w, rng));
        self.weights = w;
        res
    }

    pub fn decode<R: Rng>(&mut self, msg: &EncodedMessage, y: &[f64], rng: &mut R) -> Result<(Vec<usize>, Vec<f64>)> {
        let mut w = std::mem::replace(&mut self.weights, SymbolWeights::new(1, 2)?);
        let res = self.decoder_weights(y, y, &mut w).and_then(|_| self.coder.decode(&w, msg, rng));
        self.weights = w;
        let labels = res?;
        let x_hat = self.reconstruct(&labels, y);
        Ok((labels, x_hat))
    }

    /// Gaussian test-channel combine `(s u + c y) / (s + c)` with
    /// `s = sigma2_z` (the conditional variance) and `c = sigma2_check`.
    pub fn reconstruct(&self, labels: &[usize], y: &[f64]) -> Vec<f64> {
        let s = self.sigma2_z;
        let c = self.params.sigma2_check;
        labels.iter().zip(y).map(|(&k, &yy)| (s * self.alphabet[k] + c * yy) / (s + c)).collect()
    }

    pub fn run_block<R: Rng>(&mut self, x: &[f64], y: &[f64], rng: &mut R) -> Result<TrialResult> {
        let (msg, sent) = self.encode(x, rng)?;
        let (got, x_hat) = self.decode(&msg, y, rng)?;
        Ok(TrialResult::new(x, &x_hat, &sent, &got, self.alphabet.len().trailing_zeros() as usize, msg.bits.len()))
    }
}

impl WeightModel for PcqCodec {
    /// The dither argument is ignored.
    fn encoder_weights(&self, x: &[f64], dither: &[f64], out: &mut SymbolWeights) -> Result<()> {
        check_len(x, dither, out)?;
        for (j, &xx) in x.iter().enumerate() {
            let row = out.row_mut(j);
            let mut best = f64::NEG_INFINITY;
            for (r, &u) in row.iter_mut().zip(&self.alphabet) {
                *r = -(xx - u).powi(2) / (2.0 * self.params.sigma2_d);
                best = best.max(*r);
            }
            row.iter_mut().for_each(|r| *r = (*r - best).exp());
        }
        Ok(())
    }

    fn decoder_weights(&self, y: &[f64], dither: &[f64], out: &mut SymbolWeights) -> Result<()> {
        check_len(y, dither, out)?;
        for (j, &yy) in y.iter().enumerate() {
            self.table.eval_into(yy, out.row_mut(j));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::normal_pdf;

    #[test]
    fn alphabet_is_centered() {
        let p = PcqParams { spacing: 0.6, m: 8, sigma2_d: 0.1, sigma2_check: 0.0 };
        let a = p.alphabet();
        assert!((a[0] + 2.1).abs() < 1e-12 && (a[7] - 2.1).abs() < 1e-12);
    }

    #[test]
    fn channel_table_matches_direct_integration() {
        let p = PcqParams { spacing: 0.8, m: 8, sigma2_d: 0.2, sigma2_check: 0.0 };
        let alphabet = p.alphabet();
        let table = ChannelTable::new(&p, &alphabet, 1.0, 1.0);
        for &y in &[-1.7, 0.0, 0.33, 2.5] {
            // oracle: trapezoid over a fine independent grid
            let mut direct = vec![0.0; 8];
            let h = 1e-3;
            for i in 0..20_000 {
                let x = y - 10.0 + i as f64 * h;
                let w: Vec<f64> = alphabet.iter().map(|u| (-(x - u).powi(2) / 0.4).exp()).collect();
                let s: f64 = w.iter().sum();
                for (d, wi) in direct.iter_mut().zip(&w) {
                    *d += normal_pdf(x - y, 1.0) * wi / s * h;
                }
            }
            let s: f64 = direct.iter().sum();
            let mut got = vec![0.0; 8];
            table.eval_into(y, &mut got);
            for (g, d) in got.iter().zip(&direct) {
                assert!((g - d / s).abs() < 1e-4, "{y}: {got:?} vs {direct:?}");
            }
        }
    }
}
