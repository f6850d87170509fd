use rand::Rng;

use super::{coder::MultilevelCoder, EncodedMessage, TrialResult, WeightModel};
use crate::error::{Error, Result};
use crate::lattice::{ask_alphabet, mod_a, shaping_posterior_into, LatticeParams, ShapingDensity, ZprimeDensity};
use crate::polar::{BitAllocation, Mode, SymbolWeights};

/// Dithered modulo-lattice quantizer with multilevel polar shaping.
#[derive(Debug, Clone)]
pub struct PcqModCodec {
    params: LatticeParams,
    q: ShapingDensity,
    alphabet: Vec<f64>,
    zprime: ZprimeDensity,
    coder: MultilevelCoder,
    weights: SymbolWeights,
}

impl PcqModCodec {
    pub fn new(params: LatticeParams, alloc: BitAllocation, list_size: usize, encoder_mode: Mode) -> Result<Self> {
        if alloc.levels.len() != params.levels() {
            return Err(Error::DimensionMismatch { expected: params.levels(), got: alloc.levels.len() });
        }
        let q = ShapingDensity::truncated_gaussian(&params);
        let zprime = ZprimeDensity::new(&q, &params, ZprimeDensity::DEFAULT_GRID)?;
        let weights = SymbolWeights::new(alloc.n, params.m())?;
        Ok(Self {
            alphabet: ask_alphabet(&params),
            params,
            q,
            zprime,
            coder: MultilevelCoder::new(alloc, list_size, encoder_mode)?,
            weights,
        })
    }

    pub fn params(&self) -> &LatticeParams {
        &self.params
    }

    pub fn alphabet(&self) -> &[f64] {
        &self.alphabet
    }

    fn reduce(&self, v: &[f64], dither: &[f64]) -> Vec<f64> {
        let alpha = self.params.alpha();
        v.iter().zip(dither).map(|(&s, &d)| mod_a(alpha * s + d, self.params.a())).collect()
    }

    pub fn encode<R: Rng>(&mut self, x: &[f64], dither: &[f64], rng: &mut R) -> Result<(EncodedMessage, Vec<usize>)> {
        let mut w = std::mem::replace(&mut self.weights, SymbolWeights::new(1, 2)?);
        let res = self.encoder_weights(x, dither, &mut w).and_then(|_| self.coder.encode(&w, rng));
        self.weights = w;
        res
    }

    /// Returns the recovered symbol indices and the reconstruction.
    pub fn decode<R: Rng>(&mut self, msg: &EncodedMessage, y: &[f64], dither: &[f64], rng: &mut R) -> Result<(Vec<usize>, Vec<f64>)> {
        let mut w = std::mem::replace(&mut self.weights, SymbolWeights::new(1, 2)?);
        let res = self.decoder_weights(y, dither, &mut w).and_then(|_| self.coder.decode(&w, msg, rng));
        self.weights = w;
        let labels = res?;
        let x_hat = self.reconstruct(&labels, y, dither);
        Ok((labels, x_hat))
    }

    /// `x^ = y + alpha ((u - y') mod A)`.
    pub fn reconstruct(&self, labels: &[usize], y: &[f64], dither: &[f64]) -> Vec<f64> {
        let alpha = self.params.alpha();
        let y_prime = self.reduce(y, dither);
        labels
            .iter()
            .zip(y)
            .zip(&y_prime)
            .map(|((&k, &yy), &yp)| yy + alpha * mod_a(self.alphabet[k] - yp, self.params.a()))
            .collect()
    }

    pub fn run_block<R: Rng>(&mut self, x: &[f64], y: &[f64], dither: &[f64], rng: &mut R) -> Result<TrialResult> {
        let (msg, sent) = self.encode(x, dither, rng)?;
        let (got, x_hat) = self.decode(&msg, y, dither, rng)?;
        Ok(TrialResult::new(x, &x_hat, &sent, &got, self.params.levels(), msg.bits.len()))
    }
}

impl WeightModel for PcqModCodec {
    fn encoder_weights(&self, x: &[f64], dither: &[f64], out: &mut SymbolWeights) -> Result<()> {
        check_len(x, dither, out)?;
        for (j, xp) in self.reduce(x, dither).into_iter().enumerate() {
            shaping_posterior_into(xp, &self.q, self.params.a(), &self.alphabet, out.row_mut(j))?;
        }
        Ok(())
    }

    fn decoder_weights(&self, y: &[f64], dither: &[f64], out: &mut SymbolWeights) -> Result<()> {
        check_len(y, dither, out)?;
        for (j, yp) in self.reduce(y, dither).into_iter().enumerate() {
            for (o, &u) in out.row_mut(j).iter_mut().zip(&self.alphabet) {
                *o = self.zprime.eval(mod_a(u - yp, self.params.a()));
            }
        }
        Ok(())
    }
}

pub(super) fn check_len(v: &[f64], dither: &[f64], out: &SymbolWeights) -> Result<()> {
    use crate::polar::LevelMetric;
    if v.len() != out.n() || dither.len() != out.n() {
        return Err(Error::DimensionMismatch { expected: out.n(), got: v.len().min(dither.len()) });
    }
    Ok(())
}
