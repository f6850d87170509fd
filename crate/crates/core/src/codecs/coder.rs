use rand::Rng;

use super::EncodedMessage;
use crate::error::{Error, Result};
use crate::polar::{scl_multilevel, BitAllocation, Mode, MultilevelCandidate, SclEngine, SymbolWeights};

/// Multilevel polar quantizer/decoder shared by the lattice-based codecs.
#[derive(Debug, Clone)]
pub struct MultilevelCoder {
    alloc: BitAllocation,
    engine: SclEngine,
    encoder_mode: Mode,
    enc_roles: Vec<Vec<crate::polar::Position>>,
}

impl MultilevelCoder {
    pub fn new(alloc: BitAllocation, list_size: usize, encoder_mode: Mode) -> Result<Self> {
        let engine = SclEngine::new(alloc.n, list_size)?;
        let enc_roles = (0..alloc.levels.len()).map(|l| alloc.encoder_roles(l)).collect();
        Ok(Self { alloc, engine, encoder_mode, enc_roles })
    }

    pub fn allocation(&self) -> &BitAllocation {
        &self.alloc
    }

    fn best(list: Vec<MultilevelCandidate>) -> Result<MultilevelCandidate> {
        list.into_iter().next().ok_or(Error::MetricUnderflow)
    }

    /// Quantizes to a joint codeword under the encoder weights; returns the
    /// message and the symbol index of every sample.
    pub fn encode<R: Rng>(&mut self, weights: &SymbolWeights, rng: &mut R) -> Result<(EncodedMessage, Vec<usize>)> {
        let best = Self::best(scl_multilevel(&mut self.engine, &self.enc_roles, weights, self.encoder_mode, rng)?)?;
        let bits = self
            .alloc
            .levels
            .iter()
            .zip(&best.u)
            .flat_map(|(roles, u)| roles.info.iter().map(move |&i| u[i]))
            .collect();
        Ok((EncodedMessage { n: self.alloc.n, bits }, best.labels))
    }

    /// Recovers the symbol indices with information bits pinned to `msg`.
    pub fn decode<R: Rng>(&mut self, weights: &SymbolWeights, msg: &EncodedMessage, rng: &mut R) -> Result<Vec<usize>> {
        if msg.n != self.alloc.n {
            return Err(Error::DimensionMismatch { expected: self.alloc.n, got: msg.n });
        }
        if msg.bits.len() != self.alloc.total_info() {
            return Err(Error::DimensionMismatch { expected: self.alloc.total_info(), got: msg.bits.len() });
        }
        let mut offset = 0;
        let mut roles = Vec::with_capacity(self.alloc.levels.len());
        for level in 0..self.alloc.levels.len() {
            let k = self.alloc.levels[level].info.len();
            roles.push(self.alloc.decoder_roles(level, &msg.bits[offset..offset + k])?);
            offset += k;
        }
        Ok(Self::best(scl_multilevel(&mut self.engine, &roles, weights, Mode::Max, rng)?)?.labels)
    }
}
