//! End-to-end Wyner-Ziv codecs: PCQmod (dithered modulo lattice with polar
//! shaping), PCQ (polar shaping on a plain ASK grid) and a one-bit baseline.

mod coder;
pub mod design;
mod message;
mod onebit;
mod pcq;
mod pcqmod;

pub use coder::MultilevelCoder;
pub use message::EncodedMessage;
pub use onebit::OneBitQuantizer;
pub use pcq::{PcqCodec, PcqParams};
pub use pcqmod::PcqModCodec;

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::LatticeParams;
use crate::polar::{allocate_roles, load_reliability, BitAllocation, Mode, PolarSpec, SymbolWeights};

/// Uniform dither on `[-A/2, A/2)`, reproducible from `seed` alone.
pub fn dither_stream(seed: u64, n: usize, a: f64) -> Vec<f64> {
    dither_stream_for(seed, 0, n, a)
}

/// Dither of block `trial`: an independent ChaCha stream per trial.
/// A nonpositive `a` yields an all-zero dither.
pub fn dither_stream_for(seed: u64, trial: u64, n: usize, a: f64) -> Vec<f64> {
    if !(a > 0.0) {
        return vec![0.0; n];
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    (0..n).map(|_| rng.random_range(-0.5 * a..0.5 * a)).collect()
}

/// Symbol weights derived from a block of source or side-information samples.
pub trait WeightModel {
    /// Encoder weights `P(u | x)` (up to per-sample scale).
    fn encoder_weights(&self, x: &[f64], dither: &[f64], out: &mut SymbolWeights) -> Result<()>;
    /// Decoder weights `P(u | y)` (up to per-sample scale).
    fn decoder_weights(&self, y: &[f64], dither: &[f64], out: &mut SymbolWeights) -> Result<()>;
}

/// Scalar source `X = Y + Z` with independent zero-mean Gaussians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalarSource {
    pub sigma2_y: f64,
    pub sigma2_z: f64,
}

impl ScalarSource {
    /// Draws `(x, y)` blocks of length `n`.
    pub fn sample_block<R: Rng>(&self, n: usize, rng: &mut R) -> (Vec<f64>, Vec<f64>) {
        let (sy, sz) = (self.sigma2_y.sqrt(), self.sigma2_z.sqrt());
        let mut x = Vec::with_capacity(n);
        let mut y = Vec::with_capacity(n);
        for _ in 0..n {
            let yy = sy * rng.sample::<f64, _>(StandardNormal);
            y.push(yy);
            x.push(yy + sz * rng.sample::<f64, _>(StandardNormal));
        }
        (x, y)
    }
}

/// Outcome of one encoded and decoded block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    /// Mean squared error over the block.
    pub distortion: f64,
    /// Per level: decoded bits equal the encoder's on every sample.
    pub levels_ok: Vec<bool>,
    pub symbol_errors: usize,
    pub message_bits: usize,
}

impl TrialResult {
    pub fn new(x: &[f64], x_hat: &[f64], sent: &[usize], got: &[usize], levels: usize, message_bits: usize) -> Self {
        let distortion = x.iter().zip(x_hat).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / x.len() as f64;
        let levels_ok = (0..levels).map(|l| sent.iter().zip(got).all(|(s, g)| (s >> l) & 1 == (g >> l) & 1)).collect();
        let symbol_errors = sent.iter().zip(got).filter(|(s, g)| s != g).count();
        Self { distortion, levels_ok, symbol_errors, message_bits }
    }

    pub fn genie_ok(&self) -> bool {
        self.symbol_errors == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CodecKind {
    Pcqmod,
    Pcq,
    Onebit,
}

/// Shaping and information bit counts per level.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AllocationCounts {
    pub shaping: Vec<usize>,
    pub info: Vec<usize>,
}

fn default_n() -> usize {
    256
}

fn default_list() -> usize {
    8
}

fn default_mode() -> Mode {
    Mode::Max
}

/// Complete description of one codec instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodecConfig {
    pub kind: CodecKind,
    pub sigma2_y: f64,
    pub sigma2_z: f64,
    /// Bits per sample.
    pub rate: f64,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_list")]
    pub list_size: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lattice: Option<LatticeParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pcq: Option<PcqParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub allocation: Option<AllocationCounts>,
    #[serde(default = "default_mode")]
    pub encoder_mode: Mode,
    #[serde(default)]
    pub dither_seed: u64,
    #[serde(default)]
    pub noise_seed: u64,
}

impl CodecConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// `round(n R)`.
    pub fn message_bits(&self) -> usize {
        (self.n as f64 * self.rate).round() as usize
    }

    pub fn levels(&self) -> Option<usize> {
        match self.kind {
            CodecKind::Pcqmod => self.lattice.map(|l| l.levels()),
            CodecKind::Pcq => self.pcq.map(|p| p.m.trailing_zeros() as usize),
            CodecKind::Onebit => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma2_y >= 0.0 && self.sigma2_y.is_finite()) {
            return Err(Error::Config(format!("sigma2_y must be nonnegative, got {}", self.sigma2_y)));
        }
        if !(self.sigma2_z > 0.0 && self.sigma2_z.is_finite()) {
            return Err(Error::Config(format!("sigma2_z must be positive, got {}", self.sigma2_z)));
        }
        if !(self.rate >= 0.0 && self.rate.is_finite()) {
            return Err(Error::Config(format!("rate must be nonnegative, got {}", self.rate)));
        }
        match self.kind {
            CodecKind::Onebit => {
                if (self.rate - 1.0).abs() > 1e-12 {
                    return Err(Error::Config("the one-bit quantizer has rate 1".into()));
                }
                return Ok(());
            }
            CodecKind::Pcqmod => {
                let l = self.lattice.ok_or_else(|| Error::Config("pcqmod requires `lattice`".into()))?;
                if (l.sigma2_z() - self.sigma2_z).abs() > 1e-12 * self.sigma2_z {
                    return Err(Error::Config("lattice sigma2_z differs from the source".into()));
                }
            }
            CodecKind::Pcq => {
                self.pcq.ok_or_else(|| Error::Config("pcq requires `pcq`".into()))?.validate()?;
            }
        }
        if self.n < 2 || !self.n.is_power_of_two() || self.n > crate::polar::MAX_BLOCK_LENGTH {
            return Err(Error::Config(format!("block length {} must be a power of two in 2..=1024", self.n)));
        }
        if self.list_size == 0 || self.list_size > 1024 {
            return Err(Error::Config(format!("list size {} out of range", self.list_size)));
        }
        let alloc = self.allocation.as_ref().ok_or_else(|| Error::Config("polar codecs require `allocation`".into()))?;
        let levels = self.levels().expect("polar kinds have levels");
        if alloc.shaping.len() != levels || alloc.info.len() != levels {
            return Err(Error::Config(format!("allocation must list {levels} levels")));
        }
        for (l, (&s, &k)) in alloc.shaping.iter().zip(&alloc.info).enumerate() {
            if s + k > self.n {
                return Err(Error::AllocationOverflow { level: l, requested: s + k, n: self.n });
            }
        }
        let total: usize = alloc.info.iter().sum();
        if total != self.message_bits() {
            return Err(Error::Config(format!("info bits sum to {total}, expected round(n R) = {}", self.message_bits())));
        }
        Ok(())
    }

    pub fn bit_allocation(&self, reliability: Option<Vec<usize>>) -> Result<BitAllocation> {
        let alloc = self.allocation.as_ref().ok_or_else(|| Error::Config("missing `allocation`".into()))?;
        let spec = match reliability {
            Some(r) => PolarSpec::with_reliability(self.n, self.list_size, r)?,
            None => PolarSpec::with_reliability(self.n, self.list_size, load_reliability(self.n)?)?,
        };
        allocate_roles(&spec, &alloc.info, &alloc.shaping)
    }

    /// Modulo interval for dithering (zero for undithered kinds).
    pub fn dither_range(&self) -> f64 {
        self.lattice.map(|l| l.a()).unwrap_or(0.0)
    }
}

/// A ready-to-run codec built from a [`CodecConfig`].
#[derive(Debug, Clone)]
pub enum Codec {
    Pcqmod(PcqModCodec),
    Pcq(PcqCodec),
    Onebit(OneBitQuantizer),
}

impl Codec {
    pub fn new(cfg: &CodecConfig) -> Result<Self> {
        Self::with_reliability(cfg, None)
    }

    pub fn with_reliability(cfg: &CodecConfig, reliability: Option<Vec<usize>>) -> Result<Self> {
        cfg.validate()?;
        Ok(match cfg.kind {
            CodecKind::Onebit => Codec::Onebit(OneBitQuantizer::new(cfg.sigma2_z)),
            CodecKind::Pcqmod => Codec::Pcqmod(PcqModCodec::new(
                cfg.lattice.expect("validated"),
                cfg.bit_allocation(reliability)?,
                cfg.list_size,
                cfg.encoder_mode,
            )?),
            CodecKind::Pcq => Codec::Pcq(PcqCodec::new(
                cfg.pcq.expect("validated"),
                cfg.sigma2_y,
                cfg.sigma2_z,
                cfg.bit_allocation(reliability)?,
                cfg.list_size,
                cfg.encoder_mode,
            )?),
        })
    }

    /// Encodes `x`, decodes with `y`, and scores the block. `dither` is
    /// ignored by the undithered codecs.
    pub fn run_block<R: Rng>(&mut self, x: &[f64], y: &[f64], dither: &[f64], rng: &mut R) -> Result<TrialResult> {
        self.process_block(x, y, dither, rng).map(|b| b.result)
    }

    /// Like [`Codec::run_block`], also returning the message and `x^`.
    pub fn process_block<R: Rng>(&mut self, x: &[f64], y: &[f64], dither: &[f64], rng: &mut R) -> Result<BlockOutput> {
        if x.len() != y.len() {
            return Err(Error::DimensionMismatch { expected: x.len(), got: y.len() });
        }
        let (msg, sent, got, x_hat, levels) = match self {
            Codec::Pcqmod(c) => {
                let (msg, sent) = c.encode(x, dither, rng)?;
                let (got, x_hat) = c.decode(&msg, y, dither, rng)?;
                (msg, sent, got, x_hat, c.params().levels())
            }
            Codec::Pcq(c) => {
                let (msg, sent) = c.encode(x, rng)?;
                let (got, x_hat) = c.decode(&msg, y, rng)?;
                (msg, sent, got, x_hat, c.params().m.trailing_zeros() as usize)
            }
            Codec::Onebit(q) => {
                let (bits, x_hat) = q.run(x, y);
                let labels: Vec<usize> = bits.iter().map(|&b| b as usize).collect();
                (EncodedMessage { n: x.len(), bits }, labels.clone(), labels, x_hat, 1)
            }
        };
        let result = TrialResult::new(x, &x_hat, &sent, &got, levels, msg.bits.len());
        Ok(BlockOutput { message: msg, x_hat, result })
    }
}

/// Everything one block produces.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockOutput {
    pub message: EncodedMessage,
    pub x_hat: Vec<f64>,
    pub result: TrialResult,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dither_is_reproducible_and_uniform() {
        let a = dither_stream(7, 200_000, 10.0);
        assert_eq!(a, dither_stream(7, 200_000, 10.0));
        assert!(a.iter().all(|&d| (-5.0..5.0).contains(&d)));
        let n = a.len() as f64;
        let mean = a.iter().sum::<f64>() / n;
        let var = a.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / n;
        // std of the mean is sqrt(100/12 / n)
        assert!(mean.abs() < 3.0 * (100.0 / 12.0 / n).sqrt());
        assert!((var - 100.0 / 12.0).abs() < 0.05);
        let b = dither_stream(8, 200_000, 10.0);
        let corr = a.iter().zip(&b).map(|(x, y)| x * y).sum::<f64>() / n / (100.0 / 12.0);
        assert!(corr.abs() < 3.0 / n.sqrt());
        assert_ne!(dither_stream_for(7, 1, 16, 10.0), dither_stream_for(7, 2, 16, 10.0));
    }

    #[test]
    fn config_validation() {
        let text = r#"{"kind":"onebit","sigma2_y":0.0,"sigma2_z":2.0,"rate":1.0}"#;
        assert!(CodecConfig::from_json(text).is_ok());
        let text = r#"{"kind":"onebit","sigma2_y":0.0,"sigma2_z":2.0,"rate":1.0,"bogus":1}"#;
        assert!(CodecConfig::from_json(text).is_err());
        let text = r#"{"kind":"pcqmod","sigma2_y":1.0,"sigma2_z":1.0,"rate":1.0,
            "lattice":{"a":10.0,"m":8,"sigma2_d":0.3,"sigma2_z":1.0},
            "allocation":{"shaping":[100,60,20],"info":[50,100,100]}}"#;
        assert!(matches!(CodecConfig::from_json(text), Err(Error::Config(_))));
        let ok = text.replace("[50,100,100]", "[56,100,100]");
        let cfg = CodecConfig::from_json(&ok).unwrap();
        assert_eq!(cfg.message_bits(), 256);
        assert_eq!(CodecConfig::from_json(&cfg.to_json()).unwrap(), cfg);
    }
}
