//! Code design: genie-aided bit-channel entropies, bit-role counts, and a
//! Monte Carlo grid search over the shaping width and the decoding-error budget.

use std::f64::consts::LN_2;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use super::{
    dither_stream_for, AllocationCounts, Codec, CodecConfig, CodecKind, PcqCodec, PcqModCodec, PcqParams, ScalarSource, WeightModel,
};
use crate::error::{Error, Result};
use crate::lattice::LatticeParams;
use crate::numerics::mean_stderr;
use crate::polar::{allocate_roles, load_reliability, polar_transform, LevelMetric, PolarSpec, SclEngine, SymbolWeights};

/// Mean conditional entropies (bits) of every polar bit-channel, per level,
/// given the source (`h_x`) and given the side information (`h_y`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubchannelEntropies {
    pub h_x: Vec<Vec<f64>>,
    pub h_y: Vec<Vec<f64>>,
}

/// Estimates bit-channel entropies with genie-aided successive cancellation:
/// symbols are drawn i.i.d. from the encoder weights and every bit is
/// evaluated with the true preceding bits.
pub fn estimate_entropies<W: WeightModel>(
    model: &W,
    source: ScalarSource,
    levels: usize,
    n: usize,
    dither_range: f64,
    blocks: usize,
    seed: u64,
) -> Result<SubchannelEntropies> {
    let m = 1usize << levels;
    let mut h_x = vec![vec![0.0; n]; levels];
    let mut h_y = vec![vec![0.0; n]; levels];
    let mut wx = SymbolWeights::new(n, m)?;
    let mut wy = SymbolWeights::new(n, m)?;
    let mut engine = SclEngine::new(n, 1)?;
    let mut llr = vec![0.0; n];
    let mut pen = vec![0.0; n];
    let mut labels = vec![0usize; n];
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    for b in 0..blocks {
        let (x, y) = source.sample_block(n, &mut rng);
        let dither = if dither_range > 0.0 { dither_stream_for(seed, b as u64, n, dither_range) } else { vec![0.0; n] };
        model.encoder_weights(&x, &dither, &mut wx)?;
        model.decoder_weights(&y, &dither, &mut wy)?;
        for (j, k) in labels.iter_mut().enumerate() {
            let row = wx.row(j);
            let total: f64 = row.iter().sum();
            let mut r = rng.random::<f64>() * total;
            *k = m - 1;
            for (i, &w) in row.iter().enumerate() {
                if r < w {
                    *k = i;
                    break;
                }
                r -= w;
            }
        }
        for level in 0..levels {
            let mask = (1usize << level) - 1;
            let prefix: Vec<usize> = labels.iter().map(|&k| k & mask).collect();
            let bits: Vec<u8> = labels.iter().map(|&k| ((k >> level) & 1) as u8).collect();
            let u = polar_transform(&bits);
            for (w, acc) in [(&wx, &mut h_x[level]), (&wy, &mut h_y[level])] {
                w.bit_llrs(level, &prefix, &mut llr);
                let chan = SclEngine::prepare_channel(&llr)?;
                engine.genie_penalties(&chan, &u, &mut pen)?;
                for (a, p) in acc.iter_mut().zip(&pen) {
                    *a += p / LN_2;
                }
            }
        }
    }
    for v in h_x.iter_mut().chain(h_y.iter_mut()) {
        v.iter_mut().for_each(|a| *a /= blocks as f64);
    }
    Ok(SubchannelEntropies { h_x, h_y })
}

/// Bit-role counts from entropies. Per level, shaping takes the longest
/// reliability-order prefix whose summed `h_y` stays within `eps`; the
/// information bits (summing to `total_info`) are then spread over levels to
/// minimize the summed `1 - h_x` of the frozen positions.
pub fn allocate_counts(ent: &SubchannelEntropies, reliability: &[usize], total_info: usize, eps: f64) -> Result<AllocationCounts> {
    let levels = ent.h_x.len();
    let n = reliability.len();
    let shaping: Vec<usize> = ent
        .h_y
        .iter()
        .map(|hy| {
            let mut acc = 0.0;
            reliability
                .iter()
                .take_while(|&&i| {
                    acc += hy[i];
                    acc <= eps
                })
                .count()
        })
        .collect();
    // cost[l][k]: frozen penalty at level l when k info bits follow the shaping prefix
    let cost: Vec<Vec<f64>> = (0..levels)
        .map(|l| {
            let s = shaping[l];
            let mut tail = vec![0.0; n - s + 1];
            for k in (0..n - s).rev() {
                tail[k] = tail[k + 1] + (1.0 - ent.h_x[l][reliability[s + k]]).max(0.0);
            }
            tail
        })
        .collect();
    // best[l][t]: minimal cost of levels l.. carrying t info bits
    let mut best = vec![vec![f64::INFINITY; total_info + 1]; levels + 1];
    let mut choice = vec![vec![0usize; total_info + 1]; levels];
    best[levels][0] = 0.0;
    for l in (0..levels).rev() {
        for t in 0..=total_info {
            for k in 0..=t.min(n - shaping[l]) {
                let c = cost[l][k] + best[l + 1][t - k];
                if c < best[l][t] {
                    best[l][t] = c;
                    choice[l][t] = k;
                }
            }
        }
    }
    if !best[0][total_info].is_finite() {
        return Err(Error::AllocationOverflow { level: 0, requested: total_info, n: levels * n });
    }
    let mut info = Vec::with_capacity(levels);
    let mut t = total_info;
    for row in &choice {
        info.push(row[t]);
        t -= row[t];
    }
    Ok(AllocationCounts { shaping, info })
}

/// What to design and over which grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignSpec {
    pub kind: CodecKind,
    pub sigma2_y: f64,
    pub sigma2_z: f64,
    pub rate: f64,
    pub m: usize,
    /// Modulo interval (pcqmod) or ASK spacing (pcq).
    pub a_or_spacing: f64,
    pub sigma2_d_grid: Vec<f64>,
    pub eps_grid: Vec<f64>,
    #[serde(default = "default_pilots")]
    pub pilot_blocks: usize,
    #[serde(default = "default_eval")]
    pub eval_blocks: usize,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_list")]
    pub list_size: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_pilots() -> usize {
    10_000
}
fn default_eval() -> usize {
    200
}
fn default_n() -> usize {
    256
}
fn default_list() -> usize {
    8
}

/// One evaluated grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignPoint {
    pub sigma2_d: f64,
    pub eps: f64,
    pub allocation: AllocationCounts,
    pub mean_distortion: f64,
    pub stderr: f64,
    pub failure_rate: f64,
}

fn base_config(spec: &DesignSpec, sigma2_d: f64) -> Result<CodecConfig> {
    let mut cfg = CodecConfig {
        kind: spec.kind,
        sigma2_y: spec.sigma2_y,
        sigma2_z: spec.sigma2_z,
        rate: spec.rate,
        n: spec.n,
        list_size: spec.list_size,
        lattice: None,
        pcq: None,
        allocation: None,
        encoder_mode: crate::polar::Mode::Max,
        dither_seed: spec.seed ^ 0xD1,
        noise_seed: spec.seed ^ 0x7A,
    };
    match spec.kind {
        CodecKind::Pcqmod => cfg.lattice = Some(LatticeParams::new(spec.a_or_spacing, spec.m, sigma2_d, spec.sigma2_z)?),
        CodecKind::Pcq => {
            cfg.pcq = Some(PcqParams { spacing: spec.a_or_spacing, m: spec.m, sigma2_d, sigma2_check: 0.0 });
        }
        CodecKind::Onebit => return Err(Error::Config("the one-bit quantizer has nothing to design".into())),
    }
    Ok(cfg)
}

/// Genie entropies for one shaping width.
fn entropies_for(spec: &DesignSpec, cfg: &CodecConfig, levels: usize) -> Result<SubchannelEntropies> {
    let spec_polar = PolarSpec::new(spec.n, spec.list_size)?;
    let empty = allocate_roles(&spec_polar, &vec![0; levels], &vec![0; levels])?;
    let source = ScalarSource { sigma2_y: spec.sigma2_y, sigma2_z: spec.sigma2_z };
    match spec.kind {
        CodecKind::Pcqmod => {
            let lattice = cfg.lattice.expect("set");
            let model = PcqModCodec::new(lattice, empty, 1, crate::polar::Mode::Max)?;
            estimate_entropies(&model, source, levels, spec.n, lattice.a(), spec.pilot_blocks, spec.seed)
        }
        _ => {
            let model = PcqCodec::new(cfg.pcq.expect("set"), spec.sigma2_y, spec.sigma2_z, empty, 1, crate::polar::Mode::Max)?;
            estimate_entropies(&model, source, levels, spec.n, 0.0, spec.pilot_blocks, spec.seed)
        }
    }
}

/// Fits the PCQ description-noise variance as the mean of `(x - u)^2` over
/// encoder-only pilot blocks.
pub fn fit_sigma2_check(cfg: &CodecConfig, blocks: usize, seed: u64) -> Result<f64> {
    let mut codec = match Codec::new(cfg)? {
        Codec::Pcq(c) => c,
        _ => return Err(Error::Config("sigma2_check applies to pcq only".into())),
    };
    let source = ScalarSource { sigma2_y: cfg.sigma2_y, sigma2_z: cfg.sigma2_z };
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut acc = 0.0;
    for _ in 0..blocks {
        let (x, _) = source.sample_block(cfg.n, &mut rng);
        let (_, labels) = codec.encode(&x, &mut rng)?;
        acc += x.iter().zip(&labels).map(|(&xx, &k)| (xx - codec.alphabet()[k]).powi(2)).sum::<f64>() / cfg.n as f64;
    }
    Ok(acc / blocks as f64)
}

/// Mean distortion, its standard error and the block failure rate over `blocks`.
pub fn evaluate(cfg: &CodecConfig, blocks: usize, seed: u64) -> Result<(f64, f64, f64)> {
    let mut codec = Codec::new(cfg)?;
    let source = ScalarSource { sigma2_y: cfg.sigma2_y, sigma2_z: cfg.sigma2_z };
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut d = Vec::with_capacity(blocks);
    let mut failures = 0;
    for b in 0..blocks {
        let (x, y) = source.sample_block(cfg.n, &mut rng);
        let dither = dither_stream_for(cfg.dither_seed, b as u64, cfg.n, cfg.dither_range());
        let r = codec.run_block(&x, &y, &dither, &mut rng)?;
        failures += usize::from(!r.genie_ok());
        d.push(r.distortion);
    }
    let (mean, se) = mean_stderr(&d);
    Ok((mean, se, failures as f64 / blocks as f64))
}

/// Grid search; returns the best configuration and every evaluated point.
pub fn design(spec: &DesignSpec, mut progress: impl FnMut(&DesignPoint)) -> Result<(CodecConfig, Vec<DesignPoint>)> {
    if !spec.m.is_power_of_two() || spec.m < 2 {
        return Err(Error::InvalidParams(format!("M must be a power of two >= 2, got {}", spec.m)));
    }
    let levels = spec.m.trailing_zeros() as usize;
    let reliability = load_reliability(spec.n)?;
    let total_info = (spec.n as f64 * spec.rate).round() as usize;
    let mut points = Vec::new();
    let mut best: Option<(f64, CodecConfig)> = None;
    for &s2d in &spec.sigma2_d_grid {
        let cfg0 = base_config(spec, s2d)?;
        let ent = entropies_for(spec, &cfg0, levels)?;
        for &eps in &spec.eps_grid {
            let counts = allocate_counts(&ent, &reliability, total_info, eps)?;
            let mut cfg = cfg0.clone();
            cfg.allocation = Some(counts.clone());
            if cfg.kind == CodecKind::Pcq {
                let fitted = fit_sigma2_check(&cfg, 50, spec.seed ^ 0xF17)?;
                if let Some(p) = cfg.pcq.as_mut() {
                    p.sigma2_check = fitted;
                }
            }
            let (mean, se, fail) = evaluate(&cfg, spec.eval_blocks, spec.seed ^ 0xE7A1)?;
            let point = DesignPoint { sigma2_d: s2d, eps, allocation: counts, mean_distortion: mean, stderr: se, failure_rate: fail };
            progress(&point);
            points.push(point);
            if best.as_ref().is_none_or(|(b, _)| mean < *b) {
                best = Some((mean, cfg));
            }
        }
    }
    let (_, cfg) = best.ok_or_else(|| Error::Config("empty design grid".into()))?;
    Ok((cfg, points))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn allocation_respects_budget_and_total() {
        let n = 8;
        let reliability: Vec<usize> = (0..n).rev().collect();
        let ent = SubchannelEntropies {
            h_x: vec![vec![0.9, 0.8, 0.7, 0.5, 0.4, 0.3, 0.1, 0.0]; 2],
            h_y: vec![vec![1.0, 1.0, 0.9, 0.8, 0.5, 0.2, 0.05, 0.01], vec![1.0; 8]],
        };
        let c = allocate_counts(&ent, &reliability, 6, 0.1).unwrap();
        // level 0: 0.01 + 0.05 fits, adding 0.2 does not
        assert_eq!(c.shaping, vec![2, 0]);
        assert_eq!(c.info.iter().sum::<usize>(), 6);
        assert!(c.shaping.iter().zip(&c.info).all(|(s, k)| s + k <= n));
        assert!(allocate_counts(&ent, &reliability, 15, 0.1).is_err());
    }

    #[test]
    fn allocation_prefers_freezing_uniform_positions() {
        let reliability: Vec<usize> = vec![3, 2, 1, 0];
        // level 1 is uniform given x everywhere: freezing it costs nothing
        let ent = SubchannelEntropies { h_x: vec![vec![0.0; 4], vec![1.0; 4]], h_y: vec![vec![1.0; 4]; 2] };
        let c = allocate_counts(&ent, &reliability, 4, 0.0).unwrap();
        assert_eq!(c.info, vec![4, 0]);
    }
}
