//! Monte Carlo experiment runner: excess-distortion runs for scalar and
//! vector codecs, rate-distortion sweeps of the ideal dithered pipeline, and
//! CSV/JSON report emission.
//!
//! Every trial draws from its own ChaCha stream `(master_seed, trial)`, so
//! reports are identical for any worker count.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::codecs::{dither_stream_for, Codec, CodecConfig, CodecKind, ScalarSource};
use crate::error::{Error, Result};
use crate::gauss_core::{sample_joint_with, JointGaussianSpec};
use crate::lattice::{achieved_rate, distortion_upper_bound, simulate_ideal_pipeline, LatticeParams, ShapingDensity};
use crate::numerics::mean_stderr;
use crate::polar::{load_reliability_from, RELIABILITY_SHA256};
use crate::vector::{plan_subchannels, run_vector_block};

pub const VERSION: &str = concat!("wzlab ", env!("CARGO_PKG_VERSION"));

/// A codec given inline or as a path to a JSON file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CodecRef {
    Inline(Box<CodecConfig>),
    Path(PathBuf),
}

impl CodecRef {
    /// Loads path references relative to `base`.
    pub fn resolve(&self, base: &Path) -> Result<CodecConfig> {
        match self {
            CodecRef::Inline(c) => {
                c.validate()?;
                Ok((**c).clone())
            }
            CodecRef::Path(p) => CodecConfig::load(&base.join(p)),
        }
    }

    pub fn inline(&self) -> Option<&CodecConfig> {
        match self {
            CodecRef::Inline(c) => Some(c),
            CodecRef::Path(_) => None,
        }
    }
}

fn default_trials() -> usize {
    100
}

fn default_mc_samples() -> usize {
    100_000
}

/// Excess-distortion run of one scalar codec.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExcessConfig {
    pub codec: CodecRef,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub master_seed: u64,
}

/// Excess-distortion run of the eigen-decomposed vector codec.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VectorConfig {
    pub source: JointGaussianSpec,
    pub d_target: f64,
    /// One entry per eigencomponent; `null` for inactive components.
    pub components: Vec<Option<CodecRef>>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub master_seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepPoint {
    pub m: usize,
    pub a: f64,
}

/// Rate and distortion of the rate-unconstrained lattice pipeline over a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub sigma2_z: f64,
    #[serde(default)]
    pub sigma2_y: f64,
    pub points: Vec<SweepPoint>,
    pub sigma2_d_grid: Vec<f64>,
    #[serde(default = "default_mc_samples")]
    pub mc_samples: usize,
    #[serde(default)]
    pub master_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "experiment", rename_all = "snake_case")]
pub enum ExperimentConfig {
    Excess(ExcessConfig),
    Vector(VectorConfig),
    RdSweep(SweepConfig),
}

impl ExperimentConfig {
    /// Parses, inlines path references relative to `base`, and validates.
    pub fn from_json(text: &str, base: &Path) -> Result<Self> {
        let mut cfg: Self = serde_json::from_str(text)?;
        match &mut cfg {
            ExperimentConfig::Excess(e) => e.codec = CodecRef::Inline(Box::new(e.codec.resolve(base)?)),
            ExperimentConfig::Vector(v) => {
                for c in v.components.iter_mut().flatten() {
                    *c = CodecRef::Inline(Box::new(c.resolve(base)?));
                }
            }
            ExperimentConfig::RdSweep(_) => {}
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn master_seed(&self) -> u64 {
        match self {
            ExperimentConfig::Excess(c) => c.master_seed,
            ExperimentConfig::Vector(c) => c.master_seed,
            ExperimentConfig::RdSweep(c) => c.master_seed,
        }
    }

    pub fn set_master_seed(&mut self, seed: u64) {
        match self {
            ExperimentConfig::Excess(c) => c.master_seed = seed,
            ExperimentConfig::Vector(c) => c.master_seed = seed,
            ExperimentConfig::RdSweep(c) => c.master_seed = seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ExperimentConfig::Excess(c) => {
                check_trials(c.trials)?;
                c.codec.inline().ok_or_else(|| Error::Config("unresolved codec path".into()))?.validate()
            }
            ExperimentConfig::Vector(c) => {
                check_trials(c.trials)?;
                vector_plan(c, &RunOptions::default()).map(|_| ())
            }
            ExperimentConfig::RdSweep(c) => {
                if c.points.is_empty() || c.sigma2_d_grid.is_empty() {
                    return Err(Error::Config("sweep grid is empty".into()));
                }
                check_trials(c.mc_samples)?;
                if !(c.sigma2_y >= 0.0) {
                    return Err(Error::Config(format!("sigma2_y must be nonnegative, got {}", c.sigma2_y)));
                }
                for p in &c.points {
                    for &s in &c.sigma2_d_grid {
                        LatticeParams::new(p.a, p.m, s, c.sigma2_z)?;
                    }
                }
                Ok(())
            }
        }
    }
}

fn check_trials(t: usize) -> Result<()> {
    if t == 0 {
        return Err(Error::Config("trials must be at least 1".into()));
    }
    Ok(())
}

/// Runtime knobs that do not affect results.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Worker threads; 0 means one per available core.
    pub jobs: usize,
    /// External copy of the reliability sequence; must match the pinned checksum.
    pub reliability: Option<PathBuf>,
}

impl RunOptions {
    fn workers(&self) -> usize {
        match self.jobs {
            0 => std::thread::available_parallelism().map_or(1, |n| n.get()),
            j => j,
        }
    }

    fn codec(&self, cfg: &CodecConfig) -> Result<Codec> {
        match (&self.reliability, cfg.kind) {
            (Some(path), CodecKind::Pcq | CodecKind::Pcqmod) => Codec::with_reliability(cfg, Some(load_reliability_from(path, cfg.n)?)),
            _ => Codec::new(cfg),
        }
    }
}

/// Independent stream of trial `trial`.
pub fn trial_rng(master_seed: u64, trial: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(master_seed);
    rng.set_stream(trial);
    rng
}

/// Runs `f(worker_state, i)` for `i in 0..count` on `jobs` threads and
/// returns results in index order. On failure the lowest failing index wins.
fn parallel_map<W, T, M, F>(count: usize, jobs: usize, make: M, f: F) -> Result<Vec<T>>
where
    T: Send,
    M: Fn() -> Result<W> + Sync,
    F: Fn(&mut W, usize) -> Result<T> + Sync,
{
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<T>>>> = Mutex::new((0..count).map(|_| None).collect());
    let worker = || -> Result<()> {
        let mut state = make()?;
        loop {
            let i = next.fetch_add(1, Ordering::Relaxed);
            if i >= count {
                return Ok(());
            }
            let r = f(&mut state, i);
            let failed = r.is_err();
            slots.lock().expect("no poisoned workers")[i] = Some(r);
            if failed {
                // stop handing out work; indices below i still complete
                next.fetch_max(count, Ordering::Relaxed);
            }
        }
    };
    let jobs = jobs.clamp(1, count.max(1));
    let setup = if jobs == 1 {
        worker()
    } else {
        std::thread::scope(|s| {
            let handles: Vec<_> = (0..jobs).map(|_| s.spawn(worker)).collect();
            handles.into_iter().map(|h| h.join().expect("worker panicked")).collect::<Result<Vec<_>>>().map(|_| ())
        })
    };
    setup?;
    let mut out = Vec::with_capacity(count);
    for (i, slot) in slots.into_inner().expect("no poisoned workers").into_iter().enumerate() {
        match slot {
            Some(Ok(v)) => out.push(v),
            Some(Err(e)) => return Err(Error::Trial { trial: i, source: Box::new(e) }),
            None => return Err(Error::Trial { trial: i, source: Box::new(Error::Config("trial not run".into())) }),
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub delta: f64,
    /// Decoder recovered every symbol the encoder chose.
    pub genie_ok: bool,
    /// Per-component distortions (vector runs only).
    pub components: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CdfPoint {
    pub d_threshold: f64,
    pub prob_exceed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    pub version: String,
    pub master_seed: u64,
    pub config_sha256: String,
    pub reliability_sha256: String,
    pub config: serde_json::Value,
}

impl Meta {
    fn new(cfg: &ExperimentConfig) -> Result<Self> {
        let config = serde_json::to_value(cfg)?;
        let bytes = serde_json::to_vec(&config)?;
        Ok(Self {
            version: VERSION.to_string(),
            master_seed: cfg.master_seed(),
            config_sha256: hex::encode(Sha256::digest(&bytes)),
            reliability_sha256: RELIABILITY_SHA256.to_string(),
            config,
        })
    }
}

/// Per-trial distortions with aggregates and the empirical excess curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub records: Vec<TrialRecord>,
    pub mean: f64,
    pub stderr: f64,
    /// Fraction of trials whose decoder disagreed with the encoder.
    pub failure_rate: f64,
    /// Mean of each component's distortion (vector runs only).
    pub component_means: Vec<f64>,
    pub cdf: Vec<CdfPoint>,
    pub meta: Meta,
}

/// `Pr(delta > d)` at every distinct observed `d`, ascending.
pub fn excess_curve(deltas: &[f64]) -> Vec<CdfPoint> {
    let mut sorted = deltas.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut out: Vec<CdfPoint> = Vec::new();
    for (i, &d) in sorted.iter().enumerate() {
        let exceed = (sorted.len() - i - 1) as f64 / n;
        match out.last_mut() {
            Some(last) if last.d_threshold == d => last.prob_exceed = exceed,
            _ => out.push(CdfPoint { d_threshold: d, prob_exceed: exceed }),
        }
    }
    out
}

impl Report {
    fn new(records: Vec<TrialRecord>, meta: Meta) -> Self {
        let deltas: Vec<f64> = records.iter().map(|r| r.delta).collect();
        let (mean, stderr) = mean_stderr(&deltas);
        let failure_rate = records.iter().filter(|r| !r.genie_ok).count() as f64 / records.len() as f64;
        let dims = records.first().map_or(0, |r| r.components.len());
        let component_means = (0..dims)
            .map(|i| records.iter().map(|r| r.components[i]).sum::<f64>() / records.len() as f64)
            .collect();
        Self { cdf: excess_curve(&deltas), records, mean, stderr, failure_rate, component_means, meta }
    }

    /// Writes `excess.csv`, `cdf.csv`, `meta.json` and, for vector runs,
    /// `components.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut w = csv::Writer::from_path(dir.join("excess.csv"))?;
        w.write_record(["trial", "delta"])?;
        for r in &self.records {
            w.write_record([r.trial.to_string(), r.delta.to_string()])?;
        }
        w.flush()?;
        let mut w = csv::Writer::from_path(dir.join("cdf.csv"))?;
        w.write_record(["d_threshold", "prob_exceed"])?;
        for p in &self.cdf {
            w.write_record([p.d_threshold.to_string(), p.prob_exceed.to_string()])?;
        }
        w.flush()?;
        if !self.component_means.is_empty() {
            let mut w = csv::Writer::from_path(dir.join("components.csv"))?;
            w.write_record(["trial", "component", "delta"])?;
            for r in &self.records {
                for (i, d) in r.components.iter().enumerate() {
                    w.write_record([r.trial.to_string(), i.to_string(), d.to_string()])?;
                }
            }
            w.flush()?;
        }
        write_meta(&self.meta, dir)
    }
}

fn write_meta(meta: &Meta, dir: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(meta)? + "\n";
    std::fs::write(dir.join("meta.json"), text)?;
    Ok(())
}

/// Runs `trials` independent blocks of one scalar codec.
pub fn run_excess_distortion(cfg: &ExcessConfig, opts: &RunOptions) -> Result<Report> {
    let codec_cfg = cfg.codec.inline().ok_or_else(|| Error::Config("unresolved codec path".into()))?.clone();
    check_trials(cfg.trials)?;
    let source = ScalarSource { sigma2_y: codec_cfg.sigma2_y, sigma2_z: codec_cfg.sigma2_z };
    let records = parallel_map(
        cfg.trials,
        opts.workers(),
        || opts.codec(&codec_cfg),
        |codec, t| {
            let mut rng = trial_rng(cfg.master_seed, t as u64);
            let (x, y) = source.sample_block(codec_cfg.n, &mut rng);
            let dither = dither_stream_for(codec_cfg.dither_seed, t as u64, codec_cfg.n, codec_cfg.dither_range());
            let r = codec.run_block(&x, &y, &dither, &mut rng)?;
            Ok(TrialRecord { trial: t, delta: r.distortion, genie_ok: r.genie_ok(), components: Vec::new() })
        },
    )?;
    Ok(Report::new(records, Meta::new(&ExperimentConfig::Excess(cfg.clone()))?))
}

fn vector_plan(cfg: &VectorConfig, opts: &RunOptions) -> Result<(crate::vector::VectorPlan, Vec<Option<Codec>>)> {
    let mut plan = plan_subchannels(&cfg.source, cfg.d_target)?;
    if cfg.components.len() != plan.dim() {
        return Err(Error::DimensionMismatch { expected: plan.dim(), got: cfg.components.len() });
    }
    for (i, c) in cfg.components.iter().enumerate() {
        match c {
            Some(r) => plan.attach(i, r.inline().ok_or_else(|| Error::Config("unresolved codec path".into()))?.clone())?,
            None if plan.components[i].active => {
                return Err(Error::Config(format!("active component {i} needs a codec")));
            }
            None => {}
        }
    }
    let codecs = plan
        .components
        .iter()
        .map(|c| c.codec.as_ref().map(|cfg| opts.codec(cfg)).transpose())
        .collect::<Result<Vec<_>>>()?;
    Ok((plan, codecs))
}

/// Runs `trials` independent vector blocks; every component must share one
/// block length.
pub fn run_vector(cfg: &VectorConfig, opts: &RunOptions) -> Result<Report> {
    check_trials(cfg.trials)?;
    let (plan, _) = vector_plan(cfg, opts)?;
    let lengths: Vec<usize> = plan.components.iter().filter_map(|c| c.codec.as_ref().map(|c| c.n)).collect();
    let n = lengths.first().copied().unwrap_or(256);
    if lengths.iter().any(|&l| l != n) {
        return Err(Error::Config("all component codecs must use the same block length".into()));
    }
    let records = parallel_map(
        cfg.trials,
        opts.workers(),
        || vector_plan(cfg, opts).map(|(_, c)| c),
        |codecs, t| {
            let mut rng = trial_rng(cfg.master_seed, t as u64);
            let (x, y) = sample_joint_with(&cfg.source, n, &mut rng)?;
            let b = run_vector_block(&x, &y, &plan, codecs, t as u64, &mut rng)?;
            Ok(TrialRecord { trial: t, delta: b.delta, genie_ok: b.genie_ok, components: b.per_component })
        },
    )?;
    Ok(Report::new(records, Meta::new(&ExperimentConfig::Vector(cfg.clone()))?))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "A")]
    pub a: f64,
    pub sigma2_d: f64,
    pub rate_bits: f64,
    pub bound_distortion: f64,
    pub mc_distortion: f64,
    pub mc_stderr: f64,
}

impl SweepRow {
    /// Rate above the Wyner-Ziv curve at the row's simulated distortion.
    pub fn gap_to_wz(&self, sigma2_z: f64) -> f64 {
        self.rate_bits - wz_rate(sigma2_z, self.mc_distortion)
    }
}

/// `max(0, log2(sigma2_z / d) / 2)`.
pub fn wz_rate(sigma2_z: f64, d: f64) -> f64 {
    (0.5 * (sigma2_z / d).log2()).max(0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    /// `(distortion, rate_bits)` of the Wyner-Ziv curve over the swept range.
    pub wz_reference: Vec<(f64, f64)>,
    pub meta: Meta,
}

impl SweepReport {
    /// Writes `rdsweep.csv`, `wzref.csv` and `meta.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut w = csv::Writer::from_path(dir.join("rdsweep.csv"))?;
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush()?;
        let mut w = csv::Writer::from_path(dir.join("wzref.csv"))?;
        w.write_record(["distortion", "rate_bits"])?;
        for (d, r) in &self.wz_reference {
            w.write_record([d.to_string(), r.to_string()])?;
        }
        w.flush()?;
        write_meta(&self.meta, dir)
    }
}

const WZ_REFERENCE_POINTS: usize = 50;

/// One row per `(M, A, sigma2_d)`: achieved rate, distortion bound, and a
/// Monte Carlo estimate of the pipeline's distortion. The bound is NaN where
/// it does not apply (`d_min <= 0`).
pub fn run_rd_sweep(cfg: &SweepConfig, opts: &RunOptions) -> Result<SweepReport> {
    let grid: Vec<(SweepPoint, f64)> = cfg.points.iter().flat_map(|&p| cfg.sigma2_d_grid.iter().map(move |&s| (p, s))).collect();
    if grid.is_empty() {
        return Err(Error::Config("sweep grid is empty".into()));
    }
    let rows = parallel_map(
        grid.len(),
        opts.workers(),
        || Ok(()),
        |_, i| {
            let (pt, s2d) = grid[i];
            let p = LatticeParams::new(pt.a, pt.m, s2d, cfg.sigma2_z)?;
            let q = ShapingDensity::truncated_gaussian(&p);
            let rate_bits = achieved_rate(&q, &p)?;
            let bound = match distortion_upper_bound(&p) {
                Ok(b) => b.total,
                Err(Error::InvalidRegime(_)) => f64::NAN,
                Err(e) => return Err(e),
            };
            let mut rng = trial_rng(cfg.master_seed, i as u64);
            let mc = simulate_ideal_pipeline(&p, cfg.sigma2_y, cfg.mc_samples, &mut rng)?;
            Ok(SweepRow {
                m: pt.m,
                a: pt.a,
                sigma2_d: s2d,
                rate_bits,
                bound_distortion: bound,
                mc_distortion: mc.mse,
                mc_stderr: mc.stderr,
            })
        },
    )?;
    let lo = rows.iter().map(|r| r.mc_distortion).fold(f64::INFINITY, f64::min);
    let hi = rows.iter().map(|r| r.mc_distortion).fold(f64::NEG_INFINITY, f64::max);
    let wz_reference = if hi > lo {
        (0..WZ_REFERENCE_POINTS)
            .map(|k| {
                let d = lo * (hi / lo).powf(k as f64 / (WZ_REFERENCE_POINTS - 1) as f64);
                (d, wz_rate(cfg.sigma2_z, d))
            })
            .collect()
    } else {
        vec![(lo, wz_rate(cfg.sigma2_z, lo))]
    };
    Ok(SweepReport { rows, wz_reference, meta: Meta::new(&ExperimentConfig::RdSweep(cfg.clone()))? })
}

/// Runs any experiment and writes its report files into `out`; returns a
/// one-line summary.
pub fn run_experiment(cfg: &ExperimentConfig, opts: &RunOptions, out: &Path) -> Result<String> {
    match cfg {
        ExperimentConfig::Excess(c) => {
            let r = run_excess_distortion(c, opts)?;
            r.write(out)?;
            Ok(format!("trials {} mean {:.6} stderr {:.6} failure_rate {:.4}", r.records.len(), r.mean, r.stderr, r.failure_rate))
        }
        ExperimentConfig::Vector(c) => {
            let r = run_vector(c, opts)?;
            r.write(out)?;
            let parts: Vec<String> = r.component_means.iter().map(|m| format!("{m:.6}")).collect();
            Ok(format!("trials {} mean {:.6} stderr {:.6} components [{}]", r.records.len(), r.mean, r.stderr, parts.join(", ")))
        }
        ExperimentConfig::RdSweep(c) => {
            let r = run_rd_sweep(c, opts)?;
            r.write(out)?;
            Ok(format!("rows {}", r.rows.len()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parallel_map_keeps_index_order() {
        for jobs in [1, 3] {
            let out = parallel_map(50, jobs, || Ok(()), |_, i| Ok(i * i)).unwrap();
            assert_eq!(out, (0..50).map(|i| i * i).collect::<Vec<_>>());
        }
    }

    #[test]
    fn parallel_map_reports_the_lowest_failing_trial() {
        for jobs in [1, 4] {
            let err = parallel_map(40, jobs, || Ok(()), |_, i| if i % 7 == 5 { Err(Error::MetricUnderflow) } else { Ok(i) }).unwrap_err();
            assert_eq!(err, Error::Trial { trial: 5, source: Box::new(Error::MetricUnderflow) });
        }
    }

    #[test]
    fn single_trial_curve_is_one_step() {
        assert_eq!(excess_curve(&[0.4]), vec![CdfPoint { d_threshold: 0.4, prob_exceed: 0.0 }]);
        let c = excess_curve(&[0.3, 0.1, 0.3, 0.2]);
        let probs: Vec<f64> = c.iter().map(|p| p.prob_exceed).collect();
        assert_eq!(probs, vec![0.75, 0.5, 0.0]);
    }

    #[test]
    fn trial_streams_differ() {
        use rand::Rng;
        let a: u64 = trial_rng(1, 0).random();
        let b: u64 = trial_rng(1, 1).random();
        let c: u64 = trial_rng(2, 0).random();
        assert!(a != b && a != c);
        assert_eq!(a, trial_rng(1, 0).random::<u64>());
    }

    proptest! {
        #[test]
        fn excess_curve_is_nonincreasing(deltas in proptest::collection::vec(0.0f64..3.0, 1..200)) {
            let c = excess_curve(&deltas);
            for w in c.windows(2) {
                prop_assert!(w[0].d_threshold < w[1].d_threshold);
                prop_assert!(w[0].prob_exceed >= w[1].prob_exceed);
            }
            for p in &c {
                let direct = deltas.iter().filter(|&&d| d > p.d_threshold).count() as f64 / deltas.len() as f64;
                prop_assert!((p.prob_exceed - direct).abs() < 1e-12);
            }
            prop_assert_eq!(c.last().unwrap().prob_exceed, 0.0);
        }
    }
}
