//! Vector Wyner-Ziv coding: the conditional covariance is diagonalized, the
//! distortion is reverse-waterfilled over its eigencomponents, and each
//! active component runs its own scalar codec.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::codecs::{dither_stream_for, Codec, CodecConfig, EncodedMessage};
use crate::error::{Error, Result};
use crate::gauss_core::{conditional_moments, eigh, JointGaussianSpec, Mat};
use crate::rd_theory::{reverse_waterfill, WaterfillPlan};

/// Plan of one eigencomponent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentPlan {
    /// Conditional variance of `X_V,i` given `Y_V,i`.
    pub lambda: f64,
    /// Variance of the side information `Y_V,i`.
    pub sigma2_y: f64,
    pub rate: f64,
    pub target_distortion: f64,
    pub active: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub codec: Option<CodecConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorPlan {
    /// Orthogonal; columns are eigenvectors of `Q_{X|Y}`.
    pub v: Mat,
    /// `E[X | Y] = gain * Y`.
    pub gain: Mat,
    pub waterfill: WaterfillPlan,
    pub components: Vec<ComponentPlan>,
}

impl VectorPlan {
    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn total_rate(&self) -> f64 {
        self.waterfill.total_rate()
    }

    /// Attaches a scalar codec to active component `i`; the codec's source
    /// model and message length must match the plan.
    pub fn attach(&mut self, i: usize, cfg: CodecConfig) -> Result<()> {
        let c = self.components.get_mut(i).ok_or(Error::DimensionMismatch { expected: i + 1, got: 0 })?;
        if !c.active {
            return Err(Error::Config(format!("component {i} is inactive")));
        }
        cfg.validate()?;
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-6 * a.abs().max(b.abs()).max(1.0);
        if !close(cfg.sigma2_z, c.lambda) || !close(cfg.sigma2_y, c.sigma2_y) {
            return Err(Error::Config(format!(
                "component {i}: codec source ({}, {}) differs from the plan ({}, {})",
                cfg.sigma2_y, cfg.sigma2_z, c.sigma2_y, c.lambda
            )));
        }
        let planned = (cfg.n as f64 * c.rate).round() as usize;
        if cfg.message_bits() != planned {
            return Err(Error::Config(format!("component {i}: {} message bits, plan needs {planned}", cfg.message_bits())));
        }
        c.codec = Some(cfg);
        Ok(())
    }

    /// Ready-to-run codecs, `None` for inactive components.
    pub fn codecs(&self) -> Result<Vec<Option<Codec>>> {
        self.components
            .iter()
            .enumerate()
            .map(|(i, c)| match (&c.codec, c.active) {
                (Some(cfg), _) => Codec::new(cfg).map(Some),
                (None, false) => Ok(None),
                (None, true) => Err(Error::Config(format!("active component {i} has no codec"))),
            })
            .collect()
    }
}

/// Eigen-transform and reverse waterfilling for a total distortion `d_target`.
pub fn plan_subchannels(spec: &JointGaussianSpec, d_target: f64) -> Result<VectorPlan> {
    if !(d_target > 0.0) {
        return Err(Error::DomainError(format!("target distortion must be positive, got {d_target}")));
    }
    let (gain, qcond) = conditional_moments(spec)?;
    let eig = eigh(&qcond)?;
    let waterfill = reverse_waterfill(&eig.lambdas, d_target)?;
    // Cov(Y_V) = V^T gain Cxy^T V
    let explained = gain.matmul(&spec.cxy().transpose())?;
    let cov_yv = eig.v.transpose().matmul(&explained)?.matmul(&eig.v)?;
    let components = waterfill
        .per_component
        .iter()
        .enumerate()
        .map(|(i, w)| ComponentPlan {
            lambda: w.lambda_i,
            sigma2_y: cov_yv[(i, i)].max(0.0),
            rate: w.rate_i,
            target_distortion: w.distortion_i,
            active: w.active,
            codec: None,
        })
        .collect();
    Ok(VectorPlan { v: eig.v, gain, waterfill, components })
}

/// `x_v = V^T x` and `y_v = V^T gain y` for one sample.
pub fn transform_source(x: &[f64], y: &[f64], plan: &VectorPlan) -> Result<(Vec<f64>, Vec<f64>)> {
    if x.len() != plan.dim() {
        return Err(Error::DimensionMismatch { expected: plan.dim(), got: x.len() });
    }
    if y.len() != plan.gain.cols() {
        return Err(Error::DimensionMismatch { expected: plan.gain.cols(), got: y.len() });
    }
    let vt = plan.v.transpose();
    Ok((vt.apply(x)?, vt.apply(&plan.gain.apply(y)?)?))
}

/// Outcome of one vector block.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorBlock {
    /// One message per component, `None` when inactive.
    pub messages: Vec<Option<EncodedMessage>>,
    /// Reconstruction, one row per sample.
    pub x_hat: Vec<Vec<f64>>,
    /// Mean over samples of the squared error norm.
    pub delta: f64,
    pub per_component: Vec<f64>,
    /// Every active component decoded the encoder's symbols.
    pub genie_ok: bool,
}

/// Codes one block of `n` vector samples. Component `i` of block `trial`
/// uses the dither stream `(codec.dither_seed, trial)`.
pub fn run_vector_block<R: Rng>(
    x: &[Vec<f64>],
    y: &[Vec<f64>],
    plan: &VectorPlan,
    codecs: &mut [Option<Codec>],
    trial: u64,
    rng: &mut R,
) -> Result<VectorBlock> {
    let n = x.len();
    let d = plan.dim();
    if y.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: y.len() });
    }
    if codecs.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: codecs.len() });
    }
    // component streams
    let mut xv = vec![vec![0.0; n]; d];
    let mut yv = vec![vec![0.0; n]; d];
    for (j, (xs, ys)) in x.iter().zip(y).enumerate() {
        let (a, b) = transform_source(xs, ys, plan)?;
        for i in 0..d {
            xv[i][j] = a[i];
            yv[i][j] = b[i];
        }
    }
    let mut messages = Vec::with_capacity(d);
    let mut xv_hat = Vec::with_capacity(d);
    let mut genie_ok = true;
    for (i, codec) in codecs.iter_mut().enumerate() {
        match codec {
            Some(c) => {
                let cfg = plan.components[i].codec.as_ref();
                let (seed, range) = cfg.map_or((0, 0.0), |c| (c.dither_seed, c.dither_range()));
                let dither = dither_stream_for(seed, trial, n, range);
                let out = c.process_block(&xv[i], &yv[i], &dither, rng)?;
                genie_ok &= out.result.genie_ok();
                messages.push(Some(out.message));
                xv_hat.push(out.x_hat);
            }
            None => {
                messages.push(None);
                xv_hat.push(yv[i].clone());
            }
        }
    }
    let per_component: Vec<f64> = (0..d)
        .map(|i| xv[i].iter().zip(&xv_hat[i]).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / n as f64)
        .collect();
    let x_hat = (0..n)
        .map(|j| {
            let col: Vec<f64> = (0..d).map(|i| xv_hat[i][j]).collect();
            plan.v.apply(&col)
        })
        .collect::<Result<Vec<_>>>()?;
    let delta = x.iter().zip(&x_hat).map(|(a, b)| a.iter().zip(b).map(|(p, q)| (p - q).powi(2)).sum::<f64>()).sum::<f64>() / n as f64;
    Ok(VectorBlock { messages, x_hat, delta, per_component, genie_ok })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gauss_core::{sample_joint, SymMatrix};

    /// `X = [a, b]^T Y + Z` with `Q_Z = [[3, 1], [1, 3]] / 4`.
    fn example() -> JointGaussianSpec {
        let a = (2f64.sqrt() + 3f64.sqrt()) / 2.0;
        let b = (2f64.sqrt() - 3f64.sqrt()) / 2.0;
        let qx = vec![vec![a * a + 0.75, a * b + 0.25], vec![a * b + 0.25, b * b + 0.75]];
        JointGaussianSpec::new(
            SymMatrix::from_rows(&qx).unwrap(),
            SymMatrix::scalar(1.0).unwrap(),
            Mat::from_rows(&[vec![a], vec![b]]).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn example_plan() {
        let plan = plan_subchannels(&example(), 0.5).unwrap();
        assert!((plan.waterfill.level_lambda - 0.25).abs() < 1e-12);
        let c = &plan.components;
        assert!((c[0].lambda - 1.0).abs() < 1e-12 && (c[1].lambda - 0.5).abs() < 1e-12);
        assert!((c[0].rate - 1.0).abs() < 1e-12 && (c[1].rate - 0.5).abs() < 1e-12);
        assert!((c[0].sigma2_y - 1.0).abs() < 1e-12 && (c[1].sigma2_y - 1.5).abs() < 1e-12);
        assert!((plan.total_rate() - 1.5).abs() < 1e-12);
    }

    #[test]
    fn everything_inactive_above_total_variance() {
        let plan = plan_subchannels(&example(), 2.0).unwrap();
        assert!(plan.components.iter().all(|c| !c.active));
        assert_eq!(plan.total_rate(), 0.0);
    }

    #[test]
    fn single_active_component() {
        let spec = JointGaussianSpec::new(
            SymMatrix::from_rows(&[vec![2.0, 0.0], vec![0.0, 1.1]]).unwrap(),
            SymMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap(),
            Mat::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap(),
        )
        .unwrap();
        let plan = plan_subchannels(&spec, 0.3).unwrap();
        assert!((plan.waterfill.level_lambda - 0.2).abs() < 1e-12);
        assert!(plan.components[0].active && !plan.components[1].active);
        assert!((plan.components[0].rate - 0.5 * 5f64.log2()).abs() < 1e-12);
    }

    #[test]
    fn transform_preserves_norm_and_decorrelates() {
        let spec = example();
        let plan = plan_subchannels(&spec, 0.5).unwrap();
        let (xs, ys) = sample_joint(&spec, 200_000, 5).unwrap();
        let mut s = [[0.0; 2]; 2];
        for (x, y) in xs.iter().zip(&ys) {
            let (xv, yv) = transform_source(x, y, &plan).unwrap();
            let nx: f64 = x.iter().map(|v| v * v).sum();
            let nv: f64 = xv.iter().map(|v| v * v).sum();
            assert!((nx - nv).abs() < 1e-12 * nx.max(1.0));
            let e = [xv[0] - yv[0], xv[1] - yv[1]];
            for i in 0..2 {
                for j in 0..2 {
                    s[i][j] += e[i] * e[j];
                }
            }
        }
        let n = xs.len() as f64;
        assert!((s[0][0] / n - 1.0).abs() < 0.02);
        assert!((s[1][1] / n - 0.5).abs() < 0.01);
        // correlation standard error ~ 1 / sqrt(n)
        let corr = s[0][1] / (s[0][0] * s[1][1]).sqrt();
        assert!(corr.abs() < 3.0 / n.sqrt());
    }

    #[test]
    fn inactive_block_reconstructs_the_conditional_mean() {
        let spec = example();
        let plan = plan_subchannels(&spec, 2.0).unwrap();
        let mut codecs = plan.codecs().unwrap();
        let (xs, ys) = sample_joint(&spec, 4000, 1).unwrap();
        let mut rng = <rand_chacha::ChaCha12Rng as rand::SeedableRng>::seed_from_u64(0);
        let out = run_vector_block(&xs, &ys, &plan, &mut codecs, 0, &mut rng).unwrap();
        for (xh, y) in out.x_hat.iter().zip(&ys) {
            let cm = plan.gain.apply(y).unwrap();
            assert!(xh.iter().zip(&cm).all(|(a, b)| (a - b).abs() < 1e-12));
        }
        assert!((out.delta - 1.5).abs() < 0.1);
        assert!((out.delta - out.per_component.iter().sum::<f64>()).abs() < 1e-12);
    }
}
