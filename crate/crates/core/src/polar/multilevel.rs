use rand::Rng;

use super::scl::{Mode, Position, SclEngine, LLR_CLAMP};
use crate::error::{Error, Result};

/// Source of per-level channel LLRs under natural labeling: symbol index
/// `k = sum_l b_l 2^l`, level 0 being the least significant bit.
pub trait LevelMetric {
    fn n(&self) -> usize;
    fn levels(&self) -> usize;
    /// LLRs `ln P(b_level = 0) / P(b_level = 1)` for every sample, given the
    /// already decided lower bits `prefix[j] < 2^level`.
    fn bit_llrs(&self, level: usize, prefix: &[usize], out: &mut [f64]);
}

/// Unnormalized nonnegative symbol weights, one row of `2^levels` per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolWeights {
    n: usize,
    m: usize,
    w: Vec<f64>,
}

impl SymbolWeights {
    pub fn new(n: usize, m: usize) -> Result<Self> {
        if m < 2 || !m.is_power_of_two() {
            return Err(Error::InvalidParams(format!("alphabet size {m} must be a power of two >= 2")));
        }
        Ok(Self { n, m, w: vec![0.0; n * m] })
    }

    pub fn alphabet_size(&self) -> usize {
        self.m
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.w[j * self.m..(j + 1) * self.m]
    }

    pub fn row_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.w[j * self.m..(j + 1) * self.m]
    }
}

impl LevelMetric for SymbolWeights {
    fn n(&self) -> usize {
        self.n
    }

    fn levels(&self) -> usize {
        self.m.trailing_zeros() as usize
    }

    fn bit_llrs(&self, level: usize, prefix: &[usize], out: &mut [f64]) {
        let stride = 1usize << level;
        for (j, (o, &p)) in out.iter_mut().zip(prefix).enumerate() {
            let row = self.row(j);
            let (mut s0, mut s1) = (0.0, 0.0);
            for (t, k) in (p..self.m).step_by(stride).enumerate() {
                if t & 1 == 0 {
                    s0 += row[k];
                } else {
                    s1 += row[k];
                }
            }
            *o = match (s0 > 0.0, s1 > 0.0) {
                (true, true) => (s0.ln() - s1.ln()).clamp(-LLR_CLAMP, LLR_CLAMP),
                (true, false) => LLR_CLAMP,
                (false, true) => -LLR_CLAMP,
                (false, false) => 0.0,
            };
        }
    }
}

/// A joint candidate over all levels.
#[derive(Debug, Clone, PartialEq)]
pub struct MultilevelCandidate {
    pub u: Vec<Vec<u8>>,
    pub x: Vec<Vec<u8>>,
    /// Symbol index of every sample.
    pub labels: Vec<usize>,
    pub metric: f64,
}

/// Level-by-level list processing with list passing: every surviving
/// candidate of level `l` seeds level `l + 1` with its own channel LLRs, and
/// the extended list is re-pruned jointly. Metrics accumulate across levels.
pub fn scl_multilevel<R: Rng>(
    engine: &mut SclEngine,
    roles: &[Vec<Position>],
    metric: &dyn LevelMetric,
    mode: Mode,
    rng: &mut R,
) -> Result<Vec<MultilevelCandidate>> {
    let n = engine.n();
    if metric.n() != n {
        return Err(Error::DimensionMismatch { expected: n, got: metric.n() });
    }
    if roles.len() != metric.levels() {
        return Err(Error::DimensionMismatch { expected: metric.levels(), got: roles.len() });
    }
    let mut list = vec![MultilevelCandidate { u: Vec::new(), x: Vec::new(), labels: vec![0; n], metric: 0.0 }];
    let mut llr = vec![0.0; n];
    for (level, level_roles) in roles.iter().enumerate() {
        let roots = list
            .iter()
            .map(|c| {
                metric.bit_llrs(level, &c.labels, &mut llr);
                Ok((SclEngine::prepare_channel(&llr)?, c.metric))
            })
            .collect::<Result<Vec<_>>>()?;
        let out = engine.run(&roots, level_roles, mode, rng)?;
        list = out
            .into_iter()
            .map(|c| {
                let parent = &list[c.origin];
                let mut u = parent.u.clone();
                let mut x = parent.x.clone();
                let labels = parent.labels.iter().zip(&c.x).map(|(&l, &b)| l | (b as usize) << level).collect();
                u.push(c.u);
                x.push(c.x);
                MultilevelCandidate { u, x, labels, metric: c.metric }
            })
            .collect();
    }
    Ok(list)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polar::polar_transform;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn llrs_follow_natural_labels() {
        let mut w = SymbolWeights::new(1, 4).unwrap();
        w.row_mut(0).copy_from_slice(&[0.1, 0.2, 0.3, 0.4]);
        let mut out = [0.0];
        w.bit_llrs(0, &[0], &mut out);
        assert!((out[0] - (0.4f64 / 0.6).ln()).abs() < 1e-12);
        w.bit_llrs(1, &[1], &mut out);
        assert!((out[0] - (0.2f64 / 0.4).ln()).abs() < 1e-12);
        w.bit_llrs(1, &[0], &mut out);
        assert!((out[0] - (0.1f64 / 0.3).ln()).abs() < 1e-12);
    }

    #[test]
    fn full_list_multilevel_is_joint_ml() {
        // two levels, n = 4, all positions free: 2^8 joint words
        let n = 4;
        let mut r = ChaCha12Rng::seed_from_u64(9);
        let mut w = SymbolWeights::new(n, 4).unwrap();
        for j in 0..n {
            for v in w.row_mut(j) {
                *v = r.random_range(0.05..1.0);
            }
        }
        let roles = vec![vec![Position::Free; n]; 2];
        let mut engine = SclEngine::new(n, 256).unwrap();
        let list = scl_multilevel(&mut engine, &roles, &w, Mode::Max, &mut r).unwrap();
        let mut best = f64::INFINITY;
        for m0 in 0..16usize {
            for m1 in 0..16usize {
                let u0: Vec<u8> = (0..n).map(|i| (m0 >> i & 1) as u8).collect();
                let u1: Vec<u8> = (0..n).map(|i| (m1 >> i & 1) as u8).collect();
                let (x0, x1) = (polar_transform(&u0), polar_transform(&u1));
                let pen: f64 = (0..n)
                    .map(|j| {
                        let k = x0[j] as usize + 2 * x1[j] as usize;
                        -(w.row(j)[k] / w.row(j).iter().sum::<f64>()).ln()
                    })
                    .sum();
                best = best.min(pen);
            }
        }
        assert!((list[0].metric - best).abs() < 1e-9, "{} vs {best}", list[0].metric);
        let top = &list[0];
        for j in 0..n {
            assert_eq!(top.labels[j], top.x[0][j] as usize + 2 * top.x[1][j] as usize);
        }
    }
}
