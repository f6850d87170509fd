use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::polar_transform;
use crate::error::{Error, Result};
use crate::numerics::softplus;

/// Channel LLRs are clamped to `±LLR_CLAMP`.
pub const LLR_CLAMP: f64 = 40.0;

/// Per-position role during list processing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Position {
    /// Value known in advance (frozen, or pinned information bit).
    Fixed(u8),
    /// Branched on (max mode) or drawn from the local posterior (sample mode).
    Free,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Max,
    Sample,
}

/// A completed path. `metric` is `-ln P(u | channel)` accumulated bitwise
/// (lower is better); `origin` indexes the root the path grew from.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub u: Vec<u8>,
    pub x: Vec<u8>,
    pub metric: f64,
    pub origin: usize,
}

/// `2 atanh(tanh(a/2) tanh(b/2))` in overflow-free form.
#[inline]
fn f_op(a: f64, b: f64) -> f64 {
    let s = if (a < 0.0) != (b < 0.0) { -1.0 } else { 1.0 };
    let base = s * a.abs().min(b.abs());
    let sum = (a + b).abs();
    let diff = (a - b).abs();
    // both corrections are below e^-40 past this point
    if sum > 40.0 && diff > 40.0 {
        return base;
    }
    base + (-sum).exp().ln_1p() - (-diff).exp().ln_1p()
}

#[inline]
fn g_op(a: f64, b: f64, s: u8) -> f64 {
    if s == 0 {
        b + a
    } else {
        b - a
    }
}

#[derive(Debug, Clone)]
struct Path {
    chan: Arc<Vec<f64>>,
    /// Layers `0..m` flattened; layer `l` lives at `(1 << l) - 1`.
    llr: Vec<f64>,
    /// Re-encoded left siblings, same layout as `llr`.
    left: Vec<u8>,
    u: Vec<u8>,
    metric: f64,
    origin: usize,
}

impl Path {
    fn empty(n: usize) -> Self {
        Self {
            chan: Arc::new(Vec::new()),
            llr: vec![0.0; n - 1],
            left: vec![0; n - 1],
            u: vec![0; n],
            metric: 0.0,
            origin: 0,
        }
    }

    /// Bring `llr[0]` up to date for bit `i`.
    fn update_llr(&mut self, i: usize, m: usize) {
        let top = if i == 0 { m - 1 } else { i.trailing_zeros() as usize };
        for lam in (0..=top).rev() {
            let size = 1usize << lam;
            let off = size - 1;
            let (lower, upper) = self.llr.split_at_mut(2 * size - 1);
            let parent: &[f64] = if lam + 1 == m { &self.chan } else { &upper[..2 * size] };
            let child = &mut lower[off..off + size];
            let (p1, p2) = parent.split_at(size);
            if lam == top && i != 0 {
                let left = &self.left[off..off + size];
                for k in 0..size {
                    child[k] = g_op(p1[k], p2[k], left[k]);
                }
            } else {
                for k in 0..size {
                    child[k] = f_op(p1[k], p2[k]);
                }
            }
        }
    }

    /// Fold decided bit `i` into the partial sums.
    fn update_partial(&mut self, i: usize, m: usize, scratch: &mut Vec<u8>, next: &mut Vec<u8>) {
        scratch.clear();
        scratch.push(self.u[i]);
        let mut lam = 0;
        while lam < m && (i >> lam) & 1 == 1 {
            let size = 1usize << lam;
            let left = &self.left[size - 1..2 * size - 1];
            next.clear();
            next.extend(left.iter().zip(scratch.iter()).map(|(a, b)| a ^ b));
            next.extend_from_slice(scratch);
            std::mem::swap(scratch, next);
            lam += 1;
        }
        if lam < m {
            let size = 1usize << lam;
            self.left[size - 1..2 * size - 1].copy_from_slice(scratch);
        }
    }
}

/// Reusable successive-cancellation list engine for one block length.
#[derive(Debug, Clone)]
pub struct SclEngine {
    n: usize,
    m: usize,
    list_size: usize,
    pool: Vec<Path>,
    active: Vec<usize>,
    spare: Vec<usize>,
    scratch: (Vec<u8>, Vec<u8>),
    cands: Vec<(f64, usize, u8)>,
    /// Per-slot surviving children (bit v set when child v survives) and their metrics.
    keep: Vec<u8>,
    child_metric: Vec<(f64, f64)>,
}

impl SclEngine {
    pub fn new(n: usize, list_size: usize) -> Result<Self> {
        if n < 2 || !n.is_power_of_two() {
            return Err(Error::InvalidParams(format!("block length {n} must be a power of two >= 2")));
        }
        if list_size == 0 {
            return Err(Error::InvalidParams("list size must be positive".into()));
        }
        Ok(Self {
            n,
            m: n.trailing_zeros() as usize,
            list_size,
            pool: Vec::new(),
            active: Vec::new(),
            spare: Vec::new(),
            scratch: (Vec::with_capacity(n), Vec::with_capacity(n)),
            cands: Vec::new(),
            keep: Vec::new(),
            child_metric: Vec::new(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn list_size(&self) -> usize {
        self.list_size
    }

    /// Clamp raw channel LLRs; NaN is rejected.
    pub fn prepare_channel(llrs: &[f64]) -> Result<Arc<Vec<f64>>> {
        if llrs.iter().any(|l| l.is_nan()) {
            return Err(Error::MetricUnderflow);
        }
        Ok(Arc::new(llrs.iter().map(|l| l.clamp(-LLR_CLAMP, LLR_CLAMP)).collect()))
    }

    /// Runs the list over `roles` starting from `roots` (channel LLRs already
    /// clamped, initial metric). At most `list_size` roots are allowed.
    /// Candidates come back sorted by metric, best first.
    pub fn run<R: Rng>(&mut self, roots: &[(Arc<Vec<f64>>, f64)], roles: &[Position], mode: Mode, rng: &mut R) -> Result<Vec<Candidate>> {
        let n = self.n;
        if roles.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: roles.len() });
        }
        if roots.is_empty() || roots.len() > self.list_size {
            return Err(Error::InvalidParams(format!("{} roots for list size {}", roots.len(), self.list_size)));
        }
        if let Some((c, _)) = roots.iter().find(|(c, _)| c.len() != n) {
            return Err(Error::DimensionMismatch { expected: n, got: c.len() });
        }
        while self.pool.len() < self.list_size {
            self.pool.push(Path::empty(n));
        }
        self.active.clear();
        self.spare.clear();
        for (slot, (chan, metric)) in roots.iter().enumerate() {
            let p = &mut self.pool[slot];
            p.chan = Arc::clone(chan);
            p.metric = *metric;
            p.origin = slot;
            self.active.push(slot);
        }
        self.spare.extend(roots.len()..self.list_size);

        for (i, &role) in roles.iter().enumerate().take(n) {
            for &s in &self.active {
                self.pool[s].update_llr(i, self.m);
            }
            match (role, mode) {
                (Position::Fixed(v), _) => {
                    for &s in &self.active {
                        let p = &mut self.pool[s];
                        let l = p.llr[0];
                        p.u[i] = v;
                        p.metric += softplus(if v == 0 { -l } else { l });
                    }
                }
                (Position::Free, Mode::Sample) => {
                    for &s in &self.active {
                        let p = &mut self.pool[s];
                        let l = p.llr[0];
                        // P(u = 1) = 1 / (1 + e^l)
                        let v = u8::from(rng.random::<f64>() * (1.0 + l.exp()) < 1.0);
                        p.u[i] = v;
                        p.metric += softplus(if v == 0 { -l } else { l });
                    }
                }
                (Position::Free, Mode::Max) => self.branch(i),
            }
            if self.active.iter().all(|&s| !self.pool[s].metric.is_finite()) {
                return Err(Error::MetricUnderflow);
            }
            let (scratch, next) = &mut self.scratch;
            for &s in &self.active {
                self.pool[s].update_partial(i, self.m, scratch, next);
            }
        }

        let mut out: Vec<Candidate> = self
            .active
            .iter()
            .map(|&s| {
                let p = &self.pool[s];
                Candidate { u: p.u.clone(), x: polar_transform(&p.u), metric: p.metric, origin: p.origin }
            })
            .collect();
        out.sort_by(|a, b| a.metric.total_cmp(&b.metric));
        Ok(out)
    }

    /// Successive cancellation with every bit pinned to `u`; writes the
    /// per-bit penalty `-ln P(u_i | u_<i, channel)` into `out`.
    pub fn genie_penalties(&mut self, chan: &Arc<Vec<f64>>, u: &[u8], out: &mut [f64]) -> Result<()> {
        let n = self.n;
        if chan.len() != n || u.len() != n || out.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: u.len().min(chan.len()).min(out.len()) });
        }
        if self.pool.is_empty() {
            self.pool.push(Path::empty(n));
        }
        let (scratch, next) = &mut self.scratch;
        let p = &mut self.pool[0];
        p.chan = Arc::clone(chan);
        for i in 0..n {
            p.update_llr(i, self.m);
            let l = p.llr[0];
            p.u[i] = u[i];
            out[i] = softplus(if u[i] == 0 { -l } else { l });
            p.update_partial(i, self.m, scratch, next);
        }
        Ok(())
    }

    /// Extend every path by both values at bit `i` and keep the best `list_size`.
    fn branch(&mut self, i: usize) {
        self.cands.clear();
        for &s in &self.active {
            let p = &self.pool[s];
            let l = p.llr[0];
            self.cands.push((p.metric + softplus(-l), s, 0));
            self.cands.push((p.metric + softplus(l), s, 1));
        }
        if self.cands.len() > self.list_size {
            let k = self.list_size;
            self.cands.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
            self.cands.truncate(k);
        }
        let keep = &mut self.keep;
        let metrics = &mut self.child_metric;
        keep.clear();
        keep.resize(self.pool.len(), 0);
        metrics.clear();
        metrics.resize(self.pool.len(), (0.0, 0.0));
        for &(mt, s, v) in &self.cands {
            keep[s] |= 1 << v;
            if v == 0 {
                metrics[s].0 = mt;
            } else {
                metrics[s].1 = mt;
            }
        }
        let previous = std::mem::take(&mut self.active);
        for &s in &previous {
            if keep[s] == 0 {
                self.spare.push(s);
            }
        }
        for &s in &previous {
            match keep[s] {
                0 => {}
                1 | 2 => {
                    let v = keep[s] >> 1;
                    let p = &mut self.pool[s];
                    p.u[i] = v;
                    p.metric = if v == 0 { metrics[s].0 } else { metrics[s].1 };
                    self.active.push(s);
                }
                _ => {
                    let t = self.spare.pop().expect("a pruned slot is free for every clone");
                    let (src, dst) = if s < t {
                        let (a, b) = self.pool.split_at_mut(t);
                        (&a[s], &mut b[0])
                    } else {
                        let (a, b) = self.pool.split_at_mut(s);
                        (&b[0], &mut a[t])
                    };
                    dst.clone_from(src);
                    dst.u[i] = 1;
                    dst.metric = metrics[s].1;
                    let p = &mut self.pool[s];
                    p.u[i] = 0;
                    p.metric = metrics[s].0;
                    self.active.push(s);
                    self.active.push(t);
                }
            }
        }
    }
}

/// Single-level convenience wrapper around [`SclEngine`].
pub fn scl_process<R: Rng>(list_size: usize, roles: &[Position], llrs: &[f64], mode: Mode, rng: &mut R) -> Result<Vec<Candidate>> {
    let mut engine = SclEngine::new(llrs.len(), list_size)?;
    let chan = SclEngine::prepare_channel(llrs)?;
    engine.run(&[(chan, 0.0)], roles, mode, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn rng() -> ChaCha12Rng {
        ChaCha12Rng::seed_from_u64(1)
    }

    /// `-ln P(x | llr)` of a codeword, summed bitwise.
    fn codeword_penalty(x: &[u8], llr: &[f64]) -> f64 {
        x.iter().zip(llr).map(|(&b, &l)| softplus(if b == 0 { -l } else { l })).sum()
    }

    /// Exhaustive search over all completions of the free positions.
    fn brute_force(roles: &[Position], llr: &[f64]) -> (Vec<u8>, f64) {
        let clamped: Vec<f64> = llr.iter().map(|l| l.clamp(-LLR_CLAMP, LLR_CLAMP)).collect();
        let free: Vec<usize> = (0..roles.len()).filter(|&i| roles[i] == Position::Free).collect();
        let mut best = (Vec::new(), f64::INFINITY);
        for mask in 0..1usize << free.len() {
            let mut u: Vec<u8> = roles.iter().map(|r| if let Position::Fixed(v) = r { *v } else { 0 }).collect();
            for (j, &i) in free.iter().enumerate() {
                u[i] = ((mask >> j) & 1) as u8;
            }
            let pen = codeword_penalty(&polar_transform(&u), &clamped);
            if pen < best.1 {
                best = (u, pen);
            }
        }
        best
    }

    /// Recursive successive cancellation, written independently of the engine.
    fn sc_recursive(llr: &[f64], roles: &[Position]) -> (Vec<u8>, Vec<u8>) {
        let n = llr.len();
        if n == 1 {
            let u = match roles[0] {
                Position::Fixed(v) => v,
                Position::Free => u8::from(llr[0] < 0.0),
            };
            return (vec![u], vec![u]);
        }
        let h = n / 2;
        let la: Vec<f64> = (0..h)
            .map(|k| {
                let (a, b) = (llr[k], llr[h + k]);
                2.0 * ((a / 2.0).tanh() * (b / 2.0).tanh()).atanh()
            })
            .collect();
        let (ua, xa) = sc_recursive(&la, &roles[..h]);
        let lb: Vec<f64> = (0..h).map(|k| llr[h + k] + if xa[k] == 0 { llr[k] } else { -llr[k] }).collect();
        let (ub, xb) = sc_recursive(&lb, &roles[h..]);
        let x = xa.iter().zip(&xb).map(|(a, b)| a ^ b).chain(xb.iter().cloned()).collect();
        (ua.into_iter().chain(ub).collect(), x)
    }

    #[test]
    fn all_frozen_gives_zero_word() {
        let roles = vec![Position::Fixed(0); 16];
        let llr: Vec<f64> = (0..16).map(|i| i as f64 - 7.5).collect();
        let c = scl_process(8, &roles, &llr, Mode::Max, &mut rng()).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].u, vec![0; 16]);
    }

    #[test]
    fn noiseless_rate_one_recovers_word() {
        let u: Vec<u8> = (0..32).map(|i| ((i * 7 + 3) % 5 % 2) as u8).collect();
        let x = polar_transform(&u);
        let llr: Vec<f64> = x.iter().map(|&b| if b == 0 { f64::INFINITY } else { f64::NEG_INFINITY }).collect();
        let c = scl_process(4, &[Position::Free; 32], &llr, Mode::Max, &mut rng()).unwrap();
        assert_eq!(c[0].u, u);
        assert_eq!(c[0].x, x);
    }

    #[test]
    fn ml_example_n8_list8() {
        let mut roles = vec![Position::Fixed(0); 8];
        for i in [3, 5, 6, 7] {
            roles[i] = Position::Free;
        }
        let llr = [1.3, -0.4, 2.2, -3.1, 0.7, 0.1, -1.9, 0.5];
        let c = scl_process(8, &roles, &llr, Mode::Max, &mut rng()).unwrap();
        let (u, pen) = brute_force(&roles, &llr);
        assert_eq!(c[0].u, u);
        assert!((c[0].metric - pen).abs() < 1e-9);
    }

    #[test]
    fn metric_is_codeword_penalty() {
        let llr = [0.3, -2.0, 1.1, 0.0, -0.2, 5.0, -1.0, 0.8];
        let c = scl_process(4, &[Position::Free; 8], &llr, Mode::Max, &mut rng()).unwrap();
        for cand in &c {
            assert!((cand.metric - codeword_penalty(&cand.x, &llr)).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_nan() {
        let mut llr = vec![0.5; 8];
        llr[3] = f64::NAN;
        assert_eq!(scl_process(2, &[Position::Free; 8], &llr, Mode::Max, &mut rng()), Err(Error::MetricUnderflow));
    }

    #[test]
    fn sample_mode_uniform_bits() {
        let n = 16;
        let llr = vec![0.0; n];
        let roles = vec![Position::Free; n];
        let mut engine = SclEngine::new(n, 1).unwrap();
        let chan = SclEngine::prepare_channel(&llr).unwrap();
        let mut r = rng();
        let trials = 100_000 / n;
        let mut ones = vec![0usize; n];
        for _ in 0..trials {
            let c = engine.run(&[(chan.clone(), 0.0)], &roles, Mode::Sample, &mut r).unwrap();
            for (o, &b) in ones.iter_mut().zip(&c[0].u) {
                *o += b as usize;
            }
        }
        // chi-square with n degrees of freedom; 99.9% quantile for 16 dof is 39.25
        let expect = trials as f64 / 2.0;
        let chi2: f64 = ones.iter().map(|&o| 2.0 * (o as f64 - expect).powi(2) / expect).sum();
        assert!(chi2 < 39.25, "{chi2}");
    }

    #[test]
    fn larger_lists_approach_ml_on_average() {
        let mut r = rng();
        let lists = [1, 2, 4, 8, 16];
        let mut mean = [0.0; 5];
        for _ in 0..200 {
            let llr: Vec<f64> = (0..16).map(|_| r.random_range(-4.0..4.0)).collect();
            let roles: Vec<Position> =
                (0..16).map(|_| if r.random::<f64>() < 0.6 { Position::Free } else { Position::Fixed(0) }).collect();
            let (_, ml) = brute_force(&roles, &llr);
            for (acc, &l) in mean.iter_mut().zip(&lists) {
                let top = scl_process(l, &roles, &llr, Mode::Max, &mut rng()).unwrap()[0].metric;
                assert!(top >= ml - 1e-9);
                *acc += (top - ml) / 200.0;
            }
        }
        for w in mean.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "{mean:?}");
        }
    }

    proptest! {
        #[test]
        fn list_one_equals_sc(llr in proptest::collection::vec(-8.0f64..8.0, 16), mask in 0u32..(1 << 16)) {
            let roles: Vec<Position> = (0..16).map(|i| if mask >> i & 1 == 1 { Position::Free } else { Position::Fixed(0) }).collect();
            let c = scl_process(1, &roles, &llr, Mode::Max, &mut rng()).unwrap();
            let (u, x) = sc_recursive(&llr, &roles);
            prop_assert_eq!(&c[0].u, &u);
            prop_assert_eq!(&c[0].x, &x);
        }

        #[test]
        fn full_list_is_ml(
            n_log in 1u32..=4,
            llr in proptest::collection::vec(-6.0f64..6.0, 16),
            mask in 0u32..(1 << 16),
            fixed in 0u32..(1 << 16),
        ) {
            let n = 1usize << n_log;
            let mut roles: Vec<Position> = (0..n)
                .map(|i| if mask >> i & 1 == 1 { Position::Free } else { Position::Fixed((fixed >> i & 1) as u8) })
                .collect();
            // at most 12 free positions
            let mut free = 0;
            for r in roles.iter_mut() {
                if *r == Position::Free {
                    free += 1;
                    if free > 12 {
                        *r = Position::Fixed(0);
                    }
                }
            }
            let free = free.min(12);
            let c = scl_process(1 << free, &roles, &llr[..n], Mode::Max, &mut rng()).unwrap();
            let (_, pen) = brute_force(&roles, &llr[..n]);
            prop_assert!((c[0].metric - pen).abs() < 1e-8, "{} vs {}", c[0].metric, pen);
        }
    }
}
