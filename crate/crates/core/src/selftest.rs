//! Fast invariant checks for a fresh checkout.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::lattice::{mod_reduce, shaping_posterior, LatticeParams, ShapingDensity};
use crate::numerics::softplus;
use crate::polar::{load_reliability, load_reliability_from, polar_transform, scl_process, Mode, Position, LLR_CLAMP, MAX_BLOCK_LENGTH};
use crate::rd_theory::reverse_waterfill;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &'static str, passed: bool, detail: String) -> Self {
        Self { name, passed, detail }
    }
}

/// Runs every check; `reliability` replaces the embedded sequence.
pub fn run_selftest(reliability: Option<&Path>, seed: u64) -> Vec<Check> {
    vec![
        check_reliability(reliability),
        check_modulo(seed),
        check_uniform_labels(),
        check_scl_matches_ml(seed),
        check_waterfill(),
    ]
}

fn check_reliability(path: Option<&Path>) -> Check {
    let seq = match path {
        Some(p) => load_reliability_from(p, MAX_BLOCK_LENGTH),
        None => load_reliability(MAX_BLOCK_LENGTH),
    };
    match seq {
        Ok(s) => {
            let mut sorted = s.clone();
            sorted.sort_unstable();
            let ok = sorted.iter().copied().eq(0..MAX_BLOCK_LENGTH);
            Check::new("reliability", ok, format!("{} positions", s.len()))
        }
        Err(e) => Check::new("reliability", false, e.to_string()),
    }
}

fn check_modulo(seed: u64) -> Check {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let mut in_range = true;
    for _ in 0..100_000 {
        let a: f64 = rng.random_range(0.1..20.0);
        let x: f64 = rng.random_range(-1e4..1e4);
        let (r, k) = mod_reduce(x, a);
        in_range &= (-0.5 * a..0.5 * a).contains(&r);
        worst = worst.max((r + k as f64 * a - x).abs() / x.abs().max(1.0));
    }
    Check::new("modulo", in_range && worst < 1e-12, format!("max relative residual {worst:.2e}"))
}

fn check_uniform_labels() -> Check {
    let p = match LatticeParams::new(10.0, 8, 0.5, 1.0) {
        Ok(p) => p,
        Err(e) => return Check::new("shaping uniformity", false, e.to_string()),
    };
    let q = ShapingDensity::truncated_gaussian(&p);
    let n = 20_000;
    let mut marg = [0.0; 8];
    for i in 0..n {
        let x = -5.0 + 10.0 * (i as f64 + 0.5) / n as f64;
        match shaping_posterior(x, &q, &p) {
            Ok(post) => marg.iter_mut().zip(post).for_each(|(m, v)| *m += v / n as f64),
            Err(e) => return Check::new("shaping uniformity", false, e.to_string()),
        }
    }
    let dev = marg.iter().map(|m| (m - 0.125).abs()).fold(0.0, f64::max);
    Check::new("shaping uniformity", dev < 1e-6, format!("max |P(u) - 1/M| {dev:.2e}"))
}

/// Lowest codeword penalty over all completions of the free positions.
fn exhaustive_penalty(roles: &[Position], llr: &[f64]) -> f64 {
    let free: Vec<usize> = (0..roles.len()).filter(|&i| roles[i] == Position::Free).collect();
    let mut best = f64::INFINITY;
    for mask in 0..1usize << free.len() {
        let mut u: Vec<u8> = roles.iter().map(|r| if let Position::Fixed(v) = r { *v } else { 0 }).collect();
        for (j, &i) in free.iter().enumerate() {
            u[i] = ((mask >> j) & 1) as u8;
        }
        let pen: f64 = polar_transform(&u)
            .iter()
            .zip(llr)
            .map(|(&b, &l)| {
                let l = l.clamp(-LLR_CLAMP, LLR_CLAMP);
                softplus(if b == 0 { -l } else { l })
            })
            .sum();
        best = best.min(pen);
    }
    best
}

fn check_scl_matches_ml(seed: u64) -> Check {
    let mut rng = ChaCha12Rng::seed_from_u64(seed ^ 0x5c1);
    let n = 16;
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let free = rng.random_range(1..=8);
        let mut roles: Vec<Position> = (0..n).map(|_| Position::Fixed(rng.random_range(0..2))).collect();
        let mut slots: Vec<usize> = (0..n).collect();
        for k in 0..free {
            let j = rng.random_range(k..n);
            slots.swap(k, j);
            roles[slots[k]] = Position::Free;
        }
        let llr: Vec<f64> = (0..n).map(|_| rng.random_range(-6.0..6.0)).collect();
        let got = match scl_process(1 << free, &roles, &llr, Mode::Max, &mut rng) {
            Ok(c) => c[0].metric,
            Err(e) => return Check::new("polar ML equivalence", false, e.to_string()),
        };
        worst = worst.max((got - exhaustive_penalty(&roles, &llr)).abs());
    }
    Check::new("polar ML equivalence", worst < 1e-9, format!("max metric gap {worst:.2e} over 50 instances"))
}

fn check_waterfill() -> Check {
    match reverse_waterfill(&[1.0, 0.5], 0.5) {
        Ok(plan) => {
            let rates: Vec<f64> = plan.per_component.iter().map(|c| c.rate_i).collect();
            let ok = (plan.level_lambda - 0.25).abs() < 1e-12 && (rates[0] - 1.0).abs() < 1e-12 && (rates[1] - 0.5).abs() < 1e-12;
            Check::new("waterfill example", ok, format!("lambda {} rates {:?}", plan.level_lambda, rates))
        }
        Err(e) => Check::new("waterfill example", false, e.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fresh_checkout_passes() {
        let checks = run_selftest(None, 7);
        assert!(checks.iter().all(|c| c.passed), "{checks:?}");
        assert_eq!(checks, run_selftest(None, 7));
    }

    #[test]
    fn corrupted_reliability_file_fails() {
        let dir = std::env::temp_dir().join(format!("wzlab-selftest-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("reliability.txt");
        std::fs::write(&path, "0 1 2 3\n").unwrap();
        let c = check_reliability(Some(&path));
        std::fs::remove_dir_all(&dir).ok();
        assert!(!c.passed && c.detail.contains("checksum"), "{c:?}");
    }
}
