//! Polar transform, reliability order, bit roles and list decoding.

mod multilevel;
mod scl;

pub use multilevel::{scl_multilevel, LevelMetric, MultilevelCandidate, SymbolWeights};
pub use scl::{scl_process, Candidate, Mode, Position, SclEngine, LLR_CLAMP};

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Reliability sequence for length 1024, most reliable index first.
const RELIABILITY_1024: &str = include_str!("../../data/nr_reliability_1024.txt");
/// SHA-256 of the shipped reliability file.
pub const RELIABILITY_SHA256: &str = "cbb18dd202d1f85121cd0158731ef1916cf9233993dec03343f1935fa3d7ae73";
pub const MAX_BLOCK_LENGTH: usize = 1024;

/// In-place `x = u F^{⊗m}` over GF(2), `F = [[1,0],[1,1]]`, natural order.
pub fn polar_transform_in_place(bits: &mut [u8]) {
    let n = bits.len();
    debug_assert!(n.is_power_of_two());
    let mut half = 1;
    while half < n {
        for block in bits.chunks_mut(2 * half) {
            let (a, b) = block.split_at_mut(half);
            for (x, y) in a.iter_mut().zip(b.iter()) {
                *x ^= *y;
            }
        }
        half *= 2;
    }
}

pub fn polar_transform(bits: &[u8]) -> Vec<u8> {
    let mut out = bits.to_vec();
    polar_transform_in_place(&mut out);
    out
}

/// Parses a whitespace-separated permutation of `0..MAX_BLOCK_LENGTH`.
pub fn parse_reliability(text: &str) -> Result<Vec<usize>> {
    let seq = text
        .split_whitespace()
        .map(|t| t.parse::<usize>().map_err(|e| Error::MissingDataFile(format!("bad entry {t:?}: {e}"))))
        .collect::<Result<Vec<_>>>()?;
    if seq.len() != MAX_BLOCK_LENGTH {
        return Err(Error::MissingDataFile(format!("expected {MAX_BLOCK_LENGTH} entries, found {}", seq.len())));
    }
    let mut seen = vec![false; MAX_BLOCK_LENGTH];
    for &i in &seq {
        if i >= MAX_BLOCK_LENGTH || std::mem::replace(&mut seen[i], true) {
            return Err(Error::MissingDataFile(format!("not a permutation (index {i})")));
        }
    }
    Ok(seq)
}

fn restrict(seq: &[usize], n: usize) -> Result<Vec<usize>> {
    if n == 0 || !n.is_power_of_two() || n > MAX_BLOCK_LENGTH {
        return Err(Error::InvalidParams(format!("block length {n} must be a power of two <= {MAX_BLOCK_LENGTH}")));
    }
    Ok(seq.iter().cloned().filter(|&i| i < n).collect())
}

/// Reliability order for block length `n`, most reliable first.
pub fn load_reliability(n: usize) -> Result<Vec<usize>> {
    restrict(&parse_reliability(RELIABILITY_1024)?, n)
}

/// Same as [`load_reliability`] but from an external file, which must match
/// the pinned checksum byte for byte.
pub fn load_reliability_from(path: &Path, n: usize) -> Result<Vec<usize>> {
    let bytes = std::fs::read(path).map_err(|e| Error::MissingDataFile(format!("{}: {e}", path.display())))?;
    let digest = hex::encode(Sha256::digest(&bytes));
    if digest != RELIABILITY_SHA256 {
        return Err(Error::MissingDataFile(format!("{}: checksum {digest} does not match", path.display())));
    }
    let text = std::str::from_utf8(&bytes).map_err(|e| Error::MissingDataFile(e.to_string()))?;
    restrict(&parse_reliability(text)?, n)
}

/// Block length, list size and reliability order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolarSpec {
    n: usize,
    list_size: usize,
    reliability: Vec<usize>,
}

impl PolarSpec {
    pub fn new(n: usize, list_size: usize) -> Result<Self> {
        Self::with_reliability(n, list_size, load_reliability(n)?)
    }

    pub fn with_reliability(n: usize, list_size: usize, reliability: Vec<usize>) -> Result<Self> {
        if n < 2 || !n.is_power_of_two() {
            return Err(Error::InvalidParams(format!("block length {n} must be a power of two >= 2")));
        }
        if list_size == 0 {
            return Err(Error::InvalidParams("list size must be positive".into()));
        }
        let mut seen = vec![false; n];
        if reliability.len() != n || reliability.iter().any(|&i| i >= n || std::mem::replace(&mut seen[i], true)) {
            return Err(Error::InvalidParams("reliability order is not a permutation of 0..n".into()));
        }
        Ok(Self { n, list_size, reliability })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn list_size(&self) -> usize {
        self.list_size
    }

    pub fn reliability(&self) -> &[usize] {
        &self.reliability
    }
}

/// Role sets of one level; together they partition `0..n`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelRoles {
    pub shaping: Vec<usize>,
    pub info: Vec<usize>,
    pub frozen: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BitAllocation {
    pub n: usize,
    pub levels: Vec<LevelRoles>,
}

impl BitAllocation {
    pub fn total_info(&self) -> usize {
        self.levels.iter().map(|l| l.info.len()).sum()
    }

    /// Encoder roles: shaping and info free, frozen fixed to zero.
    pub fn encoder_roles(&self, level: usize) -> Vec<Position> {
        let roles = &self.levels[level];
        let mut out = vec![Position::Fixed(0); self.n];
        for &i in roles.shaping.iter().chain(&roles.info) {
            out[i] = Position::Free;
        }
        out
    }

    /// Decoder roles: info pinned to `info_bits` (in `info` order), shaping free.
    pub fn decoder_roles(&self, level: usize, info_bits: &[u8]) -> Result<Vec<Position>> {
        let roles = &self.levels[level];
        if info_bits.len() != roles.info.len() {
            return Err(Error::DimensionMismatch { expected: roles.info.len(), got: info_bits.len() });
        }
        let mut out = vec![Position::Fixed(0); self.n];
        for &i in &roles.shaping {
            out[i] = Position::Free;
        }
        for (&i, &b) in roles.info.iter().zip(info_bits) {
            out[i] = Position::Fixed(b & 1);
        }
        Ok(out)
    }
}

/// `round(n * rate)` per level.
pub fn info_counts_from_rates(n: usize, level_rates: &[f64]) -> Vec<usize> {
    level_rates.iter().map(|r| (n as f64 * r.clamp(0.0, 1.0)).round() as usize).collect()
}

/// Most reliable `shaping_counts[l]` positions become shaping bits, the next
/// `info_counts[l]` information bits, the rest frozen.
pub fn allocate_roles(spec: &PolarSpec, info_counts: &[usize], shaping_counts: &[usize]) -> Result<BitAllocation> {
    if info_counts.len() != shaping_counts.len() {
        return Err(Error::DimensionMismatch { expected: info_counts.len(), got: shaping_counts.len() });
    }
    let n = spec.n();
    let levels = info_counts
        .iter()
        .zip(shaping_counts)
        .enumerate()
        .map(|(level, (&k, &s))| {
            if s + k > n {
                return Err(Error::AllocationOverflow { level, requested: s + k, n });
            }
            let order = spec.reliability();
            let sorted = |r: &[usize]| {
                let mut v = r.to_vec();
                v.sort_unstable();
                v
            };
            Ok(LevelRoles { shaping: sorted(&order[..s]), info: sorted(&order[s..s + k]), frozen: sorted(&order[s + k..]) })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BitAllocation { n, levels })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn matrix_oracle(u: &[u8]) -> Vec<u8> {
        // G = F^{⊗m} built explicitly; x_j = sum_i u_i G[i][j]
        let n = u.len();
        let mut g = vec![vec![1u8]];
        while g.len() < n {
            let k = g.len();
            let mut next = vec![vec![0u8; 2 * k]; 2 * k];
            for i in 0..k {
                for j in 0..k {
                    next[i][j] = g[i][j];
                    next[k + i][j] = g[i][j];
                    next[k + i][k + j] = g[i][j];
                }
            }
            g = next;
        }
        (0..n).map(|j| (0..n).fold(0, |acc, i| acc ^ (u[i] & g[i][j]))).collect()
    }

    #[test]
    fn transform_examples() {
        assert_eq!(polar_transform(&[1, 0]), vec![1, 0]);
        assert_eq!(polar_transform(&[0, 1]), vec![1, 1]);
        let mut e7 = vec![0u8; 8];
        e7[7] = 1;
        assert_eq!(polar_transform(&e7), vec![1; 8]);
        assert_eq!(matrix_oracle(&e7), vec![1; 8]);
    }

    #[test]
    fn reliability_properties() {
        let r256 = load_reliability(256).unwrap();
        assert_eq!(r256[0], 255);
        let mut s = r256.clone();
        s.sort_unstable();
        assert_eq!(s, (0..256).collect::<Vec<_>>());
        let r128 = load_reliability(128).unwrap();
        assert_eq!(r128, r256.iter().cloned().filter(|&i| i < 128).collect::<Vec<_>>());
        assert!(load_reliability(2048).is_err());
        assert_eq!(hex::encode(Sha256::digest(RELIABILITY_1024.as_bytes())), RELIABILITY_SHA256);
    }

    #[test]
    fn external_reliability_is_checksummed() {
        let dir = std::env::temp_dir().join(format!("wzlab-rel-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let good = dir.join("good.txt");
        std::fs::write(&good, RELIABILITY_1024).unwrap();
        assert_eq!(load_reliability_from(&good, 64).unwrap(), load_reliability(64).unwrap());
        let bad = dir.join("bad.txt");
        std::fs::write(&bad, RELIABILITY_1024.replacen("1023", "1022", 1)).unwrap();
        assert!(matches!(load_reliability_from(&bad, 64), Err(Error::MissingDataFile(_))));
        assert!(matches!(load_reliability_from(&dir.join("absent"), 64), Err(Error::MissingDataFile(_))));
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn allocation_examples() {
        let spec = PolarSpec::new(256, 8).unwrap();
        let a = allocate_roles(&spec, &[256], &[0]).unwrap();
        assert!(a.levels[0].frozen.is_empty());
        let a = allocate_roles(&spec, &[0, 100, 156], &[200, 50, 0]).unwrap();
        assert_eq!(a.total_info(), 256);
        assert!(a.levels[0].shaping.contains(&255));
        assert!(matches!(allocate_roles(&spec, &[100], &[200]), Err(Error::AllocationOverflow { level: 0, .. })));
        assert_eq!(info_counts_from_rates(256, &[0.0, 0.5, 1.0]), vec![0, 128, 256]);
    }

    proptest! {
        #[test]
        fn transform_is_involution_and_matches_matrix(bits in proptest::collection::vec(0u8..2, 16)) {
            let x = polar_transform(&bits);
            prop_assert_eq!(&x, &matrix_oracle(&bits));
            prop_assert_eq!(polar_transform(&x), bits);
        }

        #[test]
        fn allocation_partitions(s in 0usize..=64, k in 0usize..=64) {
            let spec = PolarSpec::new(64, 4).unwrap();
            let r = allocate_roles(&spec, &[k], &[s]);
            if s + k > 64 {
                prop_assert!(r.is_err());
            } else {
                let a = r.unwrap();
                let l = &a.levels[0];
                let mut all: Vec<usize> = l.shaping.iter().chain(&l.info).chain(&l.frozen).cloned().collect();
                all.sort_unstable();
                prop_assert_eq!(all, (0..64).collect::<Vec<_>>());
                let rank = |i: usize| spec.reliability().iter().position(|&j| j == i).unwrap();
                let worst_shaping = l.shaping.iter().map(|&i| rank(i)).max();
                let best_info = l.info.iter().map(|&i| rank(i)).min();
                if let (Some(a), Some(b)) = (worst_shaping, best_info) {
                    prop_assert!(a < b);
                }
            }
        }
    }
}
