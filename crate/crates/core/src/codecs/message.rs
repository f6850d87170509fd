use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"WZM1";
const HEADER: usize = 12;

/// Information bits of one block, level 0 first, each level in position order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodedMessage {
    pub n: usize,
    pub bits: Vec<u8>,
}

impl EncodedMessage {
    /// `MAGIC | n: u32 LE | bit count: u32 LE | bits packed LSB first`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER + self.bits.len().div_ceil(8));
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(self.n as u32).to_le_bytes());
        out.extend_from_slice(&(self.bits.len() as u32).to_le_bytes());
        for chunk in self.bits.chunks(8) {
            out.push(chunk.iter().enumerate().fold(0u8, |acc, (i, &b)| acc | (b & 1) << i));
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER || &bytes[..4] != MAGIC {
            return Err(Error::Config("message header missing or corrupt".into()));
        }
        let n = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes")) as usize;
        let count = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
        if n == 0 || !n.is_power_of_two() || n > crate::polar::MAX_BLOCK_LENGTH {
            return Err(Error::Config(format!("invalid block length {n}")));
        }
        // at most one bit per sample per level, and at most 32 levels
        if count > 32 * n {
            return Err(Error::Config(format!("{count} bits exceed the block capacity")));
        }
        let body = &bytes[HEADER..];
        if body.len() != count.div_ceil(8) {
            return Err(Error::Config(format!("payload is {} bytes, expected {}", body.len(), count.div_ceil(8))));
        }
        if !count.is_multiple_of(8) && body[body.len() - 1] >> (count % 8) != 0 {
            return Err(Error::Config("nonzero padding bits".into()));
        }
        let bits = (0..count).map(|i| (body[i / 8] >> (i % 8)) & 1).collect();
        Ok(Self { n, bits })
    }
}
