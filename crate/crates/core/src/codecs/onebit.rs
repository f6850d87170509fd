use crate::numerics::{normal_pdf, qfunc};

/// Sign quantizer with reconstruction `E[X | sign X, Y]` for `X = Y + Z`,
/// `Y ~ N(0, sigma2_y)`, `Z ~ N(0, sigma2_z)` independent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OneBitQuantizer {
    sigma2_z: f64,
}

impl OneBitQuantizer {
    pub fn new(sigma2_z: f64) -> Self {
        Self { sigma2_z }
    }

    pub fn quantize(x: f64) -> u8 {
        u8::from(x >= 0.0)
    }

    /// Mean of `N(y, sigma2_z)` restricted to the half-line selected by `bit`.
    pub fn reconstruct(&self, bit: u8, y: f64) -> f64 {
        let s = self.sigma2_z.sqrt();
        let t = y / s;
        // E[X | X >= 0] = y + s phi(t) / Phi(t); the other side mirrors it
        let signed_t = if bit == 1 { t } else { -t };
        let tail = qfunc(-signed_t);
        let ratio = if tail > 1e-300 {
            normal_pdf(signed_t, 1.0) / tail
        } else {
            // inverse Mills ratio asymptote for very negative arguments
            -signed_t - 1.0 / signed_t
        };
        if bit == 1 {
            y + s * ratio
        } else {
            y - s * ratio
        }
    }

    /// Quantizes and reconstructs a block; returns the bits and `x^`.
    pub fn run(&self, x: &[f64], y: &[f64]) -> (Vec<u8>, Vec<f64>) {
        let bits: Vec<u8> = x.iter().map(|&v| Self::quantize(v)).collect();
        let x_hat = bits.iter().zip(y).map(|(&b, &yy)| self.reconstruct(b, yy)).collect();
        (bits, x_hat)
    }
}
