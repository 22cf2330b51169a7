use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Infinite-level uniform quantizer with optional subtractive dither.
///
/// The encoder sends `s = round((t + d) / Δ)`; the decoder, which knows the
/// same dither `d`, reconstructs `r = s Δ - d`. With `d` uniform on
/// `(-Δ/2, Δ/2]` the error `r - t` is uniform and independent of `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniformQuantizer {
    step: f64,
    pub dither: bool,
    pub dither_seed: u64,
}

impl UniformQuantizer {
    pub fn new(step: f64, dither: bool, dither_seed: u64) -> Result<Self> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::InvalidArgument(format!("quantizer step {step} must be positive")));
        }
        Ok(Self { step, dither, dither_seed })
    }

    /// Step whose uniform noise has variance `σ²`: `Δ = sqrt(12 σ²)`.
    pub fn matched_to_variance(sigma_sq: f64, dither_seed: u64) -> Result<Self> {
        Self::new((12.0 * sigma_sq).sqrt(), true, dither_seed)
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    /// Draws the dither sample shared by encoder and decoder.
    pub fn draw_dither<R: Rng>(&self, rng: &mut R) -> f64 {
        if self.dither {
            (rng.random::<f64>() - 0.5) * self.step
        } else {
            0.0
        }
    }

    /// `(symbol, reconstruction)` of `t` with dither `d`.
    #[inline]
    pub fn quantize(&self, t: f64, d: f64) -> (i64, f64) {
        let s = ((t + d) / self.step).round();
        (s as i64, s * self.step - d)
    }
}
