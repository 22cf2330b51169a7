//! Time-domain simulation of the coding loop.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::quantizer::UniformQuantizer;
use super::sparse::SparseSystem;
use crate::bound::LoopDesign;
use crate::error::{Error, Result};
use crate::lti::{StateSpaceSystem, TwoByTwoPlant};

/// Any state entry above this magnitude aborts the run.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

/// Samples discarded before statistics are collected.
pub fn burn_in_for(state_dim: usize) -> usize {
    (10 * state_dim).max(1000)
}

/// What replaces the channel between `t` and `r`.
#[derive(Debug, Clone, Copy)]
pub enum Channel {
    Quantizer(UniformQuantizer),
    /// Additive white Gaussian noise of the given variance, seeded separately.
    Awgn { variance: f64, seed: u64 },
}

/// Post burn-in record of a simulated loop.
///
/// `z` holds the performance output row by row (`n_z` values per sample).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymbolTrace {
    /// Channel words; empty for the Gaussian channel.
    pub symbols: Vec<i64>,
    pub y: Vec<f64>,
    pub u: Vec<f64>,
    pub r: Vec<f64>,
    pub t: Vec<f64>,
    pub z: Vec<f64>,
    pub n_z: usize,
    pub steps: usize,
    pub burn_in: usize,
    pub seed: u64,
}

impl SymbolTrace {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// `|z(k)|²` per recorded sample.
    pub fn z_energy(&self) -> Vec<f64> {
        self.z.chunks(self.n_z.max(1)).map(|c| c.iter().map(|v| v * v).sum()).collect()
    }

    /// Sample mean of `|z|²`.
    pub fn sigma_z_sq(&self) -> f64 {
        let e = self.z_energy();
        e.iter().sum::<f64>() / e.len().max(1) as f64
    }

    /// Channel reconstruction error `r - t`.
    pub fn channel_error(&self) -> Vec<f64> {
        self.r.iter().zip(&self.t).map(|(r, t)| r - t).collect()
    }
}

/// Simulates the loop with `r(k) = q_Δ(t(k))` under subtractive dither.
pub fn simulate_quantized_loop(
    plant: &TwoByTwoPlant,
    design: &LoopDesign,
    quantizer: &UniformQuantizer,
    steps: usize,
    seed: u64,
) -> Result<SymbolTrace> {
    simulate_loop(plant, design, Channel::Quantizer(*quantizer), steps, seed)
}

/// Simulates the same loop around its Gaussian channel `r = t + η`.
pub fn simulate_awgn_loop(plant: &TwoByTwoPlant, design: &LoopDesign, steps: usize, seed: u64) -> Result<SymbolTrace> {
    let channel = Channel::Awgn { variance: design.sigma_eta_sq, seed: seed ^ 0x9e37_79b9_7f4a_7c15 };
    simulate_loop(plant, design, channel, steps, seed)
}

/// Runs the loop plant -> encoder -> channel -> `J z^{-h}` -> plant.
///
/// The exogenous input `w` is unit-variance white Gaussian drawn from a
/// ChaCha8 stream keyed by `seed`; the channel randomness (dither or AWGN)
/// comes from an independent stream keyed by the channel's own seed, shared
/// by encoder and decoder.
pub fn simulate_loop(
    plant: &TwoByTwoPlant,
    design: &LoopDesign,
    channel: Channel,
    steps: usize,
    seed: u64,
) -> Result<SymbolTrace> {
    let real = plant.realization();
    let n_w = real.n_w;
    let n_z = real.n_z;
    let enc_sys = design.encoder_system();
    let dec_sys = design.decoder_system();
    let state_dim = real.sys.n_states() + enc_sys.n_states() + dec_sys.n_states();
    let burn_in = burn_in_for(state_dim);
    if steps <= burn_in {
        return Err(Error::InvalidArgument(format!("steps {steps} must exceed the burn-in {burn_in}")));
    }
    check_feedthrough(&real.sys, n_w, n_z)?;

    let mut plant_s = SparseSystem::new(&real.sys);
    let mut enc = SparseSystem::new(&enc_sys);
    let mut dec = SparseSystem::new(&dec_sys);

    let mut w_rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut ch_rng, channel_seed) = match channel {
        Channel::Quantizer(q) => (ChaCha8Rng::seed_from_u64(q.dither_seed), q.dither_seed),
        Channel::Awgn { seed, .. } => (ChaCha8Rng::seed_from_u64(seed), seed),
    };
    ch_rng.set_stream(1);
    let _ = channel_seed;

    let keep = steps - burn_in;
    let quantized = matches!(channel, Channel::Quantizer(_));
    let mut trace = SymbolTrace {
        symbols: Vec::with_capacity(if quantized { keep } else { 0 }),
        y: Vec::with_capacity(keep),
        u: Vec::with_capacity(keep),
        r: Vec::with_capacity(keep),
        t: Vec::with_capacity(keep),
        z: Vec::with_capacity(keep * n_z),
        n_z,
        steps,
        burn_in,
        seed,
    };

    let mut pin = vec![0.0; n_w + 1];
    let mut pout = vec![0.0; n_z + 1];
    let mut ein = [0.0; 2];
    let mut t = [0.0];
    let mut u = [0.0];
    let mut rin = [0.0];

    for k in 0..steps {
        for v in pin.iter_mut().take(n_w) {
            *v = w_rng.sample(StandardNormal);
        }
        pin[n_w] = 0.0;
        // y does not depend on u (G22 strictly proper)
        plant_s.output(&pin, &mut pout);
        let y = pout[n_z];

        ein[0] = 0.0;
        ein[1] = y;
        enc.output(&ein, &mut t);

        let (symbol, r) = match channel {
            Channel::Quantizer(q) => {
                let d = q.draw_dither(&mut ch_rng);
                let (s, r) = q.quantize(t[0], d);
                (Some(s), r)
            }
            Channel::Awgn { variance, .. } => {
                let e: f64 = ch_rng.sample(StandardNormal);
                (None, t[0] + variance.sqrt() * e)
            }
        };

        rin[0] = r;
        dec.output(&rin, &mut u);
        pin[n_w] = u[0];
        plant_s.output(&pin, &mut pout);

        if k >= burn_in {
            if let Some(s) = symbol {
                trace.symbols.push(s);
            }
            trace.y.push(y);
            trace.u.push(u[0]);
            trace.r.push(r);
            trace.t.push(t[0]);
            trace.z.extend_from_slice(&pout[..n_z]);
        }

        ein[0] = r;
        plant_s.advance(&pin);
        enc.advance(&ein);
        dec.advance(&rin);

        let mag = plant_s.state_magnitude().max(enc.state_magnitude()).max(dec.state_magnitude());
        if !(mag <= DIVERGENCE_LIMIT) {
            return Err(Error::Divergence { step: k, magnitude: mag });
        }
    }
    Ok(trace)
}

fn check_feedthrough(sys: &StateSpaceSystem, n_w: usize, n_z: usize) -> Result<()> {
    if sys.d[(n_z, n_w)] != 0.0 {
        return Err(Error::InvalidPlant("G22 must be strictly proper".into()));
    }
    Ok(())
}

/// Mean square of each output of `sys` driven by independent white Gaussian
/// inputs with the given standard deviations, after `burn_in_for` samples.
pub fn empirical_output_power(sys: &StateSpaceSystem, input_std: &[f64], steps: usize, seed: u64) -> Result<Vec<f64>> {
    if input_std.len() != sys.n_inputs() {
        return Err(Error::Dimension(format!(
            "{} input deviations for {} inputs",
            input_std.len(),
            sys.n_inputs()
        )));
    }
    let burn_in = burn_in_for(sys.n_states());
    if steps <= burn_in {
        return Err(Error::InvalidArgument(format!("steps {steps} must exceed the burn-in {burn_in}")));
    }
    let mut s = SparseSystem::new(sys);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut inp = vec![0.0; sys.n_inputs()];
    let mut out = vec![0.0; sys.n_outputs()];
    let mut acc = vec![0.0; sys.n_outputs()];
    for k in 0..steps {
        for (v, sd) in inp.iter_mut().zip(input_std) {
            let e: f64 = rng.sample(StandardNormal);
            *v = sd * e;
        }
        s.output(&inp, &mut out);
        if k >= burn_in {
            for (a, o) in acc.iter_mut().zip(&out) {
                *a += o * o;
            }
        }
        s.advance(&inp);
        let mag = s.state_magnitude();
        if !(mag <= DIVERGENCE_LIMIT) {
            return Err(Error::Divergence { step: k, magnitude: mag });
        }
    }
    let n = (steps - burn_in) as f64;
    Ok(acc.into_iter().map(|a| a / n).collect())
}
