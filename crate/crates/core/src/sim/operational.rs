use serde::{Deserialize, Serialize};

use super::entropy::{batch_means_half_width, entropy_rate_with_ci};
use super::quantizer::UniformQuantizer;
use super::runner::{simulate_quantized_loop, SymbolTrace};
use crate::bound::{design_for, snr_and_variance, LoopDesign, RatePoint, YoulaProgram};
use crate::error::{Error, Result};

/// Markov order used when none is given.
pub const DEFAULT_MARKOV_ORDER: usize = 1;
/// Batches used for the confidence half-widths.
pub const CI_BATCHES: usize = 20;

/// Measured performance of the quantized loop built from a rate point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperationalRatePoint {
    pub h: usize,
    pub d: f64,
    pub delta: f64,
    /// Order-`m` empirical entropy of the channel symbols, bits per sample.
    pub rate_bits: f64,
    pub ci_rate: f64,
    pub sigma_z_sq: f64,
    pub ci_var: f64,
    /// Output variance of the same loop with the quantizer replaced by AWGN.
    pub sigma_z_analytic: f64,
    pub markov_order: usize,
    pub steps: usize,
    pub seed: u64,
}

/// Operational point together with the loop and trace behind it.
#[derive(Debug, Clone)]
pub struct OperationalRun {
    pub point: OperationalRatePoint,
    pub design: LoopDesign,
    pub trace: SymbolTrace,
}

/// Replaces the AWGN of the optimal design by a dithered quantizer with
/// `Δ = sqrt(12 σ_η²)` and measures rate and output variance.
pub fn operational_rate_point(
    program: &YoulaProgram,
    point: &RatePoint,
    steps: usize,
    seed: u64,
    markov_order: usize,
) -> Result<OperationalRatePoint> {
    Ok(operational_run(program, point, steps, seed, markov_order)?.point)
}

pub fn operational_run(
    program: &YoulaProgram,
    point: &RatePoint,
    steps: usize,
    seed: u64,
    markov_order: usize,
) -> Result<OperationalRun> {
    if point.h != program.h() {
        return Err(Error::InvalidArgument(format!(
            "rate point has delay {} but the program has {}",
            point.h,
            program.h()
        )));
    }
    let plant = program.plant();
    let design = design_for(program, point)?;
    let analytic = snr_and_variance(plant, &design)?;
    // Dither stream derived from the run seed so that one seed fixes everything.
    let quantizer = UniformQuantizer::matched_to_variance(design.sigma_eta_sq, seed.wrapping_add(1))?;
    let trace = simulate_quantized_loop(plant, &design, &quantizer, steps, seed)?;
    let rate = entropy_rate_with_ci(&trace.symbols, markov_order, CI_BATCHES)?;
    let energy = trace.z_energy();
    let sigma_z_sq = energy.iter().sum::<f64>() / energy.len() as f64;
    let point = OperationalRatePoint {
        h: point.h,
        d: point.d,
        delta: quantizer.step(),
        rate_bits: rate.bits.max(0.0),
        ci_rate: rate.ci_half_width,
        sigma_z_sq,
        ci_var: batch_means_half_width(&energy, CI_BATCHES),
        sigma_z_analytic: analytic.sigma_z_sq,
        markov_order,
        steps,
        seed,
    };
    Ok(OperationalRun { point, design, trace })
}
