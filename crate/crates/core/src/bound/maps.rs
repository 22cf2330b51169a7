//! Closed-loop maps of the auxiliary AWGN loop and their second-order statistics.

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::design::{Encoder, LoopDesign};
use crate::error::{Error, Result};
use crate::lti::{FrequencyGrid, Interconnection, Signal, StateSpaceSystem, TwoByTwoPlant};

/// Transfer matrix from `[η, w, ψ1, ψ2]` to `[z, y, r, p]`, where `ψ1` is added
/// to the plant input `p` and `ψ2` to the measurement seen by the encoder.
#[derive(Debug, Clone)]
pub struct ClosedLoopMaps {
    pub sys: StateSpaceSystem,
    pub n_w: usize,
    pub n_z: usize,
    pub stable: bool,
}

impl ClosedLoopMaps {
    pub const ETA: usize = 0;

    pub fn w(&self, i: usize) -> usize {
        1 + i
    }

    pub fn psi1(&self) -> usize {
        1 + self.n_w
    }

    pub fn psi2(&self) -> usize {
        2 + self.n_w
    }

    pub fn z(&self, i: usize) -> usize {
        i
    }

    pub fn y(&self) -> usize {
        self.n_z
    }

    pub fn r(&self) -> usize {
        self.n_z + 1
    }

    pub fn p(&self) -> usize {
        self.n_z + 2
    }

    /// Single block from input `col` to output `row`.
    pub fn block(&self, row: usize, col: usize) -> StateSpaceSystem {
        self.sys.select_outputs(&[row]).select_inputs(&[col])
    }

    /// `M`, the map from `η` to `r`.
    pub fn m(&self) -> StateSpaceSystem {
        self.block(self.r(), Self::ETA)
    }
}

pub fn closed_loop_maps(plant: &TwoByTwoPlant, design: &LoopDesign) -> Result<ClosedLoopMaps> {
    let real = plant.realization();
    let (n_w, n_z) = (real.n_w, real.n_z);
    let mut ic = Interconnection::new(n_w + 3);
    let eta = Signal::External(0);
    let psi1 = Signal::External(n_w + 1);
    let psi2 = Signal::External(n_w + 2);
    let g = ic.add(real.sys.clone());
    let enc = ic.add(design.encoder_system());
    let dec = ic.add(design.decoder_system());
    let t = Signal::Block(enc, 0);
    let u = Signal::Block(dec, 0);
    let y = Signal::Block(g, n_z);
    for i in 0..n_w {
        ic.wire(g, i, Signal::External(1 + i), 1.0);
    }
    ic.wire(g, n_w, u, 1.0)
        .wire(g, n_w, psi1, 1.0)
        .wire(enc, 0, t, 1.0)
        .wire(enc, 0, eta, 1.0)
        .wire(enc, 1, y, 1.0)
        .wire(enc, 1, psi2, 1.0)
        .wire(dec, 0, t, 1.0)
        .wire(dec, 0, eta, 1.0);
    for i in 0..n_z {
        ic.output(&[(Signal::Block(g, i), 1.0)]);
    }
    ic.output(&[(y, 1.0)])
        .output(&[(t, 1.0), (eta, 1.0)])
        .output(&[(u, 1.0), (psi1, 1.0)]);
    let sys = ic.build("encoder/channel/decoder loop")?;
    let stable = sys.is_stable();
    Ok(ClosedLoopMaps { sys, n_w, n_z, stable })
}

/// Channel SNR `σ_t²/σ_η²` and performance `E|z|²` of a stable auxiliary loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnrVariance {
    pub snr: f64,
    pub sigma_z_sq: f64,
    pub sigma_t_sq: f64,
}

/// Evaluates the loop exactly through Lyapunov equations on the joint realization.
pub fn snr_and_variance(plant: &TwoByTwoPlant, design: &LoopDesign) -> Result<SnrVariance> {
    let maps = closed_loop_maps(plant, design)?;
    snr_and_variance_of_maps(&maps, design.sigma_eta_sq)
}

pub fn snr_and_variance_of_maps(maps: &ClosedLoopMaps, sigma_eta_sq: f64) -> Result<SnrVariance> {
    if !maps.stable {
        return Err(Error::Unstable {
            spectral_radius: maps.sys.spectral_radius(),
            context: "auxiliary loop is not internally stable".into(),
        });
    }
    let mut rows: Vec<usize> = (0..maps.n_z).collect();
    rows.push(maps.r());
    let cols: Vec<usize> = (0..=maps.n_w).collect();
    let mut s = maps.sys.select_outputs(&rows).select_inputs(&cols);
    // t = r - η
    s.d[(maps.n_z, 0)] -= 1.0;
    let mut w = DMatrix::identity(cols.len(), cols.len());
    w[(0, 0)] = sigma_eta_sq;
    let cov = s.output_covariance(&w)?;
    let sigma_z_sq = (0..maps.n_z).map(|i| cov[(i, i)]).sum::<f64>().max(0.0);
    let sigma_t_sq = cov[(maps.n_z, maps.n_z)].max(0.0);
    Ok(SnrVariance { snr: sigma_t_sq / sigma_eta_sq, sigma_z_sq, sigma_t_sq })
}

/// Same quantities for a filter-based design, evaluated on a frequency grid with
/// the delay moved into the plant (`G12 z^{-h}`, `G22 z^{-h}`) and the closed-form
/// expressions
///
/// ```text
/// M   = (1 - B_r z^{-1} - G22 J z^{-h} B_y)^{-1}
/// N   = J B_y z^{-h} (1 - B_r z^{-1})^{-1}
/// SNR = ||M - 1||² + ||B_y M G21||² / σ_η²
/// σz² = ||G11 + G12 N (1 - G22 N)^{-1} G21||² + ||G12 J M||² σ_η²
/// ```
pub fn snr_and_variance_shifted(plant: &TwoByTwoPlant, design: &LoopDesign, grid: &FrequencyGrid) -> Result<SnrVariance> {
    let (b_r, b_y) = match &design.encoder {
        Encoder::Filters { b_r, b_y } => (b_r, b_y),
        Encoder::StateSpace(_) => {
            return Err(Error::InvalidArgument("closed-form evaluation needs a filter-based encoder".into()))
        }
    };
    let maps = closed_loop_maps(plant, design)?;
    if !maps.stable {
        return Err(Error::Unstable {
            spectral_radius: maps.sys.spectral_radius(),
            context: "auxiliary loop is not internally stable".into(),
        });
    }
    let s2 = design.sigma_eta_sq;
    let h = design.h as f64;
    let (mut snr, mut vz) = (0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    for &w in grid.omegas() {
        let zinv = Complex64::from_polar(1.0, -w);
        let dh = Complex64::from_polar(1.0, -w * h);
        let (br, by, j) = (b_r.response(w), b_y.response(w), design.j.response(w));
        let g22a = plant.g22().response(w) * dh;
        let m = one / (one - br * zinv - g22a * j * by);
        let n = j * by / (one - br * zinv);
        let loop_gain = n / (one - g22a * n);
        let g21: Vec<Complex64> = plant.g21().iter().map(|f| f.response(w)).collect();
        snr += (m - one).norm_sqr() + g21.iter().map(|g| (by * m * g).norm_sqr()).sum::<f64>() / s2;
        for (i, g12) in plant.g12().iter().enumerate() {
            let g12a = g12.response(w) * dh;
            for (jdx, g21j) in g21.iter().enumerate() {
                let t = plant.g11()[i][jdx].response(w) + g12a * loop_gain * g21j;
                vz += t.norm_sqr();
            }
            vz += (g12a * j * m).norm_sqr() * s2;
        }
    }
    let n = grid.size() as f64;
    let snr = snr / n;
    Ok(SnrVariance { snr, sigma_z_sq: vz / n, sigma_t_sq: snr * s2 })
}
