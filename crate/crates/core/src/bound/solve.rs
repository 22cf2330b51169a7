//! Minimal channel SNR for a performance level `D`, and the resulting rate bound.
//!
//! With `J = 1` the loop decomposes into a control part `K` (a stabilizing
//! controller of the delayed plant) and a noise-shaping part `M`:
//!
//! ```text
//! SNR  = ||M - 1||² + A(K) / σ_η²
//! σz²  = V(K) + σ_η² ||G12 M||²
//! ```
//!
//! where `V` and `A` are the `w`-driven variances of `z` and of the controller
//! output. Saturating `σz² = D` gives `SNR = m1 + A g / (D - V)`, which is
//! minimized by first finding the control weight `λ_D = sup {λ : W(λ) <= D}`,
//! `W(λ) = min_K V + λ A`, and then shaping `M` with weight `A / (D - V)`.
//!
//! That SNR charges the full variance of the channel output. The reported
//! bound comes from the directed-information refinement in
//! [`super::directed`], started at this SNR optimum.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use super::design::LoopDesign;
use super::maps::closed_loop_maps;
use super::directed::{refine, RefineOptions};
use super::youla::{WeightedOptimum, YoulaProgram};
use crate::error::{Error, Result};
use crate::lqg::riccati::solve_dare_cross;
use crate::lti::ss::{block_diag, shift_register};
use crate::lti::{RationalFilter, StateSpaceSystem};

/// Largest control weight explored; beyond it the control effort is treated as zero.
pub const LAMBDA_MAX: f64 = 1e15;
/// Minimal slack `D - V` below which a point is reported infeasible.
pub const SLACK_FLOOR: f64 = 1e-12;
/// FIR refinement stops once the bound moves by less than this many bits.
pub const N_Q_TOLERANCE_BITS: f64 = 1e-3;

/// One point of the rate/performance tradeoff.
#[derive(Debug, Clone, Serialize)]
pub struct RatePoint {
    pub h: usize,
    pub d: f64,
    /// Minimal SNR `φ'(D)` over all encoder/decoder pairs.
    pub phi: f64,
    pub rate_lower_bits: f64,
    /// SNR of the same loop with `J = 1`, before whitening the channel output.
    pub phi_unwhitened: f64,
    /// Youla FIR coefficients of the control part.
    pub q: Vec<f64>,
    /// Taps of the FIR factor `P` in `M = M_F P`, leading 1 included.
    pub p: Vec<f64>,
    pub n_q: usize,
    pub sigma_eta_sq: f64,
    /// `E|z|²` of the design on the frequency grid.
    pub sigma_z_sq: f64,
    /// `E|z|²` and controller-output variance due to `w`.
    pub v: f64,
    pub a: f64,
    /// `||M - 1||²` and `||G12 M||²`.
    pub m1: f64,
    pub g: f64,
    /// Control weight at which the control part was found.
    pub lambda: f64,
    /// Set when the open-loop plant already meets `D` and no control is used.
    pub zero_control: bool,
    #[serde(skip)]
    pub shaping_gain: DMatrix<f64>,
}

/// `½ log₂(1 + φ)`
pub fn rate_bits(phi: f64) -> f64 {
    0.5 * (1.0 + phi).log2()
}

fn open_loop_variance(program: &YoulaProgram) -> Result<Option<(f64, f64)>> {
    let plant = program.plant();
    if !plant.is_open_loop_stable() {
        return Ok(None);
    }
    let real = plant.realization();
    let zrows: Vec<usize> = (0..real.n_z).collect();
    let wcols: Vec<usize> = (0..real.n_w).collect();
    let v0 = real.sys.select_outputs(&zrows).select_inputs(&wcols).h2_norm_sq()?;
    let g = real.sys.select_outputs(&zrows).select_inputs(&[real.n_w]).h2_norm_sq()?;
    Ok(Some((v0, g)))
}

/// Optimal point with the FIR orders of `Q` and `P` held at `n_q`.
pub fn phi_at_order(program: &YoulaProgram, d: f64, n_q: usize) -> Result<RatePoint> {
    let start = snr_stage(program, d, n_q)?;
    if start.zero_control {
        return Ok(start);
    }
    let opt = refine(program, d, &start.shaping_gain, &start.q, RefineOptions::with_order(n_q))?;
    let phi = (2.0 * opt.rate_nats).exp_m1();
    Ok(RatePoint {
        phi,
        rate_lower_bits: rate_bits(phi),
        phi_unwhitened: opt.m1 + opt.a / opt.sigma_eta_sq,
        q: opt.q,
        p: opt.p,
        sigma_eta_sq: opt.sigma_eta_sq,
        sigma_z_sq: opt.v + opt.sigma_eta_sq * opt.g,
        v: opt.v,
        a: opt.a,
        m1: opt.m1,
        g: opt.g,
        ..start
    })
}

/// Minimal SNR of a loop with `J = 1` (no whitening), FIR order `n_q`.
pub fn snr_stage(program: &YoulaProgram, d: f64, n_q: usize) -> Result<RatePoint> {
    if !(d.is_finite() && d > 0.0) {
        return Err(Error::InvalidArgument(format!("performance level {d} must be positive")));
    }
    let h = program.h();
    if let Some((v0, g)) = open_loop_variance(program)? {
        if d - v0 >= SLACK_FLOOR {
            let n = program.shaper().n_states();
            let sigma_eta_sq = if g > 0.0 { (d - v0) / g } else { 1.0 };
            return Ok(RatePoint {
                h,
                d,
                phi: 0.0,
                rate_lower_bits: 0.0,
                phi_unwhitened: 0.0,
                q: Vec::new(),
                p: vec![1.0],
                n_q,
                sigma_eta_sq,
                sigma_z_sq: v0 + sigma_eta_sq * g,
                v: v0,
                a: 0.0,
                m1: 0.0,
                g,
                lambda: f64::INFINITY,
                zero_control: true,
                shaping_gain: DMatrix::zeros(1, n),
            });
        }
    }

    let floor = program.weighted_optimum(0.0, n_q)?;
    if d - floor.v < SLACK_FLOOR {
        return Err(Error::Infeasible { d, floor: floor.v });
    }
    let eval = |lambda: f64| program.weighted_optimum(lambda, n_q);
    let feasible = |o: &WeightedOptimum| o.value() <= d;

    // Bracket λ_D between a feasible `lo` and an infeasible `hi`.
    let mut lo = floor;
    let mut hi: Option<f64> = None;
    let start = eval(1.0)?;
    if feasible(&start) {
        lo = start;
        let mut lambda = 10.0;
        while lambda <= LAMBDA_MAX {
            let o = eval(lambda)?;
            if !feasible(&o) {
                hi = Some(lambda);
                break;
            }
            lo = o;
            lambda *= 10.0;
        }
    } else {
        hi = Some(1.0);
        let mut lambda = 0.1;
        while lambda >= 1e-15 {
            let o = eval(lambda)?;
            if feasible(&o) {
                lo = o;
                break;
            }
            hi = Some(lambda);
            lambda /= 10.0;
        }
    }
    if let Some(mut hi) = hi {
        for _ in 0..200 {
            if lo.lambda > 0.0 && hi / lo.lambda < 1.0 + 1e-13 {
                break;
            }
            let mid = if lo.lambda > 0.0 { (lo.lambda * hi).sqrt() } else { hi * 0.5 };
            let o = eval(mid)?;
            if feasible(&o) {
                lo = o;
            } else {
                hi = mid;
            }
            if lo.lambda == 0.0 && hi < 1e-300 {
                break;
            }
        }
    }

    let slack = d - lo.v;
    if slack < SLACK_FLOOR {
        return Err(Error::Infeasible { d, floor: lo.v });
    }
    let mu = lo.a / slack;
    let shaping = program.shaper().solve(mu)?;
    let sigma_eta_sq = slack / shaping.g;
    let phi = shaping.m1 + lo.a / sigma_eta_sq;
    Ok(RatePoint {
        h,
        d,
        phi,
        rate_lower_bits: rate_bits(phi),
        phi_unwhitened: phi,
        p: vec![1.0],
        n_q,
        sigma_eta_sq,
        sigma_z_sq: lo.v + sigma_eta_sq * shaping.g,
        v: lo.v,
        a: lo.a,
        m1: shaping.m1,
        g: shaping.g,
        lambda: lo.lambda,
        zero_control: false,
        q: lo.q,
        shaping_gain: shaping.f,
    })
}

/// `φ'(D)` with the FIR order doubled from the program's starting order until
/// the bound moves by less than [`N_Q_TOLERANCE_BITS`] or the cap is reached.
pub fn phi_of_d(program: &YoulaProgram, d: f64) -> Result<RatePoint> {
    let opts = program.options();
    let mut n = opts.n_q;
    let mut best = phi_at_order(program, d, n)?;
    while n * 2 <= opts.n_q_max {
        n *= 2;
        let next = phi_at_order(program, d, n)?;
        let moved = (best.rate_lower_bits - next.rate_lower_bits).abs();
        best = next;
        if moved < N_Q_TOLERANCE_BITS {
            break;
        }
    }
    Ok(best)
}

/// Lower-bound curve on a grid of performance levels.
///
/// The FIR order is refined once, at the smallest feasible level, and then held
/// fixed so that all points optimize over the same set.
pub fn lower_bound_curve(program: &YoulaProgram, ds: &[f64]) -> Vec<Result<RatePoint>> {
    let mut order: Vec<usize> = (0..ds.len()).collect();
    order.sort_by(|&i, &j| ds[i].total_cmp(&ds[j]));
    let n_q = order
        .iter()
        .find_map(|&i| phi_of_d(program, ds[i]).ok().map(|p| p.n_q))
        .unwrap_or(program.options().n_q);
    ds.par_iter().map(|&d| phi_at_order(program, d, n_q)).collect()
}

/// Whether some `J = 1` design reaches `σz² <= D` with channel SNR at most
/// `phi`; certifies the value of [`snr_stage`].
///
/// For each shaping weight `μ` the best controller must satisfy
/// `W(g/(φ - m1)) <= D`; the check minimizes this over `μ` by a coarse scan
/// followed by golden-section refinement.
pub fn snr_feasible(program: &YoulaProgram, d: f64, phi: f64, n_q: usize) -> Result<bool> {
    let excess = |log_mu: f64| -> Result<f64> {
        let s = program.shaper().solve(10f64.powf(log_mu))?;
        if s.m1 >= phi {
            return Ok(f64::INFINITY);
        }
        let lambda = s.g / (phi - s.m1);
        Ok(program.weighted_optimum(lambda, n_q)?.value() - d)
    };
    let (lo_exp, hi_exp, per_decade) = (-15.0, 15.0, 4.0);
    let steps = ((hi_exp - lo_exp) * per_decade) as usize;
    let mut best = (f64::INFINITY, 0usize);
    let mut values = Vec::with_capacity(steps + 1);
    for i in 0..=steps {
        let x = lo_exp + i as f64 / per_decade;
        let v = excess(x)?;
        if v <= 0.0 {
            return Ok(true);
        }
        values.push(v);
        if v < best.0 {
            best = (v, i);
        }
    }
    if !best.0.is_finite() {
        return Ok(false);
    }
    let at = |i: usize| lo_exp + i as f64 / per_decade;
    let (mut a, mut b) = (at(best.1.saturating_sub(1)), at((best.1 + 1).min(steps)));
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - ratio * (b - a);
    let mut e = a + ratio * (b - a);
    let (mut fc, mut fe) = (excess(c)?, excess(e)?);
    for _ in 0..80 {
        if fc.min(fe) <= 0.0 {
            return Ok(true);
        }
        if fc < fe {
            b = e;
            e = c;
            fe = fc;
            c = b - ratio * (b - a);
            fc = excess(c)?;
        } else {
            a = c;
            c = e;
            fc = fe;
            e = a + ratio * (b - a);
            fe = excess(e)?;
        }
    }
    Ok(fc.min(fe) <= 0.0)
}

/// Realizes the optimal coding scheme behind a rate point.
///
/// The encoder keeps a copy `x_ν` of the plant state driven by the shaped
/// channel noise, removes its effect from the measurement, runs the control
/// part on the cleaned measurement, and sends
/// `t₁ = K(y_clean) - F x_ν + Σ_{j>=1} p_j η(k-j)`, so that the channel noise
/// reaches the plant through `M_F P`. With `J = 1` this loop has channel
/// output `r₁`. The encoder then subtracts the one-step prediction of `r₁`
/// from its own past (a Kalman predictor of the closed loop), which makes the
/// channel output the innovation of `r₁`; the decoder rebuilds `r₁` from the
/// innovations and applies the channel delay.
pub fn design_for(program: &YoulaProgram, point: &RatePoint) -> Result<LoopDesign> {
    let h = point.h;
    if point.zero_control {
        let one = RationalFilter::constant(1.0);
        return LoopDesign::from_encoder(StateSpaceSystem::zero(1, 2), one, point.sigma_eta_sq, h);
    }
    let enc = shaped_encoder(program, point)?;
    whiten(program, enc, point.sigma_eta_sq, h)
}

/// Encoder of the `J = 1` loop, with inputs `[r, y]` and output `t₁`.
fn shaped_encoder(program: &YoulaProgram, point: &RatePoint) -> Result<StateSpaceSystem> {
    let h = point.h;
    let real = program.plant().realization();
    let (a, b2, c2) = (real.a(), real.b2(), real.c2());
    let n = a.nrows();
    let k = program.controller(&point.q);
    let nk = k.n_states();

    // s = [x_ν; delay line of C2 x_ν]; y_clean = y - c_del s
    let (a_s, c_del) = if h == 0 {
        (a.clone(), c2.clone())
    } else {
        let reg = shift_register(1, h);
        let mut a_s = block_diag(&a, &reg.a);
        a_s.view_mut((n, 0), (h, n)).copy_from(&(&reg.b * &c2));
        let mut c_del = DMatrix::zeros(1, n + h);
        c_del.view_mut((0, n), (1, h)).copy_from(&reg.c);
        (a_s, c_del)
    };
    let ns = a_s.nrows();
    let mut embed = DMatrix::zeros(ns, n);
    embed.view_mut((0, 0), (n, n)).fill_with_identity();
    let eb2 = &embed * &b2;
    let mut f_s = DMatrix::zeros(1, ns);
    f_s.view_mut((0, 0), (1, n)).copy_from(&point.shaping_gain);

    // e holds η(k-1), ..., η(k-L) with η = r - t.
    let taps = &point.p[1..];
    let ne = taps.len();
    let dim = nk + ns + ne;
    let mut ae = DMatrix::zeros(dim, dim);
    ae.view_mut((0, 0), (nk, nk)).copy_from(&k.a);
    ae.view_mut((0, nk), (nk, ns)).copy_from(&(-(&k.b * &c_del)));
    ae.view_mut((nk, 0), (ns, nk)).copy_from(&(-(&eb2 * &k.c)));
    ae.view_mut((nk, nk), (ns, ns)).copy_from(&(&a_s + &eb2 * &k.d * &c_del));
    let mut be = DMatrix::zeros(dim, 2);
    be.view_mut((nk, 0), (ns, 1)).copy_from(&eb2);
    be.view_mut((0, 1), (nk, 1)).copy_from(&k.b);
    be.view_mut((nk, 1), (ns, 1)).copy_from(&(-(&eb2 * &k.d)));
    let mut ce = DMatrix::zeros(1, dim);
    ce.view_mut((0, 0), (1, nk)).copy_from(&k.c);
    ce.view_mut((0, nk), (1, ns)).copy_from(&(-(&k.d * &c_del) - f_s));
    for (j, &pj) in taps.iter().enumerate() {
        ce[(0, nk + ns + j)] = pj;
    }
    let mut de = DMatrix::zeros(1, 2);
    de[(0, 1)] = k.d[(0, 0)];
    if ne > 0 {
        let e0 = nk + ns;
        for j in 1..ne {
            ae[(e0 + j, e0 + j - 1)] = 1.0;
        }
        let mut row = ae.row_mut(e0);
        row -= &ce;
        be[(e0, 0)] = 1.0 - de[(0, 0)];
        be[(e0, 1)] = -de[(0, 1)];
    }
    StateSpaceSystem::new(ae, be, ce, de)
}

/// Turns the `J = 1` loop around `enc` into one whose channel output is white.
fn whiten(program: &YoulaProgram, enc: StateSpaceSystem, sigma_eta_sq: f64, h: usize) -> Result<LoopDesign> {
    let plant = program.plant();
    let base = LoopDesign::from_encoder(enc.clone(), RationalFilter::constant(1.0), sigma_eta_sq, h)?;
    let maps = closed_loop_maps(plant, &base)?;
    if !maps.stable {
        return Err(Error::Unstable {
            spectral_radius: maps.sys.spectral_radius(),
            context: "designed loop is not internally stable".into(),
        });
    }
    let cols: Vec<usize> = (0..=maps.n_w).collect();
    let model = maps.sys.select_outputs(&[maps.r()]).select_inputs(&cols);
    let mut sigma = DMatrix::identity(cols.len(), cols.len());
    sigma[(0, 0)] = sigma_eta_sq;
    let qn = &model.b * &sigma * model.b.transpose();
    let rn = &model.d * &sigma * model.d.transpose();
    let sn = &model.b * &sigma * model.d.transpose();
    let kalman = solve_dare_cross(&model.a.transpose(), &model.c.transpose(), &qn, &rn, &sn)?;
    let kf = kalman.gain.transpose();

    // states [x₁; x̂]; r₁ = r + C x̂ feeds the original encoder
    let (n1, nm) = (enc.n_states(), model.n_states());
    let dim = n1 + nm;
    let br = enc.b.column(0).into_owned();
    let mut a = DMatrix::zeros(dim, dim);
    a.view_mut((0, 0), (n1, n1)).copy_from(&enc.a);
    a.view_mut((0, n1), (n1, nm)).copy_from(&(&br * &model.c));
    a.view_mut((n1, n1), (nm, nm)).copy_from(&model.a);
    let mut b = DMatrix::zeros(dim, 2);
    b.view_mut((0, 0), (n1, 2)).copy_from(&enc.b);
    b.view_mut((n1, 0), (nm, 1)).copy_from(&kf);
    let mut c = DMatrix::zeros(1, dim);
    c.view_mut((0, 0), (1, n1)).copy_from(&enc.c);
    c.view_mut((0, n1), (1, nm)).copy_from(&(-&model.c));
    let whitened = StateSpaceSystem::new(a, b, c, enc.d.clone())?;
    let decoder = StateSpaceSystem::new(model.a.clone(), kf, model.c.clone(), DMatrix::identity(1, 1))?;
    LoopDesign::from_encoder(whitened, decoder, sigma_eta_sq, h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bound::maps::snr_and_variance;
    use crate::bound::youla::{build_default_program, YoulaOptions};
    use crate::lqg::d_inf;
    use crate::lti::TwoByTwoPlant;

    fn opts() -> YoulaOptions {
        YoulaOptions { grid_size: 1 << 13, n_q: 32, n_q_max: 64 }
    }

    #[test]
    fn designed_loop_reproduces_point() {
        let plant = TwoByTwoPlant::unstable_example();
        for h in [0, 2] {
            let prog = build_default_program(&plant, h, opts()).unwrap();
            let floor = d_inf(&plant, h).unwrap().value;
            let p = phi_at_order(&prog, 3.0 * floor, 32).unwrap();
            let design = design_for(&prog, &p).unwrap();
            let sv = snr_and_variance(&plant, &design).unwrap();
            assert!((sv.snr - p.phi).abs() < 1e-6 * p.phi, "h={h}: {} vs {}", sv.snr, p.phi);
            assert!(sv.sigma_z_sq <= p.d * (1.0 + 1e-6));
            assert!((sv.sigma_z_sq - p.d).abs() < 1e-6 * p.d);
        }
    }

    #[test]
    fn infeasible_below_floor() {
        let plant = TwoByTwoPlant::unstable_example();
        let prog = build_default_program(&plant, 1, opts()).unwrap();
        let floor = d_inf(&plant, 1).unwrap().value;
        assert!(matches!(phi_at_order(&prog, 0.9 * floor, 32), Err(Error::Infeasible { .. })));
    }

    #[test]
    fn stable_plant_loose_target_needs_no_rate() {
        let g = RationalFilter::new(vec![0.5], vec![1.0, -0.6]).unwrap();
        let plant = TwoByTwoPlant::shared_channel(g.clone()).unwrap();
        let prog = build_default_program(&plant, 0, opts()).unwrap();
        let g11 = crate::lti::realize(&g).h2_norm_sq().unwrap();
        let p = phi_of_d(&prog, 1.5 * g11).unwrap();
        assert_eq!(p.phi, 0.0);
        assert_eq!(p.rate_lower_bits, 0.0);
        let sv = snr_and_variance(&plant, &design_for(&prog, &p).unwrap()).unwrap();
        assert!(sv.snr.abs() < 1e-12);
        assert!((sv.sigma_z_sq - p.d).abs() < 1e-9);
    }

    #[test]
    fn certificate_brackets_optimum() {
        let plant = TwoByTwoPlant::unstable_example();
        let prog = build_default_program(&plant, 1, opts()).unwrap();
        let floor = d_inf(&plant, 1).unwrap().value;
        let p = snr_stage(&prog, 2.0 * floor, 32).unwrap();
        assert!(snr_feasible(&prog, p.d, p.phi * (1.0 + 1e-6), 32).unwrap());
        assert!(!snr_feasible(&prog, p.d, p.phi * (1.0 - 1e-3), 32).unwrap());
    }

    #[test]
    fn refinement_never_exceeds_snr_stage() {
        let plant = TwoByTwoPlant::unstable_example();
        let prog = build_default_program(&plant, 1, opts()).unwrap();
        let floor = d_inf(&plant, 1).unwrap().value;
        for mult in [1.2, 3.0, 30.0] {
            let d = mult * floor;
            let stage = snr_stage(&prog, d, 32).unwrap();
            let p = phi_at_order(&prog, d, 32).unwrap();
            assert!(p.phi <= stage.phi * (1.0 + 1e-12), "{} > {}", p.phi, stage.phi);
            assert!(p.phi <= p.phi_unwhitened * (1.0 + 1e-9));
            assert!((p.sigma_z_sq - d).abs() < 1e-9 * d);
            assert!((p.rate_lower_bits - rate_bits(p.phi)).abs() < 1e-12);
        }
    }

    #[test]
    fn designed_channel_output_is_white() {
        let plant = TwoByTwoPlant::unstable_example();
        let prog = build_default_program(&plant, 2, opts()).unwrap();
        let floor = d_inf(&plant, 2).unwrap().value;
        let p = phi_at_order(&prog, 1.5 * floor, 32).unwrap();
        let design = design_for(&prog, &p).unwrap();
        let maps = closed_loop_maps(&plant, &design).unwrap();
        let cols: Vec<usize> = (0..=maps.n_w).collect();
        let r = maps.sys.select_outputs(&[maps.r()]).select_inputs(&cols);
        // autocovariance of r at lags 0..5 from the impulse response
        let ir = r.impulse_response(4000);
        let weight = |j: usize| if j == 0 { p.sigma_eta_sq } else { 1.0 };
        let acov = |lag: usize| -> f64 {
            (0..ir.len() - lag)
                .map(|k| (0..cols.len()).map(|j| weight(j) * ir[k][(0, j)] * ir[k + lag][(0, j)]).sum::<f64>())
                .sum()
        };
        let r0 = acov(0);
        assert!((r0 / p.sigma_eta_sq - 1.0 - p.phi).abs() < 1e-6 * (1.0 + p.phi));
        for lag in 1..6 {
            assert!(acov(lag).abs() < 1e-7 * r0, "lag {lag}: {}", acov(lag) / r0);
        }
    }
}
