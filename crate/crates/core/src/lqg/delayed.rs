//! LQG synthesis for the plant seen through an `h`-sample measurement delay.

use nalgebra::DMatrix;
use serde::Serialize;

use super::riccati::{solve_dare, solve_dare_cross};
use crate::error::{Error, Result};
use crate::lti::linalg;
use crate::lti::ss::{block_diag, hstack, shift_register, vstack};
use crate::lti::{Interconnection, Signal, StateSpaceSystem, TwoByTwoPlant};

/// Regularizer added to the control weight.
pub const EPS_CONTROL: f64 = 1e-10;
/// Measurement-noise regularizer used when the measurement is noise-free.
pub const EPS_MEAS: f64 = 1e-10;

/// State-space data of the plant with the measurement delayed by `h` samples.
///
/// When the plant has direct feedthrough from `w` to `z` or `y`, the current
/// disturbance is carried as extra state so that the augmented plant has
/// `D11 = D21 = 0`. The last `h` states form the measurement shift register.
#[derive(Debug, Clone)]
pub struct DelayedPlant {
    pub h: usize,
    pub a: DMatrix<f64>,
    pub b1: DMatrix<f64>,
    pub b2: DMatrix<f64>,
    pub c1: DMatrix<f64>,
    pub c2: DMatrix<f64>,
    pub d12: DMatrix<f64>,
    /// Whether `D21` was nonzero before augmentation.
    pub noisy_measurement: bool,
}

impl DelayedPlant {
    pub fn new(plant: &TwoByTwoPlant, h: usize) -> Self {
        let r = plant.realization();
        let (mut a, mut b1, mut b2) = (r.a(), r.b1(), r.b2());
        let (mut c1, mut c2) = (r.c1(), r.c2());
        let (d11, d21) = (r.d11(), r.d21());
        let noisy_measurement = d21.iter().any(|v| *v != 0.0);
        if noisy_measurement || d11.iter().any(|v| *v != 0.0) {
            let n_w = b1.ncols();
            a = hstack(&vstack(&a, &DMatrix::zeros(n_w, a.ncols())), &vstack(&b1, &DMatrix::zeros(n_w, n_w)));
            b1 = vstack(&DMatrix::zeros(r.n_states(), n_w), &DMatrix::identity(n_w, n_w));
            b2 = vstack(&b2, &DMatrix::zeros(n_w, 1));
            c1 = hstack(&c1, &d11);
            c2 = hstack(&c2, &d21);
        }
        if h > 0 {
            let reg = shift_register(1, h);
            let n = a.nrows();
            let mut aa = block_diag(&a, &reg.a);
            aa.view_mut((n, 0), (h, n)).copy_from(&(&reg.b * &c2));
            a = aa;
            b1 = vstack(&b1, &DMatrix::zeros(h, b1.ncols()));
            b2 = vstack(&b2, &DMatrix::zeros(h, 1));
            c1 = hstack(&c1, &DMatrix::zeros(c1.nrows(), h));
            c2 = hstack(&DMatrix::zeros(1, n), &reg.c);
        }
        Self { h, a, b1, b2, c1, c2, d12: r.d12(), noisy_measurement }
    }

    pub fn n_states(&self) -> usize {
        self.a.nrows()
    }

    /// Open-loop realization with inputs `[w; u]` and outputs `[z; y(k-h)]`.
    pub fn system(&self) -> StateSpaceSystem {
        let n_z = self.c1.nrows();
        let n_w = self.b1.ncols();
        let mut d = DMatrix::zeros(n_z + 1, n_w + 1);
        d.view_mut((0, n_w), (n_z, 1)).copy_from(&self.d12);
        StateSpaceSystem {
            a: self.a.clone(),
            b: hstack(&self.b1, &self.b2),
            c: vstack(&self.c1, &self.c2),
            d,
        }
    }
}

/// Observer-based controller `u = -F x̂(k|k)` built from a predictor
/// `x̂(k+1|k) = A x̂(k|k) + B2 u` and measurement update with gain `L_c`.
#[derive(Debug, Clone)]
pub struct ObserverController {
    pub a: DMatrix<f64>,
    pub b2: DMatrix<f64>,
    pub c2: DMatrix<f64>,
    pub f: DMatrix<f64>,
    /// Current-estimate gain.
    pub l_c: DMatrix<f64>,
    /// One-step predictor gain `A L_c`.
    pub l_p: DMatrix<f64>,
}

impl ObserverController {
    /// Controller from the delayed measurement `y(k-h)` to `u(k)`.
    pub fn system(&self) -> StateSpaceSystem {
        let n = self.a.nrows();
        let abf = &self.a - &self.b2 * &self.f;
        let i_lc = DMatrix::identity(n, n) - &self.l_c * &self.c2;
        StateSpaceSystem {
            a: &abf * &i_lc,
            b: &abf * &self.l_c,
            c: -(&self.f * &i_lc),
            d: -(&self.f * &self.l_c),
        }
    }
}

/// Closed loop of the undelayed plant with a controller fed by `y(k-h)`;
/// inputs `w`, outputs `[z; u]`.
pub fn closed_loop(plant: &TwoByTwoPlant, h: usize, controller: &StateSpaceSystem) -> Result<StateSpaceSystem> {
    if controller.n_inputs() != 1 || controller.n_outputs() != 1 {
        return Err(Error::Dimension("controller must map one measurement to one input".into()));
    }
    let r = plant.realization();
    let (n_w, n_z) = (r.n_w, r.n_z);
    let mut ic = Interconnection::new(n_w);
    let p = ic.add(r.sys.clone());
    let d = ic.add(shift_register(1, h));
    let k = ic.add(controller.clone());
    for i in 0..n_w {
        ic.wire(p, i, Signal::External(i), 1.0);
    }
    ic.wire(p, n_w, Signal::Block(k, 0), 1.0)
        .wire(d, 0, Signal::Block(p, n_z), 1.0)
        .wire(k, 0, Signal::Block(d, 0), 1.0);
    for i in 0..n_z {
        ic.output(&[(Signal::Block(p, i), 1.0)]);
    }
    ic.output(&[(Signal::Block(k, 0), 1.0)]);
    ic.build("plant/controller loop")
}

/// Steady-state `E|z|²` and `E u²` of a loop returned by [`closed_loop`].
pub fn loop_variances(cl: &StateSpaceSystem) -> Result<(f64, f64)> {
    let n_z = cl.n_outputs() - 1;
    let cov = cl.output_covariance(&DMatrix::identity(cl.n_inputs(), cl.n_inputs()))?;
    let vz = (0..n_z).map(|i| cov[(i, i)]).sum::<f64>();
    Ok((vz.max(0.0), cov[(n_z, n_z)].max(0.0)))
}

/// LQG design minimizing `E|z|² + λ E u²` for the delayed plant.
#[derive(Debug, Clone)]
pub struct LqgDesign {
    pub observer: ObserverController,
    /// Optimal cost predicted by the two Riccati solutions.
    pub riccati_value: f64,
}

pub fn lqg_design(dp: &DelayedPlant, lambda: f64) -> Result<LqgDesign> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidArgument(format!("control weight {lambda} must be finite and >= 0")));
    }
    let q = dp.c1.transpose() * &dp.c1;
    let s = dp.c1.transpose() * &dp.d12;
    let r = dp.d12.transpose() * &dp.d12 + DMatrix::from_element(1, 1, lambda + EPS_CONTROL);
    let ctrl = solve_dare_cross(&dp.a, &dp.b2, &q, &r, &s)?;

    let w = &dp.b1 * dp.b1.transpose();
    let v = DMatrix::from_element(1, 1, EPS_MEAS);
    let filt = solve_dare(&dp.a.transpose(), &dp.c2.transpose(), &w, &v)?;
    let pf = filt.p;
    let innov = &dp.c2 * &pf * dp.c2.transpose() + &v;
    let l_c = &pf * dp.c2.transpose() / innov[(0, 0)];
    let l_p = &dp.a * &l_c;
    let post = &pf - &l_c * &dp.c2 * &pf;

    let f = ctrl.gain;
    let weight = dp.b2.transpose() * &ctrl.p * &dp.b2 + &r;
    let riccati_value = (&ctrl.p * &w).trace() + (f.transpose() * &weight * &f * &post).trace();

    let observer = ObserverController {
        a: dp.a.clone(),
        b2: dp.b2.clone(),
        c2: dp.c2.clone(),
        f,
        l_c,
        l_p,
    };
    Ok(LqgDesign { observer, riccati_value })
}

/// Best steady-state `E|z|²` under `h`-delayed linear feedback, with the controller attaining it.
#[derive(Debug, Clone, Serialize)]
pub struct PerformanceFloor {
    pub h: usize,
    /// `E|z|²` of the returned controller on the true (unregularized) loop.
    #[serde(rename = "d_inf")]
    pub value: f64,
    #[serde(skip)]
    pub riccati_value: f64,
    #[serde(skip)]
    pub controller: StateSpaceSystem,
    #[serde(skip)]
    pub observer: ObserverController,
}

pub fn d_inf(plant: &TwoByTwoPlant, h: usize) -> Result<PerformanceFloor> {
    let dp = DelayedPlant::new(plant, h);
    let design = lqg_design(&dp, 0.0)?;
    let controller = design.observer.system();
    let cl = closed_loop(plant, h, &controller)?;
    cl.ensure_stable("LQG controller does not stabilize the delayed loop")?;
    let (value, _) = loop_variances(&cl)?;
    Ok(PerformanceFloor {
        h,
        value,
        riccati_value: design.riccati_value,
        controller,
        observer: design.observer,
    })
}

/// `(E|z|², E u²)` of the LQG loop designed with control weight `λ`.
pub fn weighted_lqg_variances(plant: &TwoByTwoPlant, h: usize, lambda: f64) -> Result<(f64, f64)> {
    let dp = DelayedPlant::new(plant, h);
    let design = lqg_design(&dp, lambda)?;
    let cl = closed_loop(plant, h, &design.observer.system())?;
    loop_variances(&cl)
}

/// Controller from `y(k-h)` to `u(k)` that internally stabilizes the loop.
///
/// Uses the LQG controller of [`d_inf`]; a stable plant for which the Riccati
/// synthesis fails falls back to the zero controller.
pub fn stabilizing_controller(plant: &TwoByTwoPlant, h: usize) -> Result<StateSpaceSystem> {
    match d_inf(plant, h) {
        Ok(floor) => Ok(floor.controller),
        Err(_) if plant.is_open_loop_stable() => Ok(StateSpaceSystem::zero(1, 1)),
        Err(e) => Err(e),
    }
}

/// Spectral radius of the full interconnection of plant, delay line and controller.
pub fn closed_loop_radius(plant: &TwoByTwoPlant, h: usize, controller: &StateSpaceSystem) -> Result<f64> {
    Ok(linalg::spectral_radius(&closed_loop(plant, h, controller)?.a))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lti::RationalFilter;

    fn example_taps(count: usize) -> Vec<f64> {
        let g = crate::lti::realize(&RationalFilter::from_roots(0.165, &[], &[2.0, 0.5789]).unwrap());
        g.impulse_response(count).iter().map(|m| m[(0, 0)]).collect()
    }

    #[test]
    fn example_floor_matches_unpredictable_taps() {
        let plant = TwoByTwoPlant::unstable_example();
        let taps = example_taps(10);
        for h in 0..5 {
            let oracle: f64 = taps[2..=3 + h].iter().map(|g| g * g).sum();
            let floor = d_inf(&plant, h).unwrap();
            assert!(
                (floor.value - oracle).abs() < 1e-6 * oracle,
                "h = {h}: {} vs {}",
                floor.value,
                oracle
            );
            assert!((floor.riccati_value - oracle).abs() < 1e-6 * oracle);
        }
    }

    #[test]
    fn decoupled_output_floor_is_open_loop_norm() {
        let g11 = RationalFilter::new(vec![1.0, 0.2], vec![1.0, -0.6]).unwrap();
        let g = RationalFilter::new(vec![1.0], vec![1.0, -0.3]).unwrap();
        let plant = TwoByTwoPlant::new(vec![vec![g11.clone()]], vec![RationalFilter::constant(0.0)], vec![g.clone()], g)
            .unwrap();
        let want = crate::lti::realize(&g11).h2_norm_sq().unwrap();
        for h in 0..3 {
            assert!((d_inf(&plant, h).unwrap().value - want).abs() < 1e-8);
        }
    }

    #[test]
    fn controllers_stabilize_delayed_loops() {
        let plant = TwoByTwoPlant::unstable_example();
        for h in [0, 4] {
            let k = stabilizing_controller(&plant, h).unwrap();
            assert!(closed_loop_radius(&plant, h, &k).unwrap() < 1.0 - 1e-9);
        }
    }

    #[test]
    fn noisy_measurement_plant() {
        let g = RationalFilter::new(vec![1.0], vec![1.0, -1.2]).unwrap();
        let plant = TwoByTwoPlant::new(
            vec![vec![g.clone(), RationalFilter::constant(0.0)]],
            vec![g.clone()],
            vec![g.clone(), RationalFilter::constant(0.5)],
            g,
        )
        .unwrap();
        let mut last = 0.0;
        for h in 0..4 {
            let f = d_inf(&plant, h).unwrap();
            assert!(f.value >= last - 1e-12);
            assert!((f.value - f.riccati_value).abs() < 1e-6 * f.value);
            last = f.value;
        }
    }
}
