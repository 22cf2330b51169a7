//! Youla parameterization around an observer-based controller and the
//! frequency-grid least-squares problems it induces.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::shaping::NoiseShaper;
use crate::error::{Error, Result};
use crate::lqg::{d_inf, DelayedPlant, ObserverController};
use crate::lti::linalg;
use crate::lti::ss::{block_diag, hstack, vstack};
use crate::lti::{FrequencyGrid, StateSpaceSystem, TwoByTwoPlant, DEFAULT_GRID_SIZE};

pub const DEFAULT_N_Q: usize = 32;
pub const MAX_N_Q: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YoulaOptions {
    pub grid_size: usize,
    /// Starting FIR order of `Q`.
    pub n_q: usize,
    /// Largest FIR order tried when refining.
    pub n_q_max: usize,
}

impl Default for YoulaOptions {
    fn default() -> Self {
        Self { grid_size: DEFAULT_GRID_SIZE, n_q: DEFAULT_N_Q, n_q_max: MAX_N_Q }
    }
}

/// Grid samples of a quadratic `c + 2 b'q + q'Hq` with Toeplitz `H`.
#[derive(Debug, Clone)]
struct Quadratic {
    c: f64,
    /// `H[i][j] = row[|i - j|]`
    row: Vec<f64>,
    lin: Vec<f64>,
}

impl Quadratic {
    fn from_samples(grid: &FrequencyGrid, constant: &[f64], weight: &[f64], cross: &[Complex64], order: usize) -> Self {
        let n = grid.size() as f64;
        let mut row = vec![0.0; order];
        let mut lin = vec![0.0; order];
        for (k, &w) in grid.omegas().iter().enumerate() {
            let step = Complex64::from_polar(1.0, -w);
            let mut ph = Complex64::new(1.0, 0.0);
            for d in 0..order {
                row[d] += weight[k] * ph.re;
                lin[d] += (ph * cross[k]).re;
                ph *= step;
            }
        }
        row.iter_mut().chain(lin.iter_mut()).for_each(|v| *v /= n);
        Self { c: constant.iter().sum::<f64>() / n, row, lin }
    }

    fn hessian(&self, n: usize) -> DMatrix<f64> {
        DMatrix::from_fn(n, n, |i, j| self.row[i.abs_diff(j)])
    }

    fn eval(&self, q: &DVector<f64>) -> f64 {
        let n = q.len();
        let b = DVector::from_column_slice(&self.lin[..n]);
        self.c + 2.0 * b.dot(q) + (self.hessian(n) * q).dot(q)
    }
}

/// Minimizer of `V(Q) + λ A(Q)` over FIR `Q` of a given order.
#[derive(Debug, Clone)]
pub struct WeightedOptimum {
    pub lambda: f64,
    pub q: Vec<f64>,
    /// `E|z|²` due to `w`.
    pub v: f64,
    /// `E u²` due to `w`.
    pub a: f64,
}

impl WeightedOptimum {
    pub fn value(&self) -> f64 {
        self.v + self.lambda * self.a
    }
}

/// All stabilizing controllers `K(Q)` of the delayed plant, with `Q` an FIR
/// filter, and the affine maps `w -> z` and `w -> u` sampled on a grid:
/// `T_zw = T11 + T12 Q T21`, `T_uw = U11 + U12 Q T21`.
///
/// `Q = 0` corresponds to the nominal observer-based controller.
#[derive(Debug, Clone)]
pub struct YoulaProgram {
    plant: TwoByTwoPlant,
    delayed: DelayedPlant,
    nominal: ObserverController,
    /// Static parameter turning the predictor-form controller into the current-estimate one.
    q_nominal: f64,
    grid: FrequencyGrid,
    options: YoulaOptions,
    t11: Vec<DMatrix<Complex64>>,
    t12: Vec<DMatrix<Complex64>>,
    t21: Vec<DMatrix<Complex64>>,
    u11: Vec<DMatrix<Complex64>>,
    u12: Vec<Complex64>,
    v_quad: Quadratic,
    a_quad: Quadratic,
    /// Per-frequency `|T_uw(Q)|² = a_const + 2 Re(Q a_cross) + |Q|² a_weight`.
    a_const: Vec<f64>,
    a_weight: Vec<f64>,
    a_cross: Vec<Complex64>,
    shaper: NoiseShaper,
}

/// Builds the program around the LQG controller of the floor computation.
pub fn build_default_program(plant: &TwoByTwoPlant, h: usize, options: YoulaOptions) -> Result<YoulaProgram> {
    let floor = d_inf(plant, h)?;
    build_youla_program(plant, h, &floor.observer, options)
}

pub fn build_youla_program(
    plant: &TwoByTwoPlant,
    h: usize,
    nominal: &ObserverController,
    options: YoulaOptions,
) -> Result<YoulaProgram> {
    if options.n_q == 0 || options.n_q > options.n_q_max {
        return Err(Error::InvalidArgument(format!(
            "FIR order {} must lie in 1..={}",
            options.n_q, options.n_q_max
        )));
    }
    let delayed = DelayedPlant::new(plant, h);
    let n = delayed.n_states();
    if nominal.a.shape() != (n, n) || nominal.f.shape() != (1, n) || nominal.l_p.shape() != (n, 1) {
        return Err(Error::Dimension("nominal controller does not match the delayed plant".into()));
    }
    let (a, b1, b2, c1, c2, d12) = (&delayed.a, &delayed.b1, &delayed.b2, &delayed.c1, &delayed.c2, &delayed.d12);
    let (f, l_p) = (&nominal.f, &nominal.l_p);
    let a_f = a - b2 * f;
    let a_l = a - l_p * c2;
    for (m, what) in [(&a_f, "state feedback"), (&a_l, "observer")] {
        let rho = linalg::spectral_radius(m);
        if rho >= 1.0 - linalg::STABILITY_MARGIN {
            return Err(Error::Unstable { spectral_radius: rho, context: format!("nominal {what} is not stabilizing") });
        }
    }
    let n_w = b1.ncols();
    let n_z = c1.nrows();
    let cz = c1 - d12 * f;
    let t21 = StateSpaceSystem::new(a_l.clone(), b1.clone(), c2.clone(), DMatrix::zeros(1, n_w))?;
    let t12 = StateSpaceSystem::new(a_f.clone(), b2.clone(), cz.clone(), d12.clone())?;
    let u12 = StateSpaceSystem::new(a_f.clone(), b2.clone(), -f, DMatrix::from_element(1, 1, 1.0))?;
    let mut a11 = block_diag(&a_f, &a_l);
    a11.view_mut((0, n), (n, n)).copy_from(&(b2 * f));
    let b11 = vstack(b1, b1);
    let t11 = StateSpaceSystem::new(a11.clone(), b11.clone(), hstack(&cz, &(d12 * f)), DMatrix::zeros(n_z, n_w))?;
    let u11 = StateSpaceSystem::new(a11, b11, hstack(&(-f), f), DMatrix::zeros(1, n_w))?;

    let grid = FrequencyGrid::new(options.grid_size)?;
    let om = grid.omegas();
    let t21 = t21.responses(om);
    let t12 = t12.responses(om);
    let u12: Vec<Complex64> = u12.responses(om).into_iter().map(|m| m[(0, 0)]).collect();
    let q_nominal = -(f * &nominal.l_c)[(0, 0)];
    let qn = Complex64::new(q_nominal, 0.0);
    let t11: Vec<DMatrix<Complex64>> = t11
        .responses(om)
        .into_iter()
        .zip(t12.iter().zip(&t21))
        .map(|(m, (p, q))| m + p * q * qn)
        .collect();
    let u11: Vec<DMatrix<Complex64>> = u11
        .responses(om)
        .into_iter()
        .zip(u12.iter().zip(&t21))
        .map(|(m, (p, q))| m + q * (*p * qn))
        .collect();

    let nk = grid.size();
    let mut v_const = vec![0.0; nk];
    let mut v_weight = vec![0.0; nk];
    let mut v_cross = vec![Complex64::new(0.0, 0.0); nk];
    let mut a_const = vec![0.0; nk];
    let mut a_weight = vec![0.0; nk];
    let mut a_cross = vec![Complex64::new(0.0, 0.0); nk];
    for k in 0..nk {
        let pi = &t12[k] * &t21[k];
        v_const[k] = t11[k].norm_squared();
        v_weight[k] = pi.norm_squared();
        v_cross[k] = t11[k].iter().zip(pi.iter()).map(|(x, y)| x.conj() * y).sum();
        let pa = &t21[k] * u12[k];
        a_const[k] = u11[k].norm_squared();
        a_weight[k] = pa.norm_squared();
        a_cross[k] = u11[k].iter().zip(pa.iter()).map(|(x, y)| x.conj() * y).sum();
    }
    let v_quad = Quadratic::from_samples(&grid, &v_const, &v_weight, &v_cross, options.n_q_max);
    let a_quad = Quadratic::from_samples(&grid, &a_const, &a_weight, &a_cross, options.n_q_max);

    Ok(YoulaProgram {
        plant: plant.clone(),
        delayed,
        nominal: nominal.clone(),
        q_nominal,
        grid,
        options,
        t11,
        t12,
        t21,
        u11,
        u12,
        v_quad,
        a_quad,
        a_const,
        a_weight,
        a_cross,
        shaper: NoiseShaper::new(plant),
    })
}

impl YoulaProgram {
    pub fn h(&self) -> usize {
        self.delayed.h
    }

    pub fn plant(&self) -> &TwoByTwoPlant {
        &self.plant
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn options(&self) -> &YoulaOptions {
        &self.options
    }

    pub fn shaper(&self) -> &NoiseShaper {
        &self.shaper
    }

    /// `E|z|²` of the nominal loop, from the grid.
    pub fn nominal_variance(&self) -> f64 {
        self.v_quad.c
    }

    /// `(E|z|², E u²)` due to `w` for the FIR parameter `q`, from the quadratic forms.
    pub fn variances(&self, q: &[f64]) -> Result<(f64, f64)> {
        self.check_order(q.len())?;
        let q = DVector::from_column_slice(q);
        Ok((self.v_quad.eval(&q).max(0.0), self.a_quad.eval(&q).max(0.0)))
    }

    /// `V(q)` and its gradient.
    pub(crate) fn v_value_grad(&self, q: &[f64]) -> (f64, Vec<f64>) {
        let n = q.len();
        let qv = DVector::from_column_slice(q);
        let hq = self.v_quad.hessian(n) * &qv;
        let grad = (0..n).map(|i| 2.0 * (self.v_quad.lin[i] + hq[i])).collect();
        (self.v_quad.eval(&qv), grad)
    }

    /// Grid coefficients of `|T_uw(Q)|²` as `(constant, weight, cross)`.
    pub(crate) fn u_power_samples(&self) -> (&[f64], &[f64], &[Complex64]) {
        (&self.a_const, &self.a_weight, &self.a_cross)
    }

    /// Grid samples of `T_zw(Q)` and `T_uw(Q)`.
    pub fn maps_at(&self, q: &[f64]) -> (Vec<DMatrix<Complex64>>, Vec<DMatrix<Complex64>>) {
        let mut tz = Vec::with_capacity(self.grid.size());
        let mut tu = Vec::with_capacity(self.grid.size());
        for (k, &w) in self.grid.omegas().iter().enumerate() {
            let step = Complex64::from_polar(1.0, -w);
            let mut ph = Complex64::new(1.0, 0.0);
            let mut qv = Complex64::new(0.0, 0.0);
            for &c in q {
                qv += ph * c;
                ph *= step;
            }
            tz.push(&self.t11[k] + &self.t12[k] * &self.t21[k] * qv);
            tu.push(&self.u11[k] + &self.t21[k] * (self.u12[k] * qv));
        }
        (tz, tu)
    }

    fn check_order(&self, n: usize) -> Result<()> {
        if n > self.options.n_q_max {
            Err(Error::InvalidArgument(format!("FIR order {n} exceeds {}", self.options.n_q_max)))
        } else {
            Ok(())
        }
    }

    /// Minimizes `V(Q) + λ A(Q)` over FIR parameters of order `n_q` by the normal equations.
    pub fn weighted_optimum(&self, lambda: f64, n_q: usize) -> Result<WeightedOptimum> {
        self.check_order(n_q)?;
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidArgument(format!("weight {lambda} must be finite and >= 0")));
        }
        // Scale so that the larger of the two terms has unit weight.
        let (sv, sa) = if lambda > 1.0 { (1.0 / lambda, 1.0) } else { (1.0, lambda) };
        let h = self.v_quad.hessian(n_q) * sv + self.a_quad.hessian(n_q) * sa;
        let b = DVector::from_fn(n_q, |i, _| sv * self.v_quad.lin[i] + sa * self.a_quad.lin[i]);
        let q = match h.clone().cholesky() {
            Some(ch) => -ch.solve(&b),
            None => {
                let ridge = 1e-12 * (h.trace() / n_q as f64).max(f64::MIN_POSITIVE);
                let hr = &h + DMatrix::identity(n_q, n_q) * ridge;
                -hr.lu().solve(&b).ok_or_else(|| Error::Singular("Youla normal equations".into()))?
            }
        };
        let v = self.v_quad.eval(&q).max(0.0);
        let a = self.a_quad.eval(&q).max(0.0);
        Ok(WeightedOptimum { lambda, q: q.iter().copied().collect(), v, a })
    }

    /// Controller `K(Q)` from the delayed measurement `y(k-h)` to `u(k)`.
    pub fn controller(&self, q: &[f64]) -> StateSpaceSystem {
        let ObserverController { a, b2, c2, f, l_p, .. } = &self.nominal;
        let n = a.nrows();
        let nq = q.len().max(1);
        let mut taps = vec![0.0; nq];
        taps[..q.len()].copy_from_slice(q);
        taps[0] += self.q_nominal;
        let q0 = taps[0];
        let ns = nq - 1;
        let dim = n + ns;
        let mut ak = DMatrix::zeros(dim, dim);
        let mut bk = DMatrix::zeros(dim, 1);
        let mut ck = DMatrix::zeros(1, dim);
        ak.view_mut((0, 0), (n, n)).copy_from(&(a - b2 * f - b2 * c2 * q0 - l_p * c2));
        bk.view_mut((0, 0), (n, 1)).copy_from(&(b2 * q0 + l_p));
        ck.view_mut((0, 0), (1, n)).copy_from(&(-f - c2 * q0));
        for i in 1..nq {
            let col = n + i - 1;
            ak.view_mut((0, col), (n, 1)).copy_from(&(b2 * taps[i]));
            ck[(0, col)] = taps[i];
        }
        if ns > 0 {
            ak.view_mut((n, 0), (1, n)).copy_from(&(-c2));
            bk[(n, 0)] = 1.0;
            for i in 1..ns {
                ak[(n + i, n + i - 1)] = 1.0;
            }
        }
        StateSpaceSystem { a: ak, b: bk, c: ck, d: DMatrix::from_element(1, 1, q0) }
    }
}
