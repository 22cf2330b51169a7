use nalgebra::DMatrix;
use num_complex::Complex64;

use super::filter::RationalFilter;
use super::linalg::{self, HessenbergResolvent, STABILITY_MARGIN};
use crate::error::{Error, Result};

/// Discrete-time state-space realization
/// `x(k+1) = A x(k) + B v(k)`, `y(k) = C x(k) + D v(k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpaceSystem {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
}

impl StateSpaceSystem {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>, d: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::Dimension(format!("A is {}x{}, expected square", n, a.ncols())));
        }
        if b.nrows() != n || c.ncols() != n {
            return Err(Error::Dimension(format!(
                "B is {}x{} and C is {}x{} for {} states",
                b.nrows(),
                b.ncols(),
                c.nrows(),
                c.ncols(),
                n
            )));
        }
        if d.nrows() != c.nrows() || d.ncols() != b.ncols() {
            return Err(Error::Dimension(format!(
                "D is {}x{}, expected {}x{}",
                d.nrows(),
                d.ncols(),
                c.nrows(),
                b.ncols()
            )));
        }
        Ok(Self { a, b, c, d })
    }

    /// Memoryless system `y = D v`.
    pub fn static_gain(d: DMatrix<f64>) -> Self {
        let (p, m) = d.shape();
        Self { a: DMatrix::zeros(0, 0), b: DMatrix::zeros(0, m), c: DMatrix::zeros(p, 0), d }
    }

    pub fn zero(outputs: usize, inputs: usize) -> Self {
        Self::static_gain(DMatrix::zeros(outputs, inputs))
    }

    pub fn n_states(&self) -> usize {
        self.a.nrows()
    }

    pub fn n_inputs(&self) -> usize {
        self.b.ncols()
    }

    pub fn n_outputs(&self) -> usize {
        self.c.nrows()
    }

    pub fn spectral_radius(&self) -> f64 {
        linalg::spectral_radius(&self.a)
    }

    /// Stability with the default margin `1e-9` on the spectral radius.
    pub fn is_stable(&self) -> bool {
        self.is_stable_with_margin(STABILITY_MARGIN)
    }

    /// `ρ(A) < 1 - margin`, with a few ulps of slack charged against the
    /// eigenvalue solver so that radii sitting exactly on the margin count as unstable.
    pub fn is_stable_with_margin(&self, margin: f64) -> bool {
        self.spectral_radius() < 1.0 - margin - 1e-13
    }

    pub fn ensure_stable(&self, context: &str) -> Result<()> {
        let rho = self.spectral_radius();
        if self.is_stable() {
            Ok(())
        } else {
            Err(Error::Unstable { spectral_radius: rho, context: context.into() })
        }
    }

    /// `H(z) = C (zI - A)^{-1} B + D`.
    pub fn eval(&self, z: Complex64) -> DMatrix<Complex64> {
        let n = self.n_states();
        let dc = self.d.map(|v| Complex64::new(v, 0.0));
        if n == 0 {
            return dc;
        }
        let zi = DMatrix::<Complex64>::identity(n, n) * z - self.a.map(|v| Complex64::new(v, 0.0));
        let x = zi
            .lu()
            .solve(&self.b.map(|v| Complex64::new(v, 0.0)))
            .unwrap_or_else(|| DMatrix::from_element(n, self.n_inputs(), Complex64::new(f64::NAN, f64::NAN)));
        self.c.map(|v| Complex64::new(v, 0.0)) * x + dc
    }

    pub fn response(&self, omega: f64) -> DMatrix<Complex64> {
        self.eval(Complex64::from_polar(1.0, omega))
    }

    /// Frequency responses on many points using a single Hessenberg reduction.
    pub fn responses(&self, omegas: &[f64]) -> Vec<DMatrix<Complex64>> {
        let res = HessenbergResolvent::new(&self.a, &self.b, &self.c);
        let dc = self.d.map(|v| Complex64::new(v, 0.0));
        omegas.iter().map(|&w| res.eval(Complex64::from_polar(1.0, w)) + &dc).collect()
    }

    /// Markov parameters `D, CB, CAB, ...`.
    pub fn impulse_response(&self, samples: usize) -> Vec<DMatrix<f64>> {
        let mut out = Vec::with_capacity(samples);
        if samples == 0 {
            return out;
        }
        out.push(self.d.clone());
        let mut akb = self.b.clone();
        for _ in 1..samples {
            out.push(&self.c * &akb);
            akb = &self.a * akb;
        }
        out
    }

    /// Steady-state state covariance under white input with covariance `w`.
    pub fn state_covariance(&self, w: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.ensure_stable("state covariance is undefined")?;
        linalg::dlyap(&self.a, &(&self.b * w * self.b.transpose()))
    }

    /// Steady-state output covariance under white input with covariance `w`.
    pub fn output_covariance(&self, w: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let x = self.state_covariance(w)?;
        Ok(&self.c * x * self.c.transpose() + &self.d * w * self.d.transpose())
    }

    /// Squared H2 norm `trace(C X C' + D D')` with `X = A X A' + B B'`.
    pub fn h2_norm_sq(&self) -> Result<f64> {
        self.ensure_stable("H2 norm is undefined for unstable systems")?;
        let x = linalg::dlyap(&self.a, &(&self.b * self.b.transpose()))?;
        let v = (&self.c * x * self.c.transpose()).trace() + (&self.d * self.d.transpose()).trace();
        Ok(v.max(0.0))
    }

    /// Keeps the listed outputs, in order.
    pub fn select_outputs(&self, rows: &[usize]) -> Self {
        Self {
            a: self.a.clone(),
            b: self.b.clone(),
            c: self.c.select_rows(rows),
            d: self.d.select_rows(rows),
        }
    }

    /// Keeps the listed inputs, in order.
    pub fn select_inputs(&self, cols: &[usize]) -> Self {
        Self {
            a: self.a.clone(),
            b: self.b.select_columns(cols),
            c: self.c.clone(),
            d: self.d.select_columns(cols),
        }
    }

    /// Output-scaled copy `alpha * H`.
    pub fn scaled(&self, alpha: f64) -> Self {
        Self { a: self.a.clone(), b: self.b.clone(), c: &self.c * alpha, d: &self.d * alpha }
    }

    /// Cascade: `next ∘ self` (self first).
    pub fn series(&self, next: &StateSpaceSystem) -> Result<Self> {
        if next.n_inputs() != self.n_outputs() {
            return Err(Error::Dimension(format!(
                "series: {} outputs feed {} inputs",
                self.n_outputs(),
                next.n_inputs()
            )));
        }
        let (n1, n2) = (self.n_states(), next.n_states());
        let n = n1 + n2;
        let mut a = DMatrix::zeros(n, n);
        a.view_mut((0, 0), (n1, n1)).copy_from(&self.a);
        a.view_mut((n1, 0), (n2, n1)).copy_from(&(&next.b * &self.c));
        a.view_mut((n1, n1), (n2, n2)).copy_from(&next.a);
        let mut b = DMatrix::zeros(n, self.n_inputs());
        b.view_mut((0, 0), (n1, self.n_inputs())).copy_from(&self.b);
        b.view_mut((n1, 0), (n2, self.n_inputs())).copy_from(&(&next.b * &self.d));
        let mut c = DMatrix::zeros(next.n_outputs(), n);
        c.view_mut((0, 0), (next.n_outputs(), n1)).copy_from(&(&next.d * &self.c));
        c.view_mut((0, n1), (next.n_outputs(), n2)).copy_from(&next.c);
        let d = &next.d * &self.d;
        Self::new(a, b, c, d)
    }

    /// Sum `self + other` with shared inputs.
    pub fn add(&self, other: &StateSpaceSystem) -> Result<Self> {
        if self.n_inputs() != other.n_inputs() || self.n_outputs() != other.n_outputs() {
            return Err(Error::Dimension("add: shapes differ".into()));
        }
        let blk = block_diag(&self.a, &other.a);
        let b = DMatrix::from_fn(blk.nrows(), self.n_inputs(), |i, j| {
            if i < self.n_states() {
                self.b[(i, j)]
            } else {
                other.b[(i - self.n_states(), j)]
            }
        });
        let c = DMatrix::from_fn(self.n_outputs(), blk.nrows(), |i, j| {
            if j < self.n_states() {
                self.c[(i, j)]
            } else {
                other.c[(i, j - self.n_states())]
            }
        });
        Self::new(blk, b, c, &self.d + &other.d)
    }

    /// Stacks outputs of two systems driven by the same inputs.
    pub fn stack_outputs(&self, other: &StateSpaceSystem) -> Result<Self> {
        if self.n_inputs() != other.n_inputs() {
            return Err(Error::Dimension("stack_outputs: input counts differ".into()));
        }
        let a = block_diag(&self.a, &other.a);
        let b = vstack(&self.b, &other.b);
        let c = block_diag(&self.c, &other.c);
        let d = vstack(&self.d, &other.d);
        Self::new(a, b, c, d)
    }

    /// Juxtaposes inputs: `y = H1 v1 + H2 v2`.
    pub fn append_inputs(&self, other: &StateSpaceSystem) -> Result<Self> {
        if self.n_outputs() != other.n_outputs() {
            return Err(Error::Dimension("append_inputs: output counts differ".into()));
        }
        let a = block_diag(&self.a, &other.a);
        let b = block_diag(&self.b, &other.b);
        let c = hstack(&self.c, &other.c);
        let d = hstack(&self.d, &other.d);
        Self::new(a, b, c, d)
    }

    /// Delays every input by `h` samples using a shift register per input.
    pub fn delay_inputs(&self, h: usize) -> Self {
        if h == 0 {
            return self.clone();
        }
        let m = self.n_inputs();
        let register = shift_register(m, h);
        register.series(self).expect("shift register matches input count")
    }

    /// Delays every output by `h` samples using a shift register per output.
    pub fn delay_outputs(&self, h: usize) -> Self {
        if h == 0 {
            return self.clone();
        }
        let p = self.n_outputs();
        self.series(&shift_register(p, h)).expect("shift register matches output count")
    }

    /// Drops states that are uncontrollable or unobservable.
    pub fn minimal(&self) -> Self {
        let tol = 1e-10;
        let n = self.n_states();
        if n == 0 {
            return self.clone();
        }
        let v = linalg::krylov_basis(&self.a, &self.b, tol);
        let (a, b, c) = (v.transpose() * &self.a * &v, v.transpose() * &self.b, &self.c * &v);
        let w = linalg::krylov_basis(&a.transpose(), &c.transpose(), tol);
        Self {
            a: w.transpose() * &a * &w,
            b: w.transpose() * b,
            c: c * &w,
            d: self.d.clone(),
        }
    }
}

/// Realizes a SISO rational filter in controllable canonical form.
pub fn realize(filter: &RationalFilter) -> StateSpaceSystem {
    let den = filter.den();
    let n = den.len() - 1;
    let mut num = vec![0.0; n + 1 - filter.num().len()];
    num.extend_from_slice(filter.num());
    let d0 = num[0];
    let mut a = DMatrix::zeros(n, n);
    for j in 0..n {
        a[(0, j)] = -den[j + 1];
    }
    for i in 1..n {
        a[(i, i - 1)] = 1.0;
    }
    let mut b = DMatrix::zeros(n, 1);
    if n > 0 {
        b[(0, 0)] = 1.0;
    }
    let c = DMatrix::from_fn(1, n, |_, j| num[j + 1] - d0 * den[j + 1]);
    let d = DMatrix::from_element(1, 1, d0);
    StateSpaceSystem { a, b, c, d }
}

/// `z^{-h}` acting on `channels` parallel signals.
pub fn shift_register(channels: usize, h: usize) -> StateSpaceSystem {
    if h == 0 {
        return StateSpaceSystem::static_gain(DMatrix::identity(channels, channels));
    }
    let n = channels * h;
    let mut a = DMatrix::zeros(n, n);
    for stage in 1..h {
        for ch in 0..channels {
            a[(stage * channels + ch, (stage - 1) * channels + ch)] = 1.0;
        }
    }
    let mut b = DMatrix::zeros(n, channels);
    let mut c = DMatrix::zeros(channels, n);
    for ch in 0..channels {
        b[(ch, ch)] = 1.0;
        c[(ch, (h - 1) * channels + ch)] = 1.0;
    }
    StateSpaceSystem { a, b, c, d: DMatrix::zeros(channels, channels) }
}

/// Realization of `z^{-h} · sys`; the frequency response picks up `e^{-jωh}`.
pub fn delay_augment(sys: &StateSpaceSystem, h: i64) -> Result<StateSpaceSystem> {
    if h < 0 {
        return Err(Error::NegativeDelay(h));
    }
    let h = h as usize;
    if sys.n_inputs() <= sys.n_outputs() {
        Ok(sys.delay_inputs(h))
    } else {
        Ok(sys.delay_outputs(h))
    }
}

pub fn block_diag(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(a.nrows() + b.nrows(), a.ncols() + b.ncols());
    m.view_mut((0, 0), a.shape()).copy_from(a);
    m.view_mut((a.nrows(), a.ncols()), b.shape()).copy_from(b);
    m
}

pub fn vstack(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(a.nrows() + b.nrows(), a.ncols().max(b.ncols()));
    m.view_mut((0, 0), a.shape()).copy_from(a);
    m.view_mut((a.nrows(), 0), b.shape()).copy_from(b);
    m
}

pub fn hstack(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(a.nrows().max(b.nrows()), a.ncols() + b.ncols());
    m.view_mut((0, 0), a.shape()).copy_from(a);
    m.view_mut((0, a.ncols()), b.shape()).copy_from(b);
    m
}
