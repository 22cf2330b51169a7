//! Directed-information form of the bound.
//!
//! The SNR program charges the whole variance of the channel output `r`,
//! which is only tight when `r` is white. The bound proper is the smallest
//! directed information `½ mean log(S_r / σ_η²)` over loops with `J = 1`; a
//! decoder that whitens `r` turns that value into an SNR
//! `φ = exp(2ϑ) - 1`. With `M = M_F P`, `P` a monic FIR filter and `σ_η²`
//! saturating `σz² = D`,
//!
//! ```text
//! ϑ(Q, P) = ½ mean log(|M_F P|² + |T_uw(Q)|² g(P) / (D - V(Q))),  g(P) = ||G12 M_F P||²
//! ```
//!
//! is minimized by L-BFGS starting from the SNR optimum (`Q` from the SNR
//! program, `P = 1`). Objective and gradient are evaluated with FFTs on the
//! program's frequency grid.

use std::sync::Arc;

use argmin::core::{CostFunction, Executor, Gradient, State};
use argmin::solver::linesearch::condition::ArmijoCondition;
use argmin::solver::linesearch::BacktrackingLineSearch;
use argmin::solver::quasinewton::LBFGS;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::solve::SLACK_FLOOR;
use super::youla::YoulaProgram;
use crate::error::{Error, Result};

/// Settings of the quasi-Newton refinement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefineOptions {
    /// Number of free taps of `P` after the leading 1.
    pub n_p: usize,
    pub max_iterations: u64,
    /// L-BFGS history length.
    pub memory: usize,
    /// Stop once an iteration improves the objective by less than this (nats).
    pub cost_tolerance: f64,
}

impl RefineOptions {
    pub fn with_order(n_p: usize) -> Self {
        Self { n_p, max_iterations: 3000, memory: 40, cost_tolerance: 1e-12 }
    }
}

/// Optimum of the directed-information problem.
#[derive(Debug, Clone)]
pub struct DirectedOptimum {
    pub q: Vec<f64>,
    /// Taps of `P`, starting with the fixed leading 1.
    pub p: Vec<f64>,
    /// `ϑ` in nats.
    pub rate_nats: f64,
    pub sigma_eta_sq: f64,
    pub v: f64,
    pub a: f64,
    /// `||M - 1||²` and `||G12 M||²`.
    pub m1: f64,
    pub g: f64,
    pub iterations: u64,
}

struct Objective<'a> {
    program: &'a YoulaProgram,
    d: f64,
    n_q: usize,
    mf2: Vec<f64>,
    gm: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
}

struct Evaluation {
    cost: f64,
    grad: Vec<f64>,
    v: f64,
    a: f64,
    g: f64,
    m_sq_mean: f64,
}

impl Objective<'_> {
    fn grid_len(&self) -> usize {
        self.mf2.len()
    }

    /// `Σ_j x_j e^{-i j ω_k}` for all grid points `ω_k = -π + 2πk/N`.
    fn transform(&self, taps: impl Iterator<Item = f64>) -> Vec<Complex64> {
        let mut buf = vec![Complex64::new(0.0, 0.0); self.grid_len()];
        for (j, x) in taps.enumerate() {
            buf[j] = Complex64::new(if j % 2 == 0 { x } else { -x }, 0.0);
        }
        self.fft.process(&mut buf);
        buf
    }

    /// `mean_k h_k e^{-i j ω_k}` for `j < count`.
    fn moments(&self, mut h: Vec<Complex64>, count: usize) -> Vec<Complex64> {
        self.fft.process(&mut h);
        let n = self.grid_len() as f64;
        h.truncate(count);
        for (j, v) in h.iter_mut().enumerate() {
            *v /= if j % 2 == 0 { n } else { -n };
        }
        h
    }

    fn split<'x>(&self, x: &'x [f64]) -> (&'x [f64], &'x [f64]) {
        x.split_at(self.n_q)
    }

    fn evaluate(&self, x: &[f64], with_grad: bool) -> Option<Evaluation> {
        let (q, p_tail) = self.split(x);
        let n_p = p_tail.len() + 1;
        let n = self.grid_len() as f64;
        let (v, dv) = self.program.v_value_grad(q);
        let slack = self.d - v;
        if !(slack >= SLACK_FLOOR) {
            return None;
        }
        let qw = self.transform(q.iter().copied());
        let pw = self.transform(std::iter::once(1.0).chain(p_tail.iter().copied()));
        let (ac, aw, ax) = self.program.u_power_samples();

        let mut t = Vec::with_capacity(qw.len());
        let (mut g, mut a, mut m_sq) = (0.0, 0.0, 0.0);
        for k in 0..qw.len() {
            let tk = ac[k] + 2.0 * (qw[k] * ax[k]).re + qw[k].norm_sqr() * aw[k];
            let p2 = pw[k].norm_sqr();
            t.push(tk);
            a += tk;
            g += self.gm[k] * p2;
            m_sq += self.mf2[k] * p2;
        }
        let (g, a, m_sq) = (g / n, a / n, m_sq / n);
        let c = g / slack;
        let mut cost = 0.0;
        let mut y = Vec::with_capacity(t.len());
        for k in 0..t.len() {
            let yk = self.mf2[k] * pw[k].norm_sqr() + c * t[k];
            if !(yk > 0.0) {
                return None;
            }
            cost += yk.ln();
            y.push(yk);
        }
        cost *= 0.5 / n;
        if !with_grad {
            return Some(Evaluation { cost, grad: Vec::new(), v, a, g, m_sq_mean: m_sq });
        }

        let r: Vec<f64> = y.iter().map(|yk| 0.5 / yk).collect();
        let rt = r.iter().zip(&t).map(|(a, b)| a * b).sum::<f64>() / n;
        let hp: Vec<Complex64> =
            (0..t.len()).map(|k| pw[k].conj() * (r[k] * self.mf2[k] + rt / slack * self.gm[k])).collect();
        let hq: Vec<Complex64> = (0..t.len()).map(|k| (ax[k] + qw[k].conj() * aw[k]) * (r[k] * c)).collect();
        let mp = self.moments(hp, n_p);
        let mq = self.moments(hq, self.n_q);
        let mut grad = Vec::with_capacity(x.len());
        for i in 0..self.n_q {
            grad.push(2.0 * mq[i].re + rt * g / (slack * slack) * dv[i]);
        }
        for m in mp.iter().skip(1) {
            grad.push(2.0 * m.re);
        }
        Some(Evaluation { cost, grad, v, a, g, m_sq_mean: m_sq })
    }
}

impl CostFunction for Objective<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, x: &Self::Param) -> std::result::Result<f64, argmin::core::Error> {
        Ok(self.evaluate(x, false).map_or(f64::INFINITY, |e| e.cost))
    }
}

impl Gradient for Objective<'_> {
    type Param = Vec<f64>;
    type Gradient = Vec<f64>;

    fn gradient(&self, x: &Self::Param) -> std::result::Result<Vec<f64>, argmin::core::Error> {
        self.evaluate(x, true)
            .map(|e| e.grad)
            .ok_or_else(|| argmin::core::Error::msg("gradient requested outside the feasible set"))
    }
}

/// Minimizes the directed information from a feasible starting point.
///
/// `f` is the state-feedback gain defining the basis `M_F`; `q0` must satisfy
/// `V(q0) < D`.
pub fn refine(
    program: &YoulaProgram,
    d: f64,
    f: &DMatrix<f64>,
    q0: &[f64],
    options: RefineOptions,
) -> Result<DirectedOptimum> {
    let n_p = options.n_p;
    let (mf, gm) = program.shaper().responses(f, program.grid())?;
    let mf2 = mf.iter().map(|m| m.norm_sqr()).collect();
    let fft = FftPlanner::new().plan_fft_forward(program.grid().size());
    let n_q = q0.len();
    let objective = Objective { program, d, n_q, mf2, gm, fft };

    let mut x0 = q0.to_vec();
    x0.extend(std::iter::repeat_n(0.0, n_p));
    let start = objective
        .evaluate(&x0, false)
        .ok_or_else(|| Error::Infeasible { d, floor: program.variances(q0).map(|v| v.0).unwrap_or(f64::NAN) })?;

    let line_search = BacktrackingLineSearch::new(ArmijoCondition::new(1e-4).map_err(solver_error)?);
    let solver = LBFGS::new(line_search, options.memory)
        .with_tolerance_grad(1e-13)
        .map_err(solver_error)?
        .with_tolerance_cost(options.cost_tolerance)
        .map_err(solver_error)?;
    let result = Executor::new(objective, solver)
        .configure(|s| s.param(x0.clone()).max_iters(options.max_iterations))
        .run();
    let (x, iterations, objective) = match result {
        Ok(res) => {
            let iters = res.state().get_iter();
            let best = res.state().get_best_param().cloned().unwrap_or_else(|| x0.clone());
            (best, iters, res.problem.problem.expect("problem is returned"))
        }
        Err(e) => return Err(solver_error(e)),
    };
    let best = objective.evaluate(&x, false).filter(|e| e.cost <= start.cost).map_or((x0, start), |e| (x, e));
    let (x, e) = best;
    let (q, p_tail) = objective.split(&x);
    let slack = d - e.v;
    let mut p = vec![1.0];
    p.extend_from_slice(p_tail);
    Ok(DirectedOptimum {
        q: q.to_vec(),
        p,
        rate_nats: e.cost,
        sigma_eta_sq: slack / e.g,
        v: e.v,
        a: e.a,
        m1: (e.m_sq_mean - 1.0).max(0.0),
        g: e.g,
        iterations,
    })
}

fn solver_error(e: argmin::core::Error) -> Error {
    Error::Optimization(format!("directed-information refinement: {e}"))
}
