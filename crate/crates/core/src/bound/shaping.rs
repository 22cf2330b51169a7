//! Optimal shaping of the channel-noise path `M`.
//!
//! With the control part fixed, the noise enters the loop as `v = M η`,
//! where `M` is monic, stable, and such that `G12 M` is stable. Writing
//! `M = 1 - F (zI - A + B2 F)^{-1} B2` for a state feedback `F` on the
//! `u`-channel realization turns `min ||M - 1||² + μ ||G12 M||²` into an LQR
//! problem in which the encoder, knowing `η`, plays the role of the controller.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::Result;
use crate::lqg::solve_dare_cross;
use crate::lti::linalg;
use crate::lti::{FrequencyGrid, StateSpaceSystem, TwoByTwoPlant};

#[derive(Debug, Clone)]
pub struct NoiseShaper {
    a: DMatrix<f64>,
    b2: DMatrix<f64>,
    c1: DMatrix<f64>,
    d12: DMatrix<f64>,
}

/// Result of the shaping problem for one weight `μ`.
#[derive(Debug, Clone)]
pub struct Shaping {
    pub mu: f64,
    /// Feedback gain defining `M`.
    pub f: DMatrix<f64>,
    /// `||M - 1||²`
    pub m1: f64,
    /// `||G12 M||²`
    pub g: f64,
}

impl Shaping {
    /// `||M - 1||² + μ ||G12 M||²`
    pub fn value(&self) -> f64 {
        self.m1 + self.mu * self.g
    }
}

impl NoiseShaper {
    pub fn new(plant: &TwoByTwoPlant) -> Self {
        let r = plant.realization();
        Self { a: r.a(), b2: r.b2(), c1: r.c1(), d12: r.d12() }
    }

    pub fn n_states(&self) -> usize {
        self.a.nrows()
    }

    pub fn solve(&self, mu: f64) -> Result<Shaping> {
        let n = self.a.nrows();
        let q = self.c1.transpose() * &self.c1 * mu;
        let s = self.c1.transpose() * &self.d12 * mu;
        let r = DMatrix::from_element(1, 1, 1.0) + self.d12.transpose() * &self.d12 * mu;
        let f = if n == 0 {
            DMatrix::zeros(1, 0)
        } else {
            solve_dare_cross(&self.a, &self.b2, &q, &r, &s)?.gain
        };
        self.evaluate(mu, f)
    }

    /// Grid samples of `M` and of `|G12 M|²` for the gain `f`.
    pub fn responses(&self, f: &DMatrix<f64>, grid: &FrequencyGrid) -> Result<(Vec<Complex64>, Vec<f64>)> {
        let acl = &self.a - &self.b2 * f;
        let n_z = self.c1.nrows();
        let mut c = DMatrix::zeros(n_z + 1, self.a.nrows());
        c.view_mut((0, 0), (1, c.ncols())).copy_from(&(-f));
        c.view_mut((1, 0), (n_z, c.ncols())).copy_from(&(&self.c1 - &self.d12 * f));
        let mut d = DMatrix::zeros(n_z + 1, 1);
        d[(0, 0)] = 1.0;
        d.view_mut((1, 0), (n_z, 1)).copy_from(&self.d12);
        let sys = StateSpaceSystem::new(acl, self.b2.clone(), c, d)?;
        let resp = sys.responses(grid.omegas());
        let m = resp.iter().map(|r| r[(0, 0)]).collect();
        let g = resp.iter().map(|r| r.rows(1, n_z).norm_squared()).collect();
        Ok((m, g))
    }

    /// Exact `||M - 1||²` and `||G12 M||²` for a given stabilizing gain.
    pub fn evaluate(&self, mu: f64, f: DMatrix<f64>) -> Result<Shaping> {
        let acl = &self.a - &self.b2 * &f;
        let x = linalg::dlyap(&acl, &(&self.b2 * self.b2.transpose()))?;
        let m1 = (&f * &x * f.transpose())[(0, 0)].max(0.0);
        let cz = &self.c1 - &self.d12 * &f;
        let g = ((&cz * &x * cz.transpose()).trace() + self.d12.norm_squared()).max(0.0);
        Ok(Shaping { mu, f, m1, g })
    }
}
