//! Dense linear-algebra helpers on top of nalgebra: spectra, discrete
//! Lyapunov equations, controllable/observable subspace reduction, and a
//! Hessenberg solver for repeated frequency-response evaluation.

use nalgebra::{DMatrix, DVector, Schur};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Default margin below one used by stability tests.
pub const STABILITY_MARGIN: f64 = 1e-9;

/// Eigenvalues through a real Schur decomposition.
///
/// The unshifted-restart QR iteration in nalgebra can cycle on matrices with
/// a lot of exact structure (shift registers, block-triangular loops), so the
/// iteration count is capped and a failed attempt is retried on `QᵀAQ` for a
/// fixed pseudo-random orthogonal `Q`, which has the same spectrum.
pub fn eigenvalues(a: &DMatrix<f64>) -> Vec<Complex64> {
    let n = a.nrows();
    if n == 0 {
        return Vec::new();
    }
    let max_iter = 100 * n.max(10);
    if let Some(s) = Schur::try_new(a.clone(), f64::EPSILON, max_iter) {
        return s.complex_eigenvalues().iter().copied().collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    for _ in 0..16 {
        let g = DMatrix::from_fn(n, n, |_, _| rng.random::<f64>() - 0.5);
        let q = g.qr().q();
        if let Some(s) = Schur::try_new(q.transpose() * a * &q, f64::EPSILON, max_iter) {
            return s.complex_eigenvalues().iter().copied().collect();
        }
    }
    Schur::new(a.clone()).complex_eigenvalues().iter().copied().collect()
}

pub fn spectral_radius(a: &DMatrix<f64>) -> f64 {
    eigenvalues(a).iter().map(|l| l.norm()).fold(0.0, f64::max)
}

/// Solves `X = A X A' + Q` for Schur-stable `A` by Smith doubling.
pub fn dlyap(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let rho = spectral_radius(a);
    if rho >= 1.0 {
        return Err(Error::Unstable {
            spectral_radius: rho,
            context: "Lyapunov equation has no bounded solution".into(),
        });
    }
    // diagonal balancing keeps badly scaled states (unstable plant copies next
    // to small encoder states) from costing digits in the squared powers
    let mut ab = a.clone();
    let d = nalgebra::linalg::balancing::balance_parlett_reinsch(&mut ab);
    let qb = DMatrix::from_fn(n, n, |i, j| q[(i, j)] / (d[i] * d[j]));
    let xb = smith(&ab, &qb);
    let x = DMatrix::from_fn(n, n, |i, j| xb[(i, j)] * d[i] * d[j]);
    Ok((&x + x.transpose()) * 0.5)
}

fn smith(a: &DMatrix<f64>, q: &DMatrix<f64>) -> DMatrix<f64> {
    let mut x = q.clone();
    let mut ak = a.clone();
    for _ in 0..200 {
        let term = &ak * &x * ak.transpose();
        x += &term;
        ak = &ak * &ak;
        let scale = x.norm().max(f64::MIN_POSITIVE);
        if term.norm() <= 1e-17 * scale && ak.norm() < 1e-8 {
            break;
        }
    }
    x
}

/// Orthonormal basis (columns) of the Krylov space spanned by `B, AB, A^2 B, ...`.
pub fn krylov_basis(a: &DMatrix<f64>, b: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let n = a.nrows();
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let scale = a.norm().max(b.norm()).max(1.0);
    let push = |basis: &mut Vec<DVector<f64>>, mut v: DVector<f64>| -> bool {
        let orig = v.norm();
        if orig == 0.0 {
            return false;
        }
        for _ in 0..2 {
            for q in basis.iter() {
                let c = q.dot(&v);
                v -= q * c;
            }
        }
        let nv = v.norm();
        if nv > tol * scale {
            basis.push(v / nv);
            true
        } else {
            false
        }
    };
    let mut frontier: Vec<DVector<f64>> = Vec::new();
    for j in 0..b.ncols() {
        let v = b.column(j).into_owned();
        if basis.len() < n && push(&mut basis, v) {
            frontier.push(basis.last().unwrap().clone());
        }
    }
    while !frontier.is_empty() && basis.len() < n {
        let mut next = Vec::new();
        for v in frontier {
            if basis.len() >= n {
                break;
            }
            if push(&mut basis, a * v) {
                next.push(basis.last().unwrap().clone());
            }
        }
        frontier = next;
    }
    if basis.is_empty() {
        DMatrix::zeros(n, 0)
    } else {
        DMatrix::from_columns(&basis)
    }
}

/// Eigenvalues of `A` restricted to the complement of the controllable subspace of `(A, B)`.
pub fn uncontrollable_modes(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Vec<Complex64> {
    let n = a.nrows();
    let v = krylov_basis(a, b, 1e-10);
    if v.ncols() == n {
        return Vec::new();
    }
    let mut basis: Vec<DVector<f64>> = v.column_iter().map(|c| c.into_owned()).collect();
    let mut complement = Vec::new();
    for i in 0..n {
        let mut e = DVector::zeros(n);
        e[i] = 1.0;
        for _ in 0..2 {
            for q in basis.iter() {
                let c = q.dot(&e);
                e -= q * c;
            }
        }
        let nv = e.norm();
        if nv > 1e-6 {
            let q = e / nv;
            basis.push(q.clone());
            complement.push(q);
        }
        if basis.len() == n {
            break;
        }
    }
    let w = DMatrix::from_columns(&complement);
    eigenvalues(&(w.transpose() * a * &w))
}

/// LU solve of a square real system.
pub fn solve(a: &DMatrix<f64>, b: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    a.clone().lu().solve(b).ok_or_else(|| Error::Singular(what.into()))
}

pub fn inverse(a: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    a.clone().try_inverse().ok_or_else(|| Error::Singular(what.into()))
}

/// Precomputed Hessenberg form `A = U H U'` for evaluating `(zI - A)^{-1} B`
/// at many points in O(n^2) each.
#[derive(Debug, Clone)]
pub struct HessenbergResolvent {
    h: DMatrix<f64>,
    /// `U' B`
    ub: DMatrix<f64>,
    /// `C U`
    cu: DMatrix<f64>,
}

impl HessenbergResolvent {
    pub fn new(a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>) -> Self {
        let n = a.nrows();
        if n == 0 {
            return Self { h: a.clone(), ub: b.clone(), cu: c.clone() };
        }
        let hess = a.clone().hessenberg();
        let (u, h) = hess.unpack();
        let ub = u.transpose() * b;
        let cu = c * &u;
        Self { h, ub, cu }
    }

    /// `C (zI - A)^{-1} B` as a dense complex matrix (rows = outputs).
    pub fn eval(&self, z: Complex64) -> DMatrix<Complex64> {
        let n = self.h.nrows();
        let p = self.cu.nrows();
        let m = self.ub.ncols();
        if n == 0 {
            return DMatrix::zeros(p, m);
        }
        // Upper Hessenberg elimination with partial pivoting between adjacent rows.
        let mut mat = DMatrix::<Complex64>::from_fn(n, n, |i, j| {
            let v = -self.h[(i, j)];
            if i == j {
                z + v
            } else {
                Complex64::new(v, 0.0)
            }
        });
        let mut rhs = DMatrix::<Complex64>::from_fn(n, m, |i, j| Complex64::new(self.ub[(i, j)], 0.0));
        for k in 0..n.saturating_sub(1) {
            if mat[(k + 1, k)].norm() > mat[(k, k)].norm() {
                mat.swap_rows(k, k + 1);
                rhs.swap_rows(k, k + 1);
            }
            let piv = mat[(k, k)];
            if piv.norm() == 0.0 {
                continue;
            }
            let f = mat[(k + 1, k)] / piv;
            if f.norm() != 0.0 {
                for j in k..n {
                    let v = mat[(k, j)];
                    mat[(k + 1, j)] -= f * v;
                }
                for j in 0..m {
                    let v = rhs[(k, j)];
                    rhs[(k + 1, j)] -= f * v;
                }
            }
        }
        for j in 0..m {
            for i in (0..n).rev() {
                let mut s = rhs[(i, j)];
                for k in i + 1..n {
                    s -= mat[(i, k)] * rhs[(k, j)];
                }
                rhs[(i, j)] = s / mat[(i, i)];
            }
        }
        let mut out = DMatrix::<Complex64>::zeros(p, m);
        for i in 0..p {
            for j in 0..m {
                let mut s = Complex64::new(0.0, 0.0);
                for k in 0..n {
                    s += rhs[(k, j)] * self.cu[(i, k)];
                }
                out[(i, j)] = s;
            }
        }
        out
    }
}
