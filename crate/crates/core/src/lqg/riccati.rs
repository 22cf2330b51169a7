use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::lti::linalg::{self, STABILITY_MARGIN};

/// Stabilizing solution of
/// `P = A'PA - (A'PB + S)(B'PB + R)^{-1}(B'PA + S') + Q`
/// together with the optimal gain `K = (B'PB + R)^{-1}(B'PA + S')` (control law `u = -K x`).
#[derive(Debug, Clone)]
pub struct RiccatiSolution {
    pub p: DMatrix<f64>,
    pub gain: DMatrix<f64>,
    /// `||Ric(P) - P||_F / (1 + ||P||_F)`
    pub residual: f64,
    pub closed_loop_radius: f64,
}

const MAX_DOUBLING: usize = 100;
const MAX_FIXED_POINT: usize = 200_000;
const POLISH_THRESHOLD: f64 = 1e-12;
const MAX_POLISH: usize = 8;

/// DARE without cross term.
pub fn solve_dare(a: &DMatrix<f64>, b: &DMatrix<f64>, q: &DMatrix<f64>, r: &DMatrix<f64>) -> Result<RiccatiSolution> {
    let s = DMatrix::zeros(a.nrows(), b.ncols());
    solve_dare_cross(a, b, q, r, &s)
}

/// DARE with cross weight `S` (cost `x'Qx + 2x'Su + u'Ru`).
pub fn solve_dare_cross(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    s: &DMatrix<f64>,
) -> Result<RiccatiSolution> {
    let n = a.nrows();
    let m = b.ncols();
    if a.ncols() != n || b.nrows() != n || q.shape() != (n, n) || r.shape() != (m, m) || s.shape() != (n, m) {
        return Err(Error::Dimension("riccati data have inconsistent shapes".into()));
    }
    if let Some(mode) = linalg::uncontrollable_modes(a, b)
        .into_iter()
        .find(|l| l.norm() >= 1.0 - STABILITY_MARGIN)
    {
        return Err(Error::NotStabilizable { mode: mode.norm() });
    }
    if n == 0 {
        return Ok(RiccatiSolution {
            p: DMatrix::zeros(0, 0),
            gain: DMatrix::zeros(m, 0),
            residual: 0.0,
            closed_loop_radius: 0.0,
        });
    }
    let r_inv = linalg::inverse(r, "control weight R")?;
    let a_bar = a - b * &r_inv * s.transpose();
    let g = b * &r_inv * b.transpose();
    let h = q - s * &r_inv * s.transpose();
    let h = (&h + h.transpose()) * 0.5;

    if let Some(p) = doubling(&a_bar, &g, &h) {
        if let Ok(sol) = finish(a, b, q, r, s, p) {
            return Ok(polish(a, b, q, r, s, sol));
        }
    }
    // Doubling converges to a non-stabilizing solution when Q leaves unstable
    // modes unobserved; Newton iteration from a stabilizing gain does not.
    let seed_q = q + DMatrix::identity(n, n) * (1.0 + q.norm());
    let seed = doubling(&a_bar, &g, &(&seed_q - s * &r_inv * s.transpose()))
        .map(|p| finish(a, b, &seed_q, r, s, p));
    if let Some(Ok(seed)) = seed {
        if let Ok(p) = newton(a, b, q, r, s, seed.gain) {
            return finish(a, b, q, r, s, p);
        }
    }
    let p = fixed_point(a, b, q, r, s)?;
    finish(a, b, q, r, s, p)
}

/// Doubling loses digits when the unstable modes are weakly controllable
/// (`‖P‖` in the 1e6 to 1e9 range). Newton steps written as corrections
/// `ΔP = A_cl' ΔP A_cl + (Ric(P) - P)` only need the defect to relative
/// accuracy, so they recover most of them.
fn polish(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    s: &DMatrix<f64>,
    mut sol: RiccatiSolution,
) -> RiccatiSolution {
    for _ in 0..MAX_POLISH {
        if sol.residual <= POLISH_THRESHOLD {
            break;
        }
        let step = riccati_map(a, b, q, r, s, &sol.p).and_then(|next| {
            let defect = &next - &sol.p;
            let acl = a - b * &sol.gain;
            let delta = linalg::dlyap(&acl.transpose(), &((&defect + defect.transpose()) * 0.5))?;
            finish(a, b, q, r, s, &sol.p + delta)
        });
        match step {
            Ok(better) if better.residual < sol.residual => sol = better,
            _ => break,
        }
    }
    sol
}

/// Newton (Hewer) iteration from a stabilizing gain.
fn newton(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    s: &DMatrix<f64>,
    mut k: DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let mut p = DMatrix::zeros(a.nrows(), a.nrows());
    let mut delta = f64::INFINITY;
    for _ in 0..100 {
        let acl = a - b * &k;
        let qk = q - s * &k - k.transpose() * s.transpose() + k.transpose() * r * &k;
        let next = linalg::dlyap(&acl.transpose(), &((&qk + qk.transpose()) * 0.5))?;
        delta = (&next - &p).norm();
        p = next;
        k = linalg::solve(&(b.transpose() * &p * b + r), &(b.transpose() * &p * a + s.transpose()), "riccati gain")?;
        if delta <= 1e-13 * (1.0 + p.norm()) {
            return Ok(p);
        }
    }
    Err(Error::RiccatiNonConvergence { iterations: 100, residual: delta })
}

/// Structured doubling on the cross-term-free form.
fn doubling(a: &DMatrix<f64>, g: &DMatrix<f64>, h: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = a.nrows();
    let eye = DMatrix::<f64>::identity(n, n);
    let (mut ak, mut gk, mut hk) = (a.clone(), g.clone(), h.clone());
    let tol = 1e-13 * (1.0 + h.norm());
    for _ in 0..MAX_DOUBLING {
        let w = &eye + &gk * &hk;
        let lu = w.lu();
        let w_inv_a = lu.solve(&ak)?;
        let w_inv_g = lu.solve(&gk)?;
        let a_next = &ak * &w_inv_a;
        let g_next = &gk + &ak * &w_inv_g * ak.transpose();
        let h_next = &hk + ak.transpose() * &hk * &w_inv_a;
        let h_next = (&h_next + h_next.transpose()) * 0.5;
        let g_next = (&g_next + g_next.transpose()) * 0.5;
        if !h_next.iter().all(|v| v.is_finite()) {
            return None;
        }
        let delta = (&h_next - &hk).norm();
        ak = a_next;
        gk = g_next;
        hk = h_next;
        if delta <= tol * (1.0 + hk.norm()) {
            return Some(hk);
        }
    }
    None
}

fn riccati_map(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    s: &DMatrix<f64>,
    p: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let btpa = b.transpose() * p * a + s.transpose();
    let btpb = b.transpose() * p * b + r;
    let k = linalg::solve(&btpb, &btpa, "riccati gain")?;
    let next = a.transpose() * p * a - btpa.transpose() * k + q;
    Ok((&next + next.transpose()) * 0.5)
}

/// Plain Riccati recursion started from `Q`; slow but robust.
fn fixed_point(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    s: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let mut p = q.clone();
    let mut delta = f64::INFINITY;
    for _ in 0..MAX_FIXED_POINT {
        let next = riccati_map(a, b, q, r, s, &p)?;
        delta = (&next - &p).norm();
        p = next;
        if delta <= 1e-13 * (1.0 + p.norm()) {
            return Ok(p);
        }
    }
    Err(Error::RiccatiNonConvergence { iterations: MAX_FIXED_POINT, residual: delta })
}

fn finish(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    s: &DMatrix<f64>,
    p: DMatrix<f64>,
) -> Result<RiccatiSolution> {
    let btpb = b.transpose() * &p * b + r;
    let gain = linalg::solve(&btpb, &(b.transpose() * &p * a + s.transpose()), "riccati gain")?;
    let closed_loop_radius = linalg::spectral_radius(&(a - b * &gain));
    if closed_loop_radius >= 1.0 {
        return Err(Error::NoStabilizingSolution { spectral_radius: closed_loop_radius });
    }
    let residual = (riccati_map(a, b, q, r, s, &p)? - &p).norm() / (1.0 + p.norm());
    Ok(RiccatiSolution { p, gain, residual, closed_loop_radius })
}
