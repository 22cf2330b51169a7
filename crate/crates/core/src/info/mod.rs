//! Directed information from `y` to `u` across a channel with delay `h`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default predictor order for the empirical estimator.
pub const DEFAULT_ORDER: usize = 64;
/// Largest predictor order tried when refining.
pub const MAX_ORDER: usize = 256;
/// Refinement stops once doubling the order moves the estimate less than this.
pub const ORDER_TOLERANCE_BITS: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DiMethod {
    Spectral,
    GaussianEmpirical,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiDiagnostics {
    /// One-step prediction variance of `u` from its own past (or the mean PSD
    /// for the spectral method).
    pub restricted_variance: f64,
    /// Prediction variance once delayed `y` is added (or `σ_ψ²`).
    pub full_variance: f64,
    pub order: usize,
    /// First-half / second-half variance ratio of `u` within 10%.
    pub stationary: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirectedInfoEstimate {
    pub rate_nats: f64,
    pub h: usize,
    pub method: DiMethod,
    pub diagnostics: DiDiagnostics,
}

impl DirectedInfoEstimate {
    pub fn bits(&self) -> f64 {
        self.rate_nats / std::f64::consts::LN_2
    }
}

/// `(1/4π) ∫ log(S_u(ω)/σ_ψ²) dω` from PSD samples on a uniform periodic grid.
///
/// On a periodic grid the trapezoid rule is the plain sample mean.
pub fn directed_info_spectral(s_u: &[f64], sigma_psi_sq: f64, h: usize) -> Result<DirectedInfoEstimate> {
    if !(sigma_psi_sq > 0.0) {
        return Err(Error::InvalidArgument(format!("innovation variance {sigma_psi_sq} must be positive")));
    }
    if s_u.is_empty() {
        return Err(Error::EmptyTrace);
    }
    if let Some(bad) = s_u.iter().find(|v| !(**v > 0.0)) {
        return Err(Error::InvalidArgument(format!("PSD sample {bad} is not positive")));
    }
    let n = s_u.len() as f64;
    let mean_log = s_u.iter().map(|v| (v / sigma_psi_sq).ln()).sum::<f64>() / n;
    Ok(DirectedInfoEstimate {
        rate_nats: 0.5 * mean_log,
        h,
        method: DiMethod::Spectral,
        diagnostics: DiDiagnostics {
            restricted_variance: s_u.iter().sum::<f64>() / n,
            full_variance: sigma_psi_sq,
            order: s_u.len(),
            stationary: true,
        },
    })
}

/// Gaussian estimate `½ log(σ²_{u|u-past} / σ²_{u|u-past, y-past-h})` with
/// order-`p` linear predictors fitted from sample covariances.
pub fn gaussian_directed_info(y: &[f64], u: &[f64], h: usize, p: usize) -> Result<DirectedInfoEstimate> {
    if y.len() != u.len() {
        return Err(Error::Dimension(format!("y has {} samples, u has {}", y.len(), u.len())));
    }
    if p == 0 {
        return Err(Error::InvalidArgument("predictor order must be positive".into()));
    }
    let n = u.len();
    if n < 10 * (2 * p + h) {
        return Err(Error::SingularRegression(format!("{n} samples are too few for order {p}")));
    }
    let cov = Covariances::new(y, u, h, p);

    // regressors: u(k-1..k-p), then y(k-h-j) for j = 0..p-1
    let mut r = DMatrix::zeros(2 * p, 2 * p);
    let mut b = DVector::zeros(2 * p);
    for i in 0..p {
        b[i] = cov.uu(i + 1);
        b[p + i] = cov.uy(-(h as i64) - i as i64);
        for j in 0..p {
            r[(i, j)] = cov.uu(i.abs_diff(j));
            r[(p + i, p + j)] = cov.yy(i.abs_diff(j));
        }
    }
    // E[u(k-1-i) y(k-h-j)] = c(1 + i - h - j)
    for i in 0..p {
        for j in 0..p {
            let c = cov.uy(1 + i as i64 - h as i64 - j as i64);
            r[(i, p + j)] = c;
            r[(p + j, i)] = c;
        }
    }
    let restricted = prediction_variance(&r.view((0, 0), (p, p)).into_owned(), &b.rows(0, p).into_owned(), cov.uu(0))?;
    let full = prediction_variance(&r, &b, cov.uu(0))?;
    let rate_nats = 0.5 * (restricted / full).ln();

    let half = n / 2;
    let v1 = u[..half].iter().map(|v| v * v).sum::<f64>() / half as f64;
    let v2 = u[half..].iter().map(|v| v * v).sum::<f64>() / (n - half) as f64;
    Ok(DirectedInfoEstimate {
        rate_nats,
        h,
        method: DiMethod::GaussianEmpirical,
        diagnostics: DiDiagnostics {
            restricted_variance: restricted,
            full_variance: full,
            order: p,
            stationary: (v1 / v2 - 1.0).abs() <= 0.1,
        },
    })
}

/// Starts at [`DEFAULT_ORDER`] and doubles the order until the estimate
/// settles within [`ORDER_TOLERANCE_BITS`] or reaches [`MAX_ORDER`].
pub fn gaussian_directed_info_auto(y: &[f64], u: &[f64], h: usize) -> Result<DirectedInfoEstimate> {
    let mut p = DEFAULT_ORDER;
    let mut est = gaussian_directed_info(y, u, h, p)?;
    while p < MAX_ORDER {
        p *= 2;
        let next = match gaussian_directed_info(y, u, h, p) {
            Ok(e) => e,
            Err(_) => break,
        };
        let moved = (next.bits() - est.bits()).abs();
        est = next;
        if moved < ORDER_TOLERANCE_BITS {
            break;
        }
    }
    Ok(est)
}

fn prediction_variance(r: &DMatrix<f64>, b: &DVector<f64>, r0: f64) -> Result<f64> {
    let chol = r
        .clone()
        .cholesky()
        .ok_or_else(|| Error::SingularRegression("regressor covariance is not positive definite".into()))?;
    let coef = chol.solve(b);
    let v = r0 - b.dot(&coef);
    if !(v > 0.0) {
        return Err(Error::SingularRegression(format!("prediction variance {v} is not positive")));
    }
    Ok(v)
}

/// Biased sample auto- and cross-covariances (normalized by `n`), which keep
/// the block Toeplitz normal equations positive semidefinite.
struct Covariances {
    uu: Vec<f64>,
    yy: Vec<f64>,
    /// `c(τ) = E[u(m) y(m + τ)]` for `τ ∈ [lo, hi]`
    uy: Vec<f64>,
    lo: i64,
}

impl Covariances {
    fn new(y: &[f64], u: &[f64], h: usize, p: usize) -> Self {
        let n = u.len();
        let auto = |x: &[f64], lag: usize| x[lag..].iter().zip(x).map(|(a, b)| a * b).sum::<f64>() / n as f64;
        let uu = (0..=p).map(|l| auto(u, l)).collect();
        let yy = (0..p).map(|l| auto(y, l)).collect();
        let lo = -((h + p) as i64);
        let hi = p as i64;
        let uy = (lo..=hi)
            .map(|tau| {
                let s = if tau >= 0 {
                    let t = tau as usize;
                    u[..n - t].iter().zip(&y[t..]).map(|(a, b)| a * b).sum::<f64>()
                } else {
                    let t = (-tau) as usize;
                    u[t..].iter().zip(&y[..n - t]).map(|(a, b)| a * b).sum::<f64>()
                };
                s / n as f64
            })
            .collect();
        Self { uu, yy, uy, lo }
    }

    fn uu(&self, lag: usize) -> f64 {
        self.uu[lag]
    }

    fn yy(&self, lag: usize) -> f64 {
        self.yy[lag]
    }

    fn uy(&self, tau: i64) -> f64 {
        self.uy[(tau - self.lo) as usize]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn white(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    #[test]
    fn spectral_constant_cases() {
        let e = directed_info_spectral(&vec![2.0; 64], 1.0, 0).unwrap();
        assert!((e.bits() - 0.5).abs() < 1e-12);
        let e = directed_info_spectral(&vec![3.0; 64], 3.0, 0).unwrap();
        assert_eq!(e.rate_nats, 0.0);
    }

    #[test]
    fn spectral_minimum_phase_factor_has_zero_mean_log() {
        let n = 4096;
        let s: Vec<f64> = (0..n)
            .map(|k| {
                let w = -std::f64::consts::PI + 2.0 * std::f64::consts::PI * k as f64 / n as f64;
                let re = 1.0 - 0.5 * w.cos();
                let im = 0.5 * w.sin();
                0.7 / (re * re + im * im)
            })
            .collect();
        assert!(directed_info_spectral(&s, 0.7, 0).unwrap().rate_nats.abs() < 1e-6);
    }

    #[test]
    fn spectral_rejects_bad_input() {
        assert!(directed_info_spectral(&[1.0, 0.0], 1.0, 0).is_err());
        assert!(directed_info_spectral(&[1.0], 0.0, 0).is_err());
    }

    #[test]
    fn independent_processes_carry_nothing() {
        let y = white(1_000_000, 1);
        let u = white(1_000_000, 2);
        let e = gaussian_directed_info(&y, &u, 0, 16).unwrap();
        assert!(e.bits().abs() < 0.02);
        assert!(e.diagnostics.stationary);
    }

    #[test]
    fn memoryless_channel_formula() {
        let n = 1_000_000;
        let h = 3;
        let y: Vec<f64> = white(n, 3).iter().map(|v| 1.5 * v).collect();
        let eta: Vec<f64> = white(n, 4).iter().map(|v| 0.8 * v).collect();
        let u: Vec<f64> = (0..n).map(|k| if k >= h { y[k - h] } else { 0.0 } + eta[k]).collect();
        let oracle = 0.5 * (1.0 + 2.25 / 0.64f64).log2();
        let e = gaussian_directed_info(&y, &u, h, 8).unwrap();
        assert!((e.bits() - oracle).abs() < 0.05, "{} vs {oracle}", e.bits());
        // larger conditioning delay sees less
        let later = gaussian_directed_info(&y, &u, h + 1, 8).unwrap();
        assert!(later.bits() <= e.bits() + 0.02);
        assert!(later.bits().abs() < 0.02);
    }

    #[test]
    fn autoregressive_loop_matches_spectral() {
        // u(k) = 0.6 u(k-1) + 0.9 y(k-h) + ψ(k): spectral rate ½ log(1 + 0.81 σ_y²/σ_ψ²)
        let n = 1_000_000;
        let h = 2;
        let y = white(n, 5);
        let psi: Vec<f64> = white(n, 6).iter().map(|v| 0.5 * v).collect();
        let mut u = vec![0.0; n];
        for k in 1..n {
            let yk = if k >= h { y[k - h] } else { 0.0 };
            u[k] = 0.6 * u[k - 1] + 0.9 * yk + psi[k];
        }
        let grid = 1024;
        let s: Vec<f64> = (0..grid)
            .map(|k| {
                let w = 2.0 * std::f64::consts::PI * k as f64 / grid as f64;
                (0.81 + 0.25) / (1.0 - 1.2 * w.cos() + 0.36)
            })
            .collect();
        let spectral = directed_info_spectral(&s, 0.25, h).unwrap();
        assert!((spectral.bits() - 0.5 * (1.0 + 0.81 / 0.25f64).log2()).abs() < 1e-9);
        let emp = gaussian_directed_info_auto(&y[1000..], &u[1000..], h).unwrap();
        assert!((emp.bits() - spectral.bits()).abs() < 0.05);
    }

    #[test]
    fn length_mismatch_is_rejected() {
        assert!(gaussian_directed_info(&[0.0; 10], &[0.0; 11], 0, 1).is_err());
    }

    #[test]
    fn degenerate_regression_reports_singularity() {
        let y = vec![0.0; 10_000];
        let u = white(10_000, 9);
        assert!(matches!(gaussian_directed_info(&y, &u, 0, 4), Err(Error::SingularRegression(_))));
    }
}
