use num_complex::Complex64;

use super::filter::RationalFilter;
use super::ss::{realize, StateSpaceSystem};
use crate::error::{Error, Result};

pub const DEFAULT_GRID_SIZE: usize = 1 << 14;

/// Uniform frequency grid `ω_k = -π + 2πk/N`, `k = 0..N-1`.
///
/// Integrals `(1/2π)∫_{-π}^{π} f(ω) dω` of periodic integrands are taken with
/// the trapezoid rule, which on a periodic grid reduces to the sample mean.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyGrid {
    omegas: Vec<f64>,
}

impl FrequencyGrid {
    pub fn new(size: usize) -> Result<Self> {
        if size < 4 || !size.is_power_of_two() {
            return Err(Error::InvalidArgument(format!("grid size {size} must be a power of two >= 4")));
        }
        let step = 2.0 * std::f64::consts::PI / size as f64;
        let omegas = (0..size).map(|k| -std::f64::consts::PI + step * k as f64).collect();
        Ok(Self { omegas })
    }

    pub fn size(&self) -> usize {
        self.omegas.len()
    }

    pub fn omegas(&self) -> &[f64] {
        &self.omegas
    }

    /// `(1/2π) ∫ f dω` from samples on this grid.
    pub fn integrate(&self, samples: &[f64]) -> f64 {
        debug_assert_eq!(samples.len(), self.size());
        samples.iter().sum::<f64>() / self.size() as f64
    }

    /// Responses of a SISO filter on the grid.
    pub fn filter_response(&self, f: &RationalFilter) -> Vec<Complex64> {
        self.omegas.iter().map(|&w| f.response(w)).collect()
    }

    /// Responses of entry `(row, col)` of a state-space system on the grid.
    pub fn system_response(&self, sys: &StateSpaceSystem, row: usize, col: usize) -> Vec<Complex64> {
        let s = sys.select_outputs(&[row]).select_inputs(&[col]);
        s.responses(&self.omegas).into_iter().map(|m| m[(0, 0)]).collect()
    }
}

/// Sampled responses of several filters on a common grid.
#[derive(Debug, Clone)]
pub struct SpectrumGrid {
    pub grid: FrequencyGrid,
    pub responses: Vec<Vec<Complex64>>,
    stable: Vec<bool>,
}

impl SpectrumGrid {
    pub fn from_filters(grid: FrequencyGrid, filters: &[RationalFilter]) -> Self {
        let responses = filters.iter().map(|f| grid.filter_response(f)).collect();
        let stable = filters.iter().map(|f| realize(f).is_stable()).collect();
        Self { grid, responses, stable }
    }

    /// SISO systems (1 input, 1 output each).
    pub fn from_systems(grid: FrequencyGrid, systems: &[StateSpaceSystem]) -> Result<Self> {
        let mut responses = Vec::with_capacity(systems.len());
        for s in systems {
            if s.n_inputs() != 1 || s.n_outputs() != 1 {
                return Err(Error::Dimension("spectrum grid expects SISO systems".into()));
            }
            responses.push(grid.system_response(s, 0, 0));
        }
        let stable = systems.iter().map(|s| s.is_stable()).collect();
        Ok(Self { grid, responses, stable })
    }

    /// `S(ω_k) = Σ_i σ_i² |F_i(e^{jω_k})|²` for independent white inputs.
    pub fn psd_output(&self, variances: &[f64]) -> Result<Vec<f64>> {
        if variances.len() != self.responses.len() {
            return Err(Error::Dimension(format!(
                "{} variances for {} filters",
                variances.len(),
                self.responses.len()
            )));
        }
        if let Some(v) = variances.iter().find(|v| !(**v >= 0.0)) {
            return Err(Error::InvalidArgument(format!("negative input variance {v}")));
        }
        if let Some(i) = self.stable.iter().position(|s| !s) {
            return Err(Error::Unstable {
                spectral_radius: f64::NAN,
                context: format!("filter {i} contributes an unbounded spectrum"),
            });
        }
        let mut psd = vec![0.0; self.grid.size()];
        for (resp, var) in self.responses.iter().zip(variances) {
            for (s, r) in psd.iter_mut().zip(resp) {
                *s += var * r.norm_sqr();
            }
        }
        Ok(psd)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_sizes() {
        assert!(FrequencyGrid::new(1000).is_err());
        assert!(FrequencyGrid::new(2).is_err());
        assert!(FrequencyGrid::new(1024).is_ok());
    }

    #[test]
    fn constant_gain_psd() {
        let grid = FrequencyGrid::new(64).unwrap();
        let s = SpectrumGrid::from_filters(grid, &[RationalFilter::constant(2.0)]);
        assert!(s.psd_output(&[1.0]).unwrap().iter().all(|v| (v - 4.0).abs() < 1e-15));
    }

    #[test]
    fn parseval_first_order() {
        let grid = FrequencyGrid::new(DEFAULT_GRID_SIZE).unwrap();
        let f = RationalFilter::new(vec![1.0], vec![1.0, -0.5]).unwrap();
        let s = SpectrumGrid::from_filters(grid.clone(), &[f]);
        let psd = s.psd_output(&[1.0]).unwrap();
        assert!((grid.integrate(&psd) - 4.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn conjugate_symmetry() {
        let grid = FrequencyGrid::new(256).unwrap();
        let f = RationalFilter::new(vec![1.0, -0.2], vec![1.0, -0.8, 0.15]).unwrap();
        let r = grid.filter_response(&f);
        for k in 1..256 {
            assert!((r[k] - r[256 - k].conj()).norm() < 1e-12);
        }
    }

    #[test]
    fn independent_sources_add() {
        let grid = FrequencyGrid::new(128).unwrap();
        let f1 = RationalFilter::new(vec![1.0], vec![1.0, -0.5]).unwrap();
        let f2 = RationalFilter::new(vec![0.3, 0.1], vec![1.0, 0.4]).unwrap();
        let both = SpectrumGrid::from_filters(grid.clone(), &[f1.clone(), f2.clone()]);
        let a = SpectrumGrid::from_filters(grid.clone(), &[f1]).psd_output(&[1.0]).unwrap();
        let b = SpectrumGrid::from_filters(grid, &[f2]).psd_output(&[1.0]).unwrap();
        let sum = both.psd_output(&[1.0, 1.0]).unwrap();
        for k in 0..128 {
            assert!((sum[k] - a[k] - b[k]).abs() < 1e-14);
        }
    }

    #[test]
    fn unstable_contributor_rejected() {
        let grid = FrequencyGrid::new(64).unwrap();
        let f = RationalFilter::new(vec![1.0], vec![1.0, -2.0]).unwrap();
        assert!(SpectrumGrid::from_filters(grid, &[f]).psd_output(&[1.0]).is_err());
    }
}
