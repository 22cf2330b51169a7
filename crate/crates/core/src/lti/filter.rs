use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// SISO rational transfer function in `z`, coefficients in descending powers.
///
/// The denominator is normalized to be monic on construction and leading
/// zeros are stripped from both polynomials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawFilter", into = "RawFilter")]
pub struct RationalFilter {
    num: Vec<f64>,
    den: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawFilter {
    num: Vec<f64>,
    den: Vec<f64>,
}

impl TryFrom<RawFilter> for RationalFilter {
    type Error = Error;

    fn try_from(raw: RawFilter) -> Result<Self> {
        RationalFilter::new(raw.num, raw.den)
    }
}

impl From<RationalFilter> for RawFilter {
    fn from(f: RationalFilter) -> Self {
        RawFilter { num: f.num, den: f.den }
    }
}

fn strip_leading_zeros(mut coeffs: Vec<f64>) -> Vec<f64> {
    let first = coeffs.iter().position(|c| *c != 0.0);
    match first {
        Some(i) => coeffs.drain(..i).for_each(drop),
        None => coeffs = vec![0.0],
    }
    coeffs
}

impl RationalFilter {
    pub fn new(num: Vec<f64>, den: Vec<f64>) -> Result<Self> {
        if num.is_empty() || den.is_empty() {
            return Err(Error::InvalidFilter("empty coefficient list".into()));
        }
        if num.iter().chain(den.iter()).any(|c| !c.is_finite()) {
            return Err(Error::InvalidFilter("non-finite coefficient".into()));
        }
        let den = strip_leading_zeros(den);
        if den.len() == 1 && den[0] == 0.0 {
            return Err(Error::InvalidFilter("zero denominator".into()));
        }
        let num = strip_leading_zeros(num);
        let num_degree = if num.len() == 1 && num[0] == 0.0 { 0 } else { num.len() - 1 };
        let den_degree = den.len() - 1;
        if num_degree > den_degree {
            return Err(Error::ImproperFilter { num_degree, den_degree });
        }
        let lead = den[0];
        let num = num.into_iter().map(|c| c / lead).collect();
        let den = den.into_iter().map(|c| c / lead).collect();
        Ok(Self { num, den })
    }

    /// Static gain `c`.
    pub fn constant(c: f64) -> Self {
        Self { num: vec![c], den: vec![1.0] }
    }

    /// Pure delay `z^{-k}`.
    pub fn delay(k: usize) -> Self {
        let mut den = vec![0.0; k + 1];
        den[0] = 1.0;
        Self { num: vec![1.0], den }
    }

    /// Filter given by its zeros, poles and gain: `gain * prod(z - zeros) / prod(z - poles)`.
    pub fn from_roots(gain: f64, zeros: &[f64], poles: &[f64]) -> Result<Self> {
        let expand = |roots: &[f64]| {
            roots.iter().fold(vec![1.0], |acc, r| {
                let mut next = vec![0.0; acc.len() + 1];
                for (i, c) in acc.iter().enumerate() {
                    next[i] += c;
                    next[i + 1] -= c * r;
                }
                next
            })
        };
        let num = expand(zeros).into_iter().map(|c| c * gain).collect();
        Self::new(num, expand(poles))
    }

    pub fn num(&self) -> &[f64] {
        &self.num
    }

    pub fn den(&self) -> &[f64] {
        &self.den
    }

    pub fn is_zero(&self) -> bool {
        self.num.iter().all(|c| *c == 0.0)
    }

    pub fn den_degree(&self) -> usize {
        self.den.len() - 1
    }

    pub fn num_degree(&self) -> usize {
        if self.is_zero() {
            0
        } else {
            self.num.len() - 1
        }
    }

    /// Relative degree; `None` for the zero filter.
    pub fn relative_degree(&self) -> Option<usize> {
        (!self.is_zero()).then(|| self.den_degree() - self.num_degree())
    }

    pub fn is_strictly_proper(&self) -> bool {
        self.is_zero() || self.num_degree() < self.den_degree()
    }

    /// Evaluates the transfer function at a complex point.
    pub fn eval(&self, z: Complex64) -> Complex64 {
        let horner = |c: &[f64]| c.iter().fold(Complex64::new(0.0, 0.0), |acc, &a| acc * z + a);
        horner(&self.num) / horner(&self.den)
    }

    /// Frequency response `F(e^{jω})`.
    pub fn response(&self, omega: f64) -> Complex64 {
        self.eval(Complex64::from_polar(1.0, omega))
    }

    /// Scales the numerator by `alpha`.
    pub fn scaled(&self, alpha: f64) -> Self {
        Self { num: self.num.iter().map(|c| c * alpha).collect(), den: self.den.clone() }
    }
}
