use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::filter::RationalFilter;
use super::linalg::{self, STABILITY_MARGIN};
use super::ss::{realize, StateSpaceSystem};
use crate::error::{Error, Result};

/// Generalized plant
///
/// ```text
/// [z]   [G11 G12] [w]
/// [y] = [G21 G22] [u]
/// ```
///
/// with vector disturbance `w` (identity covariance), vector performance
/// output `z`, and a scalar measurement/control pair `(y, u)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "RawPlant", into = "RawPlant")]
pub struct TwoByTwoPlant {
    g11: Vec<Vec<RationalFilter>>,
    g12: Vec<RationalFilter>,
    g21: Vec<RationalFilter>,
    g22: RationalFilter,
    realization: PlantRealization,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum FilterMatrix {
    Single(RationalFilter),
    Rows(Vec<Vec<RationalFilter>>),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum FilterVector {
    Single(RationalFilter),
    Many(Vec<RationalFilter>),
}

impl FilterVector {
    fn into_vec(self) -> Vec<RationalFilter> {
        match self {
            FilterVector::Single(f) => vec![f],
            FilterVector::Many(v) => v,
        }
    }

    fn from_vec(mut v: Vec<RationalFilter>) -> Self {
        if v.len() == 1 {
            FilterVector::Single(v.remove(0))
        } else {
            FilterVector::Many(v)
        }
    }
}

#[derive(Serialize, Deserialize)]
struct RawPlant {
    #[serde(rename = "G11")]
    g11: FilterMatrix,
    #[serde(rename = "G12")]
    g12: FilterVector,
    #[serde(rename = "G21")]
    g21: FilterVector,
    #[serde(rename = "G22")]
    g22: RationalFilter,
}

impl TryFrom<RawPlant> for TwoByTwoPlant {
    type Error = Error;

    fn try_from(raw: RawPlant) -> Result<Self> {
        let g11 = match raw.g11 {
            FilterMatrix::Single(f) => vec![vec![f]],
            FilterMatrix::Rows(r) => r,
        };
        TwoByTwoPlant::new(g11, raw.g12.into_vec(), raw.g21.into_vec(), raw.g22)
    }
}

impl From<TwoByTwoPlant> for RawPlant {
    fn from(p: TwoByTwoPlant) -> Self {
        let g11 = if p.g11.len() == 1 && p.g11[0].len() == 1 {
            FilterMatrix::Single(p.g11[0][0].clone())
        } else {
            FilterMatrix::Rows(p.g11)
        };
        RawPlant {
            g11,
            g12: FilterVector::from_vec(p.g12),
            g21: FilterVector::from_vec(p.g21),
            g22: p.g22,
        }
    }
}

impl TwoByTwoPlant {
    /// `g11` is indexed `[z_row][w_col]`.
    pub fn new(
        g11: Vec<Vec<RationalFilter>>,
        g12: Vec<RationalFilter>,
        g21: Vec<RationalFilter>,
        g22: RationalFilter,
    ) -> Result<Self> {
        let n_z = g11.len();
        if n_z == 0 {
            return Err(Error::InvalidPlant("G11 has no rows".into()));
        }
        let n_w = g11[0].len();
        if n_w == 0 || g11.iter().any(|row| row.len() != n_w) {
            return Err(Error::InvalidPlant("G11 rows must be nonempty and of equal length".into()));
        }
        if g12.len() != n_z {
            return Err(Error::InvalidPlant(format!("G12 has {} rows, G11 has {}", g12.len(), n_z)));
        }
        if g21.len() != n_w {
            return Err(Error::InvalidPlant(format!("G21 has {} columns, G11 has {}", g21.len(), n_w)));
        }
        if !g22.is_strictly_proper() {
            return Err(Error::InvalidPlant("G22 must be strictly proper".into()));
        }
        let realization = PlantRealization::from_blocks(&g11, &g12, &g21, &g22)?;
        Ok(Self { g11, g12, g21, g22, realization })
    }

    /// Plant with `z = y = G (w + u)` for a scalar filter `G`.
    pub fn shared_channel(g: RationalFilter) -> Result<Self> {
        Self::new(vec![vec![g.clone()]], vec![g.clone()], vec![g.clone()], g)
    }

    /// `G(z) = 0.165 / ((z - 2)(z - 0.5789))` in the shared-channel configuration.
    pub fn unstable_example() -> Self {
        let g = RationalFilter::from_roots(0.165, &[], &[2.0, 0.5789]).expect("valid filter");
        Self::shared_channel(g).expect("example plant satisfies the assumptions")
    }

    pub fn n_w(&self) -> usize {
        self.g21.len()
    }

    pub fn n_z(&self) -> usize {
        self.g12.len()
    }

    pub fn g11(&self) -> &[Vec<RationalFilter>] {
        &self.g11
    }

    pub fn g12(&self) -> &[RationalFilter] {
        &self.g12
    }

    pub fn g21(&self) -> &[RationalFilter] {
        &self.g21
    }

    pub fn g22(&self) -> &RationalFilter {
        &self.g22
    }

    pub fn realization(&self) -> &PlantRealization {
        &self.realization
    }

    /// True when the plant has no poles on or outside the unit circle.
    pub fn is_open_loop_stable(&self) -> bool {
        self.realization.sys.is_stable()
    }
}

/// Joint minimal realization with inputs `[w; u]` and outputs `[z; y]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantRealization {
    pub sys: StateSpaceSystem,
    pub n_w: usize,
    pub n_z: usize,
}

impl PlantRealization {
    fn from_blocks(
        g11: &[Vec<RationalFilter>],
        g12: &[RationalFilter],
        g21: &[RationalFilter],
        g22: &RationalFilter,
    ) -> Result<Self> {
        let n_z = g12.len();
        let n_w = g21.len();
        let mut rows: Vec<Vec<&RationalFilter>> = Vec::new();
        for i in 0..n_z {
            let mut row: Vec<&RationalFilter> = g11[i].iter().collect();
            row.push(&g12[i]);
            rows.push(row);
        }
        let mut last: Vec<&RationalFilter> = g21.iter().collect();
        last.push(g22);
        rows.push(last);

        let mut joint: Option<StateSpaceSystem> = None;
        for row in rows {
            let mut row_sys = realize(row[0]);
            for f in &row[1..] {
                row_sys = row_sys.append_inputs(&realize(f))?.minimal();
            }
            joint = Some(match joint {
                None => row_sys,
                Some(j) => j.stack_outputs(&row_sys)?.minimal(),
            });
        }
        let sys = joint.expect("at least one row").minimal();
        let real = Self { sys, n_w, n_z };
        real.check_hidden_modes()?;
        Ok(real)
    }

    fn check_hidden_modes(&self) -> Result<()> {
        let unstable = |modes: Vec<num_complex::Complex64>| {
            modes.into_iter().find(|l| l.norm() >= 1.0 - STABILITY_MARGIN)
        };
        if let Some(m) = unstable(linalg::uncontrollable_modes(&self.a(), &self.b2())) {
            return Err(Error::InvalidPlant(format!(
                "unstable mode {:.6} is not reachable from u",
                m.norm()
            )));
        }
        if let Some(m) = unstable(linalg::uncontrollable_modes(&self.a().transpose(), &self.c2().transpose())) {
            return Err(Error::InvalidPlant(format!(
                "unstable mode {:.6} is not visible in y",
                m.norm()
            )));
        }
        Ok(())
    }

    pub fn n_states(&self) -> usize {
        self.sys.n_states()
    }

    pub fn a(&self) -> DMatrix<f64> {
        self.sys.a.clone()
    }

    pub fn b1(&self) -> DMatrix<f64> {
        self.sys.b.columns(0, self.n_w).into_owned()
    }

    pub fn b2(&self) -> DMatrix<f64> {
        self.sys.b.columns(self.n_w, 1).into_owned()
    }

    pub fn c1(&self) -> DMatrix<f64> {
        self.sys.c.rows(0, self.n_z).into_owned()
    }

    pub fn c2(&self) -> DMatrix<f64> {
        self.sys.c.rows(self.n_z, 1).into_owned()
    }

    pub fn d11(&self) -> DMatrix<f64> {
        self.sys.d.view((0, 0), (self.n_z, self.n_w)).into_owned()
    }

    pub fn d12(&self) -> DMatrix<f64> {
        self.sys.d.view((0, self.n_w), (self.n_z, 1)).into_owned()
    }

    pub fn d21(&self) -> DMatrix<f64> {
        self.sys.d.view((self.n_z, 0), (1, self.n_w)).into_owned()
    }
}
