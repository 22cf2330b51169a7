use nalgebra::DMatrix;

use crate::lti::StateSpaceSystem;

/// Compressed-row copy of a dense matrix keeping only nonzero entries.
#[derive(Debug, Clone)]
pub struct Csr {
    rows: usize,
    indptr: Vec<usize>,
    idx: Vec<usize>,
    val: Vec<f64>,
}

impl Csr {
    pub fn from_dense(m: &DMatrix<f64>) -> Self {
        let mut indptr = Vec::with_capacity(m.nrows() + 1);
        let mut idx = Vec::new();
        let mut val = Vec::new();
        indptr.push(0);
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                let v = m[(i, j)];
                if v != 0.0 {
                    idx.push(j);
                    val.push(v);
                }
            }
            indptr.push(idx.len());
        }
        Self { rows: m.nrows(), indptr, idx, val }
    }

    /// `out += M x`
    #[inline]
    pub fn mul_add(&self, x: &[f64], out: &mut [f64]) {
        for i in 0..self.rows {
            let mut s = 0.0;
            for k in self.indptr[i]..self.indptr[i + 1] {
                s += self.val[k] * x[self.idx[k]];
            }
            out[i] += s;
        }
    }

    pub fn nnz(&self) -> usize {
        self.val.len()
    }
}

/// State-space system stepped with sparse products; owns its state.
#[derive(Debug, Clone)]
pub struct SparseSystem {
    a: Csr,
    b: Csr,
    c: Csr,
    d: Csr,
    x: Vec<f64>,
    next: Vec<f64>,
}

impl SparseSystem {
    pub fn new(sys: &StateSpaceSystem) -> Self {
        let n = sys.n_states();
        Self {
            a: Csr::from_dense(&sys.a),
            b: Csr::from_dense(&sys.b),
            c: Csr::from_dense(&sys.c),
            d: Csr::from_dense(&sys.d),
            x: vec![0.0; n],
            next: vec![0.0; n],
        }
    }

    /// `y = C x + D u` for the current state.
    #[inline]
    pub fn output(&self, u: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        self.c.mul_add(&self.x, y);
        self.d.mul_add(u, y);
    }

    /// `x <- A x + B u`
    #[inline]
    pub fn advance(&mut self, u: &[f64]) {
        self.next.iter_mut().for_each(|v| *v = 0.0);
        self.a.mul_add(&self.x, &mut self.next);
        self.b.mul_add(u, &mut self.next);
        std::mem::swap(&mut self.x, &mut self.next);
    }

    pub fn state_magnitude(&self) -> f64 {
        self.x.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn n_states(&self) -> usize {
        self.x.len()
    }
}
