//! Feedback interconnection of state-space blocks through static wiring.

use nalgebra::DMatrix;

use super::linalg;
use super::ss::{block_diag, StateSpaceSystem};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockId(usize);

/// A signal that can be wired into a block input or an interconnection output.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Signal {
    /// Output `index` of a block.
    Block(BlockId, usize),
    /// External input `index`.
    External(usize),
}

/// Builder for `x+ = A x + B i`, `o = C x + D i`, `i = K o + E d`, `y = S o + F d`.
#[derive(Debug, Clone)]
pub struct Interconnection {
    blocks: Vec<StateSpaceSystem>,
    n_external: usize,
    wires: Vec<(BlockId, usize, Signal, f64)>,
    outputs: Vec<Vec<(Signal, f64)>>,
}

impl Interconnection {
    pub fn new(n_external: usize) -> Self {
        Self { blocks: Vec::new(), n_external, wires: Vec::new(), outputs: Vec::new() }
    }

    pub fn add(&mut self, block: StateSpaceSystem) -> BlockId {
        self.blocks.push(block);
        BlockId(self.blocks.len() - 1)
    }

    /// Adds `gain * src` into input `input` of block `dst`.
    pub fn wire(&mut self, dst: BlockId, input: usize, src: Signal, gain: f64) -> &mut Self {
        self.wires.push((dst, input, src, gain));
        self
    }

    /// Appends an output equal to the weighted sum of signals.
    pub fn output(&mut self, terms: &[(Signal, f64)]) -> &mut Self {
        self.outputs.push(terms.to_vec());
        self
    }

    /// Closes all loops. `label` names the interconnection in ill-posedness errors.
    pub fn build(&self, label: &str) -> Result<StateSpaceSystem> {
        let mut in_off = Vec::with_capacity(self.blocks.len());
        let mut out_off = Vec::with_capacity(self.blocks.len());
        let (mut ni, mut no) = (0, 0);
        let mut a = DMatrix::zeros(0, 0);
        let mut b = DMatrix::zeros(0, 0);
        let mut c = DMatrix::zeros(0, 0);
        let mut d = DMatrix::zeros(0, 0);
        for blk in &self.blocks {
            in_off.push(ni);
            out_off.push(no);
            ni += blk.n_inputs();
            no += blk.n_outputs();
            a = block_diag(&a, &blk.a);
            b = block_diag(&b, &blk.b);
            c = block_diag(&c, &blk.c);
            d = block_diag(&d, &blk.d);
        }
        let ne = self.n_external;
        let mut k = DMatrix::zeros(ni, no);
        let mut e = DMatrix::zeros(ni, ne);
        let check = |sig: Signal| -> Result<()> {
            match sig {
                Signal::Block(BlockId(id), j) if id < self.blocks.len() && j < self.blocks[id].n_outputs() => Ok(()),
                Signal::External(j) if j < ne => Ok(()),
                other => Err(Error::Dimension(format!("{label}: unknown signal {other:?}"))),
            }
        };
        for &(BlockId(dst), input, src, gain) in &self.wires {
            if dst >= self.blocks.len() || input >= self.blocks[dst].n_inputs() {
                return Err(Error::Dimension(format!("{label}: block {dst} has no input {input}")));
            }
            check(src)?;
            let row = in_off[dst] + input;
            match src {
                Signal::Block(BlockId(s), j) => k[(row, out_off[s] + j)] += gain,
                Signal::External(j) => e[(row, j)] += gain,
            }
        }
        let nout = self.outputs.len();
        let mut s = DMatrix::zeros(nout, no);
        let mut f = DMatrix::zeros(nout, ne);
        for (row, terms) in self.outputs.iter().enumerate() {
            for &(sig, gain) in terms {
                check(sig)?;
                match sig {
                    Signal::Block(BlockId(id), j) => s[(row, out_off[id] + j)] += gain,
                    Signal::External(j) => f[(row, j)] += gain,
                }
            }
        }
        let lhs = DMatrix::identity(no, no) - &d * &k;
        let phi = linalg::inverse(&lhs, label).map_err(|_| Error::IllPosed(label.into()))?;
        if !phi.iter().all(|v| v.is_finite()) || (&lhs * &phi - DMatrix::identity(no, no)).norm() > 1e-8 {
            return Err(Error::IllPosed(label.into()));
        }
        let phi_c = &phi * &c;
        let phi_de = &phi * &d * &e;
        let a_cl = &a + &b * &k * &phi_c;
        let b_cl = &b * (&k * &phi_de + &e);
        let c_cl = &s * &phi_c;
        let d_cl = &s * &phi_de + f;
        StateSpaceSystem::new(a_cl, b_cl, c_cl, d_cl)
    }
}
