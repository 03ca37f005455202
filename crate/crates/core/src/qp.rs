//! The box- and equality-constrained QP interface shared by the solvers:
//!
//! ```text
//! min ½ zᵀHz + qᵀz   s.t.  Gz = b,  z_lb ≤ z ≤ z_ub
//! ```

use crate::dense::{self, DenseMatrix};
use crate::error::{Error, Result};

/// Block-diagonal matrix, blocks laid out contiguously along the diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockDiag {
    blocks: Vec<DenseMatrix>,
    offsets: Vec<usize>,
    dim: usize,
}

impl BlockDiag {
    pub fn new(blocks: Vec<DenseMatrix>) -> Self {
        let mut offsets = Vec::with_capacity(blocks.len());
        let mut dim = 0;
        for blk in &blocks {
            debug_assert!(blk.is_square());
            offsets.push(dim);
            dim += blk.rows();
        }
        Self { blocks, offsets, dim }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn blocks(&self) -> &[DenseMatrix] {
        &self.blocks
    }

    /// `out = self · x`.
    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        for (blk, &off) in self.blocks.iter().zip(&self.offsets) {
            let k = blk.rows();
            let xs = &x[off..off + k];
            for i in 0..k {
                out[off + i] = dense::dot(blk.row(i), xs);
            }
        }
    }

    /// Inverse of `self + shift·I`, block by block.
    pub fn shifted_inverse(&self, shift: f64, name: &'static str) -> Result<BlockDiag> {
        let mut scratch = DenseMatrix::default();
        let blocks = self
            .blocks
            .iter()
            .enumerate()
            .map(|(i, blk)| {
                let mut inv = DenseMatrix::default();
                dense::shifted_spd_inverse(blk, shift, &mut inv, &mut scratch, &mut ())
                    .map_err(|index| Error::InversionFailed { name, block: i, index })?;
                Ok(inv)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(BlockDiag::new(blocks))
    }

    /// Diagonal entries when every block is exactly diagonal.
    pub fn diagonal(&self) -> Option<Vec<f64>> {
        if !self.blocks.iter().all(DenseMatrix::is_diagonal) {
            return None;
        }
        Some(self.blocks.iter().flat_map(|b| (0..b.rows()).map(move |i| b[(i, i)])).collect())
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.dim, self.dim);
        for (blk, &off) in self.blocks.iter().zip(&self.offsets) {
            out.set_block(off, off, blk);
        }
        out
    }
}

/// Operations the first-order solvers need from a QP, without committing to a storage layout.
pub trait QpStructure {
    fn n_z(&self) -> usize;
    fn n_eq(&self) -> usize;
    fn q(&self) -> &[f64];
    fn b(&self) -> &[f64];
    fn z_lb(&self) -> &[f64];
    fn z_ub(&self) -> &[f64];

    /// `out = H x`.
    fn h_mul(&self, x: &[f64], out: &mut [f64]);
    /// `out = G x`, `out.len() == n_eq`.
    fn g_mul(&self, x: &[f64], out: &mut [f64]);
    /// `out = Gᵀ y`, `out.len() == n_z`.
    fn gt_mul(&self, y: &[f64], out: &mut [f64]);

    /// `(H + rho·I)⁻¹` in block form.
    fn shifted_h_inverse(&self, rho: f64) -> Result<BlockDiag>;
    /// `Some(diag(H))` when H is exactly diagonal.
    fn h_diagonal(&self) -> Option<Vec<f64>>;

    fn to_dense(&self) -> DenseQp;

    fn objective(&self, z: &[f64]) -> f64 {
        let mut hz = vec![0.0; self.n_z()];
        self.h_mul(z, &mut hz);
        0.5 * dense::dot(z, &hz) + dense::dot(self.q(), z)
    }
}

/// Unstructured QP with dense H and G.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseQp {
    pub h: DenseMatrix,
    pub q: Vec<f64>,
    pub g: DenseMatrix,
    pub b: Vec<f64>,
    pub z_lb: Vec<f64>,
    pub z_ub: Vec<f64>,
}

impl DenseQp {
    pub fn new(
        h: DenseMatrix,
        q: Vec<f64>,
        g: DenseMatrix,
        b: Vec<f64>,
        z_lb: Vec<f64>,
        z_ub: Vec<f64>,
    ) -> Result<Self> {
        let n = h.rows();
        let check = |what, expected: usize, found: usize| {
            if expected == found {
                Ok(())
            } else {
                Err(Error::DimensionMismatch { what, expected, found })
            }
        };
        check("H columns", n, h.cols())?;
        check("q length", n, q.len())?;
        check("G columns", n, g.cols())?;
        check("b length", g.rows(), b.len())?;
        check("z_lb length", n, z_lb.len())?;
        check("z_ub length", n, z_ub.len())?;
        Ok(Self { h, q, g, b, z_lb, z_ub })
    }
}

impl QpStructure for DenseQp {
    fn n_z(&self) -> usize {
        self.h.rows()
    }

    fn n_eq(&self) -> usize {
        self.g.rows()
    }

    fn q(&self) -> &[f64] {
        &self.q
    }

    fn b(&self) -> &[f64] {
        &self.b
    }

    fn z_lb(&self) -> &[f64] {
        &self.z_lb
    }

    fn z_ub(&self) -> &[f64] {
        &self.z_ub
    }

    fn h_mul(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = dense::dot(self.h.row(i), x);
        }
    }

    fn g_mul(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = dense::dot(self.g.row(i), x);
        }
    }

    fn gt_mul(&self, y: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for (i, &yi) in y.iter().enumerate() {
            for (o, gij) in out.iter_mut().zip(self.g.row(i)) {
                *o += gij * yi;
            }
        }
    }

    fn shifted_h_inverse(&self, rho: f64) -> Result<BlockDiag> {
        BlockDiag::new(vec![self.h.clone()]).shifted_inverse(rho, "H")
    }

    fn h_diagonal(&self) -> Option<Vec<f64>> {
        self.h.is_diagonal().then(|| (0..self.h.rows()).map(|i| self.h[(i, i)]).collect())
    }

    fn to_dense(&self) -> DenseQp {
        self.clone()
    }
}
