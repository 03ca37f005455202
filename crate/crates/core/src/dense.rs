//! Small row-major dense matrices and the allocation-free kernels used by the
//! structured factorization.
//!
//! Every kernel takes a [`FlopCounter`]; passing `&mut ()` compiles the
//! accounting away, passing a [`FlopTally`] records one unit per scalar
//! multiply-add, addition, division or square root.

use std::fmt;
use std::ops::{Index, IndexMut};

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub trait FlopCounter {
    fn add(&mut self, flops: u64);
}

impl FlopCounter for () {
    #[inline(always)]
    fn add(&mut self, _: u64) {}
}

/// Running count of floating-point operations.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct FlopTally(pub u64);

impl FlopCounter for FlopTally {
    #[inline(always)]
    fn add(&mut self, flops: u64) {
        self.0 += flops;
    }
}

#[derive(Clone, PartialEq, Default)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![1.0; n])
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    /// Panics if `data.len() != rows * cols`.
    pub fn from_row_slice(rows: usize, cols: usize, data: &[f64]) -> Self {
        assert_eq!(data.len(), rows * cols, "row slice length");
        Self {
            rows,
            cols,
            data: data.to_vec(),
        }
    }

    /// Builds a matrix from nested rows; ragged input is rejected.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            if row.len() != cols {
                return Err(Error::DimensionMismatch {
                    what: "matrix row length",
                    expected: cols,
                    found: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.cols.max(1)).take(self.rows).map(<[f64]>::to_vec).collect()
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Reshapes in place, zero-filling. Reuses the allocation when it is large enough.
    pub fn reset(&mut self, rows: usize, cols: usize) {
        self.rows = rows;
        self.cols = cols;
        self.data.clear();
        self.data.resize(rows * cols, 0.0);
    }

    pub fn copy_from(&mut self, other: &DenseMatrix) {
        self.rows = other.rows;
        self.cols = other.cols;
        self.data.clear();
        self.data.extend_from_slice(&other.data);
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &DenseMatrix) -> Self {
        let mut out = Self::zeros(self.rows, other.cols);
        gemm(self, other, &mut out, &mut ());
        out
    }

    pub fn mat_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    pub fn add(&self, other: &DenseMatrix) -> Self {
        assert_eq!(self.shape(), other.shape());
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Self {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    pub fn sub(&self, other: &DenseMatrix) -> Self {
        assert_eq!(self.shape(), other.shape());
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Self {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// True when every off-diagonal entry is exactly zero.
    pub fn is_diagonal(&self) -> bool {
        self.is_square()
            && (0..self.rows).all(|i| (0..self.cols).all(|j| i == j || self[(i, j)] == 0.0))
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.is_square()
            && (0..self.rows).all(|i| {
                (i + 1..self.cols).all(|j| {
                    let (a, b) = (self[(i, j)], self[(j, i)]);
                    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
                })
            })
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Copies `block` into `self` with its top-left corner at `(r0, c0)`.
    pub fn set_block(&mut self, r0: usize, c0: usize, block: &DenseMatrix) {
        for i in 0..block.rows {
            for j in 0..block.cols {
                self[(r0 + i, c0 + j)] = block[(i, j)];
            }
        }
    }

    pub fn block(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                out[(i, j)] = self[(r0 + i, c0 + j)];
            }
        }
        out
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    #[inline(always)]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    #[inline(always)]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DenseMatrix{}x{} ", self.rows, self.cols)?;
        f.debug_list().entries(self.to_rows()).finish()
    }
}

impl Serialize for DenseMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_rows().serialize(s)
    }
}

impl<'de> Deserialize<'de> for DenseMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        DenseMatrix::from_rows(&rows).map_err(D::Error::custom)
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm_inf(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// `out = a * b`.
pub fn gemm<F: FlopCounter>(a: &DenseMatrix, b: &DenseMatrix, out: &mut DenseMatrix, f: &mut F) {
    debug_assert_eq!(a.cols, b.rows);
    out.reset(a.rows, b.cols);
    for i in 0..a.rows {
        let arow = a.row(i);
        let orow = &mut out.data[i * b.cols..(i + 1) * b.cols];
        for (k, &aik) in arow.iter().enumerate() {
            if aik == 0.0 {
                continue;
            }
            for (o, &bkj) in orow.iter_mut().zip(b.row(k)) {
                *o += aik * bkj;
            }
        }
    }
    f.add((a.rows * a.cols * b.cols) as u64);
}

/// `out = a * bᵀ`.
pub fn gemm_nt<F: FlopCounter>(a: &DenseMatrix, b: &DenseMatrix, out: &mut DenseMatrix, f: &mut F) {
    debug_assert_eq!(a.cols, b.cols);
    out.reset(a.rows, b.rows);
    for i in 0..a.rows {
        for j in 0..b.rows {
            out.data[i * b.rows + j] = dot(a.row(i), b.row(j));
        }
    }
    f.add((a.rows * a.cols * b.rows) as u64);
}

/// `out = a * b * aᵀ` for symmetric `b`; `scratch` holds `a * b`.
pub fn congruence<F: FlopCounter>(
    a: &DenseMatrix,
    b: &DenseMatrix,
    scratch: &mut DenseMatrix,
    out: &mut DenseMatrix,
    f: &mut F,
) {
    gemm(a, b, scratch, f);
    gemm_nt(scratch, a, out, f);
}

/// `out = a + b`.
pub fn add_into<F: FlopCounter>(a: &DenseMatrix, b: &DenseMatrix, out: &mut DenseMatrix, f: &mut F) {
    debug_assert_eq!(a.shape(), b.shape());
    out.reset(a.rows, a.cols);
    for ((o, x), y) in out.data.iter_mut().zip(&a.data).zip(&b.data) {
        *o = x + y;
    }
    f.add(a.data.len() as u64);
}

/// Inverse of `m + shift·I` for symmetric positive definite input.
///
/// Exactly diagonal inputs take a reciprocal fast path. Otherwise an upper
/// Cholesky factor `U` is formed in `scratch`, inverted in place, and
/// `out = U⁻¹ U⁻ᵀ`. On failure returns the 0-based failing pivot.
pub fn shifted_spd_inverse<F: FlopCounter>(
    m: &DenseMatrix,
    shift: f64,
    out: &mut DenseMatrix,
    scratch: &mut DenseMatrix,
    f: &mut F,
) -> std::result::Result<(), usize> {
    let n = m.rows;
    debug_assert!(m.is_square());
    out.reset(n, n);
    if m.is_diagonal() {
        for i in 0..n {
            let d = m[(i, i)] + shift;
            if !(d > 0.0) {
                return Err(i);
            }
            out[(i, i)] = 1.0 / d;
        }
        f.add(2 * n as u64);
        return Ok(());
    }

    scratch.copy_from(m);
    for i in 0..n {
        scratch[(i, i)] += shift;
    }
    f.add(n as u64);
    upper_cholesky_in_place(scratch, f)?;

    // In-place inverse of the upper-triangular factor from U⁻¹U = I, column by
    // column: columns left of j already hold U⁻¹, column j still holds U.
    for j in 0..n {
        let ujj = scratch[(j, j)];
        for i in 0..j {
            let mut s = 0.0;
            for k in i..j {
                s += scratch[(i, k)] * scratch[(k, j)];
            }
            scratch[(i, j)] = -s / ujj;
            f.add((j - i) as u64 + 1);
        }
        scratch[(j, j)] = 1.0 / ujj;
        f.add(1);
    }

    // out = Uinv * Uinvᵀ, upper triangle then mirror.
    for i in 0..n {
        for j in i..n {
            let mut s = 0.0;
            for k in j..n {
                s += scratch[(i, k)] * scratch[(j, k)];
            }
            out[(i, j)] = s;
            out[(j, i)] = s;
            f.add((n - j) as u64);
        }
    }
    Ok(())
}

/// Overwrites `m` with its upper Cholesky factor `U` (`UᵀU = m`), zeroing the
/// strict lower triangle. Returns the failing 0-based pivot on breakdown.
pub fn upper_cholesky_in_place<F: FlopCounter>(
    m: &mut DenseMatrix,
    f: &mut F,
) -> std::result::Result<(), usize> {
    let n = m.rows;
    for i in 0..n {
        let mut d = m[(i, i)];
        for l in 0..i {
            d -= m[(l, i)] * m[(l, i)];
        }
        f.add(i as u64 + 1);
        if !(d > 0.0) {
            return Err(i);
        }
        let piv = d.sqrt();
        m[(i, i)] = piv;
        for j in i + 1..n {
            let mut s = m[(i, j)];
            for l in 0..i {
                s -= m[(l, i)] * m[(l, j)];
            }
            m[(i, j)] = s / piv;
            f.add(i as u64 + 1);
        }
        for j in 0..i {
            m[(i, j)] = 0.0;
        }
    }
    Ok(())
}
