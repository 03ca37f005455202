//! Slow dense reference implementations.
//!
//! Nothing here shares code with the structured path in [`crate::factor`]:
//! inverses go through Gaussian elimination, the Cholesky factor through the
//! textbook row recursion, and W is either assembled from its block pattern
//! or multiplied out as `G (H + ρI)⁻¹ Gᵀ`. The dense assemble-and-factor
//! route doubles as the generic refactorization baseline in benchmarks.

pub use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::problem::{Formulation, MpcProblem};
use crate::qp::{DenseQp, QpStructure};
use crate::solvers::LinearSystem;

/// Upper-triangular `U` with positive diagonal such that `UᵀU = m`.
pub fn dense_cholesky(m: &DenseMatrix) -> Result<DenseMatrix> {
    let n = m.rows();
    if !m.is_square() {
        return Err(Error::DimensionMismatch {
            what: "Cholesky input columns",
            expected: n,
            found: m.cols(),
        });
    }
    let mut u = DenseMatrix::zeros(n, n);
    for i in 0..n {
        let mut s = m[(i, i)];
        for k in 0..i {
            s -= u[(k, i)] * u[(k, i)];
        }
        if !(s > 0.0) {
            return Err(Error::NotPositiveDefinite { index: i });
        }
        u[(i, i)] = s.sqrt();
        for j in i + 1..n {
            let mut s = m[(i, j)];
            for k in 0..i {
                s -= u[(k, i)] * u[(k, j)];
            }
            u[(i, j)] = s / u[(i, i)];
        }
    }
    Ok(u)
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
/// Returns `None` when a pivot falls below `1e-13 · max|a|`.
pub fn lu_solve(a: &DenseMatrix, b: &[f64]) -> Option<Vec<f64>> {
    let n = a.rows();
    let mut work = a.as_slice().to_vec();
    let mut x = b.to_vec();
    lu_solve_in_place(&mut work, n, &mut x).then_some(x)
}

fn lu_solve_in_place(a: &mut [f64], n: usize, b: &mut [f64]) -> bool {
    let scale = a.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let tol = 1e-13 * scale.max(f64::MIN_POSITIVE);
    for col in 0..n {
        let (piv_row, piv_val) = (col..n)
            .map(|r| (r, a[r * n + col].abs()))
            .fold((col, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if !(piv_val > tol) {
            return false;
        }
        if piv_row != col {
            for j in 0..n {
                a.swap(col * n + j, piv_row * n + j);
            }
            b.swap(col, piv_row);
        }
        let piv = a[col * n + col];
        for r in col + 1..n {
            let factor = a[r * n + col] / piv;
            if factor == 0.0 {
                continue;
            }
            for j in col..n {
                a[r * n + j] -= factor * a[col * n + j];
            }
            b[r] -= factor * b[col];
        }
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for j in i + 1..n {
            s -= a[i * n + j] * b[j];
        }
        b[i] = s / a[i * n + i];
    }
    true
}

/// Inverse by column-wise elimination.
pub fn dense_inverse(m: &DenseMatrix) -> Result<DenseMatrix> {
    let n = m.rows();
    let mut inv = DenseMatrix::zeros(n, n);
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        let col = lu_solve(m, &e).ok_or(Error::NotPositiveDefinite { index: j })?;
        for i in 0..n {
            inv[(i, j)] = col[i];
        }
    }
    Ok(inv)
}

fn shifted_inverse(m: &DenseMatrix, rho: f64, name: &'static str) -> Result<DenseMatrix> {
    let mut s = m.clone();
    for i in 0..s.rows() {
        s[(i, i)] += rho;
    }
    dense_inverse(&s).map_err(|_| Error::InversionFailed { name, block: 0, index: 0 })
}

/// Dense `W` from its block pattern:
///
/// ```text
/// ⎡ Z₁+Q̂₁       −Q̂₁A₂ᵀ                 ⎤
/// ⎢ −A₂Q̂₁   Y₂+Z₂+Q̂₂   −Q̂₂A₃ᵀ          ⎥
/// ⎢              ⋱          ⋱          ⎥
/// ⎣                  −A_NQ̂_{N−1}  Y_N+Z_N+T̂ ⎦
/// ```
///
/// The last diagonal block drops `T̂` with a terminal equality constraint.
pub fn assemble_w(p: &MpcProblem, rho: f64) -> Result<DenseMatrix> {
    p.ensure_valid()?;
    let (n, horizon) = (p.n, p.horizon);
    let mut w = DenseMatrix::zeros(n * horizon, n * horizon);
    let qhat: Vec<DenseMatrix> = (1..horizon)
        .map(|j| shifted_inverse(p.q_at(j), rho, "Q"))
        .collect::<Result<_>>()?;
    let that = match p.formulation {
        Formulation::Lax => Some(shifted_inverse(p.t.as_ref().expect("validated"), rho, "T")?),
        Formulation::TerminalEquality => None,
    };
    for k in 1..=horizon {
        let b = p.b_at(k);
        let rhat = shifted_inverse(p.r_at(k), rho, "R")?;
        let mut diag = b.matmul(&rhat).matmul(&b.transpose());
        if k > 1 {
            let a = p.a_at(k);
            diag = a.matmul(&qhat[k - 2]).matmul(&a.transpose()).add(&diag);
        }
        if k < horizon {
            diag = diag.add(&qhat[k - 1]);
        } else if let Some(that) = &that {
            diag = diag.add(that);
        }
        let r0 = (k - 1) * n;
        w.set_block(r0, r0, &diag);
        if k < horizon {
            let lower = p.a_at(k + 1).matmul(&qhat[k - 1]).scale(-1.0);
            w.set_block(r0 + n, r0, &lower);
            w.set_block(r0, r0 + n, &lower.transpose());
        }
    }
    Ok(w)
}

/// `G (H + ρI)⁻¹ Gᵀ` multiplied out densely.
pub fn w_from_qp(qp: &impl QpStructure, rho: f64) -> Result<DenseMatrix> {
    let d = qp.to_dense();
    let hinv = shifted_inverse(&d.h, rho, "H")?;
    Ok(d.g.matmul(&hinv).matmul(&d.g.transpose()))
}

/// Dense Cholesky factor of W used as a generic linear-system backend.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseWFactor {
    pub upper: DenseMatrix,
    pub rho: f64,
}

impl DenseWFactor {
    pub fn from_matrix(w: &DenseMatrix, rho: f64) -> Result<Self> {
        Ok(Self {
            upper: dense_cholesky(w)?,
            rho,
        })
    }

    /// Generic refactorization: assemble dense W, then dense Cholesky.
    pub fn from_problem(p: &MpcProblem, rho: f64) -> Result<Self> {
        Self::from_matrix(&assemble_w(p, rho)?, rho)
    }

    pub fn from_qp(qp: &impl QpStructure, rho: f64) -> Result<Self> {
        Self::from_matrix(&w_from_qp(qp, rho)?, rho)
    }
}

impl LinearSystem for DenseWFactor {
    fn dim(&self) -> usize {
        self.upper.rows()
    }

    fn rho(&self) -> Option<f64> {
        Some(self.rho)
    }

    fn solve_in_place(&self, d: &mut [f64]) {
        dense_cholesky_solve(&self.upper, d);
    }
}

/// Solves `UᵀU x = d` in place.
pub fn dense_cholesky_solve(u: &DenseMatrix, d: &mut [f64]) {
    let n = u.rows();
    for i in 0..n {
        let mut s = d[i];
        for k in 0..i {
            s -= u[(k, i)] * d[k];
        }
        d[i] = s / u[(i, i)];
    }
    for i in (0..n).rev() {
        let mut s = d[i];
        for k in i + 1..n {
            s -= u[(i, k)] * d[k];
        }
        d[i] = s / u[(i, i)];
    }
}

/// Optimum found by active-set enumeration, with the multipliers of its KKT system.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleSolution {
    pub z: Vec<f64>,
    /// Equality multipliers `μ` (stationarity `Hz + q + Gᵀμ + λ = 0`).
    pub eq_multipliers: Vec<f64>,
    /// Box multipliers `λ`, positive at an upper bound, negative at a lower bound.
    pub box_multipliers: Vec<f64>,
    pub objective: f64,
}

pub const BRUTE_FORCE_LIMIT: usize = 14;

/// Enumerates every assignment of each variable to {free, lower bound, upper
/// bound}, solves the equality-constrained KKT system of the free variables,
/// and keeps the bound-feasible candidate with the smallest objective.
pub fn brute_force_qp(qp: &DenseQp) -> Result<OracleSolution> {
    let n_z = qp.n_z();
    let p = qp.n_eq();
    if n_z > BRUTE_FORCE_LIMIT {
        return Err(Error::TooLarge {
            limit: BRUTE_FORCE_LIMIT,
            found: n_z,
        });
    }
    let patterns = 3usize.pow(n_z as u32);
    let mut state = vec![0u8; n_z];
    let mut free = Vec::with_capacity(n_z);
    let mut z = vec![0.0; n_z];
    let mut kkt = Vec::new();
    let mut rhs = Vec::new();
    let mut best: Option<(f64, Vec<f64>, Vec<f64>)> = None;

    for pattern in 0..patterns {
        if pattern > 0 {
            for s in state.iter_mut() {
                *s += 1;
                if *s < 3 {
                    break;
                }
                *s = 0;
            }
        }
        free.clear();
        for (i, &s) in state.iter().enumerate() {
            match s {
                0 => free.push(i),
                1 => z[i] = qp.z_lb[i],
                _ => z[i] = qp.z_ub[i],
            }
        }
        let nf = free.len();
        if nf < p {
            // G restricted to the free columns cannot have full row rank.
            continue;
        }
        let k = nf + p;
        kkt.clear();
        kkt.resize(k * k, 0.0);
        rhs.clear();
        rhs.resize(k, 0.0);
        for (a, &i) in free.iter().enumerate() {
            for (b, &j) in free.iter().enumerate() {
                kkt[a * k + b] = qp.h[(i, j)];
            }
            for r in 0..p {
                kkt[a * k + nf + r] = qp.g[(r, i)];
                kkt[(nf + r) * k + a] = qp.g[(r, i)];
            }
            let mut s = -qp.q[i];
            for (j, &sj) in state.iter().enumerate() {
                if sj != 0 {
                    s -= qp.h[(i, j)] * z[j];
                }
            }
            rhs[a] = s;
        }
        for r in 0..p {
            let mut s = qp.b[r];
            for (j, &sj) in state.iter().enumerate() {
                if sj != 0 {
                    s -= qp.g[(r, j)] * z[j];
                }
            }
            rhs[nf + r] = s;
        }
        if !lu_solve_in_place(&mut kkt, k, &mut rhs) {
            continue;
        }
        for (a, &i) in free.iter().enumerate() {
            z[i] = rhs[a];
        }
        let feasible = free.iter().all(|&i| {
            let tol = 1e-9 * (1.0 + qp.z_lb[i].abs().max(qp.z_ub[i].abs()));
            z[i] >= qp.z_lb[i] - tol && z[i] <= qp.z_ub[i] + tol
        });
        if !feasible {
            continue;
        }
        let obj = qp.objective(&z);
        if best.as_ref().is_none_or(|(b, _, _)| obj < *b) {
            best = Some((obj, z.clone(), rhs[nf..].to_vec()));
        }
    }

    let (objective, z, eq_multipliers) = best.ok_or(Error::NoFeasibleCandidate)?;
    let mut hz = vec![0.0; n_z];
    let mut gtmu = vec![0.0; n_z];
    qp.h_mul(&z, &mut hz);
    qp.gt_mul(&eq_multipliers, &mut gtmu);
    let box_multipliers = (0..n_z).map(|i| -(hz[i] + qp.q[i] + gtmu[i])).collect();
    Ok(OracleSolution {
        z,
        eq_multipliers,
        box_multipliers,
        objective,
    })
}

/// Optimum of the QP with the box constraints dropped (single KKT solve).
pub fn equality_constrained_qp(qp: &DenseQp) -> Option<Vec<f64>> {
    let (n_z, p) = (qp.n_z(), qp.n_eq());
    let k = n_z + p;
    let mut kkt = DenseMatrix::zeros(k, k);
    kkt.set_block(0, 0, &qp.h);
    kkt.set_block(0, n_z, &qp.g.transpose());
    kkt.set_block(n_z, 0, &qp.g);
    let rhs: Vec<f64> = qp.q.iter().map(|v| -v).chain(qp.b.iter().copied()).collect();
    lu_solve(&kkt, &rhs).map(|mut x| {
        x.truncate(n_z);
        x
    })
}
