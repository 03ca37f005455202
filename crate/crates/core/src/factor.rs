//! Structured Cholesky factorization of `W = G (H + ρI)⁻¹ Gᵀ`.
//!
//! For the banded MPC QP the upper factor `W_c` (`W = W_cᵀ W_c`) is block
//! upper-bidiagonal:
//!
//! ```text
//!       ⎡ β¹  α¹              ⎤
//!       ⎢     β²  α²          ⎥
//! W_c = ⎢         ⋱   ⋱       ⎥
//!       ⎢             ⋱ αᴺ⁻¹  ⎥
//!       ⎣                 βᴺ  ⎦
//! ```
//!
//! with upper-triangular `βᵏ` and dense `αᵏ`. The blocks are computed directly
//! from the MPC ingredients without ever forming W. With
//! `Q̂ = (Q+ρI)⁻¹`, `R̂ = (R+ρI)⁻¹`, `T̂ = (T+ρI)⁻¹`, `Y = AQ̂Aᵀ`, `Z = BR̂Bᵀ`:
//!
//! * `Γ¹ = Z + Q̂`, `Γᵏ = Y + Z + Q̂` for `1 < k < N`, `Γᴺ = Y + Z + T̂`
//!   (`Y + Z` with a terminal equality constraint);
//! * `βᵏ_{ii} = √(Γᵏ_{ii} − γᵏ_{ii})`, `βᵏ_{ij} = (Γᵏ_{ij} − γᵏ_{ij}) / βᵏ_{ii}`;
//! * `(βᵏ)ᵀ αᵏ = −(A Q̂)ᵀ`, solved column by column.
//!
//! In time-varying mode row `j` of G carries `A_j, B_j`, so
//! `Yₖ = Aₖ Q̂ₖ₋₁ Aₖᵀ`, `Zₖ = Bₖ R̂ₖ Bₖᵀ` and the right-hand side of the
//! αᵏ system is `−(Aₖ₊₁ Q̂ₖ)ᵀ`.

use std::io::{Read, Write};

use crate::dense::{self, DenseMatrix, FlopCounter, FlopTally};
use crate::error::{Error, Result};
use crate::problem::{Bounds, Formulation, Mode, MpcProblem};

/// Precomputed inverses of the shifted weights, bypassing in-place inversion.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightInverses {
    /// `(Q_j + ρI)⁻¹`: one entry (LTI) or one per step `j ∈ 1..N` (LTV, `N−1` entries).
    pub qhat: Vec<DenseMatrix>,
    /// `(R_j + ρI)⁻¹`: one entry (LTI) or `N` entries (LTV).
    pub rhat: Vec<DenseMatrix>,
    /// `(T + ρI)⁻¹`; ignored with a terminal equality constraint.
    pub that: Option<DenseMatrix>,
}

/// Diagonal-band ingredients of W.
///
/// In LTI mode every sequence holds a single matrix that is reused along the
/// horizon. Buffers are reused across [`BandTerms::compute`] calls.
#[derive(Debug, Clone, Default)]
pub struct BandTerms {
    n: usize,
    horizon: usize,
    rho: f64,
    ltv: bool,
    formulation: Option<Formulation>,
    qhat: Vec<DenseMatrix>,
    rhat: Vec<DenseMatrix>,
    that: Option<DenseMatrix>,
    y: Vec<DenseMatrix>,
    z: Vec<DenseMatrix>,
    gamma: Vec<DenseMatrix>,
    offband: Vec<DenseMatrix>,
    yz: DenseMatrix,
    scratch: DenseMatrix,
}

enum InverseSource<'a> {
    Invert,
    Given(&'a WeightInverses),
}

impl BandTerms {
    pub fn new() -> Self {
        Self::default()
    }

    /// Computes the band terms of `p` for penalty `rho`.
    pub fn compute(&mut self, p: &MpcProblem, rho: f64) -> Result<()> {
        self.compute_counted(p, rho, InverseSource::Invert, &mut ())
    }

    /// Same as [`BandTerms::compute`] with caller-supplied `Q̂, R̂, T̂`.
    pub fn compute_with_inverses(&mut self, p: &MpcProblem, rho: f64, inv: &WeightInverses) -> Result<()> {
        self.compute_counted(p, rho, InverseSource::Given(inv), &mut ())
    }

    fn compute_counted<F: FlopCounter>(
        &mut self,
        p: &MpcProblem,
        rho: f64,
        source: InverseSource<'_>,
        f: &mut F,
    ) -> Result<()> {
        if !(rho >= 0.0) {
            return Err(Error::InvalidConfig(format!("rho must be non-negative, got {rho}")));
        }
        check_shapes(p)?;
        let horizon = p.horizon;
        let ltv = p.mode == Mode::Ltv;
        let lax = p.formulation == Formulation::Lax;
        self.n = p.n;
        self.horizon = horizon;
        self.rho = rho;
        self.ltv = ltv;
        self.formulation = Some(p.formulation);

        // Number of distinct matrices per sequence.
        let (n_q, n_r, n_y, n_gamma) = if ltv {
            (horizon - 1, horizon, horizon - 1, horizon)
        } else {
            (1, 1, 1, 3)
        };
        self.qhat.resize_with(n_q, Default::default);
        self.rhat.resize_with(n_r, Default::default);
        self.y.resize_with(n_y, Default::default);
        self.z.resize_with(n_r, Default::default);
        self.offband.resize_with(n_y, Default::default);
        self.gamma.resize_with(n_gamma, Default::default);

        match source {
            InverseSource::Invert => {
                for (i, out) in self.qhat.iter_mut().enumerate() {
                    let q = if ltv { p.q_at(i + 1) } else { &p.q[0] };
                    dense::shifted_spd_inverse(q, rho, out, &mut self.scratch, f)
                        .map_err(|index| Error::InversionFailed { name: "Q", block: i, index })?;
                }
                for (i, out) in self.rhat.iter_mut().enumerate() {
                    let r = if ltv { p.r_at(i + 1) } else { &p.r[0] };
                    dense::shifted_spd_inverse(r, rho, out, &mut self.scratch, f)
                        .map_err(|index| Error::InversionFailed { name: "R", block: i, index })?;
                }
                if lax {
                    let t = p.t.as_ref().ok_or_else(|| {
                        Error::InvalidProblem(vec!["terminal weight T is required".to_string()])
                    })?;
                    let out = self.that.get_or_insert_with(Default::default);
                    dense::shifted_spd_inverse(t, rho, out, &mut self.scratch, f)
                        .map_err(|index| Error::InversionFailed { name: "T", block: 0, index })?;
                }
            }
            InverseSource::Given(inv) => {
                let check = |what, expected: usize, found: usize| {
                    if expected == found {
                        Ok(())
                    } else {
                        Err(Error::DimensionMismatch { what, expected, found })
                    }
                };
                check("supplied Q inverses", n_q, inv.qhat.len())?;
                check("supplied R inverses", n_r, inv.rhat.len())?;
                for (out, given) in self.qhat.iter_mut().zip(&inv.qhat) {
                    check("supplied Q inverse size", p.n, given.rows())?;
                    out.copy_from(given);
                }
                for (out, given) in self.rhat.iter_mut().zip(&inv.rhat) {
                    check("supplied R inverse size", p.m, given.rows())?;
                    out.copy_from(given);
                }
                if lax {
                    let given = inv.that.as_ref().ok_or_else(|| {
                        Error::InvalidProblem(vec!["supplied T inverse is required".to_string()])
                    })?;
                    self.that.get_or_insert_with(Default::default).copy_from(given);
                }
            }
        }

        // Z_j = B_j R̂_j B_jᵀ
        for (i, out) in self.z.iter_mut().enumerate() {
            let b = if ltv { p.b_at(i + 1) } else { &p.b[0] };
            dense::congruence(b, &self.rhat[i], &mut self.scratch, out, f);
        }
        // A_{k+1} Q̂_k, then Y_{k+1} = (A_{k+1} Q̂_k) A_{k+1}ᵀ
        for i in 0..n_y {
            let a = if ltv { p.a_at(i + 2) } else { &p.a[0] };
            dense::gemm(a, &self.qhat[i], &mut self.offband[i], f);
            dense::gemm_nt(&self.offband[i], a, &mut self.y[i], f);
        }

        if ltv {
            dense::add_into(&self.z[0], &self.qhat[0], &mut self.gamma[0], f);
            for k in 2..=horizon {
                dense::add_into(&self.y[k - 2], &self.z[k - 1], &mut self.yz, f);
                let last = &mut self.gamma[k - 1];
                if k < horizon {
                    dense::add_into(&self.yz, &self.qhat[k - 1], last, f);
                } else if let Some(that) = self.that.as_ref().filter(|_| lax) {
                    dense::add_into(&self.yz, that, last, f);
                } else {
                    last.copy_from(&self.yz);
                }
            }
        } else {
            dense::add_into(&self.z[0], &self.qhat[0], &mut self.gamma[0], f);
            dense::add_into(&self.y[0], &self.z[0], &mut self.yz, f);
            dense::add_into(&self.yz, &self.qhat[0], &mut self.gamma[1], f);
            if let Some(that) = self.that.as_ref().filter(|_| lax) {
                dense::add_into(&self.yz, that, &mut self.gamma[2], f);
            } else {
                self.gamma[2].copy_from(&self.yz);
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// `Q̂_j`, `j ∈ 1..N`.
    pub fn qhat(&self, j: usize) -> &DenseMatrix {
        &self.qhat[if self.ltv { j - 1 } else { 0 }]
    }

    /// `R̂_j`, `j ∈ 1..=N`.
    pub fn rhat(&self, j: usize) -> &DenseMatrix {
        &self.rhat[if self.ltv { j - 1 } else { 0 }]
    }

    pub fn that(&self) -> Option<&DenseMatrix> {
        self.that.as_ref().filter(|_| self.formulation == Some(Formulation::Lax))
    }

    /// `Y_j = A_j Q̂_{j−1} A_jᵀ`, `j ∈ 2..=N`.
    pub fn y(&self, j: usize) -> &DenseMatrix {
        &self.y[if self.ltv { j - 2 } else { 0 }]
    }

    /// `Z_j = B_j R̂_j B_jᵀ`, `j ∈ 1..=N`.
    pub fn z(&self, j: usize) -> &DenseMatrix {
        &self.z[if self.ltv { j - 1 } else { 0 }]
    }

    /// Diagonal-band aggregate `Γᵏ`, `k ∈ 1..=N`.
    pub fn gamma(&self, k: usize) -> &DenseMatrix {
        debug_assert!((1..=self.horizon).contains(&k));
        if self.ltv {
            &self.gamma[k - 1]
        } else if k == 1 {
            &self.gamma[0]
        } else if k == self.horizon {
            &self.gamma[2]
        } else {
            &self.gamma[1]
        }
    }

    /// `A_{k+1} Q̂_k`, whose negated transpose is the right-hand side of the αᵏ system.
    pub fn offband(&self, k: usize) -> &DenseMatrix {
        debug_assert!((1..self.horizon).contains(&k));
        &self.offband[if self.ltv { k - 1 } else { 0 }]
    }
}

fn check_shapes(p: &MpcProblem) -> Result<()> {
    let expected = match p.mode {
        Mode::Lti => 1,
        Mode::Ltv => p.horizon,
    };
    if p.horizon < 2 || p.n == 0 || p.m == 0 {
        return Err(Error::InvalidProblem(vec![format!(
            "need n, m >= 1 and N >= 2, got n={}, m={}, N={}",
            p.n, p.m, p.horizon
        )]));
    }
    for (what, seq) in [("A sequence", &p.a), ("B sequence", &p.b), ("Q sequence", &p.q), ("R sequence", &p.r)] {
        if seq.len() != expected {
            return Err(Error::DimensionMismatch { what, expected, found: seq.len() });
        }
    }
    let shape_ok = p.a.iter().all(|a| a.shape() == (p.n, p.n))
        && p.b.iter().all(|b| b.shape() == (p.n, p.m))
        && p.q.iter().all(|q| q.shape() == (p.n, p.n))
        && p.r.iter().all(|r| r.shape() == (p.m, p.m))
        && p.t.as_ref().is_none_or(|t| t.shape() == (p.n, p.n));
    if !shape_ok {
        return Err(Error::InvalidProblem(p.validate()));
    }
    Ok(())
}

/// Index of `(i, j)`, `i ≤ j`, in row-major packed upper-triangular storage.
#[inline(always)]
pub fn packed_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i <= j && j < n);
    i * (2 * n - i + 1) / 2 + (j - i)
}

#[inline(always)]
fn packed_len(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Correction term `γᵏ_{ij}` (0-based `i ≤ j`):
/// `Σ_{l<i} βᵏ_{li} βᵏ_{lj} + Σ_q αᵏ⁻¹_{qi} αᵏ⁻¹_{qj}`.
///
/// `beta_k` is the packed block in progress (rows `< i` complete) and
/// `alpha_prev` the dense row-major `αᵏ⁻¹`, `None` for `k = 1` (α⁰ = 0).
#[inline]
pub fn gamma_entry(beta_k: &[f64], alpha_prev: Option<&[f64]>, n: usize, i: usize, j: usize) -> f64 {
    debug_assert!(i <= j && j < n);
    let mut s = 0.0;
    for l in 0..i {
        s += beta_k[packed_index(n, l, i)] * beta_k[packed_index(n, l, j)];
    }
    if let Some(alpha) = alpha_prev {
        for q in 0..n {
            s += alpha[q * n + i] * alpha[q * n + j];
        }
    }
    s
}

/// Non-zero blocks of the banded Cholesky factor `W_c`.
#[derive(Debug, Clone, PartialEq)]
pub struct BandedCholesky {
    n: usize,
    horizon: usize,
    rho: Option<f64>,
    /// `N` packed upper-triangular blocks.
    beta: Vec<f64>,
    /// `N−1` dense row-major blocks.
    alpha: Vec<f64>,
}

impl BandedCholesky {
    /// Zeroed buffer for the given shape.
    pub fn new(n: usize, horizon: usize) -> Self {
        let mut c = Self {
            n: 0,
            horizon: 0,
            rho: None,
            beta: Vec::new(),
            alpha: Vec::new(),
        };
        c.reset(n, horizon);
        c
    }

    fn reset(&mut self, n: usize, horizon: usize) {
        self.n = n;
        self.horizon = horizon;
        self.beta.resize(horizon * packed_len(n), 0.0);
        self.alpha.resize(horizon.saturating_sub(1) * n * n, 0.0);
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Penalty the factor was built with; unknown for a factor read from a dump.
    pub fn rho(&self) -> Option<f64> {
        self.rho
    }

    pub fn dim(&self) -> usize {
        self.n * self.horizon
    }

    /// Packed `βᵏ`, `k ∈ 1..=N`.
    pub fn beta(&self, k: usize) -> &[f64] {
        let len = packed_len(self.n);
        &self.beta[(k - 1) * len..k * len]
    }

    /// Row-major `αᵏ`, `k ∈ 1..N`.
    pub fn alpha(&self, k: usize) -> &[f64] {
        let len = self.n * self.n;
        &self.alpha[(k - 1) * len..k * len]
    }

    pub fn beta_dense(&self, k: usize) -> DenseMatrix {
        let n = self.n;
        let packed = self.beta(k);
        let mut out = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                out[(i, j)] = packed[packed_index(n, i, j)];
            }
        }
        out
    }

    pub fn alpha_dense(&self, k: usize) -> DenseMatrix {
        DenseMatrix::from_row_slice(self.n, self.n, self.alpha(k))
    }

    /// Dense `W_c`.
    pub fn assemble(&self) -> DenseMatrix {
        let (n, horizon) = (self.n, self.horizon);
        let mut wc = DenseMatrix::zeros(n * horizon, n * horizon);
        for k in 1..=horizon {
            wc.set_block((k - 1) * n, (k - 1) * n, &self.beta_dense(k));
            if k < horizon {
                wc.set_block((k - 1) * n, k * n, &self.alpha_dense(k));
            }
        }
        wc
    }

    /// Solves `W z = d` in place: `W_cᵀ y = d` forward, then `W_c z = y` backward.
    pub fn solve_in_place(&self, d: &mut [f64]) {
        let (n, horizon) = (self.n, self.horizon);
        debug_assert_eq!(d.len(), n * horizon);
        for k in 1..=horizon {
            let (head, tail) = d.split_at_mut((k - 1) * n);
            let yk = &mut tail[..n];
            if k > 1 {
                let prev = &head[(k - 2) * n..];
                let alpha = self.alpha(k - 1);
                for (i, yi) in yk.iter_mut().enumerate() {
                    let mut s = 0.0;
                    for q in 0..n {
                        s += alpha[q * n + i] * prev[q];
                    }
                    *yi -= s;
                }
            }
            let beta = self.beta(k);
            for i in 0..n {
                let mut s = yk[i];
                for l in 0..i {
                    s -= beta[packed_index(n, l, i)] * yk[l];
                }
                yk[i] = s / beta[packed_index(n, i, i)];
            }
        }
        for k in (1..=horizon).rev() {
            let (head, tail) = d.split_at_mut(k * n);
            let zk = &mut head[(k - 1) * n..];
            if k < horizon {
                let next = &tail[..n];
                let alpha = self.alpha(k);
                for (i, zi) in zk.iter_mut().enumerate() {
                    *zi -= dense::dot(&alpha[i * n..(i + 1) * n], next);
                }
            }
            let beta = self.beta(k);
            for i in (0..n).rev() {
                let mut s = zk[i];
                for j in i + 1..n {
                    s -= beta[packed_index(n, i, j)] * zk[j];
                }
                zk[i] = s / beta[packed_index(n, i, i)];
            }
        }
    }

    /// Returns the solution of `W z = d`.
    pub fn solve(&self, d: &[f64]) -> Result<Vec<f64>> {
        if d.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                what: "right-hand side length",
                expected: self.dim(),
                found: d.len(),
            });
        }
        let mut z = d.to_vec();
        self.solve_in_place(&mut z);
        Ok(z)
    }

    /// Binary dump: `n`, `N` as little-endian u64, then the β blocks packed
    /// upper-triangular row-major, then the α blocks row-major, all as little-endian f64.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(&(self.n as u64).to_le_bytes())?;
        w.write_all(&(self.horizon as u64).to_le_bytes())?;
        for v in self.beta.iter().chain(&self.alpha) {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut word = [0u8; 8];
        let mut read_u64 = |r: &mut R| -> Result<u64> {
            r.read_exact(&mut word)?;
            Ok(u64::from_le_bytes(word))
        };
        let n = read_u64(&mut r)? as usize;
        let horizon = read_u64(&mut r)? as usize;
        if n == 0 || horizon == 0 || n > 1 << 16 || horizon > 1 << 24 {
            return Err(Error::Parse(format!("implausible factor header n={n}, N={horizon}")));
        }
        let mut c = Self::new(n, horizon);
        for v in c.beta.iter_mut().chain(c.alpha.iter_mut()) {
            r.read_exact(&mut word)?;
            *v = f64::from_le_bytes(word);
        }
        Ok(c)
    }
}

/// Runs the block recursion over precomputed band terms, writing into `out`.
pub fn factor_into(terms: &BandTerms, out: &mut BandedCholesky) -> Result<()> {
    factor_counted(terms, out, &mut ())
}

fn factor_counted<F: FlopCounter>(terms: &BandTerms, out: &mut BandedCholesky, f: &mut F) -> Result<()> {
    let (n, horizon) = (terms.n, terms.horizon);
    out.reset(n, horizon);
    out.rho = Some(terms.rho);
    let blen = packed_len(n);
    let alen = n * n;

    for k in 1..=horizon {
        let gamma = terms.gamma(k);
        let max_diag = (0..n).fold(0.0_f64, |m, i| m.max(gamma[(i, i)]));
        let pivot_tol = 1e-12 * max_diag;

        let (alpha_done, alpha_rest) = out.alpha.split_at_mut((k - 1) * alen);
        let alpha_prev = (k > 1).then(|| &alpha_done[(k - 2) * alen..]);
        let beta = &mut out.beta[(k - 1) * blen..k * blen];
        let alpha_cost = if k > 1 { n as u64 } else { 0 };

        for i in 0..n {
            let d = gamma[(i, i)] - gamma_entry(beta, alpha_prev, n, i, i);
            if !(d > pivot_tol) {
                return Err(Error::NonPositivePivot { block: k, index: i });
            }
            let piv = d.sqrt();
            beta[packed_index(n, i, i)] = piv;
            f.add(i as u64 + alpha_cost + 2);
            for j in i + 1..n {
                beta[packed_index(n, i, j)] = (gamma[(i, j)] - gamma_entry(beta, alpha_prev, n, i, j)) / piv;
                f.add(i as u64 + alpha_cost + 2);
            }
        }

        if k < horizon {
            // (βᵏ)ᵀ αᵏ = −(A Q̂)ᵀ, one lower-triangular forward solve per column.
            let rhs = terms.offband(k);
            let alpha = &mut alpha_rest[..alen];
            let beta = &out.beta[(k - 1) * blen..k * blen];
            for j in 0..n {
                for i in 0..n {
                    let mut s = -rhs[(j, i)];
                    for l in 0..i {
                        s -= beta[packed_index(n, l, i)] * alpha[l * n + j];
                    }
                    alpha[i * n + j] = s / beta[packed_index(n, i, i)];
                    f.add(i as u64 + 1);
                }
            }
        }
    }
    Ok(())
}

/// Factors `W` for problem `p` and penalty `rho`.
pub fn factor(p: &MpcProblem, rho: f64) -> Result<BandedCholesky> {
    let mut terms = BandTerms::new();
    terms.compute(p, rho)?;
    let mut out = BandedCholesky::new(p.n, p.horizon);
    factor_into(&terms, &mut out)?;
    Ok(out)
}

/// Band terms and factor buffers for repeated online updates.
#[derive(Debug, Clone, Default)]
pub struct Refactorizer {
    terms: BandTerms,
    chol: Option<BandedCholesky>,
}

impl Refactorizer {
    pub fn new() -> Self {
        Self::default()
    }

    /// Recomputes the factor for new problem data, reusing all buffers.
    pub fn update(&mut self, p: &MpcProblem, rho: f64) -> Result<&BandedCholesky> {
        self.terms.compute(p, rho)?;
        let chol = self.chol.get_or_insert_with(|| BandedCholesky::new(p.n, p.horizon));
        factor_into(&self.terms, chol)?;
        Ok(chol)
    }

    pub fn terms(&self) -> &BandTerms {
        &self.terms
    }

    pub fn factor(&self) -> Option<&BandedCholesky> {
        self.chol.as_ref()
    }
}

/// Floating-point operations (multiply-adds, additions, divisions and square
/// roots, one unit each) spent by band-term computation plus the block
/// recursion, counted during a real run on dense weights.
pub fn flop_count(n: usize, m: usize, horizon: usize, mode: Mode) -> u64 {
    let p = flop_probe_problem(n, m, horizon, mode);
    let mut tally = FlopTally::default();
    let mut terms = BandTerms::new();
    terms
        .compute_counted(&p, 0.0, InverseSource::Invert, &mut tally)
        .expect("probe problem has positive definite weights");
    let mut chol = BandedCholesky::new(n, horizon);
    factor_counted(&terms, &mut chol, &mut tally).expect("probe problem yields positive definite W");
    tally.0
}

fn flop_probe_problem(n: usize, m: usize, horizon: usize, mode: Mode) -> MpcProblem {
    let dense_spd = |d: usize| {
        let mut w = DenseMatrix::identity(d).scale(2.0);
        for i in 0..d {
            for j in 0..d {
                if i != j {
                    w[(i, j)] = 0.5 / (1 + i + j) as f64;
                }
            }
        }
        w
    };
    let mut a = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            a[(i, j)] = if i == j { 0.9 } else { 0.1 / (1 + i + 2 * j) as f64 };
        }
    }
    let mut b = DenseMatrix::zeros(n, m);
    for i in 0..n {
        for j in 0..m {
            b[(i, j)] = 1.0 / (1 + i + j) as f64;
        }
    }
    let bounds = Bounds::symmetric(n, m, 1.0, 1.0, horizon);
    let t = Some(dense_spd(n).scale(3.0));
    match mode {
        Mode::Lti => MpcProblem::lti(a, b, dense_spd(n), dense_spd(m), t, horizon, bounds, Formulation::Lax),
        Mode::Ltv => MpcProblem::ltv(
            vec![a; horizon],
            vec![b; horizon],
            vec![dense_spd(n); horizon],
            vec![dense_spd(m); horizon],
            t,
            horizon,
            bounds,
            Formulation::Lax,
        ),
    }
}
