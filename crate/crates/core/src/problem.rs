//! MPC problem data and its condensation into the banded canonical QP.
//!
//! Decision vector layout (Lax): `z = (u₀, x₁, u₁, …, x_{N−1}, u_{N−1}, x_N)`.
//! With a terminal equality constraint `x_N` is eliminated and the last
//! dynamics row becomes `A_N x_{N−1} + B_N u_{N−1} = x_r`.
//!
//! Time-varying data is indexed by constraint row: row `j ∈ 1..=N` reads
//! `x_j = A_j x_{j−1} + B_j u_{j−1}`, `Q_j` weights `x_j` and `R_j` weights
//! `u_{j−1}`. The terminal state is weighted by `T`, so `Q_N` is never used.

use serde::{Deserialize, Serialize};

use crate::dense::{self, DenseMatrix};
use crate::error::{Error, Result};
use crate::oracle;
use crate::qp::{BlockDiag, DenseQp, QpStructure};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Formulation {
    /// Terminal cost `‖x_N − x_r‖²_T`.
    Lax,
    /// Terminal equality `x_N = x_r`, no terminal cost.
    #[serde(alias = "equ")]
    TerminalEquality,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Lti,
    Ltv,
}

/// Per-step box bounds. `x_*[j−1]` bounds `x_j` (`j ∈ 1..=N`), `u_*[j]` bounds `u_j` (`j ∈ 0..N`).
#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    pub x_lb: Vec<Vec<f64>>,
    pub x_ub: Vec<Vec<f64>>,
    pub u_lb: Vec<Vec<f64>>,
    pub u_ub: Vec<Vec<f64>>,
}

impl Bounds {
    /// Replicates one set of bounds over the horizon.
    pub fn constant(x_lb: &[f64], x_ub: &[f64], u_lb: &[f64], u_ub: &[f64], horizon: usize) -> Self {
        Self {
            x_lb: vec![x_lb.to_vec(); horizon],
            x_ub: vec![x_ub.to_vec(); horizon],
            u_lb: vec![u_lb.to_vec(); horizon],
            u_ub: vec![u_ub.to_vec(); horizon],
        }
    }

    /// Symmetric bounds `±x_max`, `±u_max` in every component.
    pub fn symmetric(n: usize, m: usize, x_max: f64, u_max: f64, horizon: usize) -> Self {
        Self::constant(&vec![-x_max; n], &vec![x_max; n], &vec![-u_max; m], &vec![u_max; m], horizon)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MpcProblem {
    pub n: usize,
    pub m: usize,
    pub horizon: usize,
    pub mode: Mode,
    pub formulation: Formulation,
    /// One entry in LTI mode, `horizon` entries in LTV mode.
    pub a: Vec<DenseMatrix>,
    pub b: Vec<DenseMatrix>,
    pub q: Vec<DenseMatrix>,
    pub r: Vec<DenseMatrix>,
    /// Terminal weight; unused with a terminal equality constraint.
    pub t: Option<DenseMatrix>,
    pub bounds: Bounds,
}

impl MpcProblem {
    #[allow(clippy::too_many_arguments)]
    pub fn lti(
        a: DenseMatrix,
        b: DenseMatrix,
        q: DenseMatrix,
        r: DenseMatrix,
        t: Option<DenseMatrix>,
        horizon: usize,
        bounds: Bounds,
        formulation: Formulation,
    ) -> Self {
        Self {
            n: a.rows(),
            m: b.cols(),
            horizon,
            mode: Mode::Lti,
            formulation,
            a: vec![a],
            b: vec![b],
            q: vec![q],
            r: vec![r],
            t,
            bounds,
        }
    }

    #[allow(clippy::too_many_arguments)]
    pub fn ltv(
        a: Vec<DenseMatrix>,
        b: Vec<DenseMatrix>,
        q: Vec<DenseMatrix>,
        r: Vec<DenseMatrix>,
        t: Option<DenseMatrix>,
        horizon: usize,
        bounds: Bounds,
        formulation: Formulation,
    ) -> Self {
        Self {
            n: a.first().map_or(0, DenseMatrix::rows),
            m: b.first().map_or(0, DenseMatrix::cols),
            horizon,
            mode: Mode::Ltv,
            formulation,
            a,
            b,
            q,
            r,
            t,
            bounds,
        }
    }

    #[inline]
    fn seq_index(&self, j: usize) -> usize {
        debug_assert!((1..=self.horizon).contains(&j));
        match self.mode {
            Mode::Lti => 0,
            Mode::Ltv => j - 1,
        }
    }

    /// Model of constraint row `j ∈ 1..=N`.
    #[inline]
    pub fn a_at(&self, j: usize) -> &DenseMatrix {
        &self.a[self.seq_index(j)]
    }

    #[inline]
    pub fn b_at(&self, j: usize) -> &DenseMatrix {
        &self.b[self.seq_index(j)]
    }

    /// Weight of `x_j`.
    #[inline]
    pub fn q_at(&self, j: usize) -> &DenseMatrix {
        &self.q[self.seq_index(j)]
    }

    /// Weight of `u_{j−1}`.
    #[inline]
    pub fn r_at(&self, j: usize) -> &DenseMatrix {
        &self.r[self.seq_index(j)]
    }

    /// Number of decision variables of the condensed QP.
    pub fn n_z(&self) -> usize {
        match self.formulation {
            Formulation::Lax => self.horizon * (self.n + self.m),
            Formulation::TerminalEquality => self.horizon * self.m + (self.horizon - 1) * self.n,
        }
    }

    pub fn n_eq(&self) -> usize {
        self.horizon * self.n
    }

    /// Replaces the prediction model with one held constant along the horizon.
    pub fn set_frozen_model(&mut self, a: &DenseMatrix, b: &DenseMatrix) {
        for m in &mut self.a {
            m.copy_from(a);
        }
        for m in &mut self.b {
            m.copy_from(b);
        }
    }

    /// Replaces the stage weights at every step.
    pub fn set_weights(&mut self, q: &DenseMatrix, r: &DenseMatrix) {
        for m in &mut self.q {
            m.copy_from(q);
        }
        for m in &mut self.r {
            m.copy_from(r);
        }
    }

    /// Lists every violated invariant. Empty when the problem is valid.
    pub fn validate(&self) -> Vec<String> {
        let mut diags = Vec::new();
        let (n, m, horizon) = (self.n, self.m, self.horizon);
        if n == 0 {
            diags.push("state dimension n must be positive".to_string());
        }
        if m == 0 {
            diags.push("input dimension m must be positive".to_string());
        }
        if horizon < 2 {
            diags.push(format!("horizon N must be at least 2, got {horizon}"));
        }
        // Otherwise G has more rows than columns and W is singular.
        if self.formulation == Formulation::TerminalEquality && horizon * m < n {
            diags.push(format!(
                "terminal equality needs N·m ≥ n to reach the terminal state, got N·m = {}, n = {n}",
                horizon * m
            ));
        }

        let expected_len = match self.mode {
            Mode::Lti => 1,
            Mode::Ltv => horizon,
        };
        type Seq<'a> = (&'a str, &'a Vec<DenseMatrix>, (usize, usize), bool);
        let seqs: [Seq; 4] = [
            ("A", &self.a, (n, n), false),
            ("B", &self.b, (n, m), false),
            ("Q", &self.q, (n, n), true),
            ("R", &self.r, (m, m), true),
        ];
        for (name, seq, shape, weight) in seqs {
            if seq.len() != expected_len {
                diags.push(format!(
                    "sequence length mismatch: {name} has {} entries, expected {expected_len}",
                    seq.len()
                ));
            }
            for (i, mat) in seq.iter().enumerate() {
                let label = if seq.len() == 1 { name.to_string() } else { format!("{name}[{i}]") };
                check_matrix(&mut diags, &label, mat, shape, weight);
            }
        }
        match (&self.t, self.formulation) {
            (Some(t), _) => check_matrix(&mut diags, "T", t, (n, n), true),
            (None, Formulation::Lax) => diags.push("terminal weight T is required".to_string()),
            (None, Formulation::TerminalEquality) => {}
        }

        let bnd = &self.bounds;
        for (kind, lb, ub, dim) in [("x", &bnd.x_lb, &bnd.x_ub, n), ("u", &bnd.u_lb, &bnd.u_ub, m)] {
            if lb.len() != horizon || ub.len() != horizon {
                diags.push(format!(
                    "{kind} bounds must have {horizon} steps, got {} lower and {} upper",
                    lb.len(),
                    ub.len()
                ));
                continue;
            }
            for (step, (l, u)) in lb.iter().zip(ub).enumerate() {
                if l.len() != dim || u.len() != dim {
                    diags.push(format!("{kind} bounds at step {step} must have length {dim}"));
                } else if l.iter().zip(u).any(|(l, u)| !(l < u)) {
                    diags.push(format!("{kind} bounds at step {step}: lower bound not below upper bound"));
                }
            }
        }
        diags
    }

    pub fn ensure_valid(&self) -> Result<()> {
        let diags = self.validate();
        if diags.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidProblem(diags))
        }
    }
}

fn check_matrix(diags: &mut Vec<String>, label: &str, mat: &DenseMatrix, shape: (usize, usize), weight: bool) {
    if mat.shape() != shape {
        diags.push(format!(
            "{label} has shape {}x{}, expected {}x{}",
            mat.rows(),
            mat.cols(),
            shape.0,
            shape.1
        ));
        return;
    }
    if !mat.is_finite() {
        diags.push(format!("{label} has non-finite entries"));
        return;
    }
    if weight {
        if !mat.is_symmetric(1e-12) {
            diags.push(format!("{label} not symmetric"));
        } else if oracle::dense_cholesky(mat).is_err() {
            diags.push(format!("{label} not positive definite"));
        }
    }
}

/// Reference pair and current state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferencePair {
    pub x_r: Vec<f64>,
    pub u_r: Vec<f64>,
    pub x0: Vec<f64>,
}

impl ReferencePair {
    pub fn new(x_r: Vec<f64>, u_r: Vec<f64>, x0: Vec<f64>) -> Self {
        Self { x_r, u_r, x0 }
    }

    /// Regulation to the origin from `x0`.
    pub fn regulate(x0: Vec<f64>, m: usize) -> Self {
        Self {
            x_r: vec![0.0; x0.len()],
            u_r: vec![0.0; m],
            x0,
        }
    }

    fn check(&self, n: usize, m: usize) -> Result<()> {
        for (what, expected, found) in [
            ("x_r length", n, self.x_r.len()),
            ("u_r length", m, self.u_r.len()),
            ("x0 length", n, self.x0.len()),
        ] {
            if expected != found {
                return Err(Error::DimensionMismatch { what, expected, found });
            }
        }
        Ok(())
    }
}

/// One block row of the banded equality matrix G.
#[derive(Debug, Clone, PartialEq)]
pub struct GBlockRow {
    /// Multiplies `x_{j−1}`; absent in the first row where `x₀` is data.
    pub a: Option<DenseMatrix>,
    /// Multiplies `u_{j−1}`.
    pub b: DenseMatrix,
    /// Whether `−I` multiplies `x_j` (false for an eliminated terminal state).
    pub neg_identity: bool,
}

/// Condensed QP with blockwise H and G.
#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalQp {
    pub n: usize,
    pub m: usize,
    pub horizon: usize,
    pub formulation: Formulation,
    /// Diagonal blocks of H in decision-vector order: `R, Q, R, …, Q, R[, T]`.
    pub h: BlockDiag,
    pub q: Vec<f64>,
    pub g_rows: Vec<GBlockRow>,
    pub b: Vec<f64>,
    pub z_lb: Vec<f64>,
    pub z_ub: Vec<f64>,
}

impl CanonicalQp {
    /// Offset of `u_j` in z, `j ∈ 0..N`.
    #[inline]
    pub fn u_offset(&self, j: usize) -> usize {
        j * (self.n + self.m)
    }

    /// Offset of `x_j` in z, `j ∈ 1..=N` (`j < N` with a terminal equality).
    #[inline]
    pub fn x_offset(&self, j: usize) -> usize {
        j * (self.n + self.m) - self.n
    }

    /// The first input move `u₀` of a decision vector.
    pub fn first_input<'a>(&self, z: &'a [f64]) -> &'a [f64] {
        &z[..self.m]
    }
}

/// Condenses `p` at reference `r` into the canonical QP.
pub fn build_canonical(p: &MpcProblem, r: &ReferencePair) -> Result<CanonicalQp> {
    p.ensure_valid()?;
    r.check(p.n, p.m)?;
    let (n, m, horizon) = (p.n, p.m, p.horizon);
    let lax = p.formulation == Formulation::Lax;
    let n_z = p.n_z();

    let mut h_blocks = Vec::with_capacity(2 * horizon);
    let mut q = Vec::with_capacity(n_z);
    let mut z_lb = Vec::with_capacity(n_z);
    let mut z_ub = Vec::with_capacity(n_z);
    for j in 1..=horizon {
        let rj = p.r_at(j);
        h_blocks.push(rj.clone());
        q.extend(rj.mat_vec(&r.u_r).into_iter().map(|v| -v));
        z_lb.extend_from_slice(&p.bounds.u_lb[j - 1]);
        z_ub.extend_from_slice(&p.bounds.u_ub[j - 1]);

        let weight = if j < horizon {
            Some(p.q_at(j))
        } else if lax {
            p.t.as_ref()
        } else {
            None
        };
        if let Some(w) = weight {
            h_blocks.push(w.clone());
            q.extend(w.mat_vec(&r.x_r).into_iter().map(|v| -v));
            z_lb.extend_from_slice(&p.bounds.x_lb[j - 1]);
            z_ub.extend_from_slice(&p.bounds.x_ub[j - 1]);
        }
    }

    let mut g_rows = Vec::with_capacity(horizon);
    let mut b = vec![0.0; horizon * n];
    for j in 1..=horizon {
        g_rows.push(GBlockRow {
            a: (j > 1).then(|| p.a_at(j).clone()),
            b: p.b_at(j).clone(),
            neg_identity: lax || j < horizon,
        });
    }
    for (bi, ax) in b[..n].iter_mut().zip(p.a_at(1).mat_vec(&r.x0)) {
        *bi = -ax;
    }
    if !lax {
        b[(horizon - 1) * n..].copy_from_slice(&r.x_r);
    }

    Ok(CanonicalQp {
        n,
        m,
        horizon,
        formulation: p.formulation,
        h: BlockDiag::new(h_blocks),
        q,
        g_rows,
        b,
        z_lb,
        z_ub,
    })
}

impl QpStructure for CanonicalQp {
    fn n_z(&self) -> usize {
        self.q.len()
    }

    fn n_eq(&self) -> usize {
        self.b.len()
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
        self.h.apply(x, out);
    }

    fn g_mul(&self, x: &[f64], out: &mut [f64]) {
        let n = self.n;
        for (idx, row) in self.g_rows.iter().enumerate() {
            let j = idx + 1;
            let o = &mut out[idx * n..(idx + 1) * n];
            let u = &x[self.u_offset(j - 1)..self.u_offset(j - 1) + self.m];
            for (i, oi) in o.iter_mut().enumerate() {
                *oi = dense::dot(row.b.row(i), u);
            }
            if let Some(a) = &row.a {
                let xp = &x[self.x_offset(j - 1)..self.x_offset(j - 1) + n];
                for (i, oi) in o.iter_mut().enumerate() {
                    *oi += dense::dot(a.row(i), xp);
                }
            }
            if row.neg_identity {
                let xj = &x[self.x_offset(j)..self.x_offset(j) + n];
                for (oi, v) in o.iter_mut().zip(xj) {
                    *oi -= v;
                }
            }
        }
    }

    fn gt_mul(&self, y: &[f64], out: &mut [f64]) {
        let (n, m) = (self.n, self.m);
        out.fill(0.0);
        for (idx, row) in self.g_rows.iter().enumerate() {
            let j = idx + 1;
            let yj = &y[idx * n..(idx + 1) * n];
            let uo = self.u_offset(j - 1);
            for (i, &yi) in yj.iter().enumerate() {
                for (o, bik) in out[uo..uo + m].iter_mut().zip(row.b.row(i)) {
                    *o += bik * yi;
                }
            }
            if let Some(a) = &row.a {
                let xo = self.x_offset(j - 1);
                for (i, &yi) in yj.iter().enumerate() {
                    for (o, aik) in out[xo..xo + n].iter_mut().zip(a.row(i)) {
                        *o += aik * yi;
                    }
                }
            }
            if row.neg_identity {
                let xo = self.x_offset(j);
                for (o, yi) in out[xo..xo + n].iter_mut().zip(yj) {
                    *o -= yi;
                }
            }
        }
    }

    fn shifted_h_inverse(&self, rho: f64) -> Result<BlockDiag> {
        self.h.shifted_inverse(rho, "H")
    }

    fn h_diagonal(&self) -> Option<Vec<f64>> {
        self.h.diagonal()
    }

    fn to_dense(&self) -> DenseQp {
        let (n_z, n_eq, n) = (self.n_z(), self.n_eq(), self.n);
        let mut g = DenseMatrix::zeros(n_eq, n_z);
        for (idx, row) in self.g_rows.iter().enumerate() {
            let j = idx + 1;
            g.set_block(idx * n, self.u_offset(j - 1), &row.b);
            if let Some(a) = &row.a {
                g.set_block(idx * n, self.x_offset(j - 1), a);
            }
            if row.neg_identity {
                g.set_block(idx * n, self.x_offset(j), &DenseMatrix::identity(n).scale(-1.0));
            }
        }
        DenseQp {
            h: self.h.to_dense(),
            q: self.q.clone(),
            g,
            b: self.b.clone(),
            z_lb: self.z_lb.clone(),
            z_ub: self.z_ub.clone(),
        }
    }
}
