//! First-order solvers for `min ½zᵀHz + qᵀz  s.t. Gz = b, z_lb ≤ z ≤ z_ub`.
//!
//! ADMM splits `z = v` with the box on `v` and keeps `Gz = b` in the
//! z-subproblem, so every iteration solves one system with
//! `W = G (H + ρI)⁻¹ Gᵀ`. FISTA runs accelerated ascent on the dual of
//! `Gz = b` and needs a diagonal H so the inner box-constrained minimization
//! is a clamp.

use serde::{Deserialize, Serialize};

use crate::dense::{dot, norm_inf};
use crate::error::{Error, Result};
use crate::factor::BandedCholesky;
use crate::qp::QpStructure;

/// A factored `W` that can solve `W x = d`.
pub trait LinearSystem {
    fn dim(&self) -> usize;

    /// Penalty the factor was built with, when known.
    fn rho(&self) -> Option<f64> {
        None
    }

    fn solve_in_place(&self, d: &mut [f64]);
}

impl LinearSystem for BandedCholesky {
    fn dim(&self) -> usize {
        BandedCholesky::dim(self)
    }

    fn rho(&self) -> Option<f64> {
        BandedCholesky::rho(self)
    }

    fn solve_in_place(&self, d: &mut [f64]) {
        BandedCholesky::solve_in_place(self, d)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// ADMM penalty.
    pub rho: f64,
    pub eps_primal: f64,
    pub eps_dual: f64,
    pub max_iters: usize,
    /// Use the `warm` argument when one is passed.
    pub warm_start: bool,
    /// Gradient-based momentum restart for FISTA.
    pub fista_restart: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            rho: 0.01,
            eps_primal: 1e-6,
            eps_dual: 1e-6,
            max_iters: 10_000,
            warm_start: true,
            fista_restart: true,
        }
    }
}

impl SolverConfig {
    fn check(&self, needs_rho: bool) -> Result<()> {
        if needs_rho && !(self.rho > 0.0) {
            return Err(Error::InvalidConfig(format!("rho must be positive, got {}", self.rho)));
        }
        if !(self.eps_primal > 0.0 && self.eps_dual > 0.0) {
            return Err(Error::InvalidConfig("tolerances must be positive".to_string()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Converged,
    MaxIters,
    /// Iterates became non-finite.
    InfeasibleSuspected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    #[default]
    Admm,
    Fista,
}

impl SolverKind {
    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Admm => "admm",
            SolverKind::Fista => "fista",
        }
    }

    /// Penalty the factor must be built with: `cfg.rho` for ADMM, 0 for FISTA.
    pub fn factor_rho(self, cfg: &SolverConfig) -> f64 {
        match self {
            SolverKind::Admm => cfg.rho,
            SolverKind::Fista => 0.0,
        }
    }

    /// Runs the solver. FISTA ignores `w`.
    pub fn solve<Q, S>(self, qp: &Q, w: &S, cfg: &SolverConfig, warm: Option<&SolverResult>) -> Result<SolverResult>
    where
        Q: QpStructure + ?Sized,
        S: LinearSystem + ?Sized,
    {
        match self {
            SolverKind::Admm => admm_solve(qp, w, cfg, warm),
            SolverKind::Fista => fista_solve(qp, cfg, warm),
        }
    }
}

impl std::str::FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "admm" => Ok(SolverKind::Admm),
            "fista" => Ok(SolverKind::Fista),
            _ => Err(Error::InvalidConfig(format!("unknown solver `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverResult {
    pub z: Vec<f64>,
    /// Box-projected copy of z (ADMM); equals z for FISTA.
    pub v: Vec<f64>,
    /// Box multipliers, positive at an upper bound.
    pub lambda: Vec<f64>,
    /// Equality multipliers.
    pub mu: Vec<f64>,
    pub iterations: usize,
    pub r_primal: f64,
    pub r_dual: f64,
    pub status: Status,
}

impl SolverResult {
    pub fn converged(&self) -> bool {
        self.status == Status::Converged
    }

    pub fn kkt(&self, qp: &impl QpStructure) -> KktResiduals {
        kkt_residuals(qp, &self.z, &self.lambda, &self.mu)
    }
}

fn check_len(what: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { what, expected, found })
    }
}

#[inline]
fn clamp(x: f64, lo: f64, hi: f64) -> f64 {
    x.max(lo).min(hi)
}

/// ADMM with the linear-system step handled by `w`, which must factor
/// `G (H + cfg.rho·I)⁻¹ Gᵀ` for this QP.
pub fn admm_solve<Q, S>(qp: &Q, w: &S, cfg: &SolverConfig, warm: Option<&SolverResult>) -> Result<SolverResult>
where
    Q: QpStructure + ?Sized,
    S: LinearSystem + ?Sized,
{
    cfg.check(true)?;
    let (n_z, n_eq) = (qp.n_z(), qp.n_eq());
    check_len("factor dimension", n_eq, w.dim())?;
    if let Some(rho) = w.rho() {
        if rho != cfg.rho {
            return Err(Error::RhoMismatch {
                factor: rho,
                config: cfg.rho,
            });
        }
    }
    let rho = cfg.rho;
    let (q, b, lb, ub) = (qp.q(), qp.b(), qp.z_lb(), qp.z_ub());
    let hinv = qp.shifted_h_inverse(rho)?;

    let (mut v, mut lam) = match warm.filter(|_| cfg.warm_start) {
        Some(ws) => {
            check_len("warm-start v", n_z, ws.v.len())?;
            check_len("warm-start lambda", n_z, ws.lambda.len())?;
            (ws.v.clone(), ws.lambda.clone())
        }
        None => ((0..n_z).map(|i| clamp(0.0, lb[i], ub[i])).collect(), vec![0.0; n_z]),
    };

    let mut rhs = vec![0.0; n_z];
    let mut t = vec![0.0; n_z];
    let mut tmp = vec![0.0; n_z];
    let mut z = vec![0.0; n_z];
    let mut mu = vec![0.0; n_eq];

    let mut r_primal = f64::INFINITY;
    let mut r_dual = f64::INFINITY;
    let mut status = Status::MaxIters;
    let mut iterations = 0;

    while iterations < cfg.max_iters {
        iterations += 1;

        // Equality-constrained proximal step.
        for i in 0..n_z {
            rhs[i] = rho * v[i] - lam[i] - q[i];
        }
        hinv.apply(&rhs, &mut t);
        qp.g_mul(&t, &mut mu);
        for (mi, bi) in mu.iter_mut().zip(b) {
            *mi -= bi;
        }
        w.solve_in_place(&mut mu);
        qp.gt_mul(&mu, &mut rhs);
        hinv.apply(&rhs, &mut tmp);
        for i in 0..n_z {
            z[i] = t[i] - tmp[i];
        }

        // Projection and multiplier update.
        r_primal = 0.0;
        r_dual = 0.0;
        for i in 0..n_z {
            let vn = clamp(z[i] + lam[i] / rho, lb[i], ub[i]);
            lam[i] += rho * (z[i] - vn);
            r_primal = f64::max(r_primal, (z[i] - vn).abs());
            r_dual = f64::max(r_dual, rho * (vn - v[i]).abs());
            v[i] = vn;
        }

        if !(r_primal.is_finite() && r_dual.is_finite()) {
            status = Status::InfeasibleSuspected;
            break;
        }
        if r_primal <= cfg.eps_primal && r_dual <= cfg.eps_dual {
            status = Status::Converged;
            break;
        }
    }

    Ok(SolverResult {
        z,
        v,
        lambda: lam,
        mu,
        iterations,
        r_primal,
        r_dual,
        status,
    })
}

/// Largest eigenvalue of `G diag(h_inv) Gᵀ` by power iteration, using only
/// structured products.
pub fn dual_lipschitz(qp: &(impl QpStructure + ?Sized), h_inv: &[f64]) -> f64 {
    const MAX_ITERS: usize = 50;
    const REL_TOL: f64 = 1e-4;
    let n_eq = qp.n_eq();
    if n_eq == 0 {
        return 1.0;
    }
    let mut x: Vec<f64> = (0..n_eq).map(|i| 1.0 + (i as f64 * 0.618_033_988_749_895).fract()).collect();
    let norm = dot(&x, &x).sqrt();
    x.iter_mut().for_each(|v| *v /= norm);
    let mut tmp = vec![0.0; qp.n_z()];
    let mut y = vec![0.0; n_eq];
    let mut estimate = 0.0;
    for _ in 0..MAX_ITERS {
        qp.gt_mul(&x, &mut tmp);
        for (t, hi) in tmp.iter_mut().zip(h_inv) {
            *t *= hi;
        }
        qp.g_mul(&tmp, &mut y);
        let next = dot(&y, &y).sqrt();
        if next == 0.0 {
            break;
        }
        for (xi, yi) in x.iter_mut().zip(&y) {
            *xi = yi / next;
        }
        let done = (next - estimate).abs() <= REL_TOL * next;
        estimate = next;
        if done {
            break;
        }
    }
    if estimate > 0.0 {
        estimate
    } else {
        1.0
    }
}

/// Accelerated dual ascent with step `1/L`, `L = 1.05 · λ_max(G H⁻¹ Gᵀ)`.
pub fn fista_solve<Q>(qp: &Q, cfg: &SolverConfig, warm: Option<&SolverResult>) -> Result<SolverResult>
where
    Q: QpStructure + ?Sized,
{
    cfg.check(false)?;
    let h = qp.h_diagonal().ok_or(Error::NonDiagonalH)?;
    if h.iter().any(|&d| !(d > 0.0)) {
        return Err(Error::NonDiagonalH);
    }
    let h_inv: Vec<f64> = h.iter().map(|d| 1.0 / d).collect();
    let (n_z, n_eq) = (qp.n_z(), qp.n_eq());
    let (q, b, lb, ub) = (qp.q(), qp.b(), qp.z_lb(), qp.z_ub());
    let step = 1.0 / (1.05 * dual_lipschitz(qp, &h_inv));

    let mut lam = match warm.filter(|_| cfg.warm_start) {
        Some(ws) => {
            check_len("warm-start mu", n_eq, ws.mu.len())?;
            ws.mu.clone()
        }
        None => vec![0.0; n_eq],
    };
    let mut y = lam.clone();
    let mut t = 1.0_f64;
    let mut z = vec![0.0; n_z];
    let mut gty = vec![0.0; n_z];
    let mut grad = vec![0.0; n_eq];
    let mut lam_next = vec![0.0; n_eq];

    let mut status = Status::MaxIters;
    let mut r_primal = f64::INFINITY;
    let mut iterations = 0;

    while iterations < cfg.max_iters {
        iterations += 1;
        qp.gt_mul(&y, &mut gty);
        for i in 0..n_z {
            z[i] = clamp(-(q[i] + gty[i]) * h_inv[i], lb[i], ub[i]);
        }
        qp.g_mul(&z, &mut grad);
        for (g, bi) in grad.iter_mut().zip(b) {
            *g -= bi;
        }
        r_primal = norm_inf(&grad);
        if !r_primal.is_finite() {
            status = Status::InfeasibleSuspected;
            break;
        }
        if r_primal <= cfg.eps_primal {
            status = Status::Converged;
            break;
        }

        for i in 0..n_eq {
            lam_next[i] = y[i] + step * grad[i];
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let restart = cfg.fista_restart
            && grad.iter().zip(&lam_next).zip(&lam).map(|((g, a), b)| g * (a - b)).sum::<f64>() < 0.0;
        if restart {
            y.copy_from_slice(&lam_next);
            t = 1.0;
        } else {
            let beta = (t - 1.0) / t_next;
            for i in 0..n_eq {
                y[i] = lam_next[i] + beta * (lam_next[i] - lam[i]);
            }
            t = t_next;
        }
        std::mem::swap(&mut lam, &mut lam_next);
    }

    // z minimizes the Lagrangian at y exactly, so stationarity holds with these box multipliers.
    let mut hz = vec![0.0; n_z];
    qp.h_mul(&z, &mut hz);
    qp.gt_mul(&y, &mut gty);
    let box_mult = (0..n_z).map(|i| -(hz[i] + q[i] + gty[i])).collect();
    Ok(SolverResult {
        v: z.clone(),
        z,
        lambda: box_mult,
        mu: y,
        iterations,
        r_primal,
        r_dual: 0.0,
        status,
    })
}

/// ∞-norm residuals of the QP optimality conditions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KktResiduals {
    /// `‖Hz + q + Gᵀμ + λ‖∞`
    pub stationarity: f64,
    /// `‖Gz − b‖∞`
    pub eq_feas: f64,
    /// Largest bound violation of z.
    pub box_feas: f64,
    /// Largest `min(|λᵢ|, distance to the bound λᵢ's sign selects)`.
    pub complementarity: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.stationarity.max(self.eq_feas).max(self.box_feas).max(self.complementarity)
    }
}

pub fn kkt_residuals(qp: &(impl QpStructure + ?Sized), z: &[f64], box_mult: &[f64], eq_mult: &[f64]) -> KktResiduals {
    let (n_z, n_eq) = (qp.n_z(), qp.n_eq());
    assert_eq!(z.len(), n_z, "z length");
    assert_eq!(box_mult.len(), n_z, "box multiplier length");
    assert_eq!(eq_mult.len(), n_eq, "equality multiplier length");
    let (q, lb, ub) = (qp.q(), qp.z_lb(), qp.z_ub());

    let mut hz = vec![0.0; n_z];
    let mut gtm = vec![0.0; n_z];
    qp.h_mul(z, &mut hz);
    qp.gt_mul(eq_mult, &mut gtm);
    let stationarity = (0..n_z).fold(0.0_f64, |m, i| m.max((hz[i] + q[i] + gtm[i] + box_mult[i]).abs()));

    let mut gz = vec![0.0; n_eq];
    qp.g_mul(z, &mut gz);
    let eq_feas = gz.iter().zip(qp.b()).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));

    let box_feas = (0..n_z).fold(0.0_f64, |m, i| m.max(lb[i] - z[i]).max(z[i] - ub[i]));
    let complementarity = (0..n_z).fold(0.0_f64, |m, i| {
        let l = box_mult[i];
        let c = if l > 0.0 {
            l.min((ub[i] - z[i]).abs())
        } else if l < 0.0 {
            (-l).min((z[i] - lb[i]).abs())
        } else {
            0.0
        };
        m.max(c)
    });
    KktResiduals {
        stationarity,
        eq_feas,
        box_feas,
        complementarity,
    }
}
