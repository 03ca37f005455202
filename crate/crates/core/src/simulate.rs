//! Closed-loop receding-horizon simulation.
//!
//! Each sample: ask the plant for its current model, refactor only if the
//! model or the weights changed, run a warm-started solve, apply the first
//! input of the box-feasible `v` iterate and advance the plant.

use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::factor::Refactorizer;
use crate::oracle::dense_cholesky;
use crate::problem::{build_canonical, MpcProblem, ReferencePair};
use crate::solvers::{SolverConfig, SolverKind, SolverResult, Status};

/// How the MPC's state and input relate to the plant's.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coordinates {
    /// The MPC sees plant values directly.
    Absolute,
    /// The MPC sees `x − x_r` and `u − u_r`; bounds are shifted to match.
    Deviation,
}

/// A discrete-time plant.
pub trait PlantModel {
    fn name(&self) -> &str;

    fn step(&self, x: &[f64], u: &[f64], t: usize) -> Vec<f64>;

    /// Prediction model at the current operating point, or `None` to keep the
    /// MPC template's model.
    fn linearize(&self, _x: &[f64], _u: &[f64], _t: usize) -> Option<(DenseMatrix, DenseMatrix)> {
        None
    }

    fn coordinates(&self) -> Coordinates {
        Coordinates::Absolute
    }
}

/// `x⁺ = A x + B u`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearPlant {
    pub a: DenseMatrix,
    pub b: DenseMatrix,
}

impl LinearPlant {
    pub fn new(a: DenseMatrix, b: DenseMatrix) -> Self {
        Self { a, b }
    }
}

fn affine_step(a: &DenseMatrix, b: &DenseMatrix, x: &[f64], u: &[f64]) -> Vec<f64> {
    let mut next = a.mat_vec(x);
    for (xi, bu) in next.iter_mut().zip(b.mat_vec(u)) {
        *xi += bu;
    }
    next
}

impl PlantModel for LinearPlant {
    fn name(&self) -> &str {
        "linear"
    }

    fn step(&self, x: &[f64], u: &[f64], _t: usize) -> Vec<f64> {
        affine_step(&self.a, &self.b, x, u)
    }
}

/// Linear parameter-varying plant `x⁺ = A(θ) x + B u` with
/// `A(θ) = (1−θ)A₀ + θA₁` and `θ = clamp(|x[state_index]| / scale, 0, 1)`.
/// The MPC model is `A(θ)` frozen at the current state.
#[derive(Debug, Clone, PartialEq)]
pub struct LpvPlant {
    pub a0: DenseMatrix,
    pub a1: DenseMatrix,
    pub b: DenseMatrix,
    pub state_index: usize,
    pub scale: f64,
}

impl LpvPlant {
    pub fn theta(&self, x: &[f64]) -> f64 {
        (x[self.state_index].abs() / self.scale).clamp(0.0, 1.0)
    }

    pub fn a_at(&self, theta: f64) -> DenseMatrix {
        self.a0.scale(1.0 - theta).add(&self.a1.scale(theta))
    }
}

impl PlantModel for LpvPlant {
    fn name(&self) -> &str {
        "lpv_interp"
    }

    fn step(&self, x: &[f64], u: &[f64], _t: usize) -> Vec<f64> {
        affine_step(&self.a_at(self.theta(x)), &self.b, x, u)
    }

    fn linearize(&self, x: &[f64], _u: &[f64], _t: usize) -> Option<(DenseMatrix, DenseMatrix)> {
        Some((self.a_at(self.theta(x)), self.b.clone()))
    }
}

/// Advances `dx/dt = f(x, u)` over `dt` with `substeps` classical RK4 steps,
/// holding `u` constant.
pub fn rk4<F>(f: F, x: &[f64], u: &[f64], dt: f64, substeps: usize) -> Vec<f64>
where
    F: Fn(&[f64], &[f64]) -> Vec<f64>,
{
    let substeps = substeps.max(1);
    let h = dt / substeps as f64;
    let axpy = |x: &[f64], k: &[f64], s: f64| -> Vec<f64> { x.iter().zip(k).map(|(a, b)| a + s * b).collect() };
    let mut x = x.to_vec();
    for _ in 0..substeps {
        let k1 = f(&x, u);
        let k2 = f(&axpy(&x, &k1, h / 2.0), u);
        let k3 = f(&axpy(&x, &k2, h / 2.0), u);
        let k4 = f(&axpy(&x, &k3, h), u);
        for i in 0..x.len() {
            x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    x
}

/// Constants of the stirred-tank reactor model. No defaults: values must come
/// from the scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CstrParams {
    /// Inlet flow rate.
    pub q_e: f64,
    /// Inlet concentration of the reactant.
    pub c_ae: f64,
    /// Inlet temperature.
    pub t_e: f64,
    /// Coolant inlet temperature.
    pub t_ce: f64,
    pub k0: f64,
    /// Activation temperature, used in both Arrhenius terms.
    pub e_over_r: f64,
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
}

/// Continuous stirred-tank reactor. State `(V, C_A, T)`, input `(q_s, q_c)`,
/// sampled with RK4. The MPC runs in deviation coordinates on a
/// finite-difference linearization of the sampled map at the current state.
#[derive(Debug, Clone, PartialEq)]
pub struct CstrPlant {
    pub params: CstrParams,
    pub sample_time: f64,
    pub substeps: usize,
}

impl CstrPlant {
    pub fn rhs(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        let p = &self.params;
        let (v, ca, t) = (x[0], x[1], x[2]);
        let (qs, qc) = (u[0], u[1]);
        let arrhenius = (-p.e_over_r / t).exp();
        let cooling = if qc > 0.0 {
            qc / v * p.k2 * (1.0 - (-p.k3 / qc).exp()) * (p.t_ce - t)
        } else {
            0.0
        };
        vec![
            p.q_e - qs,
            p.q_e / v * (p.c_ae - ca) - p.k0 * arrhenius * ca,
            p.q_e / v * (p.t_e - t) - p.k1 * arrhenius * ca + cooling,
        ]
    }
}

impl PlantModel for CstrPlant {
    fn name(&self) -> &str {
        "cstr"
    }

    fn step(&self, x: &[f64], u: &[f64], _t: usize) -> Vec<f64> {
        rk4(|x, u| self.rhs(x, u), x, u, self.sample_time, self.substeps)
    }

    fn linearize(&self, x: &[f64], u: &[f64], t: usize) -> Option<(DenseMatrix, DenseMatrix)> {
        Some(finite_difference_jacobians(self, x, u, t))
    }

    fn coordinates(&self) -> Coordinates {
        Coordinates::Deviation
    }
}

/// Central-difference Jacobians of `plant.step` with respect to `x` and `u`.
pub fn finite_difference_jacobians(plant: &dyn PlantModel, x: &[f64], u: &[f64], t: usize) -> (DenseMatrix, DenseMatrix) {
    let n = x.len();
    let jac = |cols: usize, perturb: &dyn Fn(usize, f64) -> Vec<f64>, base: &[f64]| {
        let mut out = DenseMatrix::zeros(n, cols);
        for j in 0..cols {
            let h = 1e-6 * base[j].abs().max(1.0);
            let plus = perturb(j, h);
            let minus = perturb(j, -h);
            for i in 0..n {
                out[(i, j)] = (plus[i] - minus[i]) / (2.0 * h);
            }
        }
        out
    };
    let a = jac(
        n,
        &|j, h| {
            let mut xp = x.to_vec();
            xp[j] += h;
            plant.step(&xp, u, t)
        },
        x,
    );
    let b = jac(
        u.len(),
        &|j, h| {
            let mut up = u.to_vec();
            up[j] += h;
            plant.step(x, &up, t)
        },
        u,
    );
    (a, b)
}

/// Reference pair taking effect at `step`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceChange {
    pub step: usize,
    pub xr: Vec<f64>,
    pub ur: Vec<f64>,
}

/// Stage weights replaced from `step` onward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Retune {
    pub step: usize,
    #[serde(rename = "Q")]
    pub q: DenseMatrix,
    #[serde(rename = "R")]
    pub r: DenseMatrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub x: Vec<f64>,
    /// Applied input.
    pub u: Vec<f64>,
    pub xr: Vec<f64>,
    pub ur: Vec<f64>,
    pub iterations: usize,
    pub r_primal: f64,
    pub r_dual: f64,
    pub status: Status,
    /// Whether this step recomputed the factorization.
    pub refactored: bool,
    pub update_us: f64,
    pub solve_us: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub event: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimEvent {
    pub step: usize,
    pub kind: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimLog {
    pub plant: String,
    pub solver: SolverKind,
    pub records: Vec<StepRecord>,
    pub events: Vec<SimEvent>,
    /// State after the last applied input.
    pub final_state: Vec<f64>,
    pub refactor_count: usize,
}

impl SimLog {
    /// Copy with every timing field zeroed, for reproducibility checks.
    pub fn without_timing(&self) -> SimLog {
        let mut log = self.clone();
        for r in &mut log.records {
            r.update_us = 0.0;
            r.solve_us = 0.0;
        }
        log
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("log serializes")
    }

    /// One row per step.
    pub fn to_csv(&self) -> String {
        let (n, m) = match self.records.first() {
            Some(r) => (r.x.len(), r.u.len()),
            None => (0, 0),
        };
        let mut out = String::from("step");
        for (prefix, len) in [("x", n), ("u", m), ("xr", n), ("ur", m)] {
            for i in 0..len {
                let _ = write!(out, ",{prefix}{i}");
            }
        }
        out.push_str(",iterations,r_primal,r_dual,status,refactored,update_us,solve_us,event\n");
        for r in &self.records {
            let _ = write!(out, "{}", r.step);
            for v in r.x.iter().chain(&r.u).chain(&r.xr).chain(&r.ur) {
                let _ = write!(out, ",{v}");
            }
            let status = match r.status {
                Status::Converged => "converged",
                Status::MaxIters => "max_iters",
                Status::InfeasibleSuspected => "infeasible_suspected",
            };
            let _ = writeln!(
                out,
                ",{},{},{},{},{},{},{},{}",
                r.iterations,
                r.r_primal,
                r.r_dual,
                status,
                r.refactored,
                r.update_us,
                r.solve_us,
                r.event.as_deref().unwrap_or("")
            );
        }
        out
    }

    /// Per-signal `time,value,reference` tables named `x0.csv`, `u0.csv`, ...
    pub fn plot_series(&self, sample_time: f64) -> Vec<(String, String)> {
        let Some(first) = self.records.first() else {
            return Vec::new();
        };
        let mut files = Vec::new();
        let mut series = |name: String, get: &dyn Fn(&StepRecord) -> (f64, f64)| {
            let mut csv = String::from("time,value,reference\n");
            for r in &self.records {
                let (v, rf) = get(r);
                let _ = writeln!(csv, "{},{v},{rf}", r.step as f64 * sample_time);
            }
            files.push((format!("{name}.csv"), csv));
        };
        for i in 0..first.x.len() {
            series(format!("x{i}"), &|r| (r.x[i], r.xr[i]));
        }
        for i in 0..first.u.len() {
            series(format!("u{i}"), &|r| (r.u[i], r.ur[i]));
        }
        files
    }
}

/// A configured closed-loop run.
pub struct Simulation<'a> {
    plant: &'a dyn PlantModel,
    template: MpcProblem,
    x0: Vec<f64>,
    references: Vec<ReferenceChange>,
    retunes: Vec<Retune>,
    cfg: SolverConfig,
    solver: SolverKind,
}

impl<'a> Simulation<'a> {
    /// Tracks `r.x_r, r.u_r` from `r.x0` with ADMM.
    pub fn new(plant: &'a dyn PlantModel, template: MpcProblem, r: &ReferencePair, cfg: SolverConfig) -> Self {
        Self {
            plant,
            template,
            x0: r.x0.clone(),
            references: vec![ReferenceChange {
                step: 0,
                xr: r.x_r.clone(),
                ur: r.u_r.clone(),
            }],
            retunes: Vec::new(),
            cfg,
            solver: SolverKind::Admm,
        }
    }

    pub fn with_solver(mut self, solver: SolverKind) -> Self {
        self.solver = solver;
        self
    }

    /// Adds a reference change; a change at the same step replaces the old one.
    pub fn add_reference(&mut self, change: ReferenceChange) {
        self.references.retain(|c| c.step != change.step);
        self.references.push(change);
        self.references.sort_by_key(|c| c.step);
    }

    /// Schedules new stage weights from `at_step` on.
    pub fn mid_run_retune(&mut self, q: DenseMatrix, r: DenseMatrix, at_step: usize) -> Result<()> {
        let (n, m) = (self.template.n, self.template.m);
        for (name, mat, dim) in [("Q", &q, n), ("R", &r, m)] {
            if mat.shape() != (dim, dim) {
                return Err(Error::InvalidProblem(vec![format!(
                    "retune {name} has shape {:?}, expected ({dim}, {dim})",
                    mat.shape()
                )]));
            }
            if !mat.is_symmetric(1e-12) || dense_cholesky(mat).is_err() {
                return Err(Error::InvalidProblem(vec![format!("retune {name} not positive definite")]));
            }
        }
        self.retunes.push(Retune { step: at_step, q, r });
        Ok(())
    }

    fn reference_at(&self, step: usize) -> &ReferenceChange {
        self.references
            .iter()
            .rev()
            .find(|c| c.step <= step)
            .unwrap_or(&self.references[0])
    }

    fn check(&self, steps: usize) -> Result<()> {
        if steps == 0 {
            return Err(Error::InvalidConfig("steps must be at least 1".to_string()));
        }
        self.template.ensure_valid()?;
        let (n, m) = (self.template.n, self.template.m);
        if self.x0.len() != n {
            return Err(Error::DimensionMismatch {
                what: "initial state",
                expected: n,
                found: self.x0.len(),
            });
        }
        for c in &self.references {
            if c.xr.len() != n || c.ur.len() != m {
                return Err(Error::InvalidProblem(vec![format!(
                    "reference at step {} has wrong dimensions",
                    c.step
                )]));
            }
        }
        Ok(())
    }

    pub fn run(&self, steps: usize) -> Result<SimLog> {
        self.check(steps)?;
        let (n, m) = (self.template.n, self.template.m);
        let deviation = self.plant.coordinates() == Coordinates::Deviation;
        let rho = self.solver.factor_rho(&self.cfg);
        let mut problem = self.template.clone();
        let abs_bounds = problem.bounds.clone();
        let mut refac = Refactorizer::new();
        let mut stale = true;
        let mut warm: Option<SolverResult> = None;
        let mut x = self.x0.clone();
        let mut u_prev = self.reference_at(0).ur.clone();
        let mut log = SimLog {
            plant: self.plant.name().to_string(),
            solver: self.solver,
            records: Vec::with_capacity(steps),
            events: Vec::new(),
            final_state: Vec::new(),
            refactor_count: 0,
        };

        for k in 0..steps {
            let abort = |e: Error| Error::Simulation { step: k, source: Box::new(e) };
            let mut event = None;
            for rt in self.retunes.iter().filter(|rt| rt.step == k) {
                problem.set_weights(&rt.q, &rt.r);
                stale = true;
                event = Some("retune".to_string());
                log.events.push(SimEvent { step: k, kind: "retune".to_string() });
            }
            if let Some((a, b)) = self.plant.linearize(&x, &u_prev, k) {
                if a.shape() != (n, n) || b.shape() != (n, m) {
                    return Err(abort(Error::Plant(format!(
                        "linearization shapes {:?} and {:?} do not match n={n}, m={m}",
                        a.shape(),
                        b.shape()
                    ))));
                }
                if *problem.a_at(1) != a || *problem.b_at(1) != b {
                    problem.set_frozen_model(&a, &b);
                    stale = true;
                }
            }
            let reference = self.reference_at(k);
            if deviation {
                problem.bounds = abs_bounds.clone();
                for (bounds, offset) in [
                    (&mut problem.bounds.x_lb, &reference.xr),
                    (&mut problem.bounds.x_ub, &reference.xr),
                    (&mut problem.bounds.u_lb, &reference.ur),
                    (&mut problem.bounds.u_ub, &reference.ur),
                ] {
                    for step in bounds.iter_mut() {
                        step.iter_mut().zip(offset).for_each(|(v, o)| *v -= o);
                    }
                }
            }

            let mut update_us = 0.0;
            let refactored = stale;
            if stale {
                let start = Instant::now();
                refac.update(&problem, rho).map_err(abort)?;
                update_us = start.elapsed().as_secs_f64() * 1e6;
                stale = false;
                log.refactor_count += 1;
            }

            let start = Instant::now();
            let rp = if deviation {
                let dx = x.iter().zip(&reference.xr).map(|(a, b)| a - b).collect();
                ReferencePair::new(vec![0.0; n], vec![0.0; m], dx)
            } else {
                ReferencePair::new(reference.xr.clone(), reference.ur.clone(), x.clone())
            };
            let qp = build_canonical(&problem, &rp).map_err(abort)?;
            let w = refac.factor().expect("factored above");
            let res = self
                .solver
                .solve(&qp, w, &self.cfg, warm.as_ref())
                .map_err(abort)?;
            let solve_us = start.elapsed().as_secs_f64() * 1e6;
            if res.status == Status::InfeasibleSuspected {
                return Err(abort(Error::Diverged));
            }

            let mut u = qp.first_input(&res.v).to_vec();
            if deviation {
                u.iter_mut().zip(&reference.ur).for_each(|(v, o)| *v += o);
            }
            log.records.push(StepRecord {
                step: k,
                x: x.clone(),
                u: u.clone(),
                xr: reference.xr.clone(),
                ur: reference.ur.clone(),
                iterations: res.iterations,
                r_primal: res.r_primal,
                r_dual: res.r_dual,
                status: res.status,
                refactored,
                update_us,
                solve_us,
                event,
            });

            x = self.plant.step(&x, &u, k);
            if x.len() != n || x.iter().any(|v| !v.is_finite()) {
                return Err(abort(Error::Plant("state became non-finite".to_string())));
            }
            u_prev = u;
            if self.cfg.warm_start {
                warm = Some(res);
            }
        }
        log.final_state = x;
        Ok(log)
    }
}

/// Runs `steps` samples tracking the constant reference in `r` from `r.x0`.
pub fn run_closed_loop(
    plant: &dyn PlantModel,
    template: &MpcProblem,
    r: &ReferencePair,
    steps: usize,
    cfg: &SolverConfig,
) -> Result<SimLog> {
    Simulation::new(plant, template.clone(), r, cfg.clone()).run(steps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{Bounds, Formulation};

    fn double_integrator(r_weight: f64) -> (LinearPlant, MpcProblem) {
        let a = DenseMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0]);
        let b = DenseMatrix::from_row_slice(2, 1, &[0.005, 0.1]);
        let p = MpcProblem::lti(
            a.clone(),
            b.clone(),
            DenseMatrix::identity(2),
            DenseMatrix::from_diagonal(&[r_weight]),
            Some(DenseMatrix::identity(2).scale(10.0)),
            15,
            Bounds::symmetric(2, 1, 10.0, 10.0, 15),
            Formulation::Lax,
        );
        (LinearPlant::new(a, b), p)
    }

    fn tight() -> SolverConfig {
        SolverConfig {
            rho: 1.0,
            eps_primal: 1e-8,
            eps_dual: 1e-8,
            ..SolverConfig::default()
        }
    }

    #[test]
    fn equilibrium_stays_put() {
        let (plant, p) = double_integrator(1.0);
        let log = run_closed_loop(&plant, &p, &ReferencePair::regulate(vec![0.0, 0.0], 1), 20, &tight()).unwrap();
        assert_eq!(log.records.len(), 20);
        for r in &log.records {
            assert_eq!(r.x, vec![0.0, 0.0]);
            assert_eq!(r.u, vec![0.0]);
        }
    }

    #[test]
    fn double_integrator_regulates() {
        let (plant, p) = double_integrator(1.0);
        let log = run_closed_loop(&plant, &p, &ReferencePair::regulate(vec![1.0, 0.0], 1), 200, &tight()).unwrap();
        let reached = log
            .records
            .iter()
            .any(|r| r.x.iter().all(|v| v.abs() <= 1e-2));
        assert!(reached);
        assert!(log.records.iter().all(|r| r.u[0].abs() <= 10.0));
        assert_eq!(log.refactor_count, 1);
        assert!(log.records[0].refactored);
        assert!(log.records[1..].iter().all(|r| !r.refactored && r.update_us == 0.0));
    }

    #[test]
    fn retune_counts_one_refactor_and_marks_event() {
        let (plant, p) = double_integrator(0.1);
        let mut sim = Simulation::new(&plant, p, &ReferencePair::regulate(vec![1.0, 0.0], 1), tight());
        sim.mid_run_retune(DenseMatrix::identity(2), DenseMatrix::from_diagonal(&[10.0]), 30)
            .unwrap();
        let log = sim.run(80).unwrap();
        assert_eq!(log.refactor_count, 2);
        assert_eq!(log.events, vec![SimEvent { step: 30, kind: "retune".to_string() }]);
        assert_eq!(log.records[30].event.as_deref(), Some("retune"));
        assert!(log.records[30].refactored);
    }

    #[test]
    fn retune_rejects_indefinite_weights() {
        let (plant, p) = double_integrator(1.0);
        let mut sim = Simulation::new(&plant, p, &ReferencePair::regulate(vec![1.0, 0.0], 1), tight());
        let bad = DenseMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(sim.mid_run_retune(bad, DenseMatrix::identity(1), 3).is_err());
        assert!(sim
            .mid_run_retune(DenseMatrix::identity(3), DenseMatrix::identity(1), 3)
            .is_err());
    }

    #[test]
    fn retune_at_step_zero_matches_fresh_weights() {
        let (plant, p) = double_integrator(1.0);
        let r = ReferencePair::regulate(vec![1.0, 0.0], 1);
        let mut sim = Simulation::new(&plant, p.clone(), &r, tight());
        sim.mid_run_retune(DenseMatrix::identity(2).scale(3.0), DenseMatrix::from_diagonal(&[0.5]), 0)
            .unwrap();
        let retuned = sim.run(40).unwrap();
        let mut fresh = p;
        fresh.set_weights(&DenseMatrix::identity(2).scale(3.0), &DenseMatrix::from_diagonal(&[0.5]));
        let direct = run_closed_loop(&plant, &fresh, &r, 40, &tight()).unwrap();
        for (a, b) in retuned.records.iter().zip(&direct.records) {
            assert_eq!((&a.x, &a.u), (&b.x, &b.u));
        }
    }

    #[test]
    fn lpv_refactors_every_change_and_converges() {
        let plant = LpvPlant {
            a0: DenseMatrix::from_row_slice(2, 2, &[0.9, 0.1, 0.0, 0.8]),
            a1: DenseMatrix::from_row_slice(2, 2, &[0.7, -0.2, 0.1, 0.95]),
            b: DenseMatrix::from_row_slice(2, 1, &[0.0, 0.5]),
            state_index: 0,
            scale: 2.0,
        };
        let p = MpcProblem::lti(
            plant.a0.clone(),
            plant.b.clone(),
            DenseMatrix::identity(2),
            DenseMatrix::identity(1),
            Some(DenseMatrix::identity(2)),
            10,
            Bounds::symmetric(2, 1, 5.0, 1.0, 10),
            Formulation::Lax,
        );
        let log = run_closed_loop(&plant, &p, &ReferencePair::regulate(vec![1.5, -1.0], 1), 60, &tight()).unwrap();
        let changes = log.records.iter().filter(|r| r.refactored).count();
        assert_eq!(changes, log.refactor_count);
        assert!(log.refactor_count > 10);
        assert!(log.final_state.iter().all(|v| v.abs() < 1e-3));
    }

    #[test]
    fn rk4_integrates_exponential() {
        let x = rk4(|x, _| vec![-x[0]], &[1.0], &[], 1.0, 100);
        assert!((x[0] - (-1.0f64).exp()).abs() < 1e-10);
    }

    #[test]
    fn finite_differences_recover_linear_plant() {
        let (plant, _) = double_integrator(1.0);
        let (a, b) = finite_difference_jacobians(&plant, &[0.3, -0.2], &[0.1], 0);
        assert!(a.sub(&plant.a).max_abs() < 1e-8);
        assert!(b.sub(&plant.b).max_abs() < 1e-8);
    }

    #[test]
    fn csv_has_one_row_per_step() {
        let (plant, p) = double_integrator(1.0);
        let log = run_closed_loop(&plant, &p, &ReferencePair::regulate(vec![1.0, 0.0], 1), 5, &tight()).unwrap();
        let csv = log.to_csv();
        assert_eq!(csv.lines().count(), 6);
        assert!(csv.starts_with("step,x0,x1,u0,xr0,xr1,ur0,iterations"));
        let plots = log.plot_series(0.1);
        assert_eq!(plots.len(), 3);
        assert_eq!(plots[0].0, "x0.csv");
    }

    #[test]
    fn cstr_template_settles_at_reference() {
        // Normalized constants; real plant data comes from scenario files.
        let plant = CstrPlant {
            params: CstrParams {
                q_e: 1.0,
                c_ae: 1.0,
                t_e: 1.0,
                t_ce: 0.5,
                k0: 1.0,
                e_over_r: 1.0,
                k1: -0.5,
                k2: 1.0,
                k3: 1.0,
            },
            sample_time: 0.1,
            substeps: 10,
        };
        let u_r = vec![1.0, 1.0];
        let mut x_r = vec![1.0, 0.5, 1.0];
        for t in 0..2000 {
            x_r = plant.step(&x_r, &u_r, t);
        }
        let bounds = Bounds::constant(&[0.0, 0.0, 0.0], &[10.0, 10.0, 10.0], &[0.5, 0.5], &[1.5, 1.5], 10);
        let p = MpcProblem::lti(
            DenseMatrix::identity(3),
            DenseMatrix::zeros(3, 2),
            DenseMatrix::identity(3).scale(10.0),
            DenseMatrix::identity(2),
            Some(DenseMatrix::identity(3).scale(10.0)),
            10,
            bounds,
            Formulation::Lax,
        );
        let x0 = vec![x_r[0] + 0.1, x_r[1] - 0.1, x_r[2] + 0.05];
        let log = run_closed_loop(&plant, &p, &ReferencePair::new(x_r.clone(), u_r, x0), 150, &tight()).unwrap();
        assert_eq!(log.refactor_count, 150);
        for r in &log.records {
            assert!(r.u.iter().all(|&u| (0.5..=1.5).contains(&u)));
        }
        let err = log.final_state.iter().zip(&x_r).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-3, "{err}");
    }
}
