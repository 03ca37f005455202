//! Timing sweeps over randomized MPC problems.
//!
//! Every repetition draws a fresh problem, then for each method times the
//! update phase (refactoring W) and the solve phase separately. Methods are
//! interleaved within a repetition so slow drift affects them equally.

use std::fmt::Write as _;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::factor::Refactorizer;
use crate::oracle::DenseWFactor;
use crate::problem::{build_canonical, Bounds, Formulation, MpcProblem, ReferencePair};
use crate::solvers::{admm_solve, SolverConfig, SolverKind};

pub const CSV_HEADER: &str = "solver,n,m,N,upd_avg,upd_med,upd_max,upd_min,sol_avg,sol_med,sol_max,sol_min,pct,reps";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub average: f64,
    pub median: f64,
    pub max: f64,
    pub min: f64,
}

impl Stats {
    pub fn from_samples(samples: &[f64]) -> Stats {
        if samples.is_empty() {
            return Stats { average: 0.0, median: 0.0, max: 0.0, min: 0.0 };
        }
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        let len = sorted.len();
        let (min, max) = (sorted[0], sorted[len - 1]);
        let median = if len % 2 == 1 {
            sorted[len / 2]
        } else {
            0.5 * (sorted[len / 2 - 1] + sorted[len / 2])
        };
        // Rounding in the sum can push the mean of equal samples past max.
        let average = (sorted.iter().sum::<f64>() / len as f64).clamp(min, max);
        Stats { average, median, max, min }
    }
}

pub fn median(samples: &[f64]) -> f64 {
    Stats::from_samples(samples).median
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub solver: String,
    pub n: usize,
    pub m: usize,
    #[serde(rename = "N")]
    pub horizon: usize,
    /// Microseconds.
    pub update: Stats,
    /// Microseconds.
    pub solve: Stats,
    /// Share of the average cycle spent updating, in percent.
    pub percent: f64,
    pub reps: usize,
}

impl BenchRecord {
    pub fn new(solver: &str, dims: (usize, usize, usize), update_us: &[f64], solve_us: &[f64]) -> Self {
        let update = Stats::from_samples(update_us);
        let solve = Stats::from_samples(solve_us);
        let total = update.average + solve.average;
        let percent = if total > 0.0 {
            (100.0 * update.average / total).clamp(0.0, 100.0)
        } else {
            0.0
        };
        Self {
            solver: solver.to_string(),
            n: dims.0,
            m: dims.1,
            horizon: dims.2,
            update,
            solve,
            percent,
            reps: update_us.len(),
        }
    }

    pub fn csv_row(&self) -> String {
        let (u, s) = (&self.update, &self.solve);
        format!(
            "{},{},{},{},{:.3},{:.3},{:.3},{:.3},{:.3},{:.3},{:.3},{:.3},{:.2},{}",
            self.solver,
            self.n,
            self.m,
            self.horizon,
            u.average,
            u.median,
            u.max,
            u.min,
            s.average,
            s.median,
            s.max,
            s.min,
            self.percent,
            self.reps
        )
    }
}

pub fn to_csv(records: &[BenchRecord]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(out, "{}", r.csv_row());
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepAxis {
    #[serde(rename = "n")]
    States,
    #[serde(rename = "m")]
    Inputs,
    #[serde(rename = "N")]
    Horizon,
}

impl SweepAxis {
    /// Fixed dimensions `(n, m, N)` for the axes not being swept.
    pub fn default_dims(self) -> (usize, usize, usize) {
        match self {
            SweepAxis::States => (0, 2, 5),
            SweepAxis::Inputs => (60, 0, 5),
            SweepAxis::Horizon => (4, 2, 0),
        }
    }

    pub fn default_values(self) -> Vec<usize> {
        match self {
            SweepAxis::States => vec![2, 4, 8, 16, 32, 60],
            SweepAxis::Inputs => vec![1, 2, 4, 8, 16],
            SweepAxis::Horizon => vec![5, 10, 20, 40, 80],
        }
    }

    pub fn dims(self, base: (usize, usize, usize), value: usize) -> (usize, usize, usize) {
        match self {
            SweepAxis::States => (value, base.1, base.2),
            SweepAxis::Inputs => (base.0, value, base.2),
            SweepAxis::Horizon => (base.0, base.1, value),
        }
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "n" => Ok(SweepAxis::States),
            "m" => Ok(SweepAxis::Inputs),
            "N" => Ok(SweepAxis::Horizon),
            _ => Err(Error::InvalidConfig(format!("invalid sweep axis `{s}`, expected n, m or N"))),
        }
    }
}

/// How W is refactored and which solver runs afterwards.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Structured(SolverKind),
    /// Dense assembly of W plus dense Cholesky, then ADMM.
    DenseBaseline,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Structured(kind) => kind.name(),
            Method::DenseBaseline => "dense-baseline",
        }
    }
}

/// Spectral radius upper estimate `‖Mᵏ‖_F^{1/k}` with `k = 16`.
pub fn spectral_radius_bound(m: &DenseMatrix) -> f64 {
    let mut power = m.clone();
    let mut log_scale = 0.0;
    let mut k = 1;
    while k < 16 {
        power = power.matmul(&power);
        k *= 2;
        // Renormalize to avoid overflow; track the scale in log space.
        let norm = power.frobenius_norm();
        if norm == 0.0 {
            return 0.0;
        }
        power = power.scale(1.0 / norm);
        log_scale = 2.0 * log_scale + norm.ln();
    }
    (log_scale / k as f64).exp()
}

/// `M / (1.05 ρ̂(M))` for `M` uniform in `[−1, 1]`.
pub fn random_stable_matrix(n: usize, rng: &mut impl Rng) -> DenseMatrix {
    let m = random_matrix(n, n, rng);
    let radius = spectral_radius_bound(&m);
    if radius > 0.0 {
        m.scale(1.0 / (1.05 * radius))
    } else {
        m
    }
}

fn random_matrix(rows: usize, cols: usize, rng: &mut impl Rng) -> DenseMatrix {
    let data: Vec<f64> = (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect();
    DenseMatrix::from_row_slice(rows, cols, &data)
}

fn random_pd_diagonal(n: usize, rng: &mut impl Rng) -> DenseMatrix {
    let d: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..5.0)).collect();
    DenseMatrix::from_diagonal(&d)
}

/// Random LTI problem with a stable model, diagonal weights, box `|x| ≤ 5`,
/// `|u| ≤ 1`, and an initial state drawn inside `|x| ≤ 1`.
pub fn random_problem(n: usize, m: usize, horizon: usize, rng: &mut impl Rng) -> (MpcProblem, ReferencePair) {
    let a = random_stable_matrix(n, rng);
    let b = random_matrix(n, m, rng);
    let q = random_pd_diagonal(n, rng);
    let r = random_pd_diagonal(m, rng);
    let t = random_pd_diagonal(n, rng);
    let p = MpcProblem::lti(
        a,
        b,
        q,
        r,
        Some(t),
        horizon,
        Bounds::symmetric(n, m, 5.0, 1.0, horizon),
        Formulation::Lax,
    );
    let x0 = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    (p, ReferencePair::regulate(x0, m))
}

/// Update-phase times in microseconds for `reps` fresh random problems.
pub fn measure_updates(n: usize, m: usize, horizon: usize, reps: usize, seed: u64, method: Method, rho: f64) -> Result<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut refac = Refactorizer::new();
    let mut times = Vec::with_capacity(reps);
    for _ in 0..reps {
        let (p, _) = random_problem(n, m, horizon, &mut rng);
        let start = Instant::now();
        match method {
            Method::Structured(_) => {
                refac.update(&p, rho)?;
            }
            Method::DenseBaseline => {
                std::hint::black_box(DenseWFactor::from_problem(&p, rho)?);
            }
        }
        times.push(start.elapsed().as_secs_f64() * 1e6);
    }
    Ok(times)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub axis: SweepAxis,
    pub values: Vec<usize>,
    /// Dimensions held fixed; the swept entry is ignored.
    pub base: (usize, usize, usize),
    pub reps: usize,
    pub seed: u64,
    pub solvers: Vec<SolverKind>,
    pub baseline: bool,
    pub solver_cfg: SolverConfig,
}

impl BenchConfig {
    pub fn new(axis: SweepAxis) -> Self {
        Self {
            axis,
            values: axis.default_values(),
            base: axis.default_dims(),
            reps: 200,
            seed: 0,
            solvers: vec![SolverKind::Admm, SolverKind::Fista],
            baseline: false,
            solver_cfg: SolverConfig::default(),
        }
    }

    fn methods(&self) -> Vec<Method> {
        let mut methods: Vec<Method> = self.solvers.iter().map(|&k| Method::Structured(k)).collect();
        if self.baseline {
            methods.push(Method::DenseBaseline);
        }
        methods
    }
}

/// Runs the sweep; records are ordered by configuration, then method.
pub fn run_bench(cfg: &BenchConfig) -> Result<Vec<BenchRecord>> {
    if cfg.reps == 0 {
        return Err(Error::InvalidConfig("reps must be at least 1".to_string()));
    }
    if cfg.values.is_empty() {
        return Err(Error::InvalidConfig("no sweep values given".to_string()));
    }
    let methods = cfg.methods();
    let mut records = Vec::new();
    for (index, &value) in cfg.values.iter().enumerate() {
        let dims = cfg.axis.dims(cfg.base, value);
        let (n, m, horizon) = dims;
        if n == 0 || m == 0 || horizon < 2 {
            return Err(Error::InvalidConfig(format!(
                "invalid dimensions n={n}, m={m}, N={horizon}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(index as u64));
        let mut refac = Refactorizer::new();
        let mut update = vec![Vec::with_capacity(cfg.reps); methods.len()];
        let mut solve = vec![Vec::with_capacity(cfg.reps); methods.len()];
        for _ in 0..cfg.reps {
            let (p, r) = random_problem(n, m, horizon, &mut rng);
            for (i, &method) in methods.iter().enumerate() {
                let (upd, sol) = time_cycle(&p, &r, method, &cfg.solver_cfg, &mut refac)?;
                update[i].push(upd);
                solve[i].push(sol);
            }
        }
        for (i, method) in methods.iter().enumerate() {
            records.push(BenchRecord::new(method.name(), dims, &update[i], &solve[i]));
        }
    }
    Ok(records)
}

fn time_cycle(
    p: &MpcProblem,
    r: &ReferencePair,
    method: Method,
    cfg: &SolverConfig,
    refac: &mut Refactorizer,
) -> Result<(f64, f64)> {
    let micros = |start: Instant| start.elapsed().as_secs_f64() * 1e6;
    match method {
        Method::Structured(kind) => {
            let start = Instant::now();
            let w = refac.update(p, kind.factor_rho(cfg))?;
            let upd = micros(start);
            let start = Instant::now();
            let qp = build_canonical(p, r)?;
            std::hint::black_box(kind.solve(&qp, w, cfg, None)?);
            Ok((upd, micros(start)))
        }
        Method::DenseBaseline => {
            let start = Instant::now();
            let w = DenseWFactor::from_problem(p, cfg.rho)?;
            let upd = micros(start);
            let start = Instant::now();
            let qp = build_canonical(p, r)?;
            std::hint::black_box(admm_solve(&qp, &w, cfg, None)?);
            Ok((upd, micros(start)))
        }
    }
}
