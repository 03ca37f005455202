//! Command-line front end: `solve`, `simulate` and `bench`.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::bench::{self, BenchConfig, BenchRecord, SweepAxis};
use crate::error::{Error, Result};
use crate::factor::factor;
use crate::io::{self, PlantSpec, ProblemInput, ScenarioFile};
use crate::oracle::{brute_force_qp, DenseWFactor};
use crate::problem::{build_canonical, Formulation};
use crate::qp::{DenseQp, QpStructure};
use crate::simulate::{CstrPlant, LinearPlant, LpvPlant, PlantModel, SimLog, Simulation};
use crate::solvers::{fista_solve, KktResiduals, SolverConfig, SolverKind, SolverResult, Status};

#[derive(Debug, Parser)]
#[command(name = "bandmpc", version, about = "Structured MPC QP solving, simulation and benchmarking")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one problem file and print the result as JSON.
    Solve(SolveArgs),
    /// Run a closed-loop scenario and write its log.
    Simulate(SimulateArgs),
    /// Time update and solve phases over randomized problems.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SolverArg {
    Admm,
    Fista,
}

impl From<SolverArg> for SolverKind {
    fn from(s: SolverArg) -> Self {
        match s {
            SolverArg::Admm => SolverKind::Admm,
            SolverArg::Fista => SolverKind::Fista,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormulationArg {
    Lax,
    Equ,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// Problem JSON (MPC problem or raw QP).
    pub file: PathBuf,
    #[arg(long, value_enum, default_value = "admm")]
    pub solver: SolverArg,
    #[arg(long)]
    pub rho: Option<f64>,
    /// Primal and dual tolerance.
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Overrides the formulation in an MPC problem file.
    #[arg(long, value_enum)]
    pub formulation: Option<FormulationArg>,
    /// Append a brute-force oracle comparison.
    #[arg(long)]
    pub verify: bool,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Scenario JSON.
    pub scenario: PathBuf,
    /// Output directory for the log files.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Also write per-signal `time,value,reference` CSVs.
    #[arg(long)]
    pub plot_data: bool,
    /// Overrides the scenario seed.
    #[arg(long, env = "BANDMPC_SEED")]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Dimension to sweep: n, m or N.
    #[arg(long, value_parser = parse_axis)]
    pub sweep: SweepAxis,
    /// Comma-separated values for the swept dimension.
    #[arg(long, value_delimiter = ',')]
    pub values: Option<Vec<usize>>,
    #[arg(long, default_value_t = 200)]
    pub reps: usize,
    #[arg(long, env = "BANDMPC_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Add rows for the dense assemble-and-factor baseline.
    #[arg(long)]
    pub baseline: bool,
    /// Restrict to one solver; both run by default.
    #[arg(long, value_enum)]
    pub solver: Option<SolverArg>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long = "horizon")]
    pub horizon: Option<usize>,
    #[arg(long, value_enum, default_value = "csv")]
    pub out: OutputFormat,
}

fn parse_axis(s: &str) -> std::result::Result<SweepAxis, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Runs a parsed command and returns what should go to stdout.
pub fn run(cli: Cli) -> Result<String> {
    match cli.command {
        Command::Solve(args) => {
            let out = cmd_solve(&args)?;
            Ok(serde_json::to_string_pretty(&out).expect("serializable"))
        }
        Command::Simulate(args) => {
            let summary = cmd_simulate(&args)?;
            Ok(serde_json::to_string_pretty(&summary).expect("serializable"))
        }
        Command::Bench(args) => {
            let records = cmd_bench(&args)?;
            Ok(match args.out {
                OutputFormat::Csv => bench::to_csv(&records),
                OutputFormat::Json => serde_json::to_string_pretty(&records).expect("serializable"),
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Timing {
    pub update_us: f64,
    pub solve_us: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub oracle_z: Vec<f64>,
    pub max_abs_diff: f64,
    pub tolerance: f64,
    pub agrees: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveOutput {
    pub solver: SolverKind,
    pub status: Status,
    pub iterations: usize,
    pub r_primal: f64,
    pub r_dual: f64,
    pub objective: f64,
    pub z: Vec<f64>,
    pub v: Vec<f64>,
    pub lambda: Vec<f64>,
    pub mu: Vec<f64>,
    /// First input of the `v` iterate, for MPC problems.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub u0: Option<Vec<f64>>,
    pub kkt: KktResiduals,
    pub timing: Timing,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verify: Option<VerifyReport>,
}

pub const VERIFY_TOLERANCE: f64 = 1e-5;

fn solver_config(args: &SolveArgs) -> SolverConfig {
    let mut cfg = SolverConfig::default();
    if let Some(rho) = args.rho {
        cfg.rho = rho;
    }
    if let Some(eps) = args.eps {
        cfg.eps_primal = eps;
        cfg.eps_dual = eps;
    }
    if let Some(it) = args.max_iters {
        cfg.max_iters = it;
    }
    cfg
}

pub fn cmd_solve(args: &SolveArgs) -> Result<SolveOutput> {
    let cfg = solver_config(args);
    let kind = SolverKind::from(args.solver);
    let micros = |start: Instant| start.elapsed().as_secs_f64() * 1e6;
    let (res, dense, kkt, u0, timing) = match io::read_problem(&args.file)? {
        ProblemInput::Mpc(mut p, r) => {
            if let Some(f) = args.formulation {
                p.formulation = match f {
                    FormulationArg::Lax => Formulation::Lax,
                    FormulationArg::Equ => Formulation::TerminalEquality,
                };
            }
            p.ensure_valid()?;
            let start = Instant::now();
            let w = factor(&p, kind.factor_rho(&cfg))?;
            let update_us = micros(start);
            let start = Instant::now();
            let qp = build_canonical(&p, &r)?;
            let res = kind.solve(&qp, &w, &cfg, None)?;
            let solve_us = micros(start);
            let kkt = res.kkt(&qp);
            let u0 = qp.first_input(&res.v).to_vec();
            (res, qp.to_dense(), kkt, Some(u0), Timing { update_us, solve_us })
        }
        ProblemInput::Qp(qp) => {
            let start = Instant::now();
            let (res, timing) = match kind {
                SolverKind::Admm => {
                    let w = DenseWFactor::from_qp(&qp, cfg.rho)?;
                    let update_us = micros(start);
                    let start = Instant::now();
                    let res = kind.solve(&qp, &w, &cfg, None)?;
                    (res, Timing { update_us, solve_us: micros(start) })
                }
                SolverKind::Fista => {
                    let res = fista_solve(&qp, &cfg, None)?;
                    (res, Timing { update_us: 0.0, solve_us: micros(start) })
                }
            };
            let kkt = res.kkt(&qp);
            (res, qp, kkt, None, timing)
        }
    };
    let verify = if args.verify { Some(verify(&dense, &res)?) } else { None };
    Ok(SolveOutput {
        solver: kind,
        status: res.status,
        iterations: res.iterations,
        r_primal: res.r_primal,
        r_dual: res.r_dual,
        objective: dense.objective(&res.z),
        z: res.z,
        v: res.v,
        lambda: res.lambda,
        mu: res.mu,
        u0,
        kkt,
        timing,
        verify,
    })
}

fn verify(qp: &DenseQp, res: &SolverResult) -> Result<VerifyReport> {
    let oracle = brute_force_qp(qp)?;
    let max_abs_diff = oracle
        .z
        .iter()
        .zip(&res.z)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(VerifyReport {
        oracle_z: oracle.z,
        max_abs_diff,
        tolerance: VERIFY_TOLERANCE,
        agrees: max_abs_diff <= VERIFY_TOLERANCE,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulateSummary {
    pub plant: String,
    pub steps: usize,
    pub refactor_count: usize,
    pub final_state: Vec<f64>,
    pub files: Vec<PathBuf>,
}

fn build_plant(spec: &PlantSpec, template: &crate::problem::MpcProblem) -> Result<Box<dyn PlantModel>> {
    let (n, m) = (template.n, template.m);
    let check = |what: &str, mat: &crate::dense::DenseMatrix, shape: (usize, usize)| {
        if mat.shape() == shape {
            Ok(())
        } else {
            Err(Error::InvalidProblem(vec![format!(
                "plant {what} has shape {:?}, expected {shape:?}",
                mat.shape()
            )]))
        }
    };
    Ok(match spec {
        PlantSpec::Linear { a, b } => {
            let a = a.clone().unwrap_or_else(|| template.a_at(1).clone());
            let b = b.clone().unwrap_or_else(|| template.b_at(1).clone());
            check("A", &a, (n, n))?;
            check("B", &b, (n, m))?;
            Box::new(LinearPlant::new(a, b))
        }
        PlantSpec::LpvInterp { a0, a1, b, state_index, scale } => {
            check("A0", a0, (n, n))?;
            check("A1", a1, (n, n))?;
            check("B", b, (n, m))?;
            if *state_index >= n || !(*scale > 0.0) {
                return Err(Error::InvalidProblem(vec![
                    "lpv plant needs state_index < n and a positive scale".to_string(),
                ]));
            }
            Box::new(LpvPlant {
                a0: a0.clone(),
                a1: a1.clone(),
                b: b.clone(),
                state_index: *state_index,
                scale: *scale,
            })
        }
        PlantSpec::Cstr { params, sample_time, substeps } => {
            if (n, m) != (3, 2) {
                return Err(Error::InvalidProblem(vec![format!(
                    "cstr plant needs n=3, m=2, got n={n}, m={m}"
                )]));
            }
            Box::new(CstrPlant {
                params: params.clone(),
                sample_time: *sample_time,
                substeps: *substeps,
            })
        }
    })
}

/// Runs a parsed scenario. `seed` overrides the scenario's own seed.
pub fn run_scenario(scenario: &ScenarioFile, seed: Option<u64>) -> Result<SimLog> {
    let (template, mut reference) = scenario.mpc.clone().into_problem();
    template.ensure_valid()?;
    let plant = build_plant(&scenario.plant, &template)?;
    if let Some(init) = &scenario.randomize_x0 {
        let n = template.n;
        if init.lb.len() != n || init.ub.len() != n || init.lb.iter().zip(&init.ub).any(|(l, u)| l > u) {
            return Err(Error::InvalidProblem(vec!["randomize_x0 box is malformed".to_string()]));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed.unwrap_or(scenario.seed));
        reference.x0 = init
            .lb
            .iter()
            .zip(&init.ub)
            .map(|(&l, &u)| if l == u { l } else { rng.gen_range(l..u) })
            .collect();
    }
    let mut sim = Simulation::new(plant.as_ref(), template, &reference, scenario.config.clone())
        .with_solver(scenario.solver);
    for change in &scenario.references {
        sim.add_reference(change.clone());
    }
    for rt in &scenario.retunes {
        sim.mid_run_retune(rt.q.clone(), rt.r.clone(), rt.step)?;
    }
    sim.run(scenario.steps)
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<SimulateSummary> {
    let scenario = io::read_scenario(&args.scenario)?;
    let log = run_scenario(&scenario, args.seed)?;
    std::fs::create_dir_all(&args.out).map_err(|e| Error::Io(format!("{}: {e}", args.out.display())))?;
    let mut files = vec![args.out.join("simlog.csv"), args.out.join("simlog.json")];
    write_file(&files[0], &log.to_csv())?;
    write_file(&files[1], &log.to_json())?;
    if args.plot_data {
        for (name, csv) in log.plot_series(scenario.sample_time) {
            let path = args.out.join(name);
            write_file(&path, &csv)?;
            files.push(path);
        }
    }
    Ok(SimulateSummary {
        plant: log.plant.clone(),
        steps: log.records.len(),
        refactor_count: log.refactor_count,
        final_state: log.final_state.clone(),
        files,
    })
}

pub fn cmd_bench(args: &BenchArgs) -> Result<Vec<BenchRecord>> {
    let mut cfg = BenchConfig::new(args.sweep);
    if let Some(values) = &args.values {
        cfg.values = values.clone();
    }
    let (n, m, horizon) = cfg.base;
    cfg.base = (args.n.unwrap_or(n), args.m.unwrap_or(m), args.horizon.unwrap_or(horizon));
    cfg.reps = args.reps;
    cfg.seed = args.seed;
    cfg.baseline = args.baseline;
    if let Some(s) = args.solver {
        cfg.solvers = vec![s.into()];
    }
    bench::run_bench(&cfg)
}
