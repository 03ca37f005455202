//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on failure.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use bandmpc::bench::{measure_updates, median, Method};
use bandmpc::oracle::{assemble_w, brute_force_qp, dense_cholesky};
use bandmpc::simulate::LinearPlant;
use bandmpc::{
    admm_solve, build_canonical, factor, fista_solve, flop_count, BandedCholesky, Bounds, DenseMatrix, Formulation,
    Mode, MpcProblem, QpStructure, ReferencePair, Simulation, SolverConfig, SolverKind,
};
use common::{as_constant_ltv, max_abs_diff, random_problem, random_shape, tiny_problem, Shape};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = fn() -> Result<String, String>;
type HandValue = (&'static str, f64, fn(&BandedCholesky) -> f64);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn factorization_correctness() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(0xFAC7);
    let (mut worst_rel, mut worst_block) = (0.0_f64, 0.0_f64);
    let mut counts = [0usize; 3];
    for i in 0..200 {
        let shape = random_shape(&mut rng, 8, 4, 20);
        let rho = [0.0, 0.01, 1.0][i % 3];
        let p = random_problem(shape, 0.8, &mut rng);
        counts[match (p.mode, p.formulation) {
            (Mode::Ltv, _) => 2,
            (_, Formulation::TerminalEquality) => 1,
            _ => 0,
        }] += 1;
        let w = assemble_w(&p, rho).map_err(|e| format!("instance {i}: {e}"))?;
        let c = factor(&p, rho).map_err(|e| format!("instance {i}: {e}"))?;
        let wc = c.assemble();
        let rel = wc.transpose().matmul(&wc).sub(&w).frobenius_norm() / (1.0 + w.frobenius_norm());
        let block = wc.sub(&dense_cholesky(&w).map_err(|e| e.to_string())?).max_abs();
        worst_rel = worst_rel.max(rel);
        worst_block = worst_block.max(block);
    }
    ensure(worst_rel <= 1e-10 && worst_block <= 1e-9, || {
        format!("reconstruction {worst_rel:.2e} (limit 1e-10), blocks {worst_block:.2e} (limit 1e-9)")
    })?;
    Ok(format!(
        "200 problems (lax {}, terminal-equality {}, ltv {}): reconstruction {worst_rel:.1e}, blocks {worst_block:.1e}",
        counts[0], counts[1], counts[2]
    ))
}

fn scalar(v: f64) -> DenseMatrix {
    DenseMatrix::from_row_slice(1, 1, &[v])
}

fn scalar_problem(horizon: usize, formulation: Formulation) -> MpcProblem {
    MpcProblem::lti(
        scalar(1.0),
        scalar(1.0),
        scalar(1.0),
        scalar(1.0),
        Some(scalar(1.0)),
        horizon,
        Bounds::symmetric(1, 1, 10.0, 10.0, horizon),
        formulation,
    )
}

fn hand_values() -> Result<String, String> {
    let ltv = MpcProblem::ltv(
        vec![scalar(1.0), scalar(2.0)],
        vec![scalar(1.0), scalar(1.0)],
        vec![scalar(1.0); 2],
        vec![scalar(1.0); 2],
        Some(scalar(1.0)),
        2,
        Bounds::symmetric(1, 1, 10.0, 10.0, 2),
        Formulation::Lax,
    );
    let cases: [(&str, MpcProblem, Vec<HandValue>); 3] = [
        (
            "lax N=3",
            scalar_problem(3, Formulation::Lax),
            vec![
                ("beta1", 2f64.sqrt(), |c| c.beta(1)[0]),
                ("alpha1", -1.0 / 2f64.sqrt(), |c| c.alpha(1)[0]),
                ("beta2", 2.5f64.sqrt(), |c| c.beta(2)[0]),
                ("beta3", 2.6f64.sqrt(), |c| c.beta(3)[0]),
            ],
        ),
        (
            "terminal-equality N=2",
            scalar_problem(2, Formulation::TerminalEquality),
            vec![("beta2", 1.5f64.sqrt(), |c| c.beta(2)[0])],
        ),
        ("ltv N=2", ltv, vec![("beta2", 2.0, |c| c.beta(2)[0])]),
    ];
    let mut checked = 0;
    for (name, p, expected) in cases {
        let c = factor(&p, 0.0).map_err(|e| format!("{name}: {e}"))?;
        let u = dense_cholesky(&assemble_w(&p, 0.0).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        let horizon = p.horizon;
        for (label, value, get) in expected {
            let got = get(&c);
            ensure((got - value).abs() <= 1e-12, || format!("{name} {label}: {got} vs {value}"))?;
            checked += 1;
        }
        // The same values fall out of a dense Cholesky of the hand-assembled W.
        for k in 1..=horizon {
            let (got, dense) = (c.beta(k)[0], u[(k - 1, k - 1)]);
            ensure((got - dense).abs() <= 1e-12, || format!("{name} beta{k}: {got} vs dense {dense}"))?;
        }
    }
    Ok(format!("{checked} hand values within 1e-12, all matching dense Cholesky"))
}

fn complexity() -> Result<String, String> {
    let (f10, f20, f30) = (
        flop_count(4, 2, 10, Mode::Lti),
        flop_count(4, 2, 20, Mode::Lti),
        flop_count(4, 2, 30, Mode::Lti),
    );
    ensure(f20 - f10 == f30 - f20, || format!("flops {f10}, {f20}, {f30} are not collinear"))?;
    let (l10, l20, l30) = (
        flop_count(4, 2, 10, Mode::Ltv),
        flop_count(4, 2, 20, Mode::Ltv),
        flop_count(4, 2, 30, Mode::Ltv),
    );
    ensure(l20 - l10 == l30 - l20, || format!("ltv flops {l10}, {l20}, {l30} are not collinear"))?;

    let method = Method::Structured(SolverKind::Admm);
    // Untimed warm-up so the first configuration does not pay for cold caches.
    measure_updates(4, 2, 60, 20, 99, method, 0.01).map_err(|e| e.to_string())?;
    let short = median(&measure_updates(4, 2, 15, 50, 1, method, 0.01).map_err(|e| e.to_string())?);
    let long = median(&measure_updates(4, 2, 60, 50, 2, method, 0.01).map_err(|e| e.to_string())?);
    let ratio = long / short;
    ensure((3.0..=5.5).contains(&ratio), || {
        format!("update-time ratio N=60/N=15 = {ratio:.2} ({long:.2} us / {short:.2} us), expected [3.0, 5.5]")
    })?;
    Ok(format!(
        "flops {f10}/{f20}/{f30} collinear; median update {short:.2} us -> {long:.2} us, ratio {ratio:.2}"
    ))
}

fn structured_vs_dense() -> Result<String, String> {
    let mut notes = Vec::new();
    for (n, need) in [(10, 1.0), (20, 2.0)] {
        let structured = median(
            &measure_updates(n, 2, 15, 50, 10 + n as u64, Method::Structured(SolverKind::Admm), 0.01)
                .map_err(|e| e.to_string())?,
        );
        let dense =
            median(&measure_updates(n, 2, 15, 50, 10 + n as u64, Method::DenseBaseline, 0.01).map_err(|e| e.to_string())?);
        let ratio = dense / structured;
        ensure(structured < dense && ratio >= need, || {
            format!("n={n}: structured {structured:.2} us vs dense {dense:.2} us (ratio {ratio:.1}, need >= {need})")
        })?;
        notes.push(format!("n={n}: {structured:.1} us vs {dense:.1} us ({ratio:.0}x)"));
    }
    Ok(notes.join("; "))
}

fn solver_correctness() -> Result<String, String> {
    let cfg = SolverConfig {
        rho: 1.0,
        eps_primal: 1e-10,
        eps_dual: 1e-10,
        max_iters: 200_000,
        ..SolverConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0x501E);
    let (mut solved, mut skipped) = (0, 0);
    let (mut worst_err, mut worst_kkt, mut max_nz) = (0.0_f64, 0.0_f64, 0);
    while solved < 100 {
        let (p, r) = tiny_problem(&mut rng);
        let qp = build_canonical(&p, &r).map_err(|e| e.to_string())?;
        let Ok(oracle) = brute_force_qp(&qp.to_dense()) else {
            skipped += 1;
            continue;
        };
        max_nz = max_nz.max(qp.n_z());
        let w = factor(&p, cfg.rho).map_err(|e| e.to_string())?;
        let admm = admm_solve(&qp, &w, &cfg, None).map_err(|e| e.to_string())?;
        let fista = fista_solve(&qp, &cfg, None).map_err(|e| e.to_string())?;
        for (name, res) in [("admm", &admm), ("fista", &fista)] {
            ensure(res.converged(), || format!("{name} did not converge on instance {solved}"))?;
            worst_err = worst_err.max(max_abs_diff(&res.z, &oracle.z));
            worst_kkt = worst_kkt.max(res.kkt(&qp).max());
        }
        solved += 1;
    }
    ensure(worst_err <= 1e-5 && worst_kkt <= 1e-5, || {
        format!("oracle distance {worst_err:.2e}, KKT {worst_kkt:.2e} (limits 1e-5)")
    })?;
    Ok(format!(
        "100 QPs (n_z <= {max_nz}, {skipped} infeasible draws skipped): oracle distance {worst_err:.1e}, KKT {worst_kkt:.1e}"
    ))
}

fn closed_loop() -> Result<String, String> {
    let a = DenseMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0]);
    let b = DenseMatrix::from_row_slice(2, 1, &[0.005, 0.1]);
    let p = MpcProblem::lti(
        a.clone(),
        b.clone(),
        DenseMatrix::identity(2),
        scalar(1.0),
        Some(DenseMatrix::identity(2).scale(10.0)),
        15,
        Bounds::symmetric(2, 1, 10.0, 10.0, 15),
        Formulation::Lax,
    );
    let plant = LinearPlant::new(a, b);
    let cfg = SolverConfig {
        rho: 1.0,
        eps_primal: 1e-8,
        eps_dual: 1e-8,
        ..SolverConfig::default()
    };
    let mut sim = Simulation::new(&plant, p, &ReferencePair::regulate(vec![1.0, 0.0], 1), cfg);
    let retunes = [60, 120];
    sim.mid_run_retune(DenseMatrix::identity(2), scalar(0.1), retunes[0]).map_err(|e| e.to_string())?;
    sim.mid_run_retune(DenseMatrix::identity(2).scale(2.0), scalar(1.0), retunes[1]).map_err(|e| e.to_string())?;
    let log = sim.run(200).map_err(|e| e.to_string())?;

    let reached = log
        .records
        .iter()
        .map(|r| &r.x)
        .chain(std::iter::once(&log.final_state))
        .position(|x| x.iter().all(|v| v.abs() <= 1e-2));
    let reached = reached.ok_or_else(|| format!("never reached |x| <= 1e-2, final {:?}", log.final_state))?;
    ensure(log.records.iter().all(|r| r.u[0].abs() <= 10.0), || "input outside bounds".to_string())?;
    let marked: Vec<usize> = log.events.iter().map(|e| e.step).collect();
    ensure(marked == retunes, || format!("retune events at {marked:?}, expected {retunes:?}"))?;
    let refactored: Vec<usize> = log.records.iter().filter(|r| r.refactored).map(|r| r.step).collect();
    ensure(refactored == [0, retunes[0], retunes[1]] && log.refactor_count == 3, || {
        format!("refactored at {refactored:?} (count {}), expected [0, 60, 120]", log.refactor_count)
    })?;
    Ok(format!(
        "|x| <= 1e-2 at step {reached}, inputs within +/-10, retunes at {marked:?}, {} refactors",
        log.refactor_count
    ))
}

fn bits(s: &[f64]) -> Vec<u64> {
    s.iter().map(|v| v.to_bits()).collect()
}

fn collapse_and_dispatch() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC011);
    let mut dispatch_checked = 0;
    for i in 0..200 {
        let shape = Shape {
            mode: Mode::Lti,
            formulation: Formulation::Lax,
            ..random_shape(&mut rng, 6, 3, 15)
        };
        let rho = [0.0, 0.01, 1.0][rng.gen_range(0..3)];
        let mut p = random_problem(shape, 0.8, &mut rng);
        let lti = factor(&p, rho).map_err(|e| e.to_string())?;
        let ltv = factor(&as_constant_ltv(&p), rho).map_err(|e| e.to_string())?;
        let horizon = p.horizon;
        let same = (1..=horizon).all(|k| bits(lti.beta(k)) == bits(ltv.beta(k)))
            && (1..horizon).all(|k| bits(lti.alpha(k)) == bits(ltv.alpha(k)));
        ensure(same, || format!("instance {i}: LTI and constant LTV factors differ"))?;

        if horizon * p.m >= p.n {
            p.formulation = Formulation::TerminalEquality;
            let equ = factor(&p, rho).map_err(|e| e.to_string())?;
            let shared = (1..horizon).all(|k| bits(lti.beta(k)) == bits(equ.beta(k)))
                && (1..horizon).all(|k| bits(lti.alpha(k)) == bits(equ.alpha(k)));
            ensure(shared, || format!("instance {i}: formulations differ before the last block"))?;
            ensure(bits(lti.beta(horizon)) != bits(equ.beta(horizon)), || {
                format!("instance {i}: last block identical across formulations")
            })?;
            dispatch_checked += 1;
        }
    }
    Ok(format!("200 bitwise LTI/LTV collapses, {dispatch_checked} formulation pairs differing only in the last beta"))
}

fn main() -> ExitCode {
    let criteria: [(&str, Check, Duration); 7] = [
        ("factorization correctness", factorization_correctness, Duration::from_secs(10)),
        ("hand-value regression", hand_values, Duration::from_secs(10)),
        ("complexity: affine flops and linear update time", complexity, Duration::from_secs(30)),
        ("structured update beats dense baseline", structured_vs_dense, Duration::from_secs(60)),
        ("ADMM and FISTA match enumeration oracle", solver_correctness, Duration::from_secs(60)),
        ("closed-loop regulation with retunes", closed_loop, Duration::from_secs(30)),
        ("LTV collapse and formulation dispatch", collapse_and_dispatch, Duration::from_secs(30)),
    ];
    let mut failures = 0;
    for (i, (name, check, limit)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".to_string()));
        let elapsed = start.elapsed();
        let outcome = outcome.and_then(|detail| {
            if elapsed <= limit {
                Ok(detail)
            } else {
                Err(format!("took {:.1} s, limit {} s", elapsed.as_secs_f64(), limit.as_secs()))
            }
        });
        match outcome {
            Ok(detail) => println!("PASS [{}] {name}: {detail} ({:.2} s)", i + 1, elapsed.as_secs_f64()),
            Err(why) => {
                failures += 1;
                println!("FAIL [{}] {name}: {why} ({:.2} s)", i + 1, elapsed.as_secs_f64());
            }
        }
    }
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failures} criteria failed");
        ExitCode::FAILURE
    }
}
