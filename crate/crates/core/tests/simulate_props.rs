use bandmpc::bench::{BenchRecord, Stats};
use bandmpc::simulate::{LinearPlant, LpvPlant};
use bandmpc::{Bounds, DenseMatrix, Formulation, MpcProblem, ReferencePair, Simulation, SolverConfig, SolverKind};
use proptest::prelude::*;

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

fn cfg() -> SolverConfig {
    SolverConfig {
        rho: 1.0,
        eps_primal: 1e-8,
        eps_dual: 1e-8,
        ..SolverConfig::default()
    }
}

fn mean_abs_u(log: &bandmpc::SimLog, range: std::ops::Range<usize>) -> f64 {
    let len = range.len() as f64;
    log.records[range].iter().map(|r| r.u[0].abs()).sum::<f64>() / len
}

#[test]
fn heavier_input_weight_shrinks_inputs() {
    let (plant, p) = double_integrator(0.1);
    let r = ReferencePair::regulate(vec![1.0, 0.0], 1);
    let mut sim = Simulation::new(&plant, p, &r, cfg());
    sim.mid_run_retune(DenseMatrix::identity(2), DenseMatrix::from_diagonal(&[10.0]), 50)
        .unwrap();
    let log = sim.run(100).unwrap();
    assert!(mean_abs_u(&log, 50..100) < mean_abs_u(&log, 0..50));
}

#[test]
fn retune_to_same_weights_changes_nothing() {
    let (plant, p) = double_integrator(1.0);
    let r = ReferencePair::regulate(vec![1.0, -0.5], 1);
    let base = Simulation::new(&plant, p.clone(), &r, cfg()).run(60).unwrap();
    let mut sim = Simulation::new(&plant, p.clone(), &r, cfg());
    sim.mid_run_retune(p.q[0].clone(), p.r[0].clone(), 25).unwrap();
    let retuned = sim.run(60).unwrap();
    for (a, b) in base.records.iter().zip(&retuned.records) {
        assert_eq!((&a.x, &a.u, a.iterations), (&b.x, &b.u, b.iterations));
    }
    assert_eq!(retuned.refactor_count, 2);
}

#[test]
fn fista_closed_loop_regulates() {
    let (plant, p) = double_integrator(1.0);
    let r = ReferencePair::regulate(vec![1.0, 0.0], 1);
    let log = Simulation::new(&plant, p, &r, cfg())
        .with_solver(SolverKind::Fista)
        .run(200)
        .unwrap();
    assert!(log.final_state.iter().all(|v| v.abs() <= 1e-2));
    assert_eq!(log.refactor_count, 1);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn inputs_in_bounds_and_runs_reproducible(x0 in -8.0..8.0f64, v0 in -3.0..3.0f64, u_max in 0.5..5.0f64) {
        let (plant, mut p) = double_integrator(1.0);
        p.bounds = Bounds::symmetric(2, 1, 10.0, u_max, 15);
        let r = ReferencePair::regulate(vec![x0, v0], 1);
        let loose = SolverConfig { rho: 1.0, eps_primal: 1e-3, eps_dual: 1e-3, max_iters: 50, ..SolverConfig::default() };
        let a = Simulation::new(&plant, p.clone(), &r, loose.clone()).run(40).unwrap();
        let b = Simulation::new(&plant, p, &r, loose).run(40).unwrap();
        prop_assert_eq!(a.without_timing(), b.without_timing());
        for rec in &a.records {
            prop_assert!(rec.u[0].abs() <= u_max);
            prop_assert!(rec.update_us >= 0.0 && rec.solve_us >= 0.0);
        }
    }

    #[test]
    fn one_refactor_per_change(steps in 5..40usize, retune_steps in proptest::collection::btree_set(0..40usize, 0..4)) {
        let (plant, p) = double_integrator(1.0);
        let r = ReferencePair::regulate(vec![1.0, 0.0], 1);
        let mut sim = Simulation::new(&plant, p, &r, cfg());
        for &s in &retune_steps {
            sim.mid_run_retune(DenseMatrix::identity(2).scale(2.0), DenseMatrix::identity(1), s).unwrap();
        }
        let log = sim.run(steps).unwrap();
        let in_range = retune_steps.iter().filter(|&&s| s > 0 && s < steps).count();
        prop_assert_eq!(log.refactor_count, 1 + in_range);
        prop_assert_eq!(log.records.iter().filter(|r| r.refactored).count(), log.refactor_count);
        for rec in log.records.iter().filter(|r| !r.refactored) {
            prop_assert_eq!(rec.update_us, 0.0);
        }
    }

    #[test]
    fn lpv_per_step_refactor_never_breaks_down(scale in 0.5..4.0f64, x0 in -3.0..3.0f64) {
        let plant = LpvPlant {
            a0: DenseMatrix::from_row_slice(2, 2, &[0.9, 0.1, 0.0, 0.8]),
            a1: DenseMatrix::from_row_slice(2, 2, &[0.7, -0.2, 0.1, 0.95]),
            b: DenseMatrix::from_row_slice(2, 1, &[0.0, 0.5]),
            state_index: 0,
            scale,
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
        let log = Simulation::new(&plant, p, &ReferencePair::regulate(vec![x0, 0.5], 1), cfg()).run(60).unwrap();
        prop_assert!(log.final_state.iter().all(|v| v.abs() < 1e-2));
    }

    #[test]
    fn bench_stats_are_ordered(samples in proptest::collection::vec(0.0..1e6f64, 1..60), solve in proptest::collection::vec(0.0..1e6f64, 1..60)) {
        let s = Stats::from_samples(&samples);
        prop_assert!(s.min <= s.median && s.median <= s.max);
        prop_assert!(s.min <= s.average && s.average <= s.max);
        let rec = BenchRecord::new("admm", (2, 1, 5), &samples, &solve);
        prop_assert!((0.0..=100.0).contains(&rec.percent));
    }
}
