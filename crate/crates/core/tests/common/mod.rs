//! Random problem generators shared by the integration and acceptance tests.
#![allow(dead_code)]

use bandmpc::{Bounds, DenseMatrix, Formulation, Mode, MpcProblem, ReferencePair};
use rand::Rng;

pub fn random_matrix(rows: usize, cols: usize, scale: f64, rng: &mut impl Rng) -> DenseMatrix {
    let data: Vec<f64> = (0..rows * cols).map(|_| scale * rng.gen_range(-1.0..1.0)).collect();
    DenseMatrix::from_row_slice(rows, cols, &data)
}

/// `M Mᵀ / n + floor·I`, a dense symmetric positive definite matrix.
pub fn random_spd(n: usize, floor: f64, rng: &mut impl Rng) -> DenseMatrix {
    let m = random_matrix(n, n, 1.0, rng);
    let mut s = m.matmul(&m.transpose()).scale(1.0 / n as f64);
    for i in 0..n {
        s[(i, i)] += floor;
    }
    // Exact symmetry, so LTI and LTV paths see identical data.
    for i in 0..n {
        for j in 0..i {
            s[(i, j)] = s[(j, i)];
        }
    }
    s
}

pub fn random_diag(n: usize, lo: f64, hi: f64, rng: &mut impl Rng) -> DenseMatrix {
    let d: Vec<f64> = (0..n).map(|_| rng.gen_range(lo..hi)).collect();
    DenseMatrix::from_diagonal(&d)
}

#[derive(Debug, Clone, Copy)]
pub struct Shape {
    pub n: usize,
    pub m: usize,
    pub horizon: usize,
    pub mode: Mode,
    pub formulation: Formulation,
    /// Diagonal weights instead of dense ones.
    pub diagonal: bool,
}

fn weight(dim: usize, diagonal: bool, rng: &mut impl Rng) -> DenseMatrix {
    if diagonal {
        random_diag(dim, 0.5, 3.0, rng)
    } else {
        random_spd(dim, 0.3, rng)
    }
}

/// Random problem with model entries scaled by `a_scale`. A terminal
/// equality is downgraded to Lax when `N·m < n`, where W would be singular.
pub fn random_problem<R: Rng>(mut s: Shape, a_scale: f64, rng: &mut R) -> MpcProblem {
    if s.horizon * s.m < s.n {
        s.formulation = Formulation::Lax;
    }
    let (n, m, horizon) = (s.n, s.m, s.horizon);
    let weight = |dim: usize, rng: &mut R| weight(dim, s.diagonal, rng);
    let bounds = Bounds::symmetric(n, m, 5.0, 1.0, horizon);
    let t = Some(weight(n, rng));
    match s.mode {
        Mode::Lti => MpcProblem::lti(
            random_matrix(n, n, a_scale, rng),
            random_matrix(n, m, 1.0, rng),
            weight(n, rng),
            weight(m, rng),
            t,
            horizon,
            bounds,
            s.formulation,
        ),
        Mode::Ltv => {
            let a = (0..horizon).map(|_| random_matrix(n, n, a_scale, rng)).collect();
            let b = (0..horizon).map(|_| random_matrix(n, m, 1.0, rng)).collect();
            let q = (0..horizon).map(|_| weight(n, rng)).collect();
            let r = (0..horizon).map(|_| weight(m, rng)).collect();
            MpcProblem::ltv(a, b, q, r, t, horizon, bounds, s.formulation)
        }
    }
}

pub fn random_shape(rng: &mut impl Rng, max_n: usize, max_m: usize, max_horizon: usize) -> Shape {
    Shape {
        n: rng.gen_range(1..=max_n),
        m: rng.gen_range(1..=max_m),
        horizon: rng.gen_range(2..=max_horizon),
        mode: if rng.gen_bool(0.5) { Mode::Lti } else { Mode::Ltv },
        formulation: if rng.gen_bool(0.5) {
            Formulation::Lax
        } else {
            Formulation::TerminalEquality
        },
        diagonal: rng.gen_bool(0.3),
    }
}

/// The same problem with every sequence written out as `N` identical copies.
pub fn as_constant_ltv(p: &MpcProblem) -> MpcProblem {
    assert_eq!(p.mode, Mode::Lti);
    let rep = |v: &Vec<DenseMatrix>| vec![v[0].clone(); p.horizon];
    MpcProblem::ltv(
        rep(&p.a),
        rep(&p.b),
        rep(&p.q),
        rep(&p.r),
        p.t.clone(),
        p.horizon,
        p.bounds.clone(),
        p.formulation,
    )
}

/// Tiny problem with diagonal weights and `n_z ≤ 12`, with tight enough
/// bounds that some constraints are usually active.
pub fn tiny_problem(rng: &mut impl Rng) -> (MpcProblem, ReferencePair) {
    loop {
        let n = rng.gen_range(1..=2);
        let m = rng.gen_range(1..=2);
        let horizon = rng.gen_range(2..=4);
        let formulation = if rng.gen_bool(0.75) {
            Formulation::Lax
        } else {
            Formulation::TerminalEquality
        };
        let n_z = match formulation {
            Formulation::Lax => horizon * (n + m),
            Formulation::TerminalEquality => horizon * m + (horizon - 1) * n,
        };
        if n_z > 12 {
            continue;
        }
        let shape = Shape {
            n,
            m,
            horizon,
            mode: if rng.gen_bool(0.5) { Mode::Lti } else { Mode::Ltv },
            formulation,
            diagonal: true,
        };
        let mut p = random_problem(shape, 1.0, rng);
        let u_max = rng.gen_range(0.2..1.5);
        let x_max = rng.gen_range(0.8..3.0);
        p.bounds = Bounds::symmetric(n, m, x_max, u_max, horizon);
        let x0: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0) * x_max).collect();
        let x_r: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.3..0.3)).collect();
        let u_r: Vec<f64> = (0..m).map(|_| rng.gen_range(-0.3..0.3)).collect();
        return (p, ReferencePair::new(x_r, u_r, x0));
    }
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
