//! Structured QP toolkit for linear model predictive control.
//!
//! Condenses MPC problems into banded QPs ([`problem`]), factors
//! `W = G (H + ρI)⁻¹ Gᵀ` blockwise directly from the MPC ingredients
//! ([`factor`]) so the prediction model and weights can change every sample,
//! and solves the QP with ADMM or FISTA ([`solvers`]).

// Negated comparisons are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod cli;
pub mod dense;
pub mod error;
pub mod factor;
pub mod io;
pub mod oracle;
pub mod problem;
pub mod qp;
pub mod simulate;
pub mod solvers;

pub use dense::DenseMatrix;
pub use error::{Error, Result};
pub use factor::{factor, factor_into, flop_count, gamma_entry, BandTerms, BandedCholesky, Refactorizer};
pub use problem::{build_canonical, Bounds, CanonicalQp, Formulation, Mode, MpcProblem, ReferencePair};
pub use qp::{DenseQp, QpStructure};
pub use simulate::{run_closed_loop, PlantModel, SimLog, Simulation};
pub use solvers::{admm_solve, fista_solve, kkt_residuals, SolverConfig, SolverKind, SolverResult, Status};
