//! JSON problem and scenario files.
//!
//! A problem file carries `n, m, N, mode, formulation, A, B, Q, R, T, bounds,
//! x0, xr, ur`. Matrices are row-major nested arrays; in LTV mode `A, B, Q, R`
//! may be arrays of matrices. Each bound is either one vector (replicated over
//! the horizon) or one vector per step. A file with `H` and `G` fields is read
//! as a raw QP instead.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::problem::{Bounds, Formulation, Mode, MpcProblem, ReferencePair};
use crate::qp::DenseQp;
use crate::simulate::{ReferenceChange, Retune};
use crate::solvers::{SolverConfig, SolverKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixOrSeq {
    Single(DenseMatrix),
    Seq(Vec<DenseMatrix>),
}

impl MatrixOrSeq {
    fn is_seq(&self) -> bool {
        matches!(self, MatrixOrSeq::Seq(_))
    }

    fn into_vec(self, mode: Mode, horizon: usize) -> Vec<DenseMatrix> {
        match (self, mode) {
            (MatrixOrSeq::Single(m), Mode::Ltv) => vec![m; horizon],
            (MatrixOrSeq::Single(m), Mode::Lti) => vec![m],
            (MatrixOrSeq::Seq(v), _) => v,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum VecOrSeq {
    Single(Vec<f64>),
    PerStep(Vec<Vec<f64>>),
}

impl VecOrSeq {
    fn into_steps(self, horizon: usize) -> Vec<Vec<f64>> {
        match self {
            VecOrSeq::Single(v) => vec![v; horizon],
            VecOrSeq::PerStep(v) => v,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsFile {
    pub x_lb: VecOrSeq,
    pub x_ub: VecOrSeq,
    pub u_lb: VecOrSeq,
    pub u_ub: VecOrSeq,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemFile {
    pub n: usize,
    pub m: usize,
    #[serde(rename = "N")]
    pub horizon: usize,
    /// Inferred from the shape of `A, B, Q, R` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub formulation: Option<Formulation>,
    #[serde(rename = "A")]
    pub a: MatrixOrSeq,
    #[serde(rename = "B")]
    pub b: MatrixOrSeq,
    #[serde(rename = "Q")]
    pub q: MatrixOrSeq,
    #[serde(rename = "R")]
    pub r: MatrixOrSeq,
    #[serde(rename = "T", default, skip_serializing_if = "Option::is_none")]
    pub t: Option<DenseMatrix>,
    pub bounds: BoundsFile,
    pub x0: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xr: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ur: Option<Vec<f64>>,
}

impl ProblemFile {
    /// Builds the problem and reference pair. Dimensions are checked by
    /// [`MpcProblem::validate`], which this does not call.
    pub fn into_problem(self) -> (MpcProblem, ReferencePair) {
        let any_seq = [&self.a, &self.b, &self.q, &self.r].iter().any(|m| m.is_seq());
        let mode = self.mode.unwrap_or(if any_seq { Mode::Ltv } else { Mode::Lti });
        let horizon = self.horizon;
        let problem = MpcProblem {
            n: self.n,
            m: self.m,
            horizon,
            mode,
            formulation: self.formulation.unwrap_or(Formulation::Lax),
            a: self.a.into_vec(mode, horizon),
            b: self.b.into_vec(mode, horizon),
            q: self.q.into_vec(mode, horizon),
            r: self.r.into_vec(mode, horizon),
            t: self.t,
            bounds: Bounds {
                x_lb: self.bounds.x_lb.into_steps(horizon),
                x_ub: self.bounds.x_ub.into_steps(horizon),
                u_lb: self.bounds.u_lb.into_steps(horizon),
                u_ub: self.bounds.u_ub.into_steps(horizon),
            },
        };
        let reference = ReferencePair {
            x_r: self.xr.unwrap_or_else(|| vec![0.0; self.n]),
            u_r: self.ur.unwrap_or_else(|| vec![0.0; self.m]),
            x0: self.x0,
        };
        (problem, reference)
    }

    pub fn from_problem(p: &MpcProblem, r: &ReferencePair) -> Self {
        let seq = |v: &Vec<DenseMatrix>| match p.mode {
            Mode::Lti => MatrixOrSeq::Single(v[0].clone()),
            Mode::Ltv => MatrixOrSeq::Seq(v.clone()),
        };
        Self {
            n: p.n,
            m: p.m,
            horizon: p.horizon,
            mode: Some(p.mode),
            formulation: Some(p.formulation),
            a: seq(&p.a),
            b: seq(&p.b),
            q: seq(&p.q),
            r: seq(&p.r),
            t: p.t.clone(),
            bounds: BoundsFile {
                x_lb: VecOrSeq::PerStep(p.bounds.x_lb.clone()),
                x_ub: VecOrSeq::PerStep(p.bounds.x_ub.clone()),
                u_lb: VecOrSeq::PerStep(p.bounds.u_lb.clone()),
                u_ub: VecOrSeq::PerStep(p.bounds.u_ub.clone()),
            },
            x0: r.x0.clone(),
            xr: Some(r.x_r.clone()),
            ur: Some(r.u_r.clone()),
        }
    }
}

/// Raw QP file: dense `H, q, G, b, z_lb, z_ub`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QpFile {
    #[serde(rename = "H")]
    pub h: DenseMatrix,
    pub q: Vec<f64>,
    #[serde(rename = "G")]
    pub g: DenseMatrix,
    pub b: Vec<f64>,
    pub z_lb: Vec<f64>,
    pub z_ub: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProblemInput {
    Mpc(MpcProblem, ReferencePair),
    Qp(DenseQp),
}

/// Deserializes with the failing field path in the error message.
pub fn from_value<T: DeserializeOwned>(value: serde_json::Value) -> Result<T> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        if path == "." {
            Error::Parse(e.inner().to_string())
        } else {
            Error::Parse(format!("field `{path}`: {}", e.inner()))
        }
    })
}

fn parse_json(text: &str) -> Result<serde_json::Value> {
    serde_json::from_str(text).map_err(|e| Error::Parse(format!("invalid JSON: {e}")))
}

pub fn parse_problem(text: &str) -> Result<ProblemInput> {
    let value = parse_json(text)?;
    if value.get("H").is_some() {
        let f: QpFile = from_value(value)?;
        return Ok(ProblemInput::Qp(DenseQp::new(f.h, f.q, f.g, f.b, f.z_lb, f.z_ub)?));
    }
    let f: ProblemFile = from_value(value)?;
    let (p, r) = f.into_problem();
    Ok(ProblemInput::Mpc(p, r))
}

pub fn read_problem(path: &Path) -> Result<ProblemInput> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_problem(&text)
}

/// Plant description in a scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PlantSpec {
    /// `x⁺ = A x + B u`; defaults to the MPC template's model.
    Linear {
        #[serde(rename = "A", default)]
        a: Option<DenseMatrix>,
        #[serde(rename = "B", default)]
        b: Option<DenseMatrix>,
    },
    /// `x⁺ = A(θ) x + B u`, `A(θ) = (1−θ)A₀ + θA₁`, `θ = clamp(|x[state_index]| / scale, 0, 1)`.
    LpvInterp {
        #[serde(rename = "A0")]
        a0: DenseMatrix,
        #[serde(rename = "A1")]
        a1: DenseMatrix,
        #[serde(rename = "B")]
        b: DenseMatrix,
        state_index: usize,
        scale: f64,
    },
    /// Continuous stirred-tank reactor, integrated with RK4.
    Cstr {
        params: crate::simulate::CstrParams,
        sample_time: f64,
        #[serde(default = "default_substeps")]
        substeps: usize,
    },
}

fn default_substeps() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomInitialState {
    pub lb: Vec<f64>,
    pub ub: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioFile {
    pub plant: PlantSpec,
    pub mpc: ProblemFile,
    #[serde(default)]
    pub solver: SolverKind,
    #[serde(default)]
    pub config: SolverConfig,
    /// Reference changes; the MPC file's `xr, ur` apply from step 0 otherwise.
    #[serde(default)]
    pub references: Vec<ReferenceChange>,
    #[serde(default)]
    pub retunes: Vec<Retune>,
    pub steps: usize,
    #[serde(default)]
    pub seed: u64,
    /// Draws `x0` uniformly in the box using `seed` instead of the MPC file's `x0`.
    #[serde(default)]
    pub randomize_x0: Option<RandomInitialState>,
    /// Seconds per step in plot output.
    #[serde(default = "default_sample_time")]
    pub sample_time: f64,
}

fn default_sample_time() -> f64 {
    1.0
}

pub fn parse_scenario(text: &str) -> Result<ScenarioFile> {
    from_value(parse_json(text)?)
}

pub fn read_scenario(path: &Path) -> Result<ScenarioFile> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_scenario(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SCALAR: &str = r#"{
        "n": 1, "m": 1, "N": 2,
        "A": [[1]], "B": [[1]], "Q": [[1]], "R": [[1]], "T": [[1]],
        "bounds": {"x_lb": [-10], "x_ub": [10], "u_lb": [-10], "u_ub": [10]},
        "x0": [2]
    }"#;

    #[test]
    fn parses_lti_problem() {
        let ProblemInput::Mpc(p, r) = parse_problem(SCALAR).unwrap() else {
            panic!("expected MPC problem")
        };
        assert_eq!(p.mode, Mode::Lti);
        assert_eq!(p.formulation, Formulation::Lax);
        assert!(p.validate().is_empty());
        assert_eq!(r.x0, vec![2.0]);
        assert_eq!(r.x_r, vec![0.0]);
        assert_eq!(p.bounds.x_lb.len(), 2);
    }

    #[test]
    fn parses_ltv_sequences_and_equ_alias() {
        let text = SCALAR
            .replace(r#""A": [[1]]"#, r#""A": [[[1]], [[2]]]"#)
            .replace(r#""N": 2,"#, r#""N": 2, "formulation": "equ","#);
        let ProblemInput::Mpc(p, _) = parse_problem(&text).unwrap() else {
            panic!()
        };
        assert_eq!(p.mode, Mode::Ltv);
        assert_eq!(p.formulation, Formulation::TerminalEquality);
        assert_eq!(p.a_at(2)[(0, 0)], 2.0);
        assert_eq!(p.b.len(), 2);
    }

    #[test]
    fn missing_field_is_named() {
        let text = SCALAR.replace(r#""B": [[1]], "#, "");
        let err = parse_problem(&text).unwrap_err().to_string();
        assert!(err.contains("`B`"), "{err}");
    }

    #[test]
    fn wrong_type_reports_path() {
        let text = SCALAR.replace(r#""x0": [2]"#, r#""x0": ["two"]"#);
        let err = parse_problem(&text).unwrap_err().to_string();
        assert!(err.contains("x0"), "{err}");
    }

    #[test]
    fn malformed_json() {
        assert!(matches!(parse_problem("{ not json"), Err(Error::Parse(_))));
    }

    #[test]
    fn raw_qp_file() {
        let text = r#"{"H": [[1,0],[0,1]], "q": [0,0], "G": [[1,1]], "b": [1],
                       "z_lb": [-10,-10], "z_ub": [10,10]}"#;
        assert!(matches!(parse_problem(text).unwrap(), ProblemInput::Qp(_)));
    }

    #[test]
    fn problem_file_round_trip() {
        let ProblemInput::Mpc(p, r) = parse_problem(SCALAR).unwrap() else {
            panic!()
        };
        let text = serde_json::to_string(&ProblemFile::from_problem(&p, &r)).unwrap();
        let ProblemInput::Mpc(p2, r2) = parse_problem(&text).unwrap() else {
            panic!()
        };
        assert_eq!((p, r), (p2, r2));
    }
}
