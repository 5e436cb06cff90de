//! Ground-truth discrete-time LTI systems `x(t+1) = A x(t) + B u(t)`.
//!
//! Everything here needs the model. The data-driven code never touches
//! it; it exists to generate experiments and to check answers.
//!
//! Input sequences are stacked in reversed time, `[u(T-1); ...; u(0)]`, so
//! that `x(T) = A^T x(0) + C_T u` with `C_T = [B, AB, ..., A^(T-1) B]`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::matops::{self, ensure_finite};
use crate::{Error, Matrix, Result, Vector};

/// Relative residual below which a steering problem counts as reachable.
pub const REACHABILITY_RTOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct LtiSystem {
    a: Matrix,
    b: Matrix,
}

impl LtiSystem {
    pub fn new(a: Matrix, b: Matrix) -> Result<Self> {
        if !a.is_square() || a.nrows() == 0 {
            return Err(Error::DimensionMismatch(format!(
                "state matrix must be square and non-empty, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if b.nrows() != a.nrows() || b.ncols() == 0 {
            return Err(Error::DimensionMismatch(format!(
                "input matrix must be {}xm with m >= 1, got {}x{}",
                a.nrows(),
                b.nrows(),
                b.ncols()
            )));
        }
        ensure_finite(&a, "A")?;
        ensure_finite(&b, "B")?;
        Ok(LtiSystem { a, b })
    }

    /// Random system with `A_ij ~ N(0, 1/n)` and `B_ij ~ N(0, 1)`.
    ///
    /// The `1/n` variance keeps the spectral radius of `A` near one, so
    /// powers over long horizons stay representable in double precision.
    pub fn random<R: Rng + ?Sized>(n: usize, m: usize, rng: &mut R) -> Result<Self> {
        let scale = 1.0 / (n.max(1) as f64).sqrt();
        let a = Matrix::from_fn(n, n, |_, _| scale * rng.sample::<f64, _>(StandardNormal));
        let b = Matrix::from_fn(n, m, |_, _| rng.sample::<f64, _>(StandardNormal));
        LtiSystem::new(a, b)
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn b(&self) -> &Matrix {
        &self.b
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn m(&self) -> usize {
        self.b.ncols()
    }

    /// `A^t`.
    pub fn transition(&self, t: usize) -> Matrix {
        let n = self.n();
        (0..t).fold(Matrix::identity(n, n), |acc, _| &self.a * acc)
    }
}

/// `[B, AB, ..., A^(T-1) B]`.
pub fn controllability_matrix(sys: &LtiSystem, horizon: usize) -> Matrix {
    let (n, m) = (sys.n(), sys.m());
    let mut out = Matrix::zeros(n, m * horizon);
    let mut block = sys.b.clone();
    for k in 0..horizon {
        out.columns_mut(k * m, m).copy_from(&block);
        block = &sys.a * block;
    }
    out
}

/// Input sequence stacked as `[u(T-1); ...; u(0)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct InputSequence {
    horizon: usize,
    m: usize,
    stacked: Vector,
}

impl InputSequence {
    pub fn new(m: usize, stacked: Vector) -> Result<Self> {
        if m == 0 || stacked.is_empty() || !stacked.len().is_multiple_of(m) {
            return Err(Error::DimensionMismatch(format!(
                "stacked input of length {} is not a positive multiple of m = {m}",
                stacked.len()
            )));
        }
        Ok(InputSequence {
            horizon: stacked.len() / m,
            m,
            stacked,
        })
    }

    /// Builds the reversed-time stacking from `u(0), u(1), ...`.
    pub fn from_time_ordered(steps: &[Vector]) -> Result<Self> {
        let m = steps.first().map_or(0, |u| u.len());
        if steps.iter().any(|u| u.len() != m) {
            return Err(Error::DimensionMismatch("input samples have different lengths".into()));
        }
        let stacked = Vector::from_iterator(m * steps.len(), steps.iter().rev().flat_map(|u| u.iter().copied()));
        InputSequence::new(m, stacked)
    }

    pub fn zeros(m: usize, horizon: usize) -> Self {
        InputSequence {
            horizon,
            m,
            stacked: Vector::zeros(m * horizon),
        }
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn stacked(&self) -> &Vector {
        &self.stacked
    }

    pub fn into_stacked(self) -> Vector {
        self.stacked
    }

    /// `u(t)` for `0 <= t < T`.
    pub fn at(&self, t: usize) -> Vector {
        let block = self.horizon - 1 - t;
        self.stacked.rows(block * self.m, self.m).into_owned()
    }

    pub fn norm(&self) -> f64 {
        self.stacked.norm()
    }
}

/// Steering task: reach `xf` from `x0` in `horizon` steps.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlProblem {
    pub x0: Vector,
    pub xf: Vector,
    pub horizon: usize,
}

impl ControlProblem {
    pub fn new(x0: Vector, xf: Vector, horizon: usize) -> Result<Self> {
        if x0.len() != xf.len() || x0.is_empty() {
            return Err(Error::DimensionMismatch(format!(
                "x0 has length {}, xf has length {}",
                x0.len(),
                xf.len()
            )));
        }
        if horizon == 0 {
            return Err(Error::BadShape("control horizon must be at least 1".into()));
        }
        Ok(ControlProblem { x0, xf, horizon })
    }

    /// `[x0; xf]`.
    pub fn endpoints(&self) -> Vector {
        let n = self.x0.len();
        Vector::from_iterator(2 * n, self.x0.iter().chain(self.xf.iter()).copied())
    }
}

/// Trajectory `x(0), ..., x(T)` by stepping the recursion.
pub fn simulate(sys: &LtiSystem, x0: &Vector, u: &InputSequence) -> Result<Vec<Vector>> {
    if x0.len() != sys.n() {
        return Err(Error::DimensionMismatch(format!(
            "initial state has length {}, system has n = {}",
            x0.len(),
            sys.n()
        )));
    }
    if u.m() != sys.m() {
        return Err(Error::DimensionMismatch(format!(
            "input has m = {}, system has m = {}",
            u.m(),
            sys.m()
        )));
    }
    let mut states = Vec::with_capacity(u.horizon() + 1);
    states.push(x0.clone());
    for t in 0..u.horizon() {
        let next = &sys.a * &states[t] + &sys.b * u.at(t);
        states.push(next);
    }
    Ok(states)
}

/// `||x(T) - xf|| / ||xf||` after applying `u` from `prob.x0`, by simulation.
///
/// Falls back to the absolute error when `xf = 0`.
pub fn final_state_error(sys: &LtiSystem, prob: &ControlProblem, u: &InputSequence) -> Result<f64> {
    let states = simulate(sys, &prob.x0, u)?;
    let last = states.last().expect("trajectory includes x(0)");
    let err = (last - &prob.xf).norm();
    let scale = prob.xf.norm();
    Ok(if scale > 0.0 { err / scale } else { err })
}

fn check_problem(sys: &LtiSystem, prob: &ControlProblem) -> Result<()> {
    if prob.x0.len() != sys.n() {
        return Err(Error::DimensionMismatch(format!(
            "problem states have length {}, system has n = {}",
            prob.x0.len(),
            sys.n()
        )));
    }
    Ok(())
}

/// Relative residual of projecting `xf - A^T x0` onto `Im(C_T)`.
fn reachability_residual(sys: &LtiSystem, prob: &ControlProblem) -> (Matrix, Vector, f64) {
    let c = controllability_matrix(sys, prob.horizon);
    let r = &prob.xf - sys.transition(prob.horizon) * &prob.x0;
    let rn = r.norm();
    if rn == 0.0 {
        return (c, r, 0.0);
    }
    let proj = &c * (matops::pinv(&c) * &r);
    let residual = (&r - proj).norm() / rn;
    (c, r, residual)
}

/// Whether `xf - A^T x0` lies in `Im(C_T)` up to relative tolerance `rtol`.
pub fn is_reachable(sys: &LtiSystem, prob: &ControlProblem, rtol: f64) -> Result<bool> {
    check_problem(sys, prob)?;
    let (_, _, residual) = reachability_residual(sys, prob);
    Ok(residual <= rtol)
}

/// Model-based minimum-energy input `C_T^+ (xf - A^T x0)`.
pub fn min_energy_oracle(sys: &LtiSystem, prob: &ControlProblem) -> Result<InputSequence> {
    check_problem(sys, prob)?;
    let (c, r, residual) = reachability_residual(sys, prob);
    if residual > REACHABILITY_RTOL {
        return Err(Error::Unreachable {
            horizon: prob.horizon,
            residual,
        });
    }
    InputSequence::new(sys.m(), matops::pinv(&c) * r)
}

/// Serialized form of a system: `{"A": [[..],..], "B": [[..],..]}`.
#[derive(Debug, Serialize, Deserialize)]
pub struct SystemFile {
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<f64>>,
}

impl From<&LtiSystem> for SystemFile {
    fn from(sys: &LtiSystem) -> Self {
        SystemFile {
            a: rows_of(&sys.a),
            b: rows_of(&sys.b),
        }
    }
}

impl TryFrom<SystemFile> for LtiSystem {
    type Error = Error;

    fn try_from(file: SystemFile) -> Result<Self> {
        let a = matrix_from_rows(&file.a, "A")?;
        let b = matrix_from_rows(&file.b, "B")?;
        LtiSystem::new(a, b)
    }
}

pub(crate) fn rows_of(m: &Matrix) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub(crate) fn matrix_from_rows(rows: &[Vec<f64>], path: &str) -> Result<Matrix> {
    let cols = rows.first().map_or(0, Vec::len);
    if let Some(i) = rows.iter().position(|r| r.len() != cols) {
        return Err(Error::SchemaViolation {
            path: format!("{path}[{i}]"),
            reason: format!("row has {} entries, expected {cols}", rows[i].len()),
        });
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::SchemaViolation {
            path: path.to_string(),
            reason: "non-finite entry".into(),
        });
    }
    Ok(Matrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

pub fn save_system(sys: &LtiSystem, path: &std::path::Path) -> Result<()> {
    let text = serde_json::to_string(&SystemFile::from(sys)).expect("plain data serializes");
    std::fs::write(path, text)?;
    Ok(())
}

pub fn load_system(path: &std::path::Path) -> Result<LtiSystem> {
    let text = std::fs::read_to_string(path)?;
    let file: SystemFile = serde_json::from_str(&text).map_err(|e| Error::SchemaViolation {
        path: "$".into(),
        reason: e.to_string(),
    })?;
    LtiSystem::try_from(file)
}
