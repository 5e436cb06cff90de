//! Bias-corrected data-driven control for data with additive white noise of
//! known variances.
//!
//! With noisy data the Gram products that enter the noiseless formulas are
//! biased by `N sigma^2 I`. Every such product is shifted back before it is
//! inverted, and the kernel projectors are replaced by
//!
//! ```text
//! Pi_{A,c} = I - A^T (A A^T - N sigma^2 I)^+ A
//! ```
//!
//! All shifted inverses go through [`pinv_sym_shifted`], so indefinite
//! finite-sample matrices are eigen-truncated instead of blowing up.

use crate::datagen::{Dataset, NoiseModel};
use crate::ddctrl::{
    check_problem, glued_min_energy, projected_from_representation, segment_operators_unchecked, CompactSet,
    HorizonPlan, Representation,
};
use crate::lti::{ControlProblem, InputSequence};
use crate::matops::{pinv_sym_shifted, symmetric_eigen, Tolerance};
use crate::{Error, Matrix, Result, Vector};

/// `I - A^T (A A^T - N sigma2 I)^+ A`, as a dense `N x N` matrix.
pub fn corrected_projector(a: &Matrix, experiments: usize, sigma2: f64, tol: Tolerance) -> Result<Matrix> {
    if a.ncols() != experiments {
        return Err(Error::DimensionMismatch(format!(
            "matrix has {} columns, expected N = {experiments}",
            a.ncols()
        )));
    }
    Ok(CorrectedProjector::new(a, experiments, sigma2, tol)?.dense())
}

/// Corrected kernel projector of a data matrix `A`, kept in factored form.
///
/// `A` may be a row-space compression of the original data; products
/// `L Pi R^T` only depend on Gram matrices and are unaffected.
#[derive(Debug, Clone)]
pub struct CorrectedProjector {
    data: Matrix,
    inverse: Matrix,
    /// Eigenvalues of `A A^T - N sigma2 I` truncated to zero.
    pub dropped: usize,
}

impl CorrectedProjector {
    pub fn new(a: &Matrix, experiments: usize, sigma2: f64, tol: Tolerance) -> Result<Self> {
        let shifted = pinv_sym_shifted(&(a * a.transpose()), experiments as f64 * sigma2, tol)?;
        Ok(CorrectedProjector {
            data: a.clone(),
            inverse: shifted.inverse,
            dropped: shifted.dropped,
        })
    }

    /// `L Pi R^T`, computed as `L R^T - (L A^T) S (A R^T)`.
    pub fn sandwich(&self, l: &Matrix, r: &Matrix) -> Matrix {
        l * r.transpose() - (l * self.data.transpose()) * &self.inverse * (&self.data * r.transpose())
    }

    /// `M Pi`.
    pub fn apply(&self, m: &Matrix) -> Matrix {
        m - (m * self.data.transpose()) * &self.inverse * &self.data
    }

    pub fn dense(&self) -> Matrix {
        let cols = self.data.ncols();
        Matrix::identity(cols, cols) - self.data.transpose() * &self.inverse * &self.data
    }
}

/// Corrected operators of one planned segment.
#[derive(Debug, Clone)]
pub struct CorrectedSegment {
    pub set_index: usize,
    pub horizon: usize,
    pub experiments: usize,
    /// `Q_c = X Pi_{U,c} X0^T (X0 Pi_{U,c} X0^T - N sigma2_X0 I)^+`.
    pub transition: Matrix,
    /// `L_c = X Pi_{X0,c} U^T (U Pi_{X0,c} U^T - N sigma2_U I)^+`.
    pub input_map: Matrix,
    /// `U Pi_{X0,c} U^T`.
    pub input_gram: Matrix,
    /// `U Pi_{X0,c} X^T`.
    pub cross_gram: Matrix,
    /// `X Pi_{X0,c} X^T`.
    pub final_gram: Matrix,
    /// Eigenvalues truncated across the four shifted inverses of this segment.
    pub dropped: usize,
}

#[derive(Debug, Clone)]
pub struct CorrectedOperators {
    pub n: usize,
    pub m: usize,
    pub noise: NoiseModel,
    pub segments: Vec<CorrectedSegment>,
}

impl CorrectedOperators {
    pub fn total_horizon(&self) -> usize {
        self.segments.iter().map(|s| s.horizon).sum()
    }

    pub fn dropped(&self) -> usize {
        self.segments.iter().map(|s| s.dropped).sum()
    }
}

fn corrected_segment(
    compact: &CompactSet,
    set_index: usize,
    noise: &NoiseModel,
    tol: Tolerance,
) -> Result<CorrectedSegment> {
    let count = compact.experiments;
    let scaled = |s2: f64| count as f64 * s2;
    let (u, x0, x) = (&compact.inputs, &compact.initial_states, &compact.final_states);

    let pi_u = CorrectedProjector::new(u, count, noise.sigma2_u, tol)?;
    let x0_inv = pinv_sym_shifted(&pi_u.sandwich(x0, x0), scaled(noise.sigma2_x0), tol)?;
    let transition = pi_u.sandwich(x, x0) * &x0_inv.inverse;

    let pi_x0 = CorrectedProjector::new(x0, count, noise.sigma2_x0, tol)?;
    let input_gram = pi_x0.sandwich(u, u);
    let u_inv = pinv_sym_shifted(&input_gram, scaled(noise.sigma2_u), tol)?;
    let cross_gram = pi_x0.sandwich(u, x);
    let input_map = cross_gram.transpose() * &u_inv.inverse;

    Ok(CorrectedSegment {
        set_index,
        horizon: compact.horizon,
        experiments: count,
        transition,
        input_map,
        final_gram: pi_x0.sandwich(x, x),
        input_gram,
        cross_gram,
        dropped: pi_u.dropped + x0_inv.dropped + pi_x0.dropped + u_inv.dropped,
    })
}

/// Corrected `Q_c`, `L_c` (and the Gram blocks used by
/// [`min_energy_corrected_direct`]) for every planned segment. Each
/// segment's shifts use its own experiment count.
pub fn corrected_segment_operators(
    ds: &Dataset,
    plan: &HorizonPlan,
    noise: &NoiseModel,
    tol: Tolerance,
) -> Result<CorrectedOperators> {
    plan.check_against(ds)?;
    let mut cache: Vec<Option<CorrectedSegment>> = vec![None; ds.sets().len()];
    let mut segments = Vec::with_capacity(plan.len());
    for &k in plan.indices() {
        if cache[k].is_none() {
            let compact = CompactSet::from_set(&ds.sets()[k]);
            cache[k] = Some(corrected_segment(&compact, k, noise, tol)?);
        }
        segments.push(cache[k].clone().expect("filled above"));
    }
    Ok(CorrectedOperators {
        n: ds.n(),
        m: ds.m(),
        noise: *noise,
        segments,
    })
}

/// The glued-controllability formula with `Q`, `L` replaced by `Q_c`, `L_c`.
pub fn min_energy_corrected_gramian(
    ds: &Dataset,
    plan: &HorizonPlan,
    prob: &ControlProblem,
    noise: &NoiseModel,
    tol: Tolerance,
) -> Result<InputSequence> {
    check_problem(ds.n(), plan.total_horizon(), prob)?;
    let ops = corrected_segment_operators(ds, plan, noise, tol)?;
    corrected_gramian_from(&ops, prob)
}

pub fn corrected_gramian_from(ops: &CorrectedOperators, prob: &ControlProblem) -> Result<InputSequence> {
    check_problem(ops.n, ops.total_horizon(), prob)?;
    let transitions: Vec<&Matrix> = ops.segments.iter().map(|s| &s.transition).collect();
    let input_maps: Vec<&Matrix> = ops.segments.iter().map(|s| &s.input_map).collect();
    InputSequence::new(ops.m, glued_min_energy(&transitions, &input_maps, prob, ops.n))
}

/// `Q_l ... Q_(i+1)` for every segment `i` (plan order), and the full product.
fn partial_products(ops: &CorrectedOperators) -> (Vec<Matrix>, Matrix) {
    let n = ops.n;
    let mut prefixes = vec![Matrix::zeros(n, n); ops.segments.len()];
    let mut acc = Matrix::identity(n, n);
    for (i, seg) in ops.segments.iter().enumerate().rev() {
        prefixes[i] = acc.clone();
        acc *= &seg.transition;
    }
    (prefixes, acc)
}

/// Bias correction of `Hbar_c Hbar_c^T`: `blockdiag(0, sigma2_X sum_i N_i P_i P_i^T)`
/// with `P_i = Q_l,c ... Q_(i+1),c`, one term per noisy final-state block.
pub fn hbar_bias(ops: &CorrectedOperators) -> Matrix {
    let n = ops.n;
    let (prefixes, _) = partial_products(ops);
    let mut lower = Matrix::zeros(n, n);
    for (seg, p) in ops.segments.iter().zip(&prefixes) {
        lower += p * p.transpose() * (seg.experiments as f64 * ops.noise.sigma2_x);
    }
    let mut delta = Matrix::zeros(2 * n, 2 * n);
    delta.view_mut((n, n), (n, n)).copy_from(&lower);
    delta
}

/// Projector onto the dominant eigenspace of a symmetric matrix: keep
/// eigenvalues `>= cutoff`, at most `cap` of them (largest first).
fn dominant_projector(s: &Matrix, cutoff: f64, cap: usize) -> Matrix {
    let dim = s.nrows();
    let (values, vectors) = symmetric_eigen(&((s + s.transpose()) * 0.5));
    let mut proj = Matrix::zeros(dim, dim);
    for j in (0..dim).rev().take_while(|&j| values[j] >= cutoff).take(cap) {
        let v = vectors.column(j);
        proj += v * v.transpose();
    }
    proj
}

/// Bias-corrected form of the `(G, Hbar)` formula.
///
/// The Gram products `G Pi_Hbar G^T`, `G Hbar^T`, `Hbar Hbar^T` are
/// assembled from per-segment corrected Grams, `Hbar Hbar^T` is shifted
/// by [`hbar_bias`], and the input part `N_i sigma2_U I` is removed from
/// `G Pi_Hbar G^T`. The resulting middle factor is divided by the largest
/// `N_i` before its eigenvalues are compared with `tol`; with any noise
/// present at most `mT - n` eigendirections are projected out.
///
/// With all variances zero the formula is evaluated in factored form on
/// `G`, `Hbar` directly.
pub fn min_energy_corrected_direct(
    ds: &Dataset,
    plan: &HorizonPlan,
    prob: &ControlProblem,
    noise: &NoiseModel,
    tol: Tolerance,
) -> Result<InputSequence> {
    check_problem(ds.n(), plan.total_horizon(), prob)?;
    if noise.is_zero() {
        // Without shifts every corrected projector is the plain one, and the
        // factored form avoids squaring the condition number of Hbar.
        let ops = segment_operators_unchecked(ds, plan)?;
        let rep = Representation::from_operators(&ops, false);
        return InputSequence::new(ds.m(), projected_from_representation(&rep, prob, tol));
    }
    let ops = corrected_segment_operators(ds, plan, noise, tol)?;
    corrected_direct_from(&ops, prob, tol)
}

pub fn corrected_direct_from(ops: &CorrectedOperators, prob: &ControlProblem, tol: Tolerance) -> Result<InputSequence> {
    check_problem(ops.n, ops.total_horizon(), prob)?;
    let n = ops.n;
    let segs = &ops.segments;
    let rows: usize = segs.iter().map(|s| s.input_gram.nrows()).sum();
    let (prefixes, total) = partial_products(ops);

    // Row blocks run from segment l down to segment 1.
    let mut gg = Matrix::zeros(rows, rows);
    let mut gh = Matrix::zeros(rows, 2 * n);
    let mut input_noise = Matrix::zeros(rows, rows);
    let mut hh_lower = &total * total.transpose();
    let mut r = 0;
    for (seg, p) in segs.iter().zip(&prefixes).rev() {
        let mt = seg.input_gram.nrows();
        gg.view_mut((r, r), (mt, mt)).copy_from(&seg.input_gram);
        gh.view_mut((r, n), (mt, n))
            .copy_from(&(&seg.cross_gram * p.transpose()));
        input_noise
            .view_mut((r, r), (mt, mt))
            .fill_diagonal(seg.experiments as f64 * ops.noise.sigma2_u);
        hh_lower += p * &seg.final_gram * p.transpose();
        r += mt;
    }
    let mut hh = Matrix::zeros(2 * n, 2 * n);
    hh.view_mut((0, 0), (n, n)).fill_with_identity();
    hh.view_mut((0, n), (n, n)).copy_from(&total.transpose());
    hh.view_mut((n, 0), (n, n)).copy_from(&total);
    hh.view_mut((n, n), (n, n)).copy_from(&hh_lower);

    // Row blocks of Hbar differ in scale by orders of magnitude; a diagonal
    // row scaling leaves min-norm solutions and the kernel projector of a
    // consistent system unchanged and keeps the Gram inverse accurate.
    let scaling = Matrix::from_diagonal(&hh.diagonal().map(|d| if d > 0.0 { d.sqrt().recip() } else { 1.0 }));
    let balanced = &scaling * (hh - hbar_bias(ops)) * &scaling;
    // Eigenvalues of a Gram matrix are squared singular values of its factor.
    let gram_tol = Tolerance::new(tol.epsilon() * tol.epsilon())?;
    let hh_inv = &scaling * pinv_sym_shifted(&balanced, 0.0, gram_tol)?.inverse * &scaling;
    let middle = &gg - &gh * &hh_inv * gh.transpose() - input_noise;

    // Rounding in the Gram difference is O(eps ||G G^T||), far above eps^2,
    // so the cutoff acts on the per-experiment scale instead.
    let scale = segs.iter().map(|s| s.experiments).max().unwrap_or(1).max(1) as f64;
    let cap = if ops.noise.is_zero() {
        rows
    } else {
        rows.saturating_sub(n)
    };
    let projector = dominant_projector(&(middle / scale), tol.epsilon().max(f64::MIN_POSITIVE), cap);
    let particular: Vector = &gh * (&hh_inv * prob.endpoints());
    let u = &particular - projector * &particular;
    InputSequence::new(ops.m, u)
}
