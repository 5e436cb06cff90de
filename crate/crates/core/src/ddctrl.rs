//! Data-driven minimum-energy control from noiseless experiment batches.
//!
//! A [`HorizonPlan`] picks sets `k_1, ..., k_l` whose horizons add up to the
//! control horizon. For each planned segment the data yield
//!
//! * `U K`, `X K` with `K` a basis of `Ker(X0)` (experiments that start at
//!   the origin),
//! * a transition estimate `Q = X K_U (X0 K_U)^+`, equal to `A^T` on exact
//!   data,
//! * an input-map estimate `L = X K (U K)^+`, equal to `C_T` on exact data.
//!
//! Gluing segments gives the matrices `G`, `H` of the data-based
//! representation `[u; x_sampled] = [G; H] alpha`, and from them two
//! closed forms of the minimum-energy input: [`min_energy_projected`] (via `G`
//! and the first/last row blocks `Hbar` of `H`) and [`min_energy_glued`]
//! (via the glued controllability estimate).
//!
//! Only Gram products of each batch enter these formulas, so a batch with
//! more experiments than rows is first replaced by the `r x r` factor of
//! its thin QR; see [`CompactSet`].

use nalgebra::QR;

use crate::datagen::{Dataset, ExperimentSet};
use crate::lti::{ControlProblem, InputSequence};
use crate::matops::{self, hcat, kernel_basis, pinv, pinv_eps, singular_values, Tolerance};
use crate::{Error, Matrix, Result, Vector};

/// Ordered list of set indices (0-based) glued into one control horizon.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HorizonPlan {
    indices: Vec<usize>,
    horizons: Vec<usize>,
}

impl HorizonPlan {
    /// Plan over sets with the given `available` horizons.
    pub fn new(indices: Vec<usize>, available: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::BadShape("a horizon plan needs at least one segment".into()));
        }
        let horizons = indices
            .iter()
            .map(|&k| {
                available
                    .get(k)
                    .copied()
                    .ok_or_else(|| Error::BadShape(format!("plan index {k} out of range for {} sets", available.len())))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(HorizonPlan { indices, horizons })
    }

    pub fn for_dataset(indices: Vec<usize>, ds: &Dataset) -> Result<Self> {
        HorizonPlan::new(indices, &ds.horizons())
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    /// Horizon of each segment, in plan order.
    pub fn segment_horizons(&self) -> &[usize] {
        &self.horizons
    }

    pub fn total_horizon(&self) -> usize {
        self.horizons.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub(crate) fn check_against(&self, ds: &Dataset) -> Result<()> {
        for (&k, &t) in self.indices.iter().zip(&self.horizons) {
            match ds.set(k) {
                Some(set) if set.horizon() == t => {}
                Some(set) => {
                    return Err(Error::BadShape(format!(
                        "plan expects set {k} to have horizon {t}, dataset has {}",
                        set.horizon()
                    )))
                }
                None => return Err(Error::BadShape(format!("plan index {k} out of range"))),
            }
        }
        Ok(())
    }
}

/// Shortest sequence of set indices whose horizons sum to `target`.
///
/// Among shortest sequences the multiset with the largest horizons wins
/// (compared in descending order); repeated horizon values resolve to the
/// lowest set index, and the plan lists its indices in ascending order.
pub fn compose_horizons(available: &[usize], target: usize) -> Result<HorizonPlan> {
    if target == 0 {
        return Err(Error::BadShape("target horizon must be at least 1".into()));
    }
    let no_composition = || Error::NoComposition {
        available: available.to_vec(),
        target,
    };
    let mut values: Vec<usize> = available.iter().copied().filter(|&h| h > 0 && h <= target).collect();
    values.sort_unstable_by(|a, b| b.cmp(a));
    values.dedup();

    // fewest[s] = minimum number of parts summing to s.
    let mut fewest = vec![usize::MAX; target + 1];
    fewest[0] = 0;
    for s in 1..=target {
        for &h in &values {
            if h <= s && fewest[s - h] != usize::MAX {
                fewest[s] = fewest[s].min(fewest[s - h] + 1);
            }
        }
    }
    if fewest[target] == usize::MAX {
        return Err(no_composition());
    }

    let mut indices = Vec::with_capacity(fewest[target]);
    let mut rest = target;
    while rest > 0 {
        let h = values
            .iter()
            .copied()
            .find(|&h| h <= rest && fewest[rest - h] != usize::MAX && fewest[rest - h] + 1 == fewest[rest])
            .expect("dynamic programme guarantees a predecessor");
        indices.push(
            available
                .iter()
                .position(|&a| a == h)
                .expect("value taken from available"),
        );
        rest -= h;
    }
    indices.sort_unstable();
    HorizonPlan::new(indices, available)
}

/// A batch reduced to at most `2n + mT` columns with identical Gram
/// products: `[X0; U; X] Q_r` where `Q_r` is an orthonormal basis of the
/// row space. `experiments` keeps the original `N`.
#[derive(Debug, Clone)]
pub struct CompactSet {
    pub inputs: Matrix,
    pub initial_states: Matrix,
    pub final_states: Matrix,
    pub experiments: usize,
    pub horizon: usize,
}

impl CompactSet {
    pub fn from_set(set: &ExperimentSet) -> Self {
        let (x0, u, x) = (set.initial_states(), set.inputs(), set.final_states());
        let (n, mt, count) = (x0.nrows(), u.nrows(), set.count());
        let rows = 2 * n + mt;
        if count <= rows {
            return CompactSet {
                inputs: u.clone(),
                initial_states: x0.clone(),
                final_states: x.clone(),
                experiments: count,
                horizon: set.horizon(),
            };
        }
        let mut zt = Matrix::zeros(count, rows);
        zt.columns_mut(0, n).copy_from(&x0.transpose());
        zt.columns_mut(n, mt).copy_from(&u.transpose());
        zt.columns_mut(n + mt, n).copy_from(&x.transpose());
        let z = QR::new(zt).r().transpose();
        CompactSet {
            initial_states: z.rows(0, n).into_owned(),
            inputs: z.rows(n, mt).into_owned(),
            final_states: z.rows(n + mt, n).into_owned(),
            experiments: count,
            horizon: set.horizon(),
        }
    }

    /// `[X0; U]`.
    fn stacked_initial_inputs(&self) -> Matrix {
        let (n, mt) = (self.initial_states.nrows(), self.inputs.nrows());
        let mut out = Matrix::zeros(n + mt, self.inputs.ncols());
        out.rows_mut(0, n).copy_from(&self.initial_states);
        out.rows_mut(n, mt).copy_from(&self.inputs);
        out
    }
}

/// Rank diagnostics of one planned segment.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentRank {
    pub segment: usize,
    pub set_index: usize,
    /// `n + m T` rows of `[X0; U]`.
    pub rows: usize,
    pub experiments: usize,
    pub rank: usize,
    /// Zero when there are fewer experiments than rows.
    pub smallest_singular_value: f64,
    pub full_row_rank: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankReport {
    pub segments: Vec<SegmentRank>,
}

impl RankReport {
    pub fn all_full_rank(&self) -> bool {
        self.segments.iter().all(|s| s.full_row_rank)
    }

    pub fn first_failure(&self) -> Option<&SegmentRank> {
        self.segments.iter().find(|s| !s.full_row_rank)
    }

    fn into_result(self) -> Result<()> {
        match self.first_failure() {
            None => Ok(()),
            Some(s) => Err(Error::RankDeficientData {
                segment: s.segment,
                set: s.set_index,
                rank: s.rank,
                rows: s.rows,
                smallest_singular_value: s.smallest_singular_value,
            }),
        }
    }
}

fn segment_rank(segment: usize, set_index: usize, compact: &CompactSet, tol: Tolerance) -> SegmentRank {
    let stacked = compact.stacked_initial_inputs();
    let rows = stacked.nrows();
    let sv = singular_values(&stacked);
    let smax = sv.first().copied().unwrap_or(0.0);
    let cutoff = matops::default_rank_cutoff(rows, compact.experiments, smax);
    let rank = sv.iter().filter(|&&s| s > cutoff && s >= tol.epsilon()).count();
    let smallest = if sv.len() < rows {
        0.0
    } else {
        sv.last().copied().unwrap_or(0.0)
    };
    SegmentRank {
        segment,
        set_index,
        rows,
        experiments: compact.experiments,
        rank,
        smallest_singular_value: smallest,
        full_row_rank: rank == rows,
    }
}

/// Full-row-rank check of `[X0; U]` for every planned segment.
pub fn validate_rank(ds: &Dataset, plan: &HorizonPlan, tol: Tolerance) -> Result<RankReport> {
    plan.check_against(ds)?;
    let segments = plan
        .indices()
        .iter()
        .enumerate()
        .map(|(i, &k)| segment_rank(i, k, &CompactSet::from_set(&ds.sets()[k]), tol))
        .collect();
    Ok(RankReport { segments })
}

/// Kernel bases supplied by the caller for one segment.
#[derive(Debug, Clone)]
pub struct SegmentBases {
    /// Columns span `Ker(X0)`.
    pub initial_states_kernel: Matrix,
    /// Columns span `Ker(U)`.
    pub inputs_kernel: Matrix,
}

impl SegmentBases {
    /// Orthonormal bases from the SVD.
    pub fn orthonormal(set: &ExperimentSet) -> Self {
        SegmentBases {
            initial_states_kernel: kernel_basis(set.initial_states()),
            inputs_kernel: kernel_basis(set.inputs()),
        }
    }
}

/// Data operators of one planned segment.
#[derive(Debug, Clone)]
pub struct Segment {
    pub set_index: usize,
    pub horizon: usize,
    /// `dim Ker(X0)` of the raw batch.
    pub kernel_dim: usize,
    /// `U K_X0`, `mT x q`. After compression `q` may be smaller than
    /// `kernel_dim`: directions annihilated by all of `X0`, `U`, `X` are dropped.
    pub kernel_inputs: Matrix,
    /// `X K_X0`, `n x q`.
    pub kernel_finals: Matrix,
    /// `Q = X K_U (X0 K_U)^+`, the segment's state transition.
    pub transition: Matrix,
    /// `L = X K_X0 (U K_X0)^+`, the segment's input-to-state map.
    pub input_map: Matrix,
}

impl Segment {
    fn from_parts(
        set_index: usize,
        horizon: usize,
        kernel_dim: usize,
        u: &Matrix,
        x0: &Matrix,
        x: &Matrix,
        bases: &SegmentBases,
    ) -> Self {
        let kernel_inputs = u * &bases.initial_states_kernel;
        let kernel_finals = x * &bases.initial_states_kernel;
        let transition = x * &bases.inputs_kernel * pinv(&(x0 * &bases.inputs_kernel));
        let input_map = &kernel_finals * pinv(&kernel_inputs);
        Segment {
            set_index,
            horizon,
            kernel_dim,
            kernel_inputs,
            kernel_finals,
            transition,
            input_map,
        }
    }
}

/// Per-segment operators in plan order (`segments[0]` is `k_1`).
#[derive(Debug, Clone)]
pub struct SegmentOperators {
    pub n: usize,
    pub m: usize,
    pub segments: Vec<Segment>,
}

impl SegmentOperators {
    pub fn total_horizon(&self) -> usize {
        self.segments.iter().map(|s| s.horizon).sum()
    }

    /// `Q_l Q_(l-1) ... Q_1`.
    pub fn transition_product(&self) -> Matrix {
        glued_transition(self.segments.iter().map(|s| &s.transition), self.n)
    }

    /// `[L_l, Q_l L_(l-1), ..., Q_l ... Q_2 L_1]`.
    pub fn glued_input_map(&self) -> Matrix {
        glued_input_map(
            &self.segments.iter().map(|s| &s.transition).collect::<Vec<_>>(),
            &self.segments.iter().map(|s| &s.input_map).collect::<Vec<_>>(),
            self.n,
        )
    }

    /// Caller-chosen kernel bases on the raw (uncompressed) batches.
    pub fn with_bases(ds: &Dataset, plan: &HorizonPlan, bases: &[SegmentBases]) -> Result<Self> {
        plan.check_against(ds)?;
        if bases.len() != plan.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} basis pairs for {} segments",
                bases.len(),
                plan.len()
            )));
        }
        let segments = plan
            .indices()
            .iter()
            .zip(bases)
            .map(|(&k, b)| {
                let set = &ds.sets()[k];
                let count = set.count();
                for (name, basis, rows) in [
                    ("Ker(X0)", &b.initial_states_kernel, count),
                    ("Ker(U)", &b.inputs_kernel, count),
                ] {
                    if basis.nrows() != rows {
                        return Err(Error::DimensionMismatch(format!(
                            "{name} basis for set {k} has {} rows, expected {rows}",
                            basis.nrows()
                        )));
                    }
                }
                let kernel_dim = count - matops::numerical_rank(set.initial_states());
                Ok(Segment::from_parts(
                    k,
                    set.horizon(),
                    kernel_dim,
                    set.inputs(),
                    set.initial_states(),
                    set.final_states(),
                    b,
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SegmentOperators {
            n: ds.n(),
            m: ds.m(),
            segments,
        })
    }
}

pub(crate) fn glued_transition<'a>(transitions: impl Iterator<Item = &'a Matrix>, n: usize) -> Matrix {
    transitions.fold(Matrix::identity(n, n), |acc, q| q * acc)
}

pub(crate) fn glued_input_map(transitions: &[&Matrix], input_maps: &[&Matrix], n: usize) -> Matrix {
    let mut blocks = Vec::with_capacity(input_maps.len());
    let mut prefix = Matrix::identity(n, n);
    for i in (0..input_maps.len()).rev() {
        blocks.push(&prefix * input_maps[i]);
        prefix *= transitions[i];
    }
    hcat(n, &blocks.iter().collect::<Vec<_>>())
}

/// `Chat^+ (xf - Q_l ... Q_1 x0)`.
pub(crate) fn glued_min_energy(
    transitions: &[&Matrix],
    input_maps: &[&Matrix],
    prob: &ControlProblem,
    n: usize,
) -> Vector {
    let chat = glued_input_map(transitions, input_maps, n);
    let product = glued_transition(transitions.iter().copied(), n);
    pinv(&chat) * (&prob.xf - product * &prob.x0)
}

fn operators(ds: &Dataset, plan: &HorizonPlan, require_full_rank: bool) -> Result<SegmentOperators> {
    plan.check_against(ds)?;
    let mut cache: Vec<Option<Segment>> = vec![None; ds.sets().len()];
    let mut segments = Vec::with_capacity(plan.len());
    for (i, &k) in plan.indices().iter().enumerate() {
        if cache[k].is_none() {
            let compact = CompactSet::from_set(&ds.sets()[k]);
            if require_full_rank {
                let rank = segment_rank(i, k, &compact, Tolerance::ZERO);
                RankReport { segments: vec![rank] }.into_result()?;
            }
            let bases = SegmentBases {
                initial_states_kernel: kernel_basis(&compact.initial_states),
                inputs_kernel: kernel_basis(&compact.inputs),
            };
            let kernel_dim = compact.experiments - matops::numerical_rank(&compact.initial_states);
            cache[k] = Some(Segment::from_parts(
                k,
                compact.horizon,
                kernel_dim,
                &compact.inputs,
                &compact.initial_states,
                &compact.final_states,
                &bases,
            ));
        }
        segments.push(cache[k].clone().expect("filled above"));
    }
    Ok(SegmentOperators {
        n: ds.n(),
        m: ds.m(),
        segments,
    })
}

/// Segment operators with orthonormal kernel bases; fails with
/// [`Error::RankDeficientData`] when some `[X0; U]` is not full row rank.
pub fn segment_operators(ds: &Dataset, plan: &HorizonPlan) -> Result<SegmentOperators> {
    operators(ds, plan, true)
}

/// Same as [`segment_operators`] without the rank check. Rank-deficient
/// data give wrong (and, with empty kernels, zero) operators.
pub fn segment_operators_unchecked(ds: &Dataset, plan: &HorizonPlan) -> Result<SegmentOperators> {
    operators(ds, plan, false)
}

/// `G`, `Hbar` and optionally the full `H` of the data-based representation.
///
/// Columns follow `alpha = [alpha_l; ...; alpha_1; alpha_0]` with `alpha_0`
/// the initial state. `G` stacks segment `l` first, matching the
/// reversed-time input convention; `H` has one row block per sampled time
/// `0, T_k1, T_k1 + T_k2, ..., T`.
#[derive(Debug, Clone)]
pub struct Representation {
    pub g: Matrix,
    pub h: Option<Matrix>,
    pub hbar: Matrix,
    /// Width of each `alpha_i` block, in column order (`alpha_l` first, `alpha_0` last).
    pub block_widths: Vec<usize>,
}

impl Representation {
    pub fn from_operators(ops: &SegmentOperators, include_full_h: bool) -> Self {
        let n = ops.n;
        let segs = &ops.segments;
        let l = segs.len();
        let widths: Vec<usize> = segs.iter().rev().map(|s| s.kernel_inputs.ncols()).chain([n]).collect();
        let cols: usize = widths.iter().sum();
        // Column offset of alpha_i (segment index i in plan order, 0-based); alpha_0 is last.
        let offset_of = |i: usize| -> usize { widths[..l - 1 - i].iter().sum() };
        let init_col = cols - n;

        let input_rows: usize = segs.iter().map(|s| s.kernel_inputs.nrows()).sum();
        let mut g = Matrix::zeros(input_rows, cols);
        let mut r = 0;
        for i in (0..l).rev() {
            let block = &segs[i].kernel_inputs;
            g.view_mut((r, offset_of(i)), block.shape()).copy_from(block);
            r += block.nrows();
        }

        let mut h = Matrix::zeros(n * (l + 1), cols);
        h.view_mut((0, init_col), (n, n)).fill_with_identity();
        // coef[i] multiplies alpha_(i+1); init multiplies alpha_0.
        let mut coef: Vec<Matrix> = Vec::with_capacity(l);
        let mut init = Matrix::identity(n, n);
        for (j, seg) in segs.iter().enumerate() {
            for c in coef.iter_mut() {
                *c = &seg.transition * &*c;
            }
            coef.push(seg.kernel_finals.clone());
            init = &seg.transition * init;
            let row = n * (j + 1);
            for (i, c) in coef.iter().enumerate() {
                h.view_mut((row, offset_of(i)), c.shape()).copy_from(c);
            }
            h.view_mut((row, init_col), (n, n)).copy_from(&init);
        }

        let mut hbar = Matrix::zeros(2 * n, cols);
        hbar.rows_mut(0, n).copy_from(&h.rows(0, n));
        hbar.rows_mut(n, n).copy_from(&h.rows(n * l, n));
        Representation {
            g,
            h: include_full_h.then_some(h),
            hbar,
            block_widths: widths,
        }
    }
}

/// Representation with the full `H`, from orthonormal kernel bases.
pub fn build_representation(ds: &Dataset, plan: &HorizonPlan) -> Result<Representation> {
    Ok(Representation::from_operators(&segment_operators(ds, plan)?, true))
}

/// How the data-driven solvers treat rank-deficient batches.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    /// Cutoff for the truncated pseudoinverse `(G K_Hbar)^+_eps`.
    pub tol: Tolerance,
    /// Fail with [`Error::RankDeficientData`] instead of evaluating the
    /// formulas on data that violate the full-row-rank condition.
    pub require_full_rank: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: Tolerance::default(),
            require_full_rank: true,
        }
    }
}

pub(crate) fn check_problem(ops_n: usize, plan_total: usize, prob: &ControlProblem) -> Result<()> {
    if prob.horizon != plan_total {
        return Err(Error::HorizonMismatch {
            plan: plan_total,
            problem: prob.horizon,
        });
    }
    if prob.x0.len() != ops_n {
        return Err(Error::DimensionMismatch(format!(
            "problem states have length {}, data have n = {ops_n}",
            prob.x0.len()
        )));
    }
    Ok(())
}

/// `(I - G K (G K)^+_eps) G Hbar^+ [x0; xf]` with `K` a basis of `Ker(Hbar)`.
pub fn projected_from_representation(rep: &Representation, prob: &ControlProblem, tol: Tolerance) -> Vector {
    let rhs = prob.endpoints();
    let particular = &rep.g * (pinv(&rep.hbar) * rhs);
    let gk = &rep.g * kernel_basis(&rep.hbar);
    let correction = &gk * (pinv_eps(&gk, tol) * &particular);
    particular - correction
}

/// Minimum-energy input from the representation `(G, Hbar)`.
pub fn min_energy_projected(
    ds: &Dataset,
    plan: &HorizonPlan,
    prob: &ControlProblem,
    opts: &SolveOptions,
) -> Result<InputSequence> {
    check_problem(ds.n(), plan.total_horizon(), prob)?;
    let ops = operators(ds, plan, opts.require_full_rank)?;
    min_energy_projected_from(&ops, prob, opts.tol)
}

pub fn min_energy_projected_from(
    ops: &SegmentOperators,
    prob: &ControlProblem,
    tol: Tolerance,
) -> Result<InputSequence> {
    check_problem(ops.n, ops.total_horizon(), prob)?;
    let rep = Representation::from_operators(ops, false);
    InputSequence::new(ops.m, projected_from_representation(&rep, prob, tol))
}

/// Minimum-energy input from the glued controllability estimate:
/// `Chat^+ (xf - Q_l ... Q_1 x0)`.
pub fn min_energy_glued(
    ds: &Dataset,
    plan: &HorizonPlan,
    prob: &ControlProblem,
    opts: &SolveOptions,
) -> Result<InputSequence> {
    check_problem(ds.n(), plan.total_horizon(), prob)?;
    let ops = operators(ds, plan, opts.require_full_rank)?;
    min_energy_glued_from(&ops, prob)
}

pub fn min_energy_glued_from(ops: &SegmentOperators, prob: &ControlProblem) -> Result<InputSequence> {
    check_problem(ops.n, ops.total_horizon(), prob)?;
    let transitions: Vec<&Matrix> = ops.segments.iter().map(|s| &s.transition).collect();
    let input_maps: Vec<&Matrix> = ops.segments.iter().map(|s| &s.input_map).collect();
    InputSequence::new(ops.m, glued_min_energy(&transitions, &input_maps, prob, ops.n))
}
