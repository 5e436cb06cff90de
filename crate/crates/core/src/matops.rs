//! Dense linear-algebra primitives: kernel bases, orthogonal kernel
//! projectors and pseudoinverses with a controllable singular-value cutoff.
//!
//! Numerical rank follows the usual convention: a singular value counts
//! when it exceeds `max(rows, cols) * sigma_max * f64::EPSILON`. An explicit
//! [`Tolerance`] can only raise that cutoff.

use crate::{Error, Matrix, Result};

/// Full SVD `a = U diag(s) V^T`, singular values in descending order.
///
/// Decompositions go through faer: nalgebra's SVD returned inaccurate
/// factors on some rank-deficient inputs.
pub(crate) struct Svd {
    pub u: Matrix,
    pub s: Vec<f64>,
    pub v: Matrix,
}

fn to_faer(a: &Matrix) -> faer::Mat<f64> {
    faer::Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}

fn from_faer(m: faer::MatRef<'_, f64>) -> Matrix {
    Matrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

pub(crate) fn svd_full(a: &Matrix) -> Svd {
    let svd = to_faer(a).svd().expect("SVD iteration converges on finite input");
    Svd {
        u: from_faer(svd.U()),
        s: svd.S().column_vector().iter().copied().collect(),
        v: from_faer(svd.V()),
    }
}

/// Eigenvalues (ascending) and orthonormal eigenvectors of a symmetric matrix.
pub(crate) fn symmetric_eigen(s: &Matrix) -> (Vec<f64>, Matrix) {
    let evd = to_faer(s)
        .self_adjoint_eigen(faer::Side::Lower)
        .expect("symmetric eigensolver converges on finite input");
    (evd.S().column_vector().iter().copied().collect(), from_faer(evd.U()))
}

/// Relative asymmetry accepted by [`pinv_sym_shifted`].
const SYMMETRY_RTOL: f64 = 1e-9;

/// Singular-value cutoff `epsilon` for truncated pseudoinverses.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Tolerance(f64);

impl Tolerance {
    /// No truncation beyond the default numerical-rank cutoff.
    pub const ZERO: Tolerance = Tolerance(0.0);

    pub fn new(epsilon: f64) -> Result<Self> {
        if epsilon.is_finite() && epsilon >= 0.0 {
            Ok(Tolerance(epsilon))
        } else {
            Err(Error::InvalidTolerance(epsilon))
        }
    }

    pub fn epsilon(self) -> f64 {
        self.0
    }
}

impl Default for Tolerance {
    /// `1e-8`, the cutoff used for the truncated pseudoinverses of the
    /// data-driven formulas.
    fn default() -> Self {
        Tolerance(1e-8)
    }
}

/// Default numerical-rank cutoff for a `rows x cols` matrix whose largest
/// singular value is `sigma_max`.
pub fn default_rank_cutoff(rows: usize, cols: usize, sigma_max: f64) -> f64 {
    rows.max(cols) as f64 * sigma_max * f64::EPSILON
}

/// Singular values in descending order (`min(rows, cols)` of them).
pub fn singular_values(a: &Matrix) -> Vec<f64> {
    if a.is_empty() {
        return Vec::new();
    }
    to_faer(a)
        .singular_values()
        .expect("SVD iteration converges on finite input")
}

/// Numerical rank under the default cutoff.
pub fn numerical_rank(a: &Matrix) -> usize {
    let sv = singular_values(a);
    let Some(&smax) = sv.first() else {
        return 0;
    };
    let cutoff = default_rank_cutoff(a.nrows(), a.ncols(), smax);
    sv.iter().filter(|&&s| s > cutoff).count()
}

/// Orthonormal basis of `Ker(a)`, one basis vector per column.
///
/// A matrix with trivial kernel yields a `cols x 0` matrix.
pub fn kernel_basis(a: &Matrix) -> Matrix {
    let (rows, cols) = a.shape();
    if cols == 0 {
        return Matrix::zeros(0, 0);
    }
    if rows == 0 {
        return Matrix::identity(cols, cols);
    }
    let svd = svd_full(a);
    let smax = svd.s.first().copied().unwrap_or(0.0);
    let cutoff = default_rank_cutoff(rows, cols, smax);
    // Columns of V past min(rows, cols) have no singular value and span
    // part of the kernel outright.
    let rank = svd.s.iter().filter(|&&s| s > cutoff).count();
    svd.v.columns(rank, cols - rank).into_owned()
}

/// Orthogonal projector onto `Ker(a)`, `I - a^+ a`.
pub fn kernel_projector(a: &Matrix) -> Matrix {
    let cols = a.ncols();
    Matrix::identity(cols, cols) - pinv(a) * a
}

/// Exact Moore-Penrose pseudoinverse (default rank cutoff only).
pub fn pinv(a: &Matrix) -> Matrix {
    pinv_eps(a, Tolerance::ZERO)
}

/// SVD pseudoinverse that treats singular values below `tol` as zero.
pub fn pinv_eps(a: &Matrix, tol: Tolerance) -> Matrix {
    let (rows, cols) = a.shape();
    if a.is_empty() {
        return Matrix::zeros(cols, rows);
    }
    let svd = svd_full(a);
    let smax = svd.s.first().copied().unwrap_or(0.0);
    let cutoff = default_rank_cutoff(rows, cols, smax);
    let kept = svd.s.iter().take_while(|&&s| s > cutoff && s >= tol.0).count();
    let mut v_scaled = svd.v.columns(0, kept).into_owned();
    for (j, &s) in svd.s[..kept].iter().enumerate() {
        v_scaled.column_mut(j).scale_mut(1.0 / s);
    }
    v_scaled * svd.u.columns(0, kept).transpose()
}

/// Number of singular values retained by [`pinv_eps`] at `tol`.
pub fn truncated_rank(a: &Matrix, tol: Tolerance) -> usize {
    let sv = singular_values(a);
    let Some(&smax) = sv.first() else {
        return 0;
    };
    let cutoff = default_rank_cutoff(a.nrows(), a.ncols(), smax);
    sv.iter().filter(|&&s| s > cutoff && s >= tol.0).count()
}

/// Result of [`pinv_sym_shifted`].
#[derive(Debug, Clone)]
pub struct ShiftedInverse {
    pub inverse: Matrix,
    /// Eigenvalues of `S - shift I` that were truncated to zero.
    pub dropped: usize,
}

/// `(s - shift I)^+` through the symmetric eigendecomposition of `s`,
/// zeroing shifted eigenvalues whose magnitude is below `tol`.
///
/// The shifted matrix may be indefinite; truncation acts on `|lambda - shift|`.
pub fn pinv_sym_shifted(s: &Matrix, shift: f64, tol: Tolerance) -> Result<ShiftedInverse> {
    if !s.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "shifted inverse needs a square matrix, got {}x{}",
            s.nrows(),
            s.ncols()
        )));
    }
    let dim = s.nrows();
    if dim == 0 {
        return Ok(ShiftedInverse {
            inverse: Matrix::zeros(0, 0),
            dropped: 0,
        });
    }
    let asymmetry = max_asymmetry(s);
    let scale = s.amax().max(f64::MIN_POSITIVE);
    if asymmetry > SYMMETRY_RTOL * scale {
        return Err(Error::NotSymmetric { asymmetry });
    }
    let sym = (s + s.transpose()) * 0.5;
    let (values, vectors) = symmetric_eigen(&sym);
    let shifted: Vec<f64> = values.iter().map(|l| l - shift).collect();
    let largest = shifted.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let cutoff = default_rank_cutoff(dim, dim, largest);

    let mut dropped = 0;
    let mut scaled = vectors.clone();
    for (j, &mu) in shifted.iter().enumerate() {
        let inv = if mu.abs() > cutoff && mu.abs() >= tol.0 {
            1.0 / mu
        } else {
            dropped += 1;
            0.0
        };
        scaled.column_mut(j).scale_mut(inv);
    }
    Ok(ShiftedInverse {
        inverse: scaled * vectors.transpose(),
        dropped,
    })
}

fn max_asymmetry(s: &Matrix) -> f64 {
    let n = s.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((s[(i, j)] - s[(j, i)]).abs());
        }
    }
    worst
}

pub fn ensure_finite(m: &Matrix, what: &str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what.to_string()))
    }
}

/// Horizontal concatenation; all blocks must share the row count `rows`.
pub fn hcat(rows: usize, blocks: &[&Matrix]) -> Matrix {
    let cols = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = Matrix::zeros(rows, cols);
    let mut c = 0;
    for b in blocks {
        debug_assert_eq!(b.nrows(), rows);
        out.columns_mut(c, b.ncols()).copy_from(*b);
        c += b.ncols();
    }
    out
}

/// Block-diagonal matrix from square or rectangular blocks.
pub fn block_diag(blocks: &[&Matrix]) -> Matrix {
    let rows = blocks.iter().map(|b| b.nrows()).sum();
    let cols = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = Matrix::zeros(rows, cols);
    let (mut r, mut c) = (0, 0);
    for b in blocks {
        out.view_mut((r, c), b.shape()).copy_from(*b);
        r += b.nrows();
        c += b.ncols();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;
    use proptest::prelude::*;

    fn max_abs(m: &Matrix) -> f64 {
        m.amax()
    }

    fn is_orthonormal(k: &Matrix, tol: f64) -> bool {
        let gram = k.transpose() * k;
        max_abs(&(gram - Matrix::identity(k.ncols(), k.ncols()))) <= tol
    }

    #[test]
    fn kernel_of_single_row_selector() {
        let a = dmatrix![1.0, 0.0, 0.0];
        let k = kernel_basis(&a);
        assert_eq!(k.shape(), (3, 2));
        assert!(is_orthonormal(&k, 1e-12));
        assert!(max_abs(&(&a * &k)) <= 1e-14);
        // Same column space as [[0,0],[1,0],[0,1]]: first row vanishes.
        assert!(k.row(0).amax() <= 1e-14);
    }

    #[test]
    fn kernel_of_identity_is_empty() {
        let k = kernel_basis(&Matrix::identity(3, 3));
        assert_eq!(k.shape(), (3, 0));
    }

    #[test]
    fn kernel_of_zero_map_is_everything() {
        let a = Matrix::zeros(2, 3);
        let k = kernel_basis(&a);
        assert_eq!(k.shape(), (3, 3));
        assert!(is_orthonormal(&k, 1e-12));
        assert_eq!(max_abs(&(&a * &k)), 0.0);
    }

    #[test]
    fn kernel_of_degenerate_shapes() {
        assert_eq!(kernel_basis(&Matrix::zeros(0, 4)).shape(), (4, 4));
        assert_eq!(kernel_basis(&Matrix::zeros(3, 0)).shape(), (0, 0));
    }

    #[test]
    fn projector_of_single_row_selector() {
        let p = kernel_projector(&dmatrix![1.0, 0.0, 0.0]);
        let expected = Matrix::from_diagonal(&nalgebra::dvector![0.0, 1.0, 1.0]);
        assert!(max_abs(&(p - expected)) <= 1e-15);
    }

    #[test]
    fn projector_of_identity_vanishes() {
        let p = kernel_projector(&Matrix::identity(4, 4));
        assert!(max_abs(&p) <= 1e-15);
    }

    #[test]
    fn truncated_pinv_drops_tiny_singular_value() {
        let a = dmatrix![2.0, 0.0; 0.0, 1e-12];
        let p = pinv_eps(&a, Tolerance::new(1e-8).unwrap());
        assert!(max_abs(&(p - dmatrix![0.5, 0.0; 0.0, 0.0])) <= 1e-15);
    }

    #[test]
    fn pinv_of_orthogonal_is_transpose() {
        let (c, s) = (0.3_f64.cos(), 0.3_f64.sin());
        let q = dmatrix![c, -s; s, c];
        assert!(max_abs(&(pinv(&q) - q.transpose())) <= 1e-15);
    }

    #[test]
    fn pinv_of_row_vector() {
        // A^T (A A^T)^-1 with A A^T = 1.25
        let p = pinv(&dmatrix![1.0, 0.5]);
        assert!(max_abs(&(p - dmatrix![0.8; 0.4])) <= 1e-15);
    }

    #[test]
    fn pinv_of_empty_has_transposed_shape() {
        assert_eq!(pinv(&Matrix::zeros(3, 0)).shape(), (0, 3));
        assert_eq!(pinv(&Matrix::zeros(0, 2)).shape(), (2, 0));
    }

    #[test]
    fn shifted_inverse_arithmetic() {
        let s = dmatrix![3.0, 0.0; 0.0, 1.0];
        let r = pinv_sym_shifted(&s, 1.0, Tolerance::new(1e-8).unwrap()).unwrap();
        assert!(max_abs(&(r.inverse - dmatrix![0.5, 0.0; 0.0, 0.0])) <= 1e-15);
        assert_eq!(r.dropped, 1);
    }

    #[test]
    fn shifted_inverse_fully_annihilated() {
        let s = Matrix::identity(2, 2) * 2.0;
        let r = pinv_sym_shifted(&s, 2.0, Tolerance::new(1e-8).unwrap()).unwrap();
        assert_eq!(max_abs(&r.inverse), 0.0);
        assert_eq!(r.dropped, 2);
    }

    #[test]
    fn shifted_inverse_handles_indefinite_matrix() {
        let s = dmatrix![1.0, 0.0; 0.0, 5.0];
        let r = pinv_sym_shifted(&s, 3.0, Tolerance::ZERO).unwrap();
        assert!(max_abs(&(r.inverse - dmatrix![-0.5, 0.0; 0.0, 0.5])) <= 1e-15);
    }

    #[test]
    fn shifted_inverse_rejects_asymmetric_input() {
        let s = dmatrix![1.0, 2.0; 0.0, 1.0];
        assert!(matches!(
            pinv_sym_shifted(&s, 0.0, Tolerance::ZERO),
            Err(Error::NotSymmetric { .. })
        ));
    }

    #[test]
    fn tolerance_rejects_negative_and_nan() {
        assert!(Tolerance::new(-1.0).is_err());
        assert!(Tolerance::new(f64::NAN).is_err());
        assert_eq!(Tolerance::default().epsilon(), 1e-8);
    }

    fn matrix_strategy(max_dim: usize) -> impl Strategy<Value = Matrix> {
        (1..=max_dim, 1..=max_dim).prop_flat_map(|(r, c)| {
            prop::collection::vec(-1.0f64..1.0, r * c).prop_map(move |v| Matrix::from_row_slice(r, c, &v))
        })
    }

    /// Product of two random factors so that rank deficiency is common.
    fn low_rank_strategy(max_dim: usize) -> impl Strategy<Value = Matrix> {
        (1..=max_dim, 1..=max_dim, 1..=max_dim).prop_flat_map(|(r, k, c)| {
            (
                prop::collection::vec(-1.0f64..1.0, r * k),
                prop::collection::vec(-1.0f64..1.0, k * c),
            )
                .prop_map(move |(a, b)| Matrix::from_row_slice(r, k, &a) * Matrix::from_row_slice(k, c, &b))
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn kernel_basis_is_orthonormal_null_space(a in low_rank_strategy(12)) {
            let k = kernel_basis(&a);
            let scale = a.norm().max(1.0);
            prop_assert!(max_abs(&(&a * &k)) <= 1e-10 * scale);
            prop_assert!(is_orthonormal(&k, 1e-10));
            prop_assert_eq!(numerical_rank(&a) + k.ncols(), a.ncols());
        }

        #[test]
        fn projector_matches_basis(a in low_rank_strategy(10)) {
            let k = kernel_basis(&a);
            let p = kernel_projector(&a);
            prop_assert!(max_abs(&(&p - &k * k.transpose())) <= 1e-10);
            prop_assert!(max_abs(&(&p * &p - &p)) <= 1e-10);
            prop_assert!(max_abs(&(&p - p.transpose())) <= 1e-10);
        }

        #[test]
        fn moore_penrose_identities(a in matrix_strategy(50)) {
            let p = pinv(&a);
            let tol = 1e-10 * (1.0 + a.norm() * p.norm()).powi(2);
            prop_assert!(max_abs(&(&a * &p * &a - &a)) <= tol);
            prop_assert!(max_abs(&(&p * &a * &p - &p)) <= tol);
            let ap = &a * &p;
            let pa = &p * &a;
            prop_assert!(max_abs(&(&ap - ap.transpose())) <= tol);
            prop_assert!(max_abs(&(&pa - pa.transpose())) <= tol);
        }

        #[test]
        fn raising_epsilon_never_raises_rank(a in matrix_strategy(8), e1 in 0.0f64..2.0, e2 in 0.0f64..2.0) {
            let (lo, hi) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
            let r_lo = truncated_rank(&a, Tolerance::new(lo).unwrap());
            let r_hi = truncated_rank(&a, Tolerance::new(hi).unwrap());
            prop_assert!(r_hi <= r_lo);
            prop_assert_eq!(numerical_rank(&pinv_eps(&a, Tolerance::new(hi).unwrap())), r_hi);
        }

        #[test]
        fn unshifted_symmetric_inverse_agrees_with_svd(a in matrix_strategy(8)) {
            let s = &a * a.transpose();
            let sym = pinv_sym_shifted(&s, 0.0, Tolerance::ZERO).unwrap().inverse;
            let svd = pinv(&s);
            prop_assert!(max_abs(&(sym - svd)) <= 1e-8 * (1.0 + pinv(&s).norm()).powi(2));
        }
    }

    #[test]
    fn random_wide_full_row_rank_projector() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let a = Matrix::from_fn(3, 5, |_, _| rng.random::<f64>() - 0.5);
        let p = kernel_projector(&a);
        assert!(max_abs(&(&p * &p - &p)) <= 1e-12);
        assert!(max_abs(&(&a * &p)) <= 1e-12);
    }
}
