//! Dense real kernels shared by every other module: validated matrix
//! construction, least squares, singular values, numerical rank and the
//! finite spectrum of a regular matrix pencil.
//!
//! All matrices are `nalgebra::DMatrix<f64>`; constructors here enforce the
//! crate-wide invariant that matrix data is finite.

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative tolerance used for rank decisions unless the caller overrides it.
pub const DEFAULT_RANK_TOL: f64 = 1e-8;

/// Builds a matrix from row-major nested data, validating shape and finiteness.
pub fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let nrows = rows.len();
    if nrows == 0 {
        return Err(Error::InvalidArgument("matrix has no rows".into()));
    }
    let ncols = rows[0].len();
    if ncols == 0 {
        return Err(Error::InvalidArgument("matrix has no columns".into()));
    }
    for (i, row) in rows.iter().enumerate() {
        if row.len() != ncols {
            return Err(Error::DimensionMismatch {
                context: "matrix row",
                expected: format!("{ncols} entries"),
                found: format!("{} entries in row {i}", row.len()),
            });
        }
    }
    let m = DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]);
    ensure_finite(&m, "matrix construction")?;
    Ok(m)
}

/// Returns the entries of `m` as row-major nested vectors.
pub fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

pub(crate) fn ensure_finite(m: &DMatrix<f64>, context: &'static str) -> Result<()> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { context })
    }
}

pub(crate) fn ensure_finite_vec(v: &DVector<f64>, context: &'static str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { context })
    }
}

/// Minimum-norm least-squares solution of `m * x ≈ rhs` for a tall (or square)
/// matrix, computed through the SVD.
pub fn least_squares(m: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    if m.nrows() < m.ncols() {
        return Err(Error::DimensionMismatch {
            context: "least_squares",
            expected: "rows >= cols".into(),
            found: format!("{}x{}", m.nrows(), m.ncols()),
        });
    }
    if rhs.len() != m.nrows() {
        return Err(Error::DimensionMismatch {
            context: "least_squares rhs",
            expected: format!("{} entries", m.nrows()),
            found: format!("{} entries", rhs.len()),
        });
    }
    ensure_finite(m, "least_squares matrix")?;
    ensure_finite_vec(rhs, "least_squares rhs")?;

    let svd = m.clone().svd(true, true);
    let sigma_max = svd.singular_values.max();
    let cutoff = sigma_max * f64::EPSILON * m.nrows().max(m.ncols()) as f64;
    let x = svd
        .solve(rhs, cutoff)
        .map_err(|_| Error::SingularLeastSquares {
            suggest_smaller_omega: false,
        })?;
    Ok(DVector::from_column_slice(x.column(0).as_slice()))
}

/// Number of singular values above `rel_tol * sigma_max`; 0 for the zero matrix.
pub fn numerical_rank(m: &DMatrix<f64>, rel_tol: f64) -> Result<usize> {
    if !(rel_tol > 0.0 && rel_tol < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "rank tolerance must lie in (0, 1), got {rel_tol}"
        )));
    }
    ensure_finite(m, "numerical_rank")?;
    let sv = m.singular_values();
    Ok(rank_from_singular_values(sv.as_slice(), rel_tol))
}

pub(crate) fn rank_from_singular_values(sv: &[f64], rel_tol: f64) -> usize {
    let sigma_max = sv.first().copied().unwrap_or(0.0);
    if sigma_max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * sigma_max).count()
}

/// Rank of a complex matrix, with the tolerance anchored to
/// `max(sigma_max, scale_anchor)`: passing the scale of the data that built
/// the matrix keeps the test honest when the matrix itself cancels to ~0.
pub(crate) fn numerical_rank_complex(
    m: &DMatrix<Complex<f64>>,
    rel_tol: f64,
    scale_anchor: f64,
) -> usize {
    let sv = m.singular_values();
    let sigma_max = sv.max();
    let anchor = sigma_max.max(scale_anchor);
    if anchor == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * anchor).count()
}

/// Singular values in nonincreasing order.
pub fn singular_values(m: &DMatrix<f64>) -> Result<Vec<f64>> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Err(Error::InvalidArgument("empty matrix".into()));
    }
    ensure_finite(m, "singular_values")?;
    Ok(m.singular_values().as_slice().to_vec())
}

/// Largest singular value.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    m.singular_values().max()
}

/// Finite generalized eigenvalues of the pencil `s*E - A`, with multiplicity.
///
/// Infinite eigenvalues are dropped: the spectral controllability test only
/// quantifies over finite `s`, and the point at infinity is covered by the
/// separate `[E B]` rank test. The pencil is reduced to a standard
/// eigenproblem by inverting `A - sigma*E` at a shift `sigma` chosen from a
/// deterministic ladder; a pencil for which every shift is numerically
/// singular is reported as singular.
pub fn generalized_eigenvalues(e: &DMatrix<f64>, a: &DMatrix<f64>) -> Result<Vec<Complex<f64>>> {
    if e.nrows() != e.ncols() || a.nrows() != a.ncols() || e.nrows() != a.nrows() {
        return Err(Error::DimensionMismatch {
            context: "generalized_eigenvalues",
            expected: "square E and A of equal size".into(),
            found: format!(
                "E {}x{}, A {}x{}",
                e.nrows(),
                e.ncols(),
                a.nrows(),
                a.ncols()
            ),
        });
    }
    ensure_finite(e, "generalized_eigenvalues E")?;
    ensure_finite(a, "generalized_eigenvalues A")?;

    let n = e.nrows();
    let scale = {
        let na = a.norm().max(1.0);
        let ne = e.norm().max(1.0);
        na / ne
    };
    const LADDER: [f64; 11] = [0.0, 1.0, -1.0, 0.5, -0.5, 2.0, -2.0, 5.0, -5.0, 10.0, -10.0];

    let mut best: Option<(f64, f64)> = None; // (inverse condition, shift)
    for c in LADDER {
        let sigma = c * scale;
        let shifted = a - e * sigma;
        let sv = shifted.singular_values();
        let smax = sv.max();
        let smin = sv.min();
        let inv_cond = if smax > 0.0 { smin / smax } else { 0.0 };
        if best.is_none_or(|(b, _)| inv_cond > b) {
            best = Some((inv_cond, sigma));
        }
        if inv_cond > 1e-6 {
            break; // well-conditioned shift found
        }
    }
    let (inv_cond, sigma) = best.unwrap();
    if inv_cond < 1e-12 {
        return Err(Error::SingularPencil);
    }

    let shifted = a - e * sigma;
    let lu = shifted.lu();
    let g = lu.solve(e).ok_or(Error::SingularPencil)?;

    // Eigenvalues lambda of G = (A - sigma E)^-1 E map to pencil eigenvalues
    // s = sigma + 1/lambda; lambda ~ 0 corresponds to s at infinity.
    let g_norm = g.norm();
    let inf_tol = (1e3 * f64::EPSILON * g_norm).max(1e-14);
    let lambdas = g.complex_eigenvalues();
    let mut out = Vec::with_capacity(n);
    for lambda in lambdas.iter() {
        if lambda.norm() > inf_tol {
            out.push(Complex::new(sigma, 0.0) + lambda.inv());
        }
    }
    Ok(out)
}

/// Horizontal concatenation `[left right]`.
pub(crate) fn hstack(left: &DMatrix<f64>, right: &DMatrix<f64>) -> DMatrix<f64> {
    assert_eq!(left.nrows(), right.nrows(), "hstack row mismatch");
    let mut out = DMatrix::zeros(left.nrows(), left.ncols() + right.ncols());
    out.view_mut((0, 0), left.shape()).copy_from(left);
    out.view_mut((0, left.ncols()), right.shape())
        .copy_from(right);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut impl Rng, nrows: usize, ncols: usize) -> DMatrix<f64> {
        DMatrix::from_fn(nrows, ncols, |_, _| rng.random_range(-1.0..1.0))
    }

    fn random_orthogonal(rng: &mut impl Rng, n: usize) -> DMatrix<f64> {
        random_matrix(rng, n, n).qr().q()
    }

    #[test]
    fn least_squares_identity() {
        let m = DMatrix::identity(2, 2);
        let rhs = DVector::from_vec(vec![3.0, 4.0]);
        let x = least_squares(&m, &rhs).unwrap();
        assert_abs_diff_eq!(x[0], 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(x[1], 4.0, epsilon = 1e-14);
    }

    #[test]
    fn least_squares_mean_of_samples() {
        let m = DMatrix::from_row_slice(2, 1, &[1.0, 1.0]);
        let rhs = DVector::from_vec(vec![1.0, 3.0]);
        let x = least_squares(&m, &rhs).unwrap();
        assert_abs_diff_eq!(x[0], 2.0, epsilon = 1e-14);
    }

    #[test]
    fn least_squares_recovers_known_solution() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let m = random_matrix(&mut rng, 9, 5);
        let x_true = DVector::from_fn(5, |i, _| (i as f64 + 1.0) * 0.3);
        let rhs = &m * &x_true;
        let x = least_squares(&m, &rhs).unwrap();
        assert!((x - x_true).norm() < 1e-10);
    }

    #[test]
    fn least_squares_residual_orthogonality() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            // well-conditioned instance: singular values in [1, 2]
            let u = random_orthogonal(&mut rng, 8);
            let v = random_orthogonal(&mut rng, 4);
            let mut s = DMatrix::zeros(8, 4);
            for i in 0..4 {
                s[(i, i)] = rng.random_range(1.0..2.0);
            }
            let m = &u * s * v.transpose();
            let rhs = DVector::from_fn(8, |_, _| rng.random_range(-1.0..1.0));
            let x = least_squares(&m, &rhs).unwrap();
            let resid = &m * &x - &rhs;
            let lhs = (m.transpose() * resid).norm();
            assert!(lhs <= 1e-8 * m.norm() * rhs.norm().max(1e-300));
        }
    }

    #[test]
    fn least_squares_rejects_bad_shapes() {
        let m = DMatrix::zeros(2, 3);
        let rhs = DVector::zeros(2);
        assert!(least_squares(&m, &rhs).is_err());

        let m = DMatrix::zeros(3, 2);
        let rhs = DVector::zeros(2);
        assert!(least_squares(&m, &rhs).is_err());
    }

    #[test]
    fn least_squares_rejects_non_finite() {
        let m = DMatrix::from_row_slice(2, 1, &[1.0, f64::NAN]);
        let rhs = DVector::zeros(2);
        assert!(matches!(
            least_squares(&m, &rhs),
            Err(Error::NonFinite { .. })
        ));
    }

    #[test]
    fn rank_identity() {
        assert_eq!(numerical_rank(&DMatrix::identity(3, 3), 1e-8).unwrap(), 3);
    }

    #[test]
    fn rank_proportional_rows() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert_eq!(numerical_rank(&m, 1e-8).unwrap(), 1);
    }

    #[test]
    fn rank_zero_matrix() {
        assert_eq!(numerical_rank(&DMatrix::zeros(3, 4), 1e-8).unwrap(), 0);
    }

    #[test]
    fn rank_rejects_bad_tolerance() {
        let m = DMatrix::identity(2, 2);
        assert!(numerical_rank(&m, 0.0).is_err());
        assert!(numerical_rank(&m, 1.0).is_err());
    }

    #[test]
    fn rank_orthogonal_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let m = {
                // rank-2 matrix in 4x5
                let a = random_matrix(&mut rng, 4, 2);
                let b = random_matrix(&mut rng, 2, 5);
                a * b
            };
            let q1 = random_orthogonal(&mut rng, 4);
            let q2 = random_orthogonal(&mut rng, 5);
            let r0 = numerical_rank(&m, 1e-8).unwrap();
            let r1 = numerical_rank(&(q1 * &m * q2), 1e-8).unwrap();
            assert_eq!(r0, 2);
            assert_eq!(r0, r1);
        }
    }

    #[test]
    fn singular_values_diagonal() {
        let m = DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 1.0]);
        let sv = singular_values(&m).unwrap();
        assert_abs_diff_eq!(sv[0], 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(sv[1], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn singular_values_zero() {
        let sv = singular_values(&DMatrix::zeros(2, 3)).unwrap();
        assert_eq!(sv, vec![0.0, 0.0]);
    }

    #[test]
    fn singular_values_tall_example() {
        // M^T M = [[2, 1], [1, 2]] has eigenvalues 3 and 1.
        let m = DMatrix::from_row_slice(3, 2, &[0.0, 1.0, 1.0, 0.0, 1.0, 1.0]);
        let sv = singular_values(&m).unwrap();
        assert_abs_diff_eq!(sv[0], 3.0_f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(sv[1], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn singular_values_transpose_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let m = random_matrix(&mut rng, 5, 3);
            let a = singular_values(&m).unwrap();
            let b = singular_values(&m.transpose()).unwrap();
            for (x, y) in a.iter().zip(b.iter()) {
                assert_abs_diff_eq!(x, y, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn gen_eig_standard_case() {
        let e = DMatrix::identity(2, 2);
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 5.0]);
        let mut eigs = generalized_eigenvalues(&e, &a).unwrap();
        eigs.sort_by(|x, y| x.re.partial_cmp(&y.re).unwrap());
        assert_eq!(eigs.len(), 2);
        assert_abs_diff_eq!(eigs[0].re, 2.0, epsilon = 1e-10);
        assert_abs_diff_eq!(eigs[1].re, 5.0, epsilon = 1e-10);
        assert_abs_diff_eq!(eigs[0].im, 0.0, epsilon = 1e-10);
    }

    #[test]
    fn gen_eig_one_infinite() {
        let e = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let a = DMatrix::identity(2, 2);
        let eigs = generalized_eigenvalues(&e, &a).unwrap();
        assert_eq!(eigs.len(), 1);
        assert_abs_diff_eq!(eigs[0].re, 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(eigs[0].im, 0.0, epsilon = 1e-10);
    }

    #[test]
    fn gen_eig_singular_pencil() {
        // det(sE - A) == 0 identically: second row of both E and A is zero.
        let e = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        assert!(matches!(
            generalized_eigenvalues(&e, &a),
            Err(Error::SingularPencil)
        ));
    }

    #[test]
    fn gen_eig_matches_eigenvalues_for_identity_e() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..10 {
            let a = random_matrix(&mut rng, 5, 5);
            let e = DMatrix::identity(5, 5);
            let mut got = generalized_eigenvalues(&e, &a).unwrap();
            let mut expect: Vec<Complex<f64>> = a.complex_eigenvalues().iter().copied().collect();
            assert_eq!(got.len(), expect.len());
            // greedy nearest matching
            for g in got.drain(..) {
                let (idx, d) = expect
                    .iter()
                    .enumerate()
                    .map(|(i, x)| (i, (x - g).norm()))
                    .min_by(|p, q| p.1.partial_cmp(&q.1).unwrap())
                    .unwrap();
                assert!(d < 1e-8, "eigenvalue mismatch: {g} vs {:?}", expect[idx]);
                expect.remove(idx);
            }
        }
    }

    #[test]
    fn matrix_from_rows_validates() {
        assert!(matrix_from_rows(&[]).is_err());
        assert!(matrix_from_rows(&[vec![1.0, 2.0], vec![3.0]]).is_err());
        assert!(matrix_from_rows(&[vec![f64::INFINITY]]).is_err());
        let m = matrix_from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(m[(1, 0)], 3.0);
        assert_eq!(matrix_to_rows(&m), vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
    }
}
