//! System models and controllability predicates: higher-order and
//! descriptor forms, the block-companion reduction from order `d` to first
//! order, perturbation masks, and the spectral / Toeplitz controllability
//! tests.

use nalgebra::{Complex, DMatrix};

use crate::error::{Error, Result};
use crate::linalg;
use crate::toeplitz;

/// Order-`d` model `P_d x^(d) + ... + P_1 x' + P_0 x = b u`.
///
/// Coefficients are stored highest order first (`P_d, ..., P_0`). The
/// leading coefficient may be singular; a model with every coefficient zero
/// is rejected.
#[derive(Debug, Clone, PartialEq)]
pub struct HigherOrderSystem {
    coeffs: Vec<DMatrix<f64>>,
    input: DMatrix<f64>,
}

impl HigherOrderSystem {
    pub fn new(coeffs: Vec<DMatrix<f64>>, input: DMatrix<f64>) -> Result<Self> {
        if coeffs.len() < 2 {
            return Err(Error::InvalidArgument(
                "higher-order system needs degree >= 1, i.e. at least two coefficient matrices"
                    .into(),
            ));
        }
        let state_dim = coeffs[0].nrows();
        if state_dim == 0 {
            return Err(Error::InvalidArgument(
                "state dimension must be >= 1".into(),
            ));
        }
        for (i, p) in coeffs.iter().enumerate() {
            if p.nrows() != state_dim || p.ncols() != state_dim {
                return Err(Error::DimensionMismatch {
                    context: "higher-order coefficient",
                    expected: format!("{state_dim}x{state_dim}"),
                    found: format!("{}x{} at position {i}", p.nrows(), p.ncols()),
                });
            }
            linalg::ensure_finite(p, "higher-order coefficient")?;
        }
        if coeffs.iter().all(|p| p.iter().all(|&x| x == 0.0)) {
            return Err(Error::InvalidArgument(
                "all coefficient matrices are zero".into(),
            ));
        }
        if input.nrows() != state_dim || input.ncols() == 0 {
            return Err(Error::DimensionMismatch {
                context: "higher-order input matrix",
                expected: format!("{state_dim}xM with M >= 1"),
                found: format!("{}x{}", input.nrows(), input.ncols()),
            });
        }
        linalg::ensure_finite(&input, "higher-order input matrix")?;
        Ok(Self { coeffs, input })
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn state_dim(&self) -> usize {
        self.coeffs[0].nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.input.ncols()
    }

    /// Coefficient matrices, highest order first.
    pub fn coeffs(&self) -> &[DMatrix<f64>] {
        &self.coeffs
    }

    /// Coefficient `P_i` by subscript (`i = 0` is the constant term).
    pub fn coeff(&self, i: usize) -> &DMatrix<f64> {
        &self.coeffs[self.degree() - i]
    }

    pub fn input(&self) -> &DMatrix<f64> {
        &self.input
    }
}

/// First-order implicit model `E z' = A z + B u` where `E` may be singular.
#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorSystem {
    e: DMatrix<f64>,
    a: DMatrix<f64>,
    b: DMatrix<f64>,
}

impl DescriptorSystem {
    pub fn new(e: DMatrix<f64>, a: DMatrix<f64>, b: DMatrix<f64>) -> Result<Self> {
        let n = e.nrows();
        if n == 0 {
            return Err(Error::InvalidArgument(
                "state dimension must be >= 1".into(),
            ));
        }
        if e.ncols() != n || a.nrows() != n || a.ncols() != n {
            return Err(Error::DimensionMismatch {
                context: "descriptor system",
                expected: format!("square E and A of size {n}"),
                found: format!(
                    "E {}x{}, A {}x{}",
                    e.nrows(),
                    e.ncols(),
                    a.nrows(),
                    a.ncols()
                ),
            });
        }
        if b.nrows() != n || b.ncols() == 0 {
            return Err(Error::DimensionMismatch {
                context: "descriptor input matrix",
                expected: format!("{n}xm with m >= 1"),
                found: format!("{}x{}", b.nrows(), b.ncols()),
            });
        }
        linalg::ensure_finite(&e, "descriptor E")?;
        linalg::ensure_finite(&a, "descriptor A")?;
        linalg::ensure_finite(&b, "descriptor B")?;
        Ok(Self { e, a, b })
    }

    pub fn n(&self) -> usize {
        self.e.nrows()
    }

    pub fn m(&self) -> usize {
        self.b.ncols()
    }

    pub fn e(&self) -> &DMatrix<f64> {
        &self.e
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }
}

/// Per-entry freedom pattern for perturbations of a descriptor triple.
/// `true` marks an entry the radius computation may change.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationMask {
    mask_e: DMatrix<bool>,
    mask_a: DMatrix<bool>,
    mask_b: DMatrix<bool>,
}

impl PerturbationMask {
    pub fn new(
        mask_e: DMatrix<bool>,
        mask_a: DMatrix<bool>,
        mask_b: DMatrix<bool>,
    ) -> Result<Self> {
        let n = mask_e.nrows();
        if mask_e.ncols() != n || mask_a.nrows() != n || mask_a.ncols() != n {
            return Err(Error::DimensionMismatch {
                context: "perturbation mask",
                expected: format!("square E/A masks of size {n}"),
                found: format!(
                    "mask_E {}x{}, mask_A {}x{}",
                    mask_e.nrows(),
                    mask_e.ncols(),
                    mask_a.nrows(),
                    mask_a.ncols()
                ),
            });
        }
        if mask_b.nrows() != n {
            return Err(Error::DimensionMismatch {
                context: "perturbation mask",
                expected: format!("mask_B with {n} rows"),
                found: format!("{}x{}", mask_b.nrows(), mask_b.ncols()),
            });
        }
        let mask = Self {
            mask_e,
            mask_a,
            mask_b,
        };
        if mask.count_free() == 0 {
            return Err(Error::EmptyMask);
        }
        Ok(mask)
    }

    /// All entries of all three matrices free.
    pub fn full(n: usize, m: usize) -> Self {
        Self {
            mask_e: DMatrix::from_element(n, n, true),
            mask_a: DMatrix::from_element(n, n, true),
            mask_b: DMatrix::from_element(n, m, true),
        }
    }

    /// `E` fixed, `A` and `B` fully free.
    pub fn fixed_e(n: usize, m: usize) -> Self {
        Self {
            mask_e: DMatrix::from_element(n, n, false),
            mask_a: DMatrix::from_element(n, n, true),
            mask_b: DMatrix::from_element(n, m, true),
        }
    }

    pub fn mask_e(&self) -> &DMatrix<bool> {
        &self.mask_e
    }

    pub fn mask_a(&self) -> &DMatrix<bool> {
        &self.mask_a
    }

    pub fn mask_b(&self) -> &DMatrix<bool> {
        &self.mask_b
    }

    pub fn count_free(&self) -> usize {
        self.mask_e.iter().filter(|&&f| f).count()
            + self.mask_a.iter().filter(|&&f| f).count()
            + self.mask_b.iter().filter(|&&f| f).count()
    }

    pub fn matches(&self, sys: &DescriptorSystem) -> bool {
        self.mask_e.nrows() == sys.n() && self.mask_b.ncols() == sys.m()
    }

    /// Entrywise conjunction of two masks of equal shape.
    pub fn intersect(&self, other: &Self) -> Result<Self> {
        if self.mask_e.shape() != other.mask_e.shape()
            || self.mask_b.shape() != other.mask_b.shape()
        {
            return Err(Error::DimensionMismatch {
                context: "mask intersection",
                expected: format!("{:?}/{:?}", self.mask_e.shape(), self.mask_b.shape()),
                found: format!("{:?}/{:?}", other.mask_e.shape(), other.mask_b.shape()),
            });
        }
        Self::new(
            self.mask_e.zip_map(&other.mask_e, |a, b| a && b),
            self.mask_a.zip_map(&other.mask_a, |a, b| a && b),
            self.mask_b.zip_map(&other.mask_b, |a, b| a && b),
        )
    }
}

/// How a controllability test failed, if it did.
#[derive(Debug, Clone, PartialEq)]
pub enum FailingMode {
    /// `[sE - A, B]` lost rank at this finite eigenvalue of the pencil.
    Spectral(Complex<f64>),
    /// `[E, B]` is rank deficient.
    AtInfinity,
    None,
}

/// Outcome of the spectral (pencil) controllability test.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllabilityReport {
    pub controllable: bool,
    pub failing_mode: FailingMode,
    pub tested_eigenvalues: Vec<Complex<f64>>,
}

/// Reduces an order-`d` model to its first-order block-companion descriptor
/// form, together with the mask that frees exactly the coefficient blocks.
///
/// `E = blockdiag(P_d, I, ..., I)`, `A` has `-P_{d-1} ... -P_0` in the first
/// block row and identity blocks on the subdiagonal, `B = [b; 0; ...; 0]`.
/// All identity and zero filler entries are fixed in the returned mask.
pub fn canonical_form(sys: &HigherOrderSystem) -> (DescriptorSystem, PerturbationMask) {
    let d = sys.degree();
    let nn = sys.state_dim();
    let m = sys.input_dim();
    let n = nn * d;

    let mut e = DMatrix::zeros(n, n);
    e.view_mut((0, 0), (nn, nn)).copy_from(&sys.coeffs()[0]);
    for k in 1..d {
        e.view_mut((k * nn, k * nn), (nn, nn))
            .copy_from(&DMatrix::identity(nn, nn));
    }

    let mut a = DMatrix::zeros(n, n);
    for k in 0..d {
        // first block row: -P_{d-1}, -P_{d-2}, ..., -P_0
        a.view_mut((0, k * nn), (nn, nn))
            .copy_from(&(-&sys.coeffs()[k + 1]));
    }
    for k in 1..d {
        a.view_mut((k * nn, (k - 1) * nn), (nn, nn))
            .copy_from(&DMatrix::identity(nn, nn));
    }

    let mut b = DMatrix::zeros(n, m);
    b.view_mut((0, 0), (nn, m)).copy_from(sys.input());

    let mut mask_e = DMatrix::from_element(n, n, false);
    mask_e
        .view_mut((0, 0), (nn, nn))
        .copy_from(&DMatrix::from_element(nn, nn, true));
    let mut mask_a = DMatrix::from_element(n, n, false);
    mask_a
        .view_mut((0, 0), (nn, n))
        .copy_from(&DMatrix::from_element(nn, n, true));
    let mut mask_b = DMatrix::from_element(n, m, false);
    mask_b
        .view_mut((0, 0), (nn, m))
        .copy_from(&DMatrix::from_element(nn, m, true));

    let sys = DescriptorSystem::new(e, a, b).expect("canonical form is well-shaped");
    let mask = PerturbationMask::new(mask_e, mask_a, mask_b).expect("canonical mask is nonempty");
    (sys, mask)
}

/// Spectral controllability test: `[sE - A, B]` must have rank `n` at every
/// finite generalized eigenvalue of `(E, A)`, and `[E, B]` must have rank `n`.
///
/// Rank of `[sE - A, B]` can only drop on the spectrum, so only the
/// eigenvalues are sampled. A singular pencil makes the test inconclusive
/// and is reported as [`Error::SingularPencil`].
pub fn is_c_controllable_pencil(
    sys: &DescriptorSystem,
    rel_tol: f64,
) -> Result<ControllabilityReport> {
    let n = sys.n();
    let eigs = linalg::generalized_eigenvalues(sys.e(), sys.a())?;

    for &s in &eigs {
        let pencil = pencil_with_input(sys, s);
        // Anchor the rank tolerance to the scale of the data entering the
        // pencil: at an eigenvalue the matrix itself can cancel to ~0 (all
        // singular values near machine noise), and a purely relative test
        // would call that full rank.
        let data_scale = s.norm() * sys.e().norm() + sys.a().norm() + sys.b().norm();
        let rank = linalg::numerical_rank_complex(&pencil, rel_tol, data_scale);
        if rank < n {
            return Ok(ControllabilityReport {
                controllable: false,
                failing_mode: FailingMode::Spectral(s),
                tested_eigenvalues: eigs,
            });
        }
    }

    let eb = linalg::hstack(sys.e(), sys.b());
    if linalg::numerical_rank(&eb, rel_tol)? < n {
        return Ok(ControllabilityReport {
            controllable: false,
            failing_mode: FailingMode::AtInfinity,
            tested_eigenvalues: eigs,
        });
    }

    Ok(ControllabilityReport {
        controllable: true,
        failing_mode: FailingMode::None,
        tested_eigenvalues: eigs,
    })
}

fn pencil_with_input(sys: &DescriptorSystem, s: Complex<f64>) -> DMatrix<Complex<f64>> {
    let n = sys.n();
    let m = sys.m();
    DMatrix::from_fn(n, n + m, |i, j| {
        if j < n {
            s * Complex::new(sys.e()[(i, j)], 0.0) - Complex::new(sys.a()[(i, j)], 0.0)
        } else {
            Complex::new(sys.b()[(i, j - n)], 0.0)
        }
    })
}

/// Controllability via the block-Toeplitz criterion: the assembled
/// controllability matrix must have rank `n^2`.
pub fn is_c_controllable_toeplitz(sys: &DescriptorSystem, rel_tol: f64) -> bool {
    let t = toeplitz::assemble(sys);
    let rank = linalg::numerical_rank(t.matrix(), rel_tol)
        .expect("assembled Toeplitz matrix is finite by construction");
    rank == sys.n() * sys.n()
}

/// Controllability of an order-`d` model, evaluated on its canonical
/// descriptor form through the Toeplitz criterion.
pub fn is_cd_controllable(sys: &HigherOrderSystem, rel_tol: f64) -> bool {
    let (dsys, _) = canonical_form(sys);
    is_c_controllable_toeplitz(&dsys, rel_tol)
}

/// Reads a perturbed higher-order system back out of canonical-form
/// perturbations. The deltas must vanish on every filler (identity/zero)
/// position of the canonical layout; a nonzero entry there is a structural
/// violation.
pub fn extract_higher_order_perturbation(
    sys: &HigherOrderSystem,
    delta_e: &DMatrix<f64>,
    delta_a: &DMatrix<f64>,
    delta_b: &DMatrix<f64>,
) -> Result<HigherOrderSystem> {
    let d = sys.degree();
    let nn = sys.state_dim();
    let m = sys.input_dim();
    let n = nn * d;

    if delta_e.shape() != (n, n) || delta_a.shape() != (n, n) || delta_b.shape() != (n, m) {
        return Err(Error::DimensionMismatch {
            context: "higher-order perturbation extraction",
            expected: format!("dE {n}x{n}, dA {n}x{n}, dB {n}x{m}"),
            found: format!(
                "dE {:?}, dA {:?}, dB {:?}",
                delta_e.shape(),
                delta_a.shape(),
                delta_b.shape()
            ),
        });
    }

    for i in 0..n {
        for j in 0..n {
            let in_e_block = i < nn && j < nn;
            if !in_e_block && delta_e[(i, j)] != 0.0 {
                return Err(Error::StructuralViolation {
                    matrix: "E",
                    row: i,
                    col: j,
                });
            }
            let in_a_block = i < nn;
            if !in_a_block && delta_a[(i, j)] != 0.0 {
                return Err(Error::StructuralViolation {
                    matrix: "A",
                    row: i,
                    col: j,
                });
            }
        }
        for j in 0..m {
            if i >= nn && delta_b[(i, j)] != 0.0 {
                return Err(Error::StructuralViolation {
                    matrix: "B",
                    row: i,
                    col: j,
                });
            }
        }
    }

    let mut coeffs = Vec::with_capacity(d + 1);
    let mut p_d = sys.coeffs()[0].clone();
    p_d += delta_e.view((0, 0), (nn, nn));
    coeffs.push(p_d);
    for k in 0..d {
        // A block (0, k) holds -P_{d-1-k}, so the perturbed coefficient is
        // P_{d-1-k} - dA block.
        let mut p = sys.coeffs()[k + 1].clone();
        p -= delta_a.view((0, k * nn), (nn, nn));
        coeffs.push(p);
    }
    let mut input = sys.input().clone();
    input += delta_b.view((0, 0), (nn, m));

    HigherOrderSystem::new(coeffs, input)
}
