//! Pipeline from a system to its structured radius of controllability:
//! canonical reduction, Toeplitz assembly, masked structure basis, STLN
//! runs over the chosen partition columns with first-order refinement, and
//! verification of the resulting nearest uncontrollable system.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg;
use crate::stln::{self, PartitionChoice, StlnConfig};
use crate::systems::{
    canonical_form, extract_higher_order_perturbation, is_c_controllable_toeplitz,
    DescriptorSystem, HigherOrderSystem, PerturbationMask,
};
use crate::toeplitz;

/// Iteration budget of the refinement pass that follows each STLN run.
const REFINE_MAX_ITER: usize = 400;

/// Result of a radius computation: both norms of the minimal stacked
/// perturbation `[dE dA dB]`, the perturbation itself, the perturbed
/// system, and solver diagnostics.
#[derive(Debug, Clone)]
pub struct RadiusResult {
    pub radius_frobenius: f64,
    pub radius_spectral: f64,
    pub delta_e: DMatrix<f64>,
    pub delta_a: DMatrix<f64>,
    pub delta_b: DMatrix<f64>,
    pub perturbed: DescriptorSystem,
    pub perturbed_higher_order: Option<HigherOrderSystem>,
    /// Iterations of the weighted STLN loop for the winning partition.
    pub iterations: usize,
    /// Iterations of the first-order refinement that followed.
    pub refine_iterations: usize,
    pub converged: bool,
    pub uncontrollability_verified: bool,
    pub partition_col_used: usize,
}

/// Per-coefficient freedom pattern for an order-`d` model: one boolean
/// matrix per coefficient (highest order first) plus one for the input.
#[derive(Debug, Clone, PartialEq)]
pub struct HigherOrderMask {
    coeff_masks: Vec<DMatrix<bool>>,
    input_mask: DMatrix<bool>,
}

impl HigherOrderMask {
    pub fn new(coeff_masks: Vec<DMatrix<bool>>, input_mask: DMatrix<bool>) -> Result<Self> {
        if coeff_masks.is_empty() {
            return Err(Error::InvalidArgument(
                "higher-order mask needs at least two coefficient masks".into(),
            ));
        }
        let n = coeff_masks[0].nrows();
        for (i, m) in coeff_masks.iter().enumerate() {
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::DimensionMismatch {
                    context: "higher-order coefficient mask",
                    expected: format!("{n}x{n}"),
                    found: format!("{}x{} at position {i}", m.nrows(), m.ncols()),
                });
            }
        }
        if input_mask.nrows() != n {
            return Err(Error::DimensionMismatch {
                context: "higher-order input mask",
                expected: format!("{n} rows"),
                found: format!("{} rows", input_mask.nrows()),
            });
        }
        Ok(Self {
            coeff_masks,
            input_mask,
        })
    }

    /// Embeds the per-coefficient masks into canonical-form coordinates.
    fn to_canonical(&self, sys: &HigherOrderSystem) -> Result<PerturbationMask> {
        let d = sys.degree();
        let nn = sys.state_dim();
        let m = sys.input_dim();
        if self.coeff_masks.len() != d + 1
            || self.coeff_masks[0].nrows() != nn
            || self.input_mask.shape() != (nn, m)
        {
            return Err(Error::DimensionMismatch {
                context: "higher-order mask",
                expected: format!("{} masks of {nn}x{nn} and input mask {nn}x{m}", d + 1),
                found: format!(
                    "{} masks of {:?}, input {:?}",
                    self.coeff_masks.len(),
                    self.coeff_masks[0].shape(),
                    self.input_mask.shape()
                ),
            });
        }
        let n = nn * d;
        let mut mask_e = DMatrix::from_element(n, n, false);
        mask_e
            .view_mut((0, 0), (nn, nn))
            .copy_from(&self.coeff_masks[0]);
        let mut mask_a = DMatrix::from_element(n, n, false);
        for k in 0..d {
            mask_a
                .view_mut((0, k * nn), (nn, nn))
                .copy_from(&self.coeff_masks[k + 1]);
        }
        let mut mask_b = DMatrix::from_element(n, m, false);
        mask_b.view_mut((0, 0), (nn, m)).copy_from(&self.input_mask);
        PerturbationMask::new(mask_e, mask_a, mask_b)
    }
}

/// Structured radius of controllability of a descriptor system, with the
/// perturbation confined to the mask.
///
/// An already uncontrollable input short-circuits to radius zero. Otherwise
/// the controllability matrix is assembled and oriented tall, and for every
/// candidate partition column (all of them under `cfg.multistart`, else the
/// configured one) the STLN iteration runs and its result is polished by
/// the first-order refinement; the minimum-norm stationary candidate wins.
/// Uncontrollability of the perturbed system is then verified at the
/// omega-dependent tolerance `max(1e-8, 10/omega)`.
pub fn compute_radius_descriptor(
    sys: &DescriptorSystem,
    mask: &PerturbationMask,
    cfg: &StlnConfig,
) -> Result<RadiusResult> {
    cfg.validate()?;
    if !mask.matches(sys) {
        return Err(Error::DimensionMismatch {
            context: "radius mask",
            expected: format!("mask for a {}x{} system", sys.n(), sys.m()),
            found: format!(
                "{}x{} / {}x{}",
                mask.mask_e().nrows(),
                mask.mask_e().ncols(),
                mask.mask_b().nrows(),
                mask.mask_b().ncols()
            ),
        });
    }
    let n = sys.n();
    let m = sys.m();
    let verify_tol = verification_tolerance(cfg.omega);

    let t = toeplitz::orient_tall(toeplitz::assemble(sys));
    let cols = t.matrix().ncols();
    let default_col = match cfg.partition {
        PartitionChoice::Last => cols - 1,
        PartitionChoice::Column(j) => j,
    };

    if !is_c_controllable_toeplitz(sys, linalg::DEFAULT_RANK_TOL) {
        // already uncontrollable: zero perturbation is optimal
        return Ok(RadiusResult {
            radius_frobenius: 0.0,
            radius_spectral: 0.0,
            delta_e: DMatrix::zeros(n, n),
            delta_a: DMatrix::zeros(n, n),
            delta_b: DMatrix::zeros(n, m),
            perturbed: sys.clone(),
            perturbed_higher_order: None,
            iterations: 0,
            refine_iterations: 0,
            converged: true,
            uncontrollability_verified: !is_c_controllable_toeplitz(sys, verify_tol),
            partition_col_used: default_col.min(cols - 1),
        });
    }

    let basis = toeplitz::build_basis(sys, mask, t.orientation())?;

    struct Candidate {
        alpha: nalgebra::DVector<f64>,
        iterations: usize,
        refine_iterations: usize,
        accepted: bool,
        col: usize,
    }

    let columns: Vec<usize> = if cfg.multistart {
        (0..cols).collect()
    } else {
        if default_col >= cols {
            return Err(Error::PartitionOutOfRange {
                col: default_col,
                ncols: cols,
            });
        }
        vec![default_col]
    };

    let mut best: Option<Candidate> = None;
    for &col in &columns {
        let col_cfg = StlnConfig {
            partition: PartitionChoice::Column(col),
            multistart: false,
            ..cfg.clone()
        };
        let state = stln::run(t.matrix(), &basis, &col_cfg)?;
        let refined = stln::refine(t.matrix(), &basis, &state.alpha, REFINE_MAX_ITER)?;
        // A candidate only counts as solved if its perturbed matrix is
        // genuinely rank deficient. This is stricter than the reported
        // verification tolerance: an omega-weighted iterate can sit a hair
        // inside the rank-drop boundary and undercut the true radius.
        let perturbed_t = t.matrix() + toeplitz::embed(&basis, &refined.alpha)?;
        let feasible = linalg::numerical_rank(&perturbed_t, 1e-10)
            .map(|r| r < perturbed_t.ncols())
            .unwrap_or(false);
        let candidate = Candidate {
            iterations: state.iterations,
            refine_iterations: refined.iterations,
            accepted: (state.converged || refined.stationary) && feasible,
            alpha: refined.alpha,
            col,
        };
        best = Some(match best.take() {
            None => candidate,
            Some(incumbent) => {
                let better = match (incumbent.accepted, candidate.accepted) {
                    (true, false) => false,
                    (false, true) => true,
                    _ => candidate.alpha.norm() < incumbent.alpha.norm(),
                };
                if better {
                    candidate
                } else {
                    incumbent
                }
            }
        });
    }
    let best = best.expect("at least one partition candidate");

    let (delta_e, delta_a, delta_b) = toeplitz::extract(&basis, &best.alpha)?;
    let perturbed =
        DescriptorSystem::new(sys.e() + &delta_e, sys.a() + &delta_a, sys.b() + &delta_b)?;
    let radius_frobenius = toeplitz::stacked_frobenius(&delta_e, &delta_a, &delta_b);
    let stacked = linalg::hstack(&linalg::hstack(&delta_e, &delta_a), &delta_b);
    let radius_spectral = linalg::spectral_norm(&stacked);
    let uncontrollability_verified = !is_c_controllable_toeplitz(&perturbed, verify_tol);

    Ok(RadiusResult {
        radius_frobenius,
        radius_spectral,
        delta_e,
        delta_a,
        delta_b,
        perturbed,
        perturbed_higher_order: None,
        iterations: best.iterations,
        refine_iterations: best.refine_iterations,
        converged: best.accepted,
        uncontrollability_verified,
        partition_col_used: best.col,
    })
}

/// Structured radius of an order-`d` model: reduces to canonical form,
/// intersects the canonical coefficient-block mask with any user mask, and
/// maps the optimal canonical perturbation back onto the coefficients.
pub fn compute_radius_higher_order(
    sys: &HigherOrderSystem,
    coeff_mask: Option<&HigherOrderMask>,
    cfg: &StlnConfig,
) -> Result<RadiusResult> {
    let (dsys, canonical_mask) = canonical_form(sys);
    let mask = match coeff_mask {
        None => canonical_mask,
        Some(user) => canonical_mask.intersect(&user.to_canonical(sys)?)?,
    };
    let mut result = compute_radius_descriptor(&dsys, &mask, cfg)?;
    let perturbed_higher =
        extract_higher_order_perturbation(sys, &result.delta_e, &result.delta_a, &result.delta_b)?;
    result.perturbed_higher_order = Some(perturbed_higher);
    Ok(result)
}

/// Exact optimum of the unstructured rank-deficiency problem for `[E B]`:
/// the smallest singular value. A certified upper bound on the unstructured
/// radius and a cross-check for full-mask runs.
pub fn oracle_r2_unstructured(sys: &DescriptorSystem) -> f64 {
    let eb = linalg::hstack(sys.e(), sys.b());
    let sv = eb.singular_values();
    sv[sv.len() - 1]
}

/// Rank tolerance used to verify the perturbed system is uncontrollable:
/// the omega weight bounds how exactly the rank constraint is enforced.
pub fn verification_tolerance(omega: f64) -> f64 {
    (10.0 / omega).max(1e-8)
}
