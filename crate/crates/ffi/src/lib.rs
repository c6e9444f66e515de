//! C ABI for the ctrlrad library.
//!
//! Conventions:
//! - Every fallible function returns a [`CtrlradStatus`]; `CTRLRAD_OK` is 0.
//! - On error a thread-local message is set; fetch it with
//!   [`ctrlrad_last_error_message`]. The pointer stays valid until the next
//!   failing call on the same thread.
//! - Matrix buffers are dense row-major `double` arrays; mask buffers are
//!   `uint8_t` with nonzero = entry free to perturb.
//! - Opaque handles must be released with their `_free` function. `_free`
//!   accepts null.
//!
//! The matching header is maintained by hand at `include/ctrlrad.h`.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CString};

use ctrlrad::stln::PartitionChoice;
use ctrlrad::{
    compute_radius_descriptor, compute_radius_higher_order, DescriptorSystem, HigherOrderMask,
    HigherOrderSystem, PerturbationMask, RadiusResult, StlnConfig,
};
use nalgebra::DMatrix;

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into()).unwrap_or_else(|_| CString::new("invalid error").unwrap());
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(msg));
}

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CtrlradStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidDimension = 2,
    NonFinite = 3,
    EmptyMask = 4,
    SingularPencil = 5,
    WrongKind = 6,
    Internal = 7,
}

/// Last error message on this thread, or null if none was recorded.
#[no_mangle]
pub extern "C" fn ctrlrad_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| {
        slot.borrow()
            .as_ref()
            .map_or(std::ptr::null(), |s| s.as_ptr())
    })
}

fn status_of(err: &ctrlrad::Error) -> CtrlradStatus {
    use ctrlrad::Error::*;
    match err {
        DimensionMismatch { .. } | PartitionOutOfRange { .. } | CoordinateLength { .. } => {
            CtrlradStatus::InvalidDimension
        }
        NonFinite { .. } => CtrlradStatus::NonFinite,
        EmptyMask => CtrlradStatus::EmptyMask,
        SingularPencil => CtrlradStatus::SingularPencil,
        InvalidArgument(_) | StructuralViolation { .. } | SingularLeastSquares { .. } => {
            CtrlradStatus::Internal
        }
    }
}

enum SystemKind {
    Descriptor(DescriptorSystem),
    HigherOrder(HigherOrderSystem),
}

/// Opaque system handle (descriptor or higher-order).
pub struct CtrlradSystem {
    kind: SystemKind,
}

/// Opaque result handle.
pub struct CtrlradResult {
    inner: RadiusResult,
    n: usize,
    m: usize,
}

/// Solver options; get defaults from [`ctrlrad_solver_options_default`].
/// `partition_col < 0` means the last column; `multistart != 0` tries every
/// partition column and keeps the minimum-norm result.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct CtrlradSolverOptions {
    pub omega: f64,
    pub epsilon: f64,
    pub max_iter: usize,
    pub partition_col: isize,
    pub multistart: c_int,
}

/// Fills `out` with the default solver options.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ctrlrad_solver_options_default(
    out: *mut CtrlradSolverOptions,
) -> CtrlradStatus {
    if out.is_null() {
        set_error("out pointer is null");
        return CtrlradStatus::NullArgument;
    }
    let defaults = StlnConfig::default();
    *out = CtrlradSolverOptions {
        omega: defaults.omega,
        epsilon: defaults.epsilon,
        max_iter: defaults.max_iter,
        partition_col: -1,
        multistart: 0,
    };
    CtrlradStatus::Ok
}

fn config_from(opts: *const CtrlradSolverOptions) -> StlnConfig {
    if opts.is_null() {
        return StlnConfig::default();
    }
    let opts = unsafe { *opts };
    StlnConfig {
        omega: opts.omega,
        epsilon: opts.epsilon,
        max_iter: opts.max_iter,
        partition: if opts.partition_col < 0 {
            PartitionChoice::Last
        } else {
            PartitionChoice::Column(opts.partition_col as usize)
        },
        multistart: opts.multistart != 0,
    }
}

unsafe fn matrix_from_raw(ptr: *const f64, nrows: usize, ncols: usize) -> Option<DMatrix<f64>> {
    if ptr.is_null() {
        return None;
    }
    let data = std::slice::from_raw_parts(ptr, nrows * ncols);
    Some(DMatrix::from_row_slice(nrows, ncols, data))
}

unsafe fn mask_from_raw(ptr: *const u8, nrows: usize, ncols: usize) -> Option<DMatrix<bool>> {
    if ptr.is_null() {
        return None;
    }
    let data = std::slice::from_raw_parts(ptr, nrows * ncols);
    Some(DMatrix::from_fn(nrows, ncols, |i, j| {
        data[i * ncols + j] != 0
    }))
}

fn copy_row_major(m: &DMatrix<f64>, out: *mut f64) {
    let slice = unsafe { std::slice::from_raw_parts_mut(out, m.nrows() * m.ncols()) };
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            slice[i * m.ncols() + j] = m[(i, j)];
        }
    }
}

/// Creates a descriptor system `E z' = A z + B u` from row-major buffers of
/// sizes n*n, n*n and n*m.
///
/// # Safety
/// `e`, `a`, `b` must point to readable buffers of the stated sizes and
/// `out` to a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn ctrlrad_system_create_descriptor(
    n: usize,
    m: usize,
    e: *const f64,
    a: *const f64,
    b: *const f64,
    out: *mut *mut CtrlradSystem,
) -> CtrlradStatus {
    if out.is_null() {
        set_error("out pointer is null");
        return CtrlradStatus::NullArgument;
    }
    let (Some(e), Some(a), Some(b)) = (
        matrix_from_raw(e, n, n),
        matrix_from_raw(a, n, n),
        matrix_from_raw(b, n, m),
    ) else {
        set_error("matrix pointer is null");
        return CtrlradStatus::NullArgument;
    };
    match DescriptorSystem::new(e, a, b) {
        Ok(sys) => {
            *out = Box::into_raw(Box::new(CtrlradSystem {
                kind: SystemKind::Descriptor(sys),
            }));
            CtrlradStatus::Ok
        }
        Err(err) => {
            set_error(err.to_string());
            status_of(&err)
        }
    }
}

/// Creates an order-`degree` model from its coefficient matrices (highest
/// order first, concatenated row-major, `(degree+1) * state_dim * state_dim`
/// doubles) and its input matrix (`state_dim * input_dim`).
///
/// # Safety
/// `coefficients` and `input` must point to readable buffers of the stated
/// sizes and `out` to a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn ctrlrad_system_create_higher_order(
    degree: usize,
    state_dim: usize,
    input_dim: usize,
    coefficients: *const f64,
    input: *const f64,
    out: *mut *mut CtrlradSystem,
) -> CtrlradStatus {
    if out.is_null() || coefficients.is_null() {
        set_error("pointer argument is null");
        return CtrlradStatus::NullArgument;
    }
    let block = state_dim * state_dim;
    let coeffs: Vec<DMatrix<f64>> = (0..=degree)
        .map(|k| {
            let data = std::slice::from_raw_parts(coefficients.add(k * block), block);
            DMatrix::from_row_slice(state_dim, state_dim, data)
        })
        .collect();
    let Some(input) = matrix_from_raw(input, state_dim, input_dim) else {
        set_error("input pointer is null");
        return CtrlradStatus::NullArgument;
    };
    match HigherOrderSystem::new(coeffs, input) {
        Ok(sys) => {
            *out = Box::into_raw(Box::new(CtrlradSystem {
                kind: SystemKind::HigherOrder(sys),
            }));
            CtrlradStatus::Ok
        }
        Err(err) => {
            set_error(err.to_string());
            status_of(&err)
        }
    }
}

/// Releases a system handle. Null is accepted.
///
/// # Safety
/// `sys` must be a handle from a create function, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ctrlrad_system_free(sys: *mut CtrlradSystem) {
    if !sys.is_null() {
        drop(Box::from_raw(sys));
    }
}

/// Controllability through the block-Toeplitz rank criterion (always
/// conclusive); higher-order systems are tested through their canonical
/// form. Writes 1 or 0 to `out_controllable`. Pass `rel_tol <= 0` for the
/// default tolerance.
///
/// # Safety
/// `sys` must be a live handle, `out_controllable` writable.
#[no_mangle]
pub unsafe extern "C" fn ctrlrad_system_is_controllable(
    sys: *const CtrlradSystem,
    rel_tol: f64,
    out_controllable: *mut c_int,
) -> CtrlradStatus {
    if sys.is_null() || out_controllable.is_null() {
        set_error("pointer argument is null");
        return CtrlradStatus::NullArgument;
    }
    let tol = if rel_tol > 0.0 && rel_tol < 1.0 {
        rel_tol
    } else {
        ctrlrad::linalg::DEFAULT_RANK_TOL
    };
    let verdict = match &(*sys).kind {
        SystemKind::Descriptor(d) => ctrlrad::systems::is_c_controllable_toeplitz(d, tol),
        SystemKind::HigherOrder(h) => ctrlrad::systems::is_cd_controllable(h, tol),
    };
    *out_controllable = verdict as c_int;
    CtrlradStatus::Ok
}

/// Structured radius for a descriptor system. Mask buffers are `n*n`, `n*n`
/// and `n*m` row-major `uint8_t` (nonzero = free); a null mask pointer
/// means every entry of that matrix is free.
///
/// # Safety
/// `sys` must be a live descriptor handle; non-null mask pointers must have
/// the stated sizes; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ctrlrad_compute_radius_descriptor(
    sys: *const CtrlradSystem,
    mask_e: *const u8,
    mask_a: *const u8,
    mask_b: *const u8,
    options: *const CtrlradSolverOptions,
    out: *mut *mut CtrlradResult,
) -> CtrlradStatus {
    if sys.is_null() || out.is_null() {
        set_error("pointer argument is null");
        return CtrlradStatus::NullArgument;
    }
    let SystemKind::Descriptor(d) = &(*sys).kind else {
        set_error("handle is not a descriptor system");
        return CtrlradStatus::WrongKind;
    };
    let n = d.n();
    let m = d.m();
    let me = mask_from_raw(mask_e, n, n).unwrap_or_else(|| DMatrix::from_element(n, n, true));
    let ma = mask_from_raw(mask_a, n, n).unwrap_or_else(|| DMatrix::from_element(n, n, true));
    let mb = mask_from_raw(mask_b, n, m).unwrap_or_else(|| DMatrix::from_element(n, m, true));
    let mask = match PerturbationMask::new(me, ma, mb) {
        Ok(mask) => mask,
        Err(err) => {
            set_error(err.to_string());
            return status_of(&err);
        }
    };
    match compute_radius_descriptor(d, &mask, &config_from(options)) {
        Ok(result) => {
            *out = Box::into_raw(Box::new(CtrlradResult {
                inner: result,
                n,
                m,
            }));
            CtrlradStatus::Ok
        }
        Err(err) => {
            set_error(err.to_string());
            status_of(&err)
        }
    }
}

/// Structured radius for a higher-order model. `coeff_masks` is
/// `(degree+1) * state_dim * state_dim` bytes (highest order first),
/// `input_mask` is `state_dim * input_dim`; null means all free (the
/// canonical filler entries stay fixed regardless).
///
/// # Safety
/// `sys` must be a live higher-order handle; non-null mask pointers must
/// have the stated sizes; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ctrlrad_compute_radius_higher_order(
    sys: *const CtrlradSystem,
    coeff_masks: *const u8,
    input_mask: *const u8,
    options: *const CtrlradSolverOptions,
    out: *mut *mut CtrlradResult,
) -> CtrlradStatus {
    if sys.is_null() || out.is_null() {
        set_error("pointer argument is null");
        return CtrlradStatus::NullArgument;
    }
    let SystemKind::HigherOrder(h) = &(*sys).kind else {
        set_error("handle is not a higher-order system");
        return CtrlradStatus::WrongKind;
    };
    let d = h.degree();
    let nn = h.state_dim();
    let mm = h.input_dim();
    let mask = if coeff_masks.is_null() && input_mask.is_null() {
        None
    } else {
        let block = nn * nn;
        let cms: Vec<DMatrix<bool>> = if coeff_masks.is_null() {
            vec![DMatrix::from_element(nn, nn, true); d + 1]
        } else {
            (0..=d)
                .map(|k| {
                    let data = std::slice::from_raw_parts(coeff_masks.add(k * block), block);
                    DMatrix::from_fn(nn, nn, |i, j| data[i * nn + j] != 0)
                })
                .collect()
        };
        let im = mask_from_raw(input_mask, nn, mm)
            .unwrap_or_else(|| DMatrix::from_element(nn, mm, true));
        match HigherOrderMask::new(cms, im) {
            Ok(mask) => Some(mask),
            Err(err) => {
                set_error(err.to_string());
                return status_of(&err);
            }
        }
    };
    match compute_radius_higher_order(h, mask.as_ref(), &config_from(options)) {
        Ok(result) => {
            let n = nn * d;
            *out = Box::into_raw(Box::new(CtrlradResult {
                inner: result,
                n,
                m: mm,
            }));
            CtrlradStatus::Ok
        }
        Err(err) => {
            set_error(err.to_string());
            status_of(&err)
        }
    }
}

/// Releases a result handle. Null is accepted.
///
/// # Safety
/// `result` must be a handle from a compute function, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ctrlrad_result_free(result: *mut CtrlradResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// Frobenius norm of the stacked optimal perturbation.
///
/// # Safety
/// `result` must be a live result handle.
#[no_mangle]
pub unsafe extern "C" fn ctrlrad_result_radius_frobenius(result: *const CtrlradResult) -> f64 {
    (*result).inner.radius_frobenius
}

/// Largest singular value of the stacked optimal perturbation.
///
/// # Safety
/// `result` must be a live result handle.
#[no_mangle]
pub unsafe extern "C" fn ctrlrad_result_radius_spectral(result: *const CtrlradResult) -> f64 {
    (*result).inner.radius_spectral
}

/// Iterations of the weighted iteration for the winning partition.
///
/// # Safety
/// `result` must be a live result handle.
#[no_mangle]
pub unsafe extern "C" fn ctrlrad_result_iterations(result: *const CtrlradResult) -> usize {
    (*result).inner.iterations
}

/// Iterations of the first-order refinement pass.
///
/// # Safety
/// `result` must be a live result handle.
#[no_mangle]
pub unsafe extern "C" fn ctrlrad_result_refine_iterations(result: *const CtrlradResult) -> usize {
    (*result).inner.refine_iterations
}

/// 1 when the solver reached a stationary point within budget.
///
/// # Safety
/// `result` must be a live result handle.
#[no_mangle]
pub unsafe extern "C" fn ctrlrad_result_converged(result: *const CtrlradResult) -> c_int {
    (*result).inner.converged as c_int
}

/// 1 when the perturbed system fails the rank test at the omega-dependent
/// tolerance.
///
/// # Safety
/// `result` must be a live result handle.
#[no_mangle]
pub unsafe extern "C" fn ctrlrad_result_uncontrollability_verified(
    result: *const CtrlradResult,
) -> c_int {
    (*result).inner.uncontrollability_verified as c_int
}

/// Partition column of the winning run.
///
/// # Safety
/// `result` must be a live result handle.
#[no_mangle]
pub unsafe extern "C" fn ctrlrad_result_partition_col(result: *const CtrlradResult) -> usize {
    (*result).inner.partition_col_used
}

/// Dimensions of the (canonical) descriptor perturbation held by a result.
///
/// # Safety
/// `result` must be a live result handle; out pointers writable.
#[no_mangle]
pub unsafe extern "C" fn ctrlrad_result_dims(
    result: *const CtrlradResult,
    out_n: *mut usize,
    out_m: *mut usize,
) -> CtrlradStatus {
    if result.is_null() || out_n.is_null() || out_m.is_null() {
        set_error("pointer argument is null");
        return CtrlradStatus::NullArgument;
    }
    *out_n = (*result).n;
    *out_m = (*result).m;
    CtrlradStatus::Ok
}

/// Copies the optimal perturbation `(dE, dA, dB)` into row-major buffers of
/// sizes n*n, n*n, n*m (see [`ctrlrad_result_dims`]).
///
/// # Safety
/// `result` must be a live result handle; out buffers writable with the
/// stated sizes.
#[no_mangle]
pub unsafe extern "C" fn ctrlrad_result_perturbation(
    result: *const CtrlradResult,
    out_delta_e: *mut f64,
    out_delta_a: *mut f64,
    out_delta_b: *mut f64,
) -> CtrlradStatus {
    if result.is_null() || out_delta_e.is_null() || out_delta_a.is_null() || out_delta_b.is_null() {
        set_error("pointer argument is null");
        return CtrlradStatus::NullArgument;
    }
    let r = &(*result).inner;
    copy_row_major(&r.delta_e, out_delta_e);
    copy_row_major(&r.delta_a, out_delta_a);
    copy_row_major(&r.delta_b, out_delta_b);
    CtrlradStatus::Ok
}

/// Copies the perturbed descriptor triple `(E+dE, A+dA, B+dB)` into
/// row-major buffers of sizes n*n, n*n, n*m.
///
/// # Safety
/// `result` must be a live result handle; out buffers writable with the
/// stated sizes.
#[no_mangle]
pub unsafe extern "C" fn ctrlrad_result_perturbed_system(
    result: *const CtrlradResult,
    out_e: *mut f64,
    out_a: *mut f64,
    out_b: *mut f64,
) -> CtrlradStatus {
    if result.is_null() || out_e.is_null() || out_a.is_null() || out_b.is_null() {
        set_error("pointer argument is null");
        return CtrlradStatus::NullArgument;
    }
    let r = &(*result).inner;
    copy_row_major(r.perturbed.e(), out_e);
    copy_row_major(r.perturbed.a(), out_a);
    copy_row_major(r.perturbed.b(), out_b);
    CtrlradStatus::Ok
}
