//! Exercises the C ABI the way a foreign caller would: raw buffers,
//! status codes, opaque handles.

use std::ptr;

use ctrlrad_ffi::*;

fn default_options() -> CtrlradSolverOptions {
    let mut opts = CtrlradSolverOptions {
        omega: 0.0,
        epsilon: 0.0,
        max_iter: 0,
        partition_col: 0,
        multistart: 0,
    };
    assert_eq!(
        unsafe { ctrlrad_solver_options_default(&mut opts) },
        CtrlradStatus::Ok
    );
    opts
}

#[test]
fn descriptor_radius_matches_published_benchmark() {
    let e = [1.8, 0.0, 0.0, 0.0, 0.34, 0.0, 0.0, 0.0, 0.0];
    let a = [2.0, -0.91, -0.088, 0.19, 0.25, 0.51, 0.64, 0.31, -0.59];
    let b = [-0.63, 0.53, -0.58];

    let mut sys: *mut CtrlradSystem = ptr::null_mut();
    let status = unsafe {
        ctrlrad_system_create_descriptor(3, 1, e.as_ptr(), a.as_ptr(), b.as_ptr(), &mut sys)
    };
    assert_eq!(status, CtrlradStatus::Ok);

    let mut controllable = 0;
    let status = unsafe { ctrlrad_system_is_controllable(sys, -1.0, &mut controllable) };
    assert_eq!(status, CtrlradStatus::Ok);
    assert_eq!(controllable, 1);

    let mask_e = [0u8; 9]; // E fixed
    let mut opts = default_options();
    opts.omega = 1e13;
    opts.multistart = 1;

    let mut result: *mut CtrlradResult = ptr::null_mut();
    let status = unsafe {
        ctrlrad_compute_radius_descriptor(
            sys,
            mask_e.as_ptr(),
            ptr::null(),
            ptr::null(),
            &opts,
            &mut result,
        )
    };
    assert_eq!(status, CtrlradStatus::Ok);

    unsafe {
        assert_eq!(ctrlrad_result_converged(result), 1);
        assert_eq!(ctrlrad_result_uncontrollability_verified(result), 1);
        let spectral = ctrlrad_result_radius_spectral(result);
        assert!(
            (spectral - 0.3436).abs() <= 1e-3,
            "spectral radius {spectral}"
        );

        let (mut n, mut m) = (0usize, 0usize);
        assert_eq!(
            ctrlrad_result_dims(result, &mut n, &mut m),
            CtrlradStatus::Ok
        );
        assert_eq!((n, m), (3, 1));

        let mut de = [0.0; 9];
        let mut da = [0.0; 9];
        let mut db = [0.0; 3];
        assert_eq!(
            ctrlrad_result_perturbation(result, de.as_mut_ptr(), da.as_mut_ptr(), db.as_mut_ptr()),
            CtrlradStatus::Ok
        );
        assert!(de.iter().all(|&x| x == 0.0), "masked E must stay fixed");
        let frob: f64 = da
            .iter()
            .chain(db.iter())
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt();
        assert!((frob - ctrlrad_result_radius_frobenius(result)).abs() <= 1e-12);

        // perturbed system must be uncontrollable
        let mut pe = [0.0; 9];
        let mut pa = [0.0; 9];
        let mut pb = [0.0; 3];
        assert_eq!(
            ctrlrad_result_perturbed_system(
                result,
                pe.as_mut_ptr(),
                pa.as_mut_ptr(),
                pb.as_mut_ptr()
            ),
            CtrlradStatus::Ok
        );
        let mut perturbed: *mut CtrlradSystem = ptr::null_mut();
        assert_eq!(
            ctrlrad_system_create_descriptor(
                3,
                1,
                pe.as_ptr(),
                pa.as_ptr(),
                pb.as_ptr(),
                &mut perturbed
            ),
            CtrlradStatus::Ok
        );
        let mut verdict = 1;
        assert_eq!(
            ctrlrad_system_is_controllable(perturbed, -1.0, &mut verdict),
            CtrlradStatus::Ok
        );
        assert_eq!(verdict, 0);
        ctrlrad_system_free(perturbed);

        ctrlrad_result_free(result);
        ctrlrad_system_free(sys);
    }
}

#[test]
fn higher_order_radius_with_coefficient_masks() {
    // drum-brake model at mu = 0.05; stiffness and input free, mass fixed
    let mu = 0.05_f64;
    let gamma = std::f64::consts::PI / 100.0;
    let (sg, cg) = (gamma.sin(), gamma.cos());
    let k = [
        (sg + mu * cg) * sg,
        -mu - (sg + mu * cg) * cg,
        (mu * sg - cg) * sg,
        1.0 + (mu * sg + cg) * cg,
    ];
    #[rustfmt::skip]
    let coeffs = [
        5.0, 0.0, 0.0, 5.0,       // P2 = M
        0.0, 0.0, 0.0, 0.0,       // P1 = 0
        k[0], k[1], k[2], k[3],   // P0 = K(mu)
    ];
    let input = [0.0, 1.0];

    let mut sys: *mut CtrlradSystem = ptr::null_mut();
    let status = unsafe {
        ctrlrad_system_create_higher_order(2, 2, 1, coeffs.as_ptr(), input.as_ptr(), &mut sys)
    };
    assert_eq!(status, CtrlradStatus::Ok);

    let coeff_masks = [
        0u8, 0, 0, 0, // P2 fixed
        0, 0, 0, 0, // P1 fixed
        1, 1, 1, 1, // P0 free
    ];
    let input_mask = [1u8, 1];
    let mut opts = default_options();
    opts.multistart = 1;

    let mut result: *mut CtrlradResult = ptr::null_mut();
    let status = unsafe {
        ctrlrad_compute_radius_higher_order(
            sys,
            coeff_masks.as_ptr(),
            input_mask.as_ptr(),
            &opts,
            &mut result,
        )
    };
    assert_eq!(status, CtrlradStatus::Ok);
    unsafe {
        assert_eq!(ctrlrad_result_converged(result), 1);
        let spectral = ctrlrad_result_radius_spectral(result);
        assert!(
            (spectral - 0.0587).abs() <= 2e-3,
            "spectral radius {spectral}"
        );
        let (mut n, mut m) = (0usize, 0usize);
        ctrlrad_result_dims(result, &mut n, &mut m);
        assert_eq!((n, m), (4, 1)); // canonical dimensions
        ctrlrad_result_free(result);
        ctrlrad_system_free(sys);
    }
}

#[test]
fn null_arguments_are_rejected_with_message() {
    let mut out: *mut CtrlradSystem = ptr::null_mut();
    let status = unsafe {
        ctrlrad_system_create_descriptor(2, 1, ptr::null(), ptr::null(), ptr::null(), &mut out)
    };
    assert_eq!(status, CtrlradStatus::NullArgument);
    let msg = ctrlrad_last_error_message();
    assert!(!msg.is_null());
    let text = unsafe { std::ffi::CStr::from_ptr(msg) }.to_string_lossy();
    assert!(text.contains("null"), "message: {text}");
}

#[test]
fn non_finite_matrix_is_rejected() {
    let e = [1.0, 0.0, 0.0, f64::NAN];
    let a = [1.0, 0.0, 0.0, 1.0];
    let b = [1.0, 0.0];
    let mut out: *mut CtrlradSystem = ptr::null_mut();
    let status = unsafe {
        ctrlrad_system_create_descriptor(2, 1, e.as_ptr(), a.as_ptr(), b.as_ptr(), &mut out)
    };
    assert_eq!(status, CtrlradStatus::NonFinite);
}

#[test]
fn wrong_kind_is_reported() {
    let e = [1.0, 0.0, 0.0, 1.0];
    let a = [0.0, 1.0, -1.0, 0.0];
    let b = [1.0, 0.5];
    let mut sys: *mut CtrlradSystem = ptr::null_mut();
    unsafe {
        ctrlrad_system_create_descriptor(2, 1, e.as_ptr(), a.as_ptr(), b.as_ptr(), &mut sys);
    }
    let mut result: *mut CtrlradResult = ptr::null_mut();
    let status = unsafe {
        ctrlrad_compute_radius_higher_order(sys, ptr::null(), ptr::null(), ptr::null(), &mut result)
    };
    assert_eq!(status, CtrlradStatus::WrongKind);
    unsafe { ctrlrad_system_free(sys) };
}

#[test]
fn empty_mask_is_reported() {
    let e = [1.0, 0.0, 0.0, 1.0];
    let a = [0.0, 1.0, -1.0, 0.0];
    let b = [1.0, 0.5];
    let mut sys: *mut CtrlradSystem = ptr::null_mut();
    unsafe {
        ctrlrad_system_create_descriptor(2, 1, e.as_ptr(), a.as_ptr(), b.as_ptr(), &mut sys);
    }
    let zeros_nn = [0u8; 4];
    let zeros_nm = [0u8; 2];
    let mut result: *mut CtrlradResult = ptr::null_mut();
    let status = unsafe {
        ctrlrad_compute_radius_descriptor(
            sys,
            zeros_nn.as_ptr(),
            zeros_nn.as_ptr(),
            zeros_nm.as_ptr(),
            ptr::null(),
            &mut result,
        )
    };
    assert_eq!(status, CtrlradStatus::EmptyMask);
    unsafe { ctrlrad_system_free(sys) };
}
