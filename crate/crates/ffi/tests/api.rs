use std::ffi::{c_void, CStr, CString};
use std::ptr;

use rdsm_ffi::*;

fn last_error() -> String {
    let p = rdsm_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn builtin(name: &str, dim: usize) -> *mut RdsmObjective {
    let name = CString::new(name).unwrap();
    let mut obj = ptr::null_mut();
    assert_eq!(
        unsafe { rdsm_objective_builtin(name.as_ptr(), dim, &mut obj) },
        RdsmStatus::Ok
    );
    obj
}

fn config(alg: RdsmAlgorithm, iters: usize, evals: usize) -> *mut RdsmConfig {
    let mut cfg = ptr::null_mut();
    unsafe {
        assert_eq!(rdsm_config_new(alg, &mut cfg), RdsmStatus::Ok);
        assert_eq!(rdsm_config_set_budget(cfg, iters, evals), RdsmStatus::Ok);
    }
    cfg
}

#[test]
fn dsm_reaches_linear_gradient_minimum() {
    let obj = builtin("linear-gradient", 0);
    let cfg = config(RdsmAlgorithm::Dsm, 50, 100);
    let x0 = [-0.75, 0.35];
    let mut run = ptr::null_mut();
    unsafe {
        assert_eq!(rdsm_run(cfg, obj, x0.as_ptr(), 2, 0, &mut run), RdsmStatus::Ok);
        let mut end = [0.0; 2];
        assert_eq!(rdsm_run_endpoint(run, end.as_mut_ptr(), 2), RdsmStatus::Ok);
        assert!((end[0] - 1.0).abs() < 0.05 && (end[1] + 1.0).abs() < 0.05);
        let mut j = f64::NAN;
        assert_eq!(rdsm_run_best_cost(run, &mut j), RdsmStatus::Ok);
        assert!(j <= 1e-3);
        let mut evals = 0;
        assert_eq!(rdsm_run_evaluations(run, &mut evals), RdsmStatus::Ok);
        assert!(evals <= 100);
        let mut small = [0.0; 1];
        assert_eq!(
            rdsm_run_endpoint(run, small.as_mut_ptr(), 1),
            RdsmStatus::BufferTooSmall
        );
        assert!(last_error().contains("needs 2"));
        rdsm_run_free(run);
        rdsm_config_free(cfg);
        rdsm_objective_free(obj);
    }
}

#[test]
fn rdsm_corrects_on_obstacle() {
    let obj = builtin("linear-gradient-obstacle", 2);
    let cfg = config(RdsmAlgorithm::Rdsm, 50, 100);
    let x0 = [-0.75, 0.35];
    let mut run = ptr::null_mut();
    unsafe {
        assert_eq!(rdsm_run(cfg, obj, x0.as_ptr(), 2, 0, &mut run), RdsmStatus::Ok);
        let mut events = 0;
        assert_eq!(rdsm_run_degeneracy_events(run, &mut events), RdsmStatus::Ok);
        assert!(events >= 1);
        let dir = tempfile::tempdir().unwrap();
        let path = CString::new(dir.path().to_str().unwrap()).unwrap();
        assert_eq!(rdsm_run_write_outputs(run, path.as_ptr(), true), RdsmStatus::Ok);
        assert!(dir.path().join("SimplexTrajectory.svg").exists());
        assert!(dir.path().join("PointsDatabase.dat").exists());
        rdsm_run_free(run);
        rdsm_config_free(cfg);
        rdsm_objective_free(obj);
    }
}

unsafe extern "C" fn sphere(x: *const f64, n: usize, calls: *mut c_void) -> f64 {
    *(calls as *mut usize) += 1;
    std::slice::from_raw_parts(x, n)
        .iter()
        .map(|v| (v - 0.5) * (v - 0.5))
        .sum()
}

#[test]
fn callback_objective_is_called() {
    let mut calls = 0usize;
    let mut obj = ptr::null_mut();
    unsafe {
        assert_eq!(
            rdsm_objective_from_callback(3, Some(sphere), &mut calls as *mut usize as *mut c_void, &mut obj),
            RdsmStatus::Ok
        );
        let cfg = config(RdsmAlgorithm::Rdsm, 400, 2000);
        let x0 = [2.0, -1.0, 1.0];
        let mut run = ptr::null_mut();
        assert_eq!(rdsm_run(cfg, obj, x0.as_ptr(), 3, 1, &mut run), RdsmStatus::Ok);
        let mut evals = 0;
        rdsm_run_evaluations(run, &mut evals);
        assert_eq!(evals, calls);
        let mut j = 1.0;
        rdsm_run_best_cost(run, &mut j);
        assert!(j < 1e-8, "{j}");
        rdsm_run_free(run);
        rdsm_config_free(cfg);
        rdsm_objective_free(obj);
    }
}

#[test]
fn errors_are_reported_not_raised() {
    unsafe {
        let mut obj = ptr::null_mut();
        let bad = CString::new("himmelblau").unwrap();
        assert_eq!(rdsm_objective_builtin(bad.as_ptr(), 0, &mut obj), RdsmStatus::Config);
        assert!(obj.is_null());
        assert!(last_error().contains("himmelblau"));

        assert_eq!(
            rdsm_objective_builtin(ptr::null(), 0, &mut obj),
            RdsmStatus::NullPointer
        );
        let name = CString::new("rosenbrock").unwrap();
        assert_eq!(
            rdsm_objective_builtin(name.as_ptr(), 0, ptr::null_mut()),
            RdsmStatus::NullPointer
        );

        let obj = builtin("linear-gradient", 0);
        let cfg = config(RdsmAlgorithm::Dsm, 10, 100);
        let x0 = [0.0, 0.0, 0.0];
        let mut run = ptr::null_mut();
        assert_eq!(rdsm_run(cfg, obj, x0.as_ptr(), 3, 0, &mut run), RdsmStatus::Config);
        assert!(run.is_null());

        let noise = CString::new("gaussian:-1").unwrap();
        assert_ne!(rdsm_objective_set_noise(obj, noise.as_ptr()), RdsmStatus::Ok);
        assert_eq!(rdsm_objective_set_scale(obj, 0.0), RdsmStatus::InvalidArgument);

        let mut c = RdsmCoefficients {
            alpha: 0.0,
            gamma: 0.0,
            rho: 0.0,
            sigma: 0.0,
            edge_threshold: 0.0,
            volume_threshold: 0.0,
            initial_simplex_coeff: 0.0,
        };
        assert_eq!(rdsm_config_get_coefficients(cfg, &mut c), RdsmStatus::Ok);
        assert_eq!((c.alpha, c.gamma, c.rho, c.sigma), (1.0, 2.0, 0.5, 0.5));
        let before = c;
        c.rho = 1.5;
        assert_eq!(rdsm_config_set_coefficients(cfg, &c), RdsmStatus::Config);
        let mut after = c;
        rdsm_config_get_coefficients(cfg, &mut after);
        assert_eq!(after, before);

        rdsm_config_free(cfg);
        rdsm_objective_free(obj);
        rdsm_objective_free(ptr::null_mut());
        rdsm_run_free(ptr::null_mut());
        rdsm_config_free(ptr::null_mut());
    }
}

#[test]
fn geometry_helpers() {
    unsafe {
        let tri = [0.0, 0.0, 1000.0, 0.0, 0.0, 1.0];
        let mut r = RdsmDegeneracyReport {
            epsilon_e: 0.0,
            epsilon_v: 0.0,
            classification: RdsmDegeneracy::None,
        };
        assert_eq!(
            rdsm_detect_degeneracy(tri.as_ptr(), 2, 0.1, 0.1, &mut r),
            RdsmStatus::Ok
        );
        assert_eq!(r.classification, RdsmDegeneracy::Edge);
        assert!((r.epsilon_v - 1.0).abs() < 1e-12);

        let mut v = 0.0;
        assert_eq!(rdsm_volume(tri.as_ptr(), 2, &mut v), RdsmStatus::Ok);
        assert!((v - 500.0).abs() < 1e-9);

        let mut flat = [0.0, 0.0, 1.0, 0.0, 0.7, 0.001];
        let (mut p0, mut v0) = (0.0, 0.0);
        rdsm_perimeter(flat.as_ptr(), 2, &mut p0);
        rdsm_volume(flat.as_ptr(), 2, &mut v0);
        let mut moved = 0;
        let costs = [0.0, 1.0, 2.0];
        assert_eq!(
            rdsm_correct_degeneracy(flat.as_mut_ptr(), costs.as_ptr(), 2, 0.1, 0.1, &mut moved),
            RdsmStatus::Ok
        );
        assert!(moved >= 1);
        let (mut p1, mut v1) = (0.0, 0.0);
        rdsm_perimeter(flat.as_ptr(), 2, &mut p1);
        rdsm_volume(flat.as_ptr(), 2, &mut v1);
        assert!((p1 - p0).abs() <= 1e-8 * p0);
        assert!(v1 > v0);

        assert_eq!(rdsm_volume(tri.as_ptr(), 0, &mut v), RdsmStatus::InvalidArgument);
        assert_eq!(rdsm_volume(ptr::null(), 2, &mut v), RdsmStatus::NullPointer);
    }
}

#[test]
fn version_is_static_string() {
    let v = unsafe { CStr::from_ptr(rdsm_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}
