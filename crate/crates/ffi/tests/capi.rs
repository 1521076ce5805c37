use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use meanfield_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(mf_last_error()) }.to_string_lossy().into_owned()
}

fn measure(points: &[f64], weights: Option<&[f64]>) -> *mut MfMeasure {
    let mut m = ptr::null_mut();
    let w = weights.map_or(ptr::null(), |w| w.as_ptr());
    let status = unsafe { mf_measure_new(1, points.as_ptr(), w, points.len(), &mut m) };
    assert_eq!(status, MfStatus::Ok, "{}", last_error());
    m
}

#[test]
fn one_dimensional_distances() {
    // W1(δ0, δ1) = 1; W2 of (0,1) vs (0,2) equal weights = sqrt(1/2)
    let a = measure(&[0.0], None);
    let b = measure(&[1.0], None);
    let c = measure(&[0.0, 1.0], None);
    let d = measure(&[0.0, 2.0], Some(&[0.5, 0.5]));
    let mut v = f64::NAN;
    let mut se = 0.0;
    unsafe {
        assert_eq!(mf_wasserstein(a, b, 1, MfSolver::Exact as u32, 0, 0, &mut v, &mut se), MfStatus::Ok);
        assert_eq!(v, 1.0);
        assert!(se.is_nan());
        assert_eq!(mf_wasserstein(c, d, 2, MfSolver::NetworkSimplex as u32, 0, 0, &mut v, ptr::null_mut()), MfStatus::Ok);
        assert!((v - 0.5f64.sqrt()).abs() < 1e-12);
        assert_eq!(mf_wasserstein(c, d, 2, MfSolver::Sliced as u32, 256, 1, &mut v, &mut se), MfStatus::Ok);
        assert!((v - 0.5f64.sqrt()).abs() < 1e-12);
        let mut n = 0;
        assert_eq!(mf_measure_len(d, &mut n), MfStatus::Ok);
        assert_eq!(n, 2);
        for m in [a, b, c, d] {
            mf_measure_free(m);
        }
    }
}

#[test]
fn errors_carry_status_and_message() {
    let a = measure(&[0.0], None);
    let mut v = 0.0;
    unsafe {
        assert_eq!(mf_wasserstein(a, a, 3, 0, 0, 0, &mut v, ptr::null_mut()), MfStatus::InvalidInput);
        assert!(!last_error().is_empty());
        assert_eq!(mf_wasserstein(a, a, 1, 7, 0, 0, &mut v, ptr::null_mut()), MfStatus::InvalidInput);
        assert!(last_error().contains("solver"));
        assert_eq!(mf_wasserstein(a, ptr::null(), 1, 0, 0, 0, &mut v, ptr::null_mut()), MfStatus::NullPointer);

        let mut m = ptr::null_mut();
        let bad = [0.3, 0.3];
        assert_eq!(mf_measure_new(1, [0.0, 1.0].as_ptr(), bad.as_ptr(), 2, &mut m), MfStatus::InvalidInput);
        assert!(m.is_null());
        assert_eq!(mf_measure_new(1, ptr::null(), ptr::null(), 2, &mut m), MfStatus::NullPointer);
        mf_measure_free(a);
        mf_measure_free(ptr::null_mut());
    }
}

#[test]
fn rate_fit_recovers_a_power_law() {
    let n = [16.0, 32.0, 64.0, 128.0];
    let d: Vec<f64> = n.iter().map(|x: &f64| 2.0 * x.powf(-0.5)).collect();
    let mut fit = MfRateFit::default();
    unsafe {
        assert_eq!(mf_fit_rate(n.as_ptr(), d.as_ptr(), 4, &mut fit), MfStatus::Ok);
        assert!((fit.alpha_hat - 0.5).abs() < 1e-12);
        assert!((fit.c_hat - 2.0).abs() < 1e-12);
        // fewer than four points is not a rate study
        assert_eq!(mf_fit_rate(n.as_ptr(), d.as_ptr(), 3, &mut fit), MfStatus::InvalidInput);
    }
}

const CONFIG: &str = r#"
experiment = "particles"
output_dir = "unused"

[model]
law = { kind = "two_body", potential = { name = "harmonic", stiffness_per_time2 = 1.0 }, sign = -1 }

[integrator]
scheme = "rk4"
dt_time = 0.1
t_final_time = 0.5

[particles]
replicas = 2
seed = 4
count = 3
dim = 1
snapshot_times_time = [0.0, 0.5]
initial_law = { name = "gaussian", position_std_length = 1.0, velocity_std = 1.0 }
"#;

#[test]
fn experiments_run_through_handles() {
    let dir = tempfile::tempdir().unwrap();
    let toml = CString::new(CONFIG).unwrap();
    let out = CString::new(dir.path().to_str().unwrap()).unwrap();
    let mut e = ptr::null_mut();
    let mut summary = ptr::null_mut();
    unsafe {
        assert_eq!(mf_experiment_from_toml(toml.as_ptr(), &mut e), MfStatus::Ok, "{}", last_error());
        assert_eq!(mf_experiment_set_output_dir(e, out.as_ptr()), MfStatus::Ok);
        assert_eq!(mf_experiment_run(e, &mut summary), MfStatus::Ok, "{}", last_error());
        let json: serde_json::Value = serde_json::from_str(CStr::from_ptr(summary).to_str().unwrap()).unwrap();
        assert_eq!(json["experiment"], "particles");
        mf_string_free(summary);
        mf_experiment_free(e);
    }
    assert!(dir.path().join("manifest.json").exists());

    let broken = CString::new(CONFIG.replace("seed = 4", "seed = -4")).unwrap();
    let mut e = ptr::null_mut();
    assert_eq!(unsafe { mf_experiment_from_toml(broken.as_ptr(), &mut e) }, MfStatus::InvalidInput);
    assert!(e.is_null());
}

#[test]
fn numerical_failures_are_distinguished() {
    let cfg = CONFIG.replace("experiment = \"particles\"", "experiment = \"vlasov\"")
        + r#"
[phase_grid]
x_min_length = -1.0
x_max_length = 1.0
nx = 8
v_min = -2.0
v_max = 2.0
nv = 8

[vlasov]
dt_time = 1.0
snapshot_times_time = [0.0, 1.0]
initial = { kind = "particle_law" }
"#;
    let dir = tempfile::tempdir().unwrap();
    let toml = CString::new(cfg).unwrap();
    let out = CString::new(dir.path().to_str().unwrap()).unwrap();
    let mut e = ptr::null_mut();
    unsafe {
        assert_eq!(mf_experiment_from_toml(toml.as_ptr(), &mut e), MfStatus::Ok, "{}", last_error());
        mf_experiment_set_output_dir(e, out.as_ptr());
        assert_eq!(mf_experiment_run(e, ptr::null_mut()), MfStatus::Numerical);
        assert!(last_error().contains("CFL"));
        mf_experiment_free(e);
    }
}

#[test]
fn header_declares_the_api_and_compiles() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include").join("meanfield.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for name in ["mf_measure_new", "mf_wasserstein", "mf_fit_rate", "mf_experiment_run", "MF_STATUS_NUMERICAL"] {
        assert!(text.contains(name), "{name}");
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("probe.c");
    std::fs::write(&src, "#include \"meanfield.h\"\nint main(void) { return MF_STATUS_OK; }\n").unwrap();
    match Command::new("cc").arg("-fsyntax-only").arg("-I").arg(header.parent().unwrap()).arg(&src).output() {
        Ok(out) => assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr)),
        Err(_) => eprintln!("no C compiler found; header syntax not checked"),
    }
}
