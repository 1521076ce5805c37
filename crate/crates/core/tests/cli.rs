use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_meanfield-lab");

const PARTICLES: &str = r#"
experiment = "particles"
output_dir = "out"

[model]
law = { kind = "cucker_smale", lambda_per_time = 1.0, radius_length = 0.5, beta = 1.0, sign = -1 }

[integrator]
scheme = "rk4"
dt_time = 0.05
t_final_time = 0.2

[particles]
replicas = 4
seed = 1
count = 6
dim = 2
snapshot_times_time = [0.0, 0.2]
initial_law = { name = "uniform_box", position_lo_length = -1.0, position_hi_length = 1.0, velocity_lo = -0.5, velocity_hi = 0.5 }
"#;

const VLASOV: &str = r#"
experiment = "vlasov"
output_dir = "out"

[model]
law = { kind = "cucker_smale", lambda_per_time = 1.0, radius_length = 0.5, beta = 1.0, sign = -1 }

[phase_grid]
x_min_length = -1.0
x_max_length = 1.0
nx = 16
v_min = -2.0
v_max = 2.0
nv = 16

[vlasov]
dt_time = 0.05
snapshot_times_time = [0.0, 0.1]
initial = { kind = "law", law = { name = "gaussian", position_std_length = 0.3, velocity_std = 0.5 } }
"#;

fn write_config(dir: &Path, text: &str) -> std::path::PathBuf {
    let path = dir.join("config.toml");
    std::fs::write(&path, text).unwrap();
    path
}

fn lab(args: &[&str], path: &Path, threads: Option<&str>) -> Output {
    let mut cmd = Command::new(BIN);
    cmd.args(args).arg(path).env_remove("MEANFIELD_THREADS");
    if let Some(t) = threads {
        cmd.env("MEANFIELD_THREADS", t);
    }
    cmd.output().unwrap()
}

#[test]
fn run_succeeds_and_writes_relative_to_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), PARTICLES);
    let out = lab(&["run"], &path, Some("2"));
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["experiment"], "particles");
    for name in ["particles_000.csv", "particles_001.csv", "summary.json", "manifest.json"] {
        assert!(dir.path().join("out").join(name).exists(), "{name}");
    }
}

#[test]
fn validate_does_not_run() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), PARTICLES);
    let out = lab(&["validate"], &path, None);
    assert_eq!(out.status.code(), Some(0));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn invalid_input_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = write_config(dir.path(), &PARTICLES.replace("seed = 1", "seed = 1\ncolour = 3"));
    assert_eq!(lab(&["run"], &unknown, None).status.code(), Some(2));
    assert_eq!(lab(&["validate"], &unknown, None).status.code(), Some(2));

    let path = write_config(dir.path(), PARTICLES);
    let out = lab(&["run"], &path, Some("zero"));
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("MEANFIELD_THREADS"));

    assert_eq!(lab(&["run"], &dir.path().join("missing.toml"), None).status.code(), Some(2));
    // the particles config has no [vlasov] or [hydro] section
    assert_eq!(lab(&["eps-sweep"], &path, None).status.code(), Some(2));
    assert_eq!(lab(&["rate-study"], &path, None).status.code(), Some(2));
}

#[test]
fn numerical_failure_exits_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), &VLASOV.replace("dt_time = 0.05", "dt_time = 0.5"));
    let out = lab(&["run"], &path, Some("1"));
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("vlasov_x"));
}

#[test]
fn thread_count_does_not_change_the_output() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let pa = write_config(a.path(), PARTICLES);
    let pb = write_config(b.path(), PARTICLES);
    assert_eq!(lab(&["run"], &pa, Some("1")).status.code(), Some(0));
    assert_eq!(lab(&["run"], &pb, Some("3")).status.code(), Some(0));
    for name in ["particles_001.csv", "summary.json", "manifest.json"] {
        let x = std::fs::read(a.path().join("out").join(name)).unwrap();
        let y = std::fs::read(b.path().join("out").join(name)).unwrap();
        assert_eq!(x, y, "{name}");
    }
}
