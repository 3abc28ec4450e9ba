use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_diagsing"));
    c.env_remove("DIAGSING_THREADS");
    c
}

fn manifest(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join(rel)
}

fn invoke(mut cmd: Command, args: &[&str], config: &Path, out: &Path) -> Output {
    cmd.args(args).arg(config).arg("--out-dir").arg(out).output().expect("binary runs")
}

fn read(dir: &Path, file: &str) -> String {
    std::fs::read_to_string(dir.join(file)).unwrap_or_else(|e| panic!("{file}: {e}"))
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn default_config_runs_every_table() {
    let dir = tempfile::tempdir().unwrap();
    let o = invoke(bin(), &["run"], &manifest("configs/default.json"), dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let evolve = read(dir.path(), "evolve.csv");
    assert_eq!(evolve.lines().next().unwrap(), "t,observable,re_mean,im_mean,trace,energy,offdiag_mag");
    assert_eq!(evolve.lines().count(), 1 + 5 * 5);
    let verify = read(dir.path(), "verify.csv");
    assert_eq!(verify.lines().next().unwrap(), "check_name,residual,tolerance,pass");
    assert!(verify.lines().skip(1).all(|l| !l.ends_with(",false")), "{verify}");
    for f in ["final.csv", "irreversibility.csv", "real_spectral.csv", "complex_spectral.csv", "resolved_config.json"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
}

#[test]
fn rerunning_the_resolved_config_is_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let cfg = manifest("tests/fixtures/kappa_zero.json");
    assert!(invoke(bin(), &["run"], &cfg, a.path()).status.success());
    let resolved = a.path().join("resolved_config.json");
    let mut single = bin();
    single.env("DIAGSING_THREADS", "1");
    assert!(invoke(single, &["run"], &resolved, b.path()).status.success());
    for f in ["evolve.csv", "final.csv", "complex_spectral.csv", "verify.csv", "resolved_config.json"] {
        assert_eq!(read(a.path(), f), read(b.path(), f), "{f}");
    }
}

#[test]
fn free_model_verifies_with_no_resonance() {
    let dir = tempfile::tempdir().unwrap();
    let o = invoke(bin(), &["verify"], &manifest("tests/fixtures/kappa_zero.json"), dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let verify = read(dir.path(), "verify.csv");
    assert!(verify.lines().any(|l| l.starts_with("no_resonance,") && l.ends_with(",info")), "{verify}");
    assert!(!dir.path().join("evolve.csv").exists());
}

#[test]
fn times_beyond_resolution_are_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = invoke(bin(), &["run"], &manifest("tests/fixtures/beyond_tmax.json"), dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("T_max"), "{}", stderr(&o));
}

#[test]
fn corrupted_json_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = invoke(bin(), &["run"], &manifest("tests/fixtures/corrupted.json"), dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(!dir.path().join("evolve.csv").exists());
}

#[test]
fn missing_config_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = invoke(bin(), &["run"], &dir.path().join("absent.json"), dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn sampled_input_on_the_complex_route_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let o = invoke(bin(), &["run"], &manifest("tests/fixtures/sampled_complex.json"), dir.path());
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
    assert!(stderr(&o).contains("analyticity"));
    // runs before the refusal still produced their tables
    assert!(dir.path().join("evolve.csv").exists());
}

#[test]
fn bad_arguments_exit_with_config_status() {
    let o = bin().arg("launch").output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    let o = bin().args(["run", "x.json", "--threads", "zero"]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn breached_invariants_exit_with_contract_status() {
    // 40 nodes cannot hold the trace of the + representation to 1e-8
    let dir = tempfile::tempdir().unwrap();
    let o = invoke(bin(), &["verify"], &manifest("tests/fixtures/coarse_grid.json"), dir.path());
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    let verify = read(dir.path(), "verify.csv");
    assert!(verify.lines().any(|l| l.starts_with("trace_conservation,") && l.ends_with(",false")), "{verify}");
    // later sections still ran
    assert!(verify.lines().any(|l| l.starts_with("phi_eigen_residual,")));
}
