//! End-to-end checks of the runner: exit codes, artifact layout, and
//! byte-level determinism.

use asymptolab::config::ExperimentConfig;
use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_asymptolab"))
}

/// A configuration trimmed for test speed: short ladders, coarse grids.
fn trimmed_config() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::reference();
    cfg.grids.n_m = 24;
    cfg.grids.m_cutoff = 10.0;
    cfg.grids.n_ray = 12;
    cfg.grids.ratio = 2.0;
    cfg.eps.ladder = vec![[0.2, 0.0], [0.1, 0.0]];
    cfg.eps.flatness_ladder_inner = vec![0.2, 0.19, 0.18, 0.17];
    cfg.eps.flatness_ladder_outer = vec![0.2, 0.19, 0.18, 0.17];
    cfg
}

fn write_config(dir: &Path, cfg: &ExperimentConfig) -> PathBuf {
    let path = dir.join("config.toml");
    std::fs::write(&path, cfg.to_toml()).unwrap();
    path
}

#[test]
fn checked_in_reference_config_matches_builtin() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/reference.toml");
    let text = std::fs::read_to_string(path).unwrap();
    let cfg = ExperimentConfig::from_toml(&text).unwrap();
    assert_eq!(cfg.hash(), ExperimentConfig::reference().hash());
}

#[test]
fn validate_reference_exits_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg_path = write_config(tmp.path(), &trimmed_config());
    let out = bin()
        .args(["validate", "--config"])
        .arg(&cfg_path)
        .arg("--out")
        .arg(tmp.path().join("out"))
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    assert!(tmp.path().join("out/validation.csv").exists());
}

#[test]
fn validate_flags_a_broken_inner_margin() {
    // lambda1 = 1 violates the inner-rescaling inequality; exit code 1 and the
    // report names the failing check
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = trimmed_config();
    cfg.spec.lambda1 = 1;
    cfg.spec.delta_exp_top = 1 * cfg.spec.k1 * cfg.spec.delta_d1 + cfg.spec.lambda2 * cfg.spec.k2 * cfg.spec.delta_d2;
    let cfg_path = write_config(tmp.path(), &cfg);
    let out = bin()
        .args(["validate", "--config"])
        .arg(&cfg_path)
        .arg("--out")
        .arg(tmp.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let report = std::fs::read_to_string(tmp.path().join("out/validation.csv")).unwrap();
    assert!(report.contains("inner_rescaling_margin,false"));
}

#[test]
fn malformed_config_exits_two() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg_path = tmp.path().join("broken.toml");
    std::fs::write(&cfg_path, "this is not toml [").unwrap();
    let out = bin().args(["validate", "--config"]).arg(&cfg_path).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_flag_exits_two() {
    let out = bin().args(["validate", "--definitely-not-a-flag"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn no_solve_without_artifacts_exits_one() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg_path = write_config(tmp.path(), &trimmed_config());
    let out = bin()
        .args(["inner", "--no-solve", "--config"])
        .arg(&cfg_path)
        .arg("--out")
        .arg(tmp.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--no-solve"));
}

#[test]
fn demos_are_byte_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg_path = write_config(tmp.path(), &trimmed_config());
    let run = |out_dir: &Path| {
        let out = bin()
            .args(["demos", "--config"])
            .arg(&cfg_path)
            .arg("--out")
            .arg(out_dir)
            .output()
            .unwrap();
        assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    };
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    run(&a);
    run(&b);
    for name in ["root_collapse.csv", "kernel_envelopes.csv", "aux_integral.csv", "wiman.csv"] {
        let x = std::fs::read(a.join(name)).unwrap();
        let y = std::fs::read(b.join(name)).unwrap();
        assert_eq!(x, y, "{name} differs between runs");
    }
}

#[test]
fn env_var_overrides_the_output_flag() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg_path = write_config(tmp.path(), &trimmed_config());
    let env_dir = tmp.path().join("env_out");
    let flag_dir = tmp.path().join("flag_out");
    let out = bin()
        .args(["validate", "--config"])
        .arg(&cfg_path)
        .arg("--out")
        .arg(&flag_dir)
        .env("ASYMPTOLAB_OUT", &env_dir)
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(env_dir.join("validation.csv").exists());
    assert!(!flag_dir.join("validation.csv").exists());
}

#[test]
fn empty_ladder_is_a_no_op() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = trimmed_config();
    cfg.eps.ladder = vec![];
    let cfg_path = write_config(tmp.path(), &cfg);
    let out = bin()
        .args(["inner", "--config"])
        .arg(&cfg_path)
        .arg("--out")
        .arg(tmp.path().join("out"))
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("nothing to do"));
}

#[test]
fn solve_then_inner_with_no_solve_succeeds() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg_path = write_config(tmp.path(), &trimmed_config());
    let out_dir = tmp.path().join("out");
    let solve = bin()
        .args(["solve", "--jobs", "2", "--config"])
        .arg(&cfg_path)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(solve.status.success(), "stderr: {}", String::from_utf8_lossy(&solve.stderr));
    assert!(out_dir.join("solve_log.csv").exists());
    assert!(out_dir.join("omega_h0_eps0.csv").exists());
    let inner = bin()
        .args(["inner", "--no-solve", "--config"])
        .arg(&cfg_path)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(inner.status.success(), "stderr: {}", String::from_utf8_lossy(&inner.stderr));
    assert!(out_dir.join("inner_h0_eps0.csv").exists());
    // header plus hash comment lead each artifact
    let head = std::fs::read_to_string(out_dir.join("inner_h0_eps0.csv")).unwrap();
    assert!(head.starts_with("# config_hash="));
    assert!(head.lines().nth(1).unwrap().starts_with("h,eps_re,eps_im"));
}
