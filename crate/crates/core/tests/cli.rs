use std::path::Path;
use std::process::{Command, Output};

fn mfns(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mfns"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SMALL: &str = "\
eta = 0.02
dt = 1e-3
T = 0.005
N = 6
k_field = 4
k_noise = 1
scheme = ito-euler
seed = 3
ic = taylor-green
";

#[test]
fn taylor_green_then_compare_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let o = mfns(
        &["taylor-green", "--time", "0", "--eta", "0.02", "--k", "8", "--out", "tg.mfns"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let bytes = std::fs::read(dir.path().join("tg.mfns")).unwrap();
    assert_eq!(&bytes[..4], b"MFNS");
    assert_eq!(bytes.len(), 24 + 17 * 17 * 32);

    let o = mfns(&["compare", "tg.mfns", "tg.mfns"], dir.path());
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.contains("l2_error = 0e0"), "{out}");
    assert!(out.contains("max_mode_deviation = 0e0"));
    assert!(out.contains("energy_difference = 0e0"));
}

#[test]
fn basis_check_k2() {
    let dir = tempfile::tempdir().unwrap();
    let o = mfns(&["basis-check", "--k-max", "2"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("c_K = 6"), "{out}");
    assert!(out.contains("all defects below tolerance"));
    assert_eq!(mfns(&["basis-check", "--k-max", "0"], dir.path()).status.code(), Some(1));
}

#[test]
fn missing_config_names_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let o = mfns(&["run", "--config", "missing.cfg"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("missing.cfg"));
}

#[test]
fn usage_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(mfns(&["frobnicate"], dir.path()).status.code(), Some(1));
    assert_eq!(mfns(&["run", "--bogus"], dir.path()).status.code(), Some(1));
    let help = mfns(&["run", "--help"], dir.path());
    assert_eq!(help.status.code(), Some(0));
    for flag in ["--config", "--out", "--workers", "--eta", "--nu-override", "--ic", "--N", "--T"] {
        assert!(stdout(&help).contains(flag), "help lacks {flag}");
    }
}

#[test]
fn corrupt_snapshots_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let o = mfns(
        &["taylor-green", "--time", "0", "--eta", "0", "--k", "2", "--out", "a.mfns"],
        dir.path(),
    );
    assert!(o.status.success());
    let good = std::fs::read(dir.path().join("a.mfns")).unwrap();

    let mut bad = good.clone();
    bad[..4].copy_from_slice(b"NOPE");
    std::fs::write(dir.path().join("magic.mfns"), &bad).unwrap();
    let o = mfns(&["compare", "a.mfns", "magic.mfns"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("magic.mfns"));

    std::fs::write(dir.path().join("short.mfns"), &good[..good.len() - 5]).unwrap();
    let o = mfns(&["compare", "short.mfns", "a.mfns"], dir.path());
    assert_eq!(o.status.code(), Some(1));

    let o = mfns(
        &["taylor-green", "--time", "0", "--eta", "0", "--k", "3", "--out", "b.mfns"],
        dir.path(),
    );
    assert!(o.status.success());
    assert_eq!(mfns(&["compare", "a.mfns", "b.mfns"], dir.path()).status.code(), Some(1));

    // a corrupt snapshot used as the initial condition is also rejected
    std::fs::write(dir.path().join("run.cfg"), SMALL.replace("taylor-green", "file:magic.mfns"))
        .unwrap();
    assert_eq!(mfns(&["run", "--config", "run.cfg"], dir.path()).status.code(), Some(1));
}

#[test]
fn run_writes_outputs_and_flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.cfg"), SMALL).unwrap();
    let o = mfns(
        &["run", "--config", "run.cfg", "--out", "out", "--T", "0.003", "--snapshot-every", "1"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("out/diagnostics.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some("t,energy_mean,enstrophy_mean,max_mode_mean_div,mean_pm_norm,l2_err_ref")
    );
    assert_eq!(lines.count(), 4);
    for name in ["mean_000000.mfns", "mean_000003.mfns", "mean_final.mfns"] {
        assert!(dir.path().join("out").join(name).exists(), "{name}");
    }
    // an emitted snapshot is a valid initial condition
    let o = mfns(
        &["run", "--config", "run.cfg", "--out", "again", "--ic", "file:out/mean_final.mfns"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn invalid_config_values_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.cfg"), SMALL).unwrap();
    let o = mfns(&["run", "--config", "run.cfg", "--N", "0"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    std::fs::write(dir.path().join("bad.cfg"), "eta = 0.02\nwhat = 1\n").unwrap();
    let o = mfns(&["run", "--config", "bad.cfg"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("bad.cfg"));
}

#[test]
fn blow_up_exits_2_and_keeps_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.cfg"), SMALL).unwrap();
    let o = mfns(
        &["run", "--config", "run.cfg", "--out", "out", "--eta", "1", "--dt", "0.5", "--T", "100"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("blow-up"));
    let csv = std::fs::read_to_string(dir.path().join("out/diagnostics.csv")).unwrap();
    assert!(csv.lines().count() > 2);
}

#[test]
fn reference_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.cfg"), SMALL).unwrap();
    let o = mfns(&["reference", "--config", "run.cfg", "--out", "ref"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("ref/diagnostics.csv")).unwrap();
    assert_eq!(csv.lines().count(), 7);
    let o = mfns(
        &["taylor-green", "--time", "0.005", "--eta", "0.02", "--k", "4", "--out", "tg.mfns"],
        dir.path(),
    );
    assert!(o.status.success());
    let o = mfns(&["compare", "ref/mean_final.mfns", "tg.mfns"], dir.path());
    assert!(o.status.success());
    let l2: f64 = stdout(&o)
        .lines()
        .find_map(|l| l.strip_prefix("l2_error = "))
        .unwrap()
        .parse()
        .unwrap();
    assert!(l2 < 1e-12, "{l2}");
}

#[test]
fn convergence_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.cfg"), SMALL).unwrap();
    let o = mfns(
        &[
            "convergence", "--config", "run.cfg", "--n-list", "2,4", "--dt-list", "1e-3",
            "--seeds", "1,2", "--out", "conv",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.starts_with("N,dt,seed,error\n"));
    assert_eq!(out.lines().count(), 5);
    assert_eq!(std::fs::read_to_string(dir.path().join("conv/convergence.csv")).unwrap(), out);
    assert!(stderr(&o).contains("median error"));

    let o = mfns(
        &[
            "convergence", "--config", "run.cfg", "--n-list", "2", "--dt-list", "0.5",
            "--seeds", "1", "--eta", "1", "--T", "100",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("NaN"));

    let o = mfns(
        &["convergence", "--config", "run.cfg", "--n-list", "2", "--dt-list", "1e-3", "--seeds", "1", "--target", "nowhere"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(1));
}
