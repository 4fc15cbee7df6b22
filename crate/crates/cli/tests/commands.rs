use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cohdisc_core::collective::lambda2_pm;
use cohdisc_core::collective::richardson;
use cohdisc_core::localmodel::known_amplitude_error;

fn cohdisc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cohdisc")).args(args).env_remove("COHDISC_SEED").output().expect("binary runs")
}

fn run_to_file(dir: &Path, name: &str, args: &[&str]) -> (String, Output) {
    let path: PathBuf = dir.join(name);
    let mut all = args.to_vec();
    let p = path.to_str().unwrap().to_string();
    all.extend(["--out", &p]);
    let out = cohdisc(&all);
    let text = std::fs::read_to_string(&path).unwrap_or_default();
    (text, out)
}

fn rows(csv: &str) -> Vec<Vec<f64>> {
    csv.lines().skip(1).map(|l| l.split(',').map(|c| c.parse().unwrap()).collect()).collect()
}

#[test]
fn risk_curve_shape() {
    let dir = tempfile::tempdir().unwrap();
    let (csv, out) = run_to_file(dir.path(), "risk.csv", &["risk-curve"]);
    assert!(out.status.success());
    assert!(csv.starts_with("alpha0,r_opt_risk,r_eand_risk,ratio\n"));
    assert!(!csv.contains('\r'));
    let r = rows(&csv);
    assert_eq!(r.len(), 28);
    assert!(r.iter().all(|row| row[2] >= row[1]));
    assert!(r.iter().map(|row| row[3]).fold(0.0, f64::max) > 2.0);
}

#[test]
fn squeezing_rows() {
    let out = cohdisc(&["squeezing"]);
    assert!(out.status.success());
    let r = rows(&String::from_utf8(out.stdout).unwrap());
    assert_eq!(r.len(), 60);
    assert!(r.iter().all(|row| row[1] < 0.0));
    assert!(r.last().unwrap()[1].abs() < 5e-3);
    let one = rows(&String::from_utf8(cohdisc(&["squeezing", "--alpha0-min", "1", "--steps", "1"]).stdout).unwrap());
    assert!((one[0][1] + 0.0967).abs() < 1e-3);
}

#[test]
fn finite_n_ladder_extrapolates_to_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["finite-n", "--alpha0", "1", "--mu", "1", "--n", "1000"];
    let (csv, out) = run_to_file(dir.path(), "a.csv", &args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r = rows(&csv);
    assert_eq!(r.iter().map(|row| row[0] as u64).collect::<Vec<_>>(), vec![1000, 4000, 16000]);
    assert!(r.iter().all(|row| row[1] < 0.5));
    let lead = known_amplitude_error(1.0);
    let f: Vec<f64> = r.iter().map(|row| row[0] * (row[1] - lead)).collect();
    let (lp, lm) = lambda2_pm(1.0, 1.0).unwrap();
    let want = -(lp - lm) / 4.0;
    let ext = richardson(f[1], f[2]);
    assert!((ext / want - 1.0).abs() < 0.02, "{ext} vs {want}");
    assert!(r[2][3].abs() < r[0][3].abs());

    let (again, _) = run_to_file(dir.path(), "b.csv", &args);
    assert_eq!(csv, again);
}

#[test]
fn eand_finite_n_runs() {
    let out = cohdisc(&["eand-finite-n", "--n", "200", "--steps", "2", "--quad-order", "20"]);
    assert!(out.status.success());
    let r = rows(&String::from_utf8(out.stdout).unwrap());
    assert_eq!(r.len(), 2);
    assert!(r.iter().all(|row| row[1] < 0.5 && row[1] > known_amplitude_error(1.0)));
}

#[test]
fn montecarlo_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["montecarlo", "--trials", "2000", "--seed", "42"];
    let (a, out) = run_to_file(dir.path(), "a.csv", &args);
    assert!(out.status.success());
    let (b, _) = run_to_file(dir.path(), "b.csv", &args);
    assert_eq!(a, b);
    let (c, _) =
        run_to_file(dir.path(), "c.csv", &["montecarlo", "--trials", "2000", "--seed", "42", "--workers", "1"]);
    assert_eq!(a, c);
    let row = &rows(&a)[0];
    assert_eq!(row[2], 42.0);
    assert!(row[6].abs() < 4.0);
}

#[test]
fn seed_from_environment() {
    let out = Command::new(env!("CARGO_BIN_EXE_cohdisc"))
        .args(["montecarlo", "--trials", "1000", "--quad-order", "10"])
        .env("COHDISC_SEED", "7")
        .output()
        .unwrap();
    assert_eq!(rows(&String::from_utf8(out.stdout).unwrap())[0][2], 7.0);
    let flag = Command::new(env!("CARGO_BIN_EXE_cohdisc"))
        .args(["montecarlo", "--trials", "1000", "--quad-order", "10", "--seed", "3"])
        .env("COHDISC_SEED", "7")
        .output()
        .unwrap();
    assert_eq!(rows(&String::from_utf8(flag.stdout).unwrap())[0][2], 3.0);
    let bad = Command::new(env!("CARGO_BIN_EXE_cohdisc"))
        .args(["montecarlo", "--trials", "1000"])
        .env("COHDISC_SEED", "seven")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn twopoint_reports_symmetric_optimum() {
    let out = cohdisc(&["twopoint"]);
    assert!(out.status.success());
    let r = rows(&String::from_utf8(out.stdout).unwrap());
    assert_eq!(r.len(), 4);
    for row in &r {
        assert!((row[1] - 0.997697).abs() < 1e-6);
        assert!((row[2] - row[3]).abs() < 1e-10);
        assert!(row[5] < row[4]);
    }
}

#[test]
fn config_file_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "alpha0-min = 0.5\nalpha0-max = 1.5\nsteps = 3\n").unwrap();
    let c = cfg.to_str().unwrap();
    let r = rows(&String::from_utf8(cohdisc(&["squeezing", "--config", c]).stdout).unwrap());
    assert_eq!(r.iter().map(|row| row[0]).collect::<Vec<_>>(), vec![0.5, 1.0, 1.5]);
    let r = rows(&String::from_utf8(cohdisc(&["squeezing", "--config", c, "--steps", "2"]).stdout).unwrap());
    assert_eq!(r.len(), 2);

    std::fs::write(&cfg, "steps = many\n").unwrap();
    assert_eq!(cohdisc(&["squeezing", "--config", c]).status.code(), Some(2));
    std::fs::write(&cfg, "colour = red\n").unwrap();
    assert_eq!(cohdisc(&["squeezing", "--config", c]).status.code(), Some(2));
}

#[test]
fn exit_codes() {
    assert_eq!(cohdisc(&["selftest"]).status.code(), Some(0));
    assert_eq!(cohdisc(&["risk-curve", "--alpha0-min", "0"]).status.code(), Some(2));
    assert_eq!(cohdisc(&["risk-curve", "--out", "/nonexistent-dir/x.csv"]).status.code(), Some(2));
    assert_eq!(cohdisc(&["risk-curve", "--config", "/nonexistent-dir/x.cfg"]).status.code(), Some(2));
    assert_eq!(cohdisc(&["finite-n", "--alpha0", "0"]).status.code(), Some(2));
    assert_eq!(cohdisc(&["squeezing", "--workers", "0"]).status.code(), Some(2));
    assert_eq!(cohdisc(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(cohdisc(&["montecarlo", "--trials", "10"]).status.code(), Some(2));
}
