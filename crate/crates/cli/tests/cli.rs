use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn prnls(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_prnls"))
        .args(args)
        .arg("--output-dir")
        .arg(out)
        .env_remove("PRNLS_OUTPUT_DIR")
        .output()
        .expect("binary runs")
}

fn small_2d() -> Vec<&'static str> {
    vec!["--n", "2", "--p", "3", "--points", "64", "--half-width", "12"]
}

#[test]
fn solve_writes_manifest_report_and_dump() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["solve", "--c", "16"];
    args.extend(small_2d());
    let out = prnls(&args, dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for name in ["manifest.toml", "solve.csv", "iterations.csv", "u_c.field"] {
        assert!(dir.path().join(name).exists(), "{name} missing");
    }
    let csv = fs::read_to_string(dir.path().join("solve.csv")).unwrap();
    assert!(csv.starts_with("n,p,c,iterations,kappa,residual,w_norm,rc_norm,converged\n"));
    assert!(csv.trim_end().ends_with("true"));
    let manifest = fs::read_to_string(dir.path().join("manifest.toml")).unwrap();
    assert!(manifest.contains("state = \"ok\""));
    assert!(manifest.parse::<toml::Table>().is_ok(), "{manifest}");

    let mut input = std::io::BufReader::new(fs::File::open(dir.path().join("u_c.field")).unwrap());
    let (field, meta) = prnls_core::spectral::io::read_dump(&mut input).unwrap();
    assert_eq!(meta.label, "u_c");
    assert_eq!(field.grid().points(), 64);
}

#[test]
fn sweep_has_one_row_per_rung() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["sweep", "--c-min", "8", "--c-max", "64", "--rungs", "4", "--threads", "2"];
    args.extend(small_2d());
    let out = prnls(&args, dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
}

#[test]
fn reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let runs: [(&str, Vec<&str>, &str); 3] = [
        ("sweep", vec!["--c-min", "8", "--rungs", "4", "--threads", "3"], "sweep.csv"),
        ("norm-probe", vec!["--trials", "3", "--seed", "5", "--c-min", "4", "--c-max", "32", "--rungs", "4"], "norm_probe.csv"),
        ("certify", vec!["--c", "1", "--runs", "4", "--seed", "11", "--threads", "2"], "probes.csv"),
    ];
    for (cmd, extra, file) in runs {
        let mut args = vec![cmd];
        args.extend(small_2d());
        args.extend(extra);
        for dir in [&a, &b] {
            let out = prnls(&args, dir.path());
            assert!(out.status.code().is_some_and(|c| c == 0 || c == 2), "{}", String::from_utf8_lossy(&out.stderr));
        }
        let first = fs::read(a.path().join(file)).unwrap();
        assert!(!first.is_empty());
        assert_eq!(first, fs::read(b.path().join(file)).unwrap(), "{file} differs");
    }
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = prnls(&["solve", "--n", "2", "--p", "0.5", "--c", "4"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("p > 1"));

    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "command = \"solve\"\nfoo = 1\n[params]\nn = 2\np = 3.0\nc = 4.0\n").unwrap();
    let out = prnls(&["run", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("foo"));

    let out = prnls(&["solve", "--bogus"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn config_file_drives_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(
        &cfg,
        "command = \"rate-sweep\"\n[params]\nn = 2\np = 3.0\n[grid]\npoints = 64\nhalf_width = 12.0\n[sweep]\nc_min = 8.0\nrungs = 4\n",
    )
    .unwrap();
    let out = prnls(&["run", "--config", cfg.to_str().unwrap()], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let fit = fs::read_to_string(dir.path().join("rate_fit.csv")).unwrap();
    let slope: f64 = fit.lines().nth(1).unwrap().split(',').nth(3).unwrap().parse().unwrap();
    assert!((-2.3..=-1.7).contains(&slope), "slope {slope}");
}

#[test]
fn non_convergence_exits_two() {
    // below the floor of the linear solver: a numeric refusal, not a usage error
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["solve", "--c", "0.5"];
    args.extend(small_2d());
    let out = prnls(&args, dir.path());
    assert_ne!(out.status.code(), Some(0));
    assert!(dir.path().join("manifest.toml").exists());
}

#[test]
fn remaining_commands_run() {
    let dir = tempfile::tempdir().unwrap();
    let cases: [(&str, Vec<&str>, &str); 3] = [
        ("ground-state", vec![], "ground_state.txt"),
        ("identity-check", vec!["--c", "16"], "identities.csv"),
        ("symbol-check", vec!["--samples", "2000"], "symbols.csv"),
    ];
    for (cmd, extra, file) in cases {
        let sub = dir.path().join(cmd);
        let mut args = vec![cmd];
        args.extend(small_2d());
        args.extend(extra);
        let out = prnls(&args, &sub);
        assert!(out.status.success(), "{cmd}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(sub.join(file).exists());
    }
    let ids = fs::read_to_string(dir.path().join("identity-check/identities.csv")).unwrap();
    assert_eq!(ids.lines().count(), 4);
}
