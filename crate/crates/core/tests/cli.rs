use std::fs;
use std::process::Command;

fn cme(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_cme")).args(args).output().expect("binary runs")
}

#[test]
fn models_lists_builtins() {
    let out = cme(&["models"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["dimerization", "exclusive_switch", "multi_attractor"] {
        assert!(text.contains(name));
    }
}

#[test]
fn usage_errors_exit_one() {
    let out = cme(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());
    assert_eq!(cme(&["solve-moments", "--model", "dimerization", "--bogus"]).status.code(), Some(1));
    assert_eq!(cme(&["solve-moments", "--model", "no_such_model", "--order", "2", "--t-end", "1"]).status.code(), Some(1));
    assert_eq!(cme(&["--help"]).status.code(), Some(0));
}

#[test]
fn moments_then_reconstruct_then_compare() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("m.csv");
    let r = dir.path().join("r.csv");
    let p = |p: &std::path::Path| p.to_str().unwrap().to_string();
    let out = cme(&[
        "solve-moments", "--model", "exclusive_switch", "--order", "5", "--t-end", "100", "--out", &p(&m),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = fs::read_to_string(&m).unwrap();
    let rows = text.lines().filter(|l| !l.starts_with('#') && !l.starts_with("multi_index")).count();
    assert_eq!(rows, 251);

    let out = cme(&[
        "reconstruct", "--moments", &p(&m), "--order", "4", "--lattice", "1", "--species", "2", "--out", &p(&r),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let dist = fs::read_to_string(&r).unwrap();
    assert!(dist.starts_with("# lambdas="));
    let total: f64 = dist
        .lines()
        .filter_map(|l| l.split_once(',').and_then(|(_, v)| v.parse::<f64>().ok()))
        .sum();
    assert!((total - 1.0).abs() < 1e-9);

    let out = cme(&["compare", &p(&r), &p(&r)]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(String::from_utf8(out.stdout).unwrap().trim(), "chebyshev,0e0");
}

#[test]
fn numerical_failure_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("m.csv");
    // a single-moment set has no maximum-entropy density on the line
    fs::write(&m, "multi_index,value\n1,-3\n").unwrap();
    let out = cme(&["reconstruct", "--moments", m.to_str().unwrap(), "--order", "1"]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn bench_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("dim.cfg");
    fs::write(&cfg, "model = dimerization\nt_end = 1\norders = 2,3\ndelta = 1e-12\nwall_times = false\n").unwrap();
    let out_dir = dir.path().join("out");
    let out = cme(&["bench", "--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let moments = fs::read_to_string(out_dir.join("moments.csv")).unwrap();
    assert!(moments.starts_with("order,n_equations,err_ord_1,err_ord_2,err_ord_3,err_ord_4,err_ord_5,wall_seconds"));
    assert!(out_dir.join("reconstruction.csv").exists());
    assert!(out_dir.join("direct.csv").exists());
}
