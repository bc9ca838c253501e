use std::path::Path;
use std::process::{Command, Output};

fn gaugeops(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gaugeops")).args(args).output().unwrap()
}

fn rows(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn num(s: &str) -> f64 {
    s.parse().unwrap()
}

#[test]
fn builtin_scenarios_verify_cleanly() {
    for name in ["example1", "example2"] {
        let out = gaugeops(&["verify", name]);
        let stdout = String::from_utf8_lossy(&out.stdout);
        assert_eq!(out.status.code(), Some(0), "{stdout}");
        assert!(stdout.contains("result: PASS"));
    }
    let stdout = String::from_utf8(gaugeops(&["verify", "example2"]).stdout).unwrap();
    assert!(stdout.contains("incompressible") && stdout.contains("unitarity") && stdout.contains("intertwine"));
}

#[test]
fn zero_potential_breaks_unitarity() {
    let out = gaugeops(&["verify", "example2", "--potential", "0"]);
    assert_eq!(out.status.code(), Some(1));
    let stdout = String::from_utf8(out.stdout).unwrap();
    let line = stdout.lines().find(|l| l.contains("unitarity")).unwrap();
    assert!(line.starts_with("FAIL"), "{line}");
    // V_t stays unitary in the weighted space; incompressibility does not involve q
    assert!(stdout.lines().any(|l| l.starts_with("PASS") && l.contains("incompressible")));
}

#[test]
fn load_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("plane.ini");
    std::fs::write(&path, "[manifold]\ndim = 2\nbox = 0,1,0,1\n[operator]\nfield = 1, y\npotential = 0\n").unwrap();
    let out = gaugeops(&["verify", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("[operator]"));
    assert_eq!(gaugeops(&["verify", "no-such-file.ini"]).status.code(), Some(2));
    assert_eq!(gaugeops(&["verify", "example1", "--tol", "-1"]).status.code(), Some(2));
}

#[test]
fn report_file_has_no_timings() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.txt");
    let out =
        gaugeops(&["verify", "example1", "--report", path.to_str().unwrap(), "--tol", "1e-8", "--quad-points", "100"]);
    assert_eq!(out.status.code(), Some(0));
    let report = std::fs::read_to_string(&path).unwrap();
    assert!(!report.contains("time="));
    assert!(report.contains("factorization[psi=sin(x)]  max_residual="));
    assert!(report.contains("tolerance=1.00000000000e-8"));
}

#[test]
fn evolve_csv_intertwines() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("e.csv");
    let out =
        gaugeops(&["evolve", "example2", "--psi", "x*exp(-x)", "--times", "0.5", "--out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let header = std::fs::read_to_string(&path).unwrap().lines().next().unwrap().to_string();
    assert_eq!(header, "x_1,t,V_t_psi,U_t_psi,eta_gauge_U");
    let rows = rows(&path);
    assert_eq!(rows.len(), 64);
    for r in &rows {
        assert!((num(&r[3]) - num(&r[4])).abs() <= 1e-7, "{r:?}");
    }
}

#[test]
fn evolve_at_zero_and_on_the_kernel() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("z.csv");
    let p = path.to_str().unwrap();
    assert!(gaugeops(&["evolve", "example1", "--psi", "sin(x)", "--times", "0", "--out", p, "--grid", "9"])
        .status
        .success());
    for r in rows(&path) {
        let psi = num(&r[0]).sin();
        assert!((num(&r[2]) - psi).abs() < 1e-11 && (num(&r[3]) - psi).abs() < 1e-11);
    }
    let args = ["evolve", "example1", "--psi", "exp(-x^2)", "--times", "0.25,0.5,1", "--out", p, "--grid", "11"];
    assert!(gaugeops(&args).status.success());
    let rows = rows(&path);
    assert_eq!(rows.len(), 33);
    for r in rows {
        let eta = (-num(&r[0]).powi(2)).exp();
        assert!((num(&r[3]) - eta).abs() < 1e-8, "{r:?}");
    }
}

#[test]
fn evolve_marks_escaped_rows() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("s.ini");
    std::fs::write(
        &scenario,
        "[manifold]\ndim = 1\nbox = 1, 2\nflow_box = 0.5, 3\n[operator]\nfield = x\npotential = 0\neta = 1\n",
    )
    .unwrap();
    let path = dir.path().join("e.csv");
    let out = gaugeops(&[
        "evolve",
        scenario.to_str().unwrap(),
        "--psi",
        "x",
        "--times",
        "1",
        "--out",
        path.to_str().unwrap(),
        "--grid",
        "5",
    ]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.contains("nan"));
    assert!(text.lines().last().unwrap().starts_with("# "));
}

#[test]
fn eta_csv_matches_closed_forms() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("eta.csv");
    for name in ["example1", "example2"] {
        let out = gaugeops(&["eta", name, "--grid", "101", "--out", path.to_str().unwrap()]);
        assert!(out.status.success());
        let rows = rows(&path);
        assert_eq!(rows.len(), 101);
        for r in rows {
            let (solved, closed) = (num(&r[1]), num(&r[2]));
            assert!((solved - closed).abs() <= 1e-8 * closed.abs(), "{name}: {r:?}");
        }
    }
}

#[test]
fn eta_with_zero_potential_is_constant_and_critical_points_abort() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("flat.ini");
    std::fs::write(&scenario, "[manifold]\ndim = 1\nbox = -1, 1\n[operator]\nfield = 1 + x^2\npotential = 0\n")
        .unwrap();
    let path = dir.path().join("eta.csv");
    assert!(gaugeops(&["eta", scenario.to_str().unwrap(), "--grid", "21", "--out", path.to_str().unwrap()])
        .status
        .success());
    assert!(std::fs::read_to_string(&path).unwrap().starts_with("x,eta_solved,residual\n"));
    assert!(rows(&path).iter().all(|r| num(&r[1]) == 1.0));

    std::fs::write(&scenario, "[manifold]\ndim = 1\nbox = -1, 1\n[operator]\nfield = x\npotential = 1\n").unwrap();
    let out = gaugeops(&["eta", scenario.to_str().unwrap(), "--grid", "21", "--out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}
