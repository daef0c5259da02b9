use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use kaczmarz::figures::{BOUND_HEADER, SWEEP_HEADER, TRACE_HEADER};
use kaczmarz::io::{read_vector, write_matrix, write_vector, Table};
use kaczmarz_core::DenseMatrix;

fn kaczmarz(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kaczmarz"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn diag12(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("A.csv");
    fs::write(&path, "1,0\n0,2\n").unwrap();
    path
}

fn parse_kv(line: &str) -> Vec<(String, String)> {
    line.split_whitespace()
        .map(|t| {
            let (k, v) = t.split_once('=').unwrap();
            (k.to_string(), v.to_string())
        })
        .collect()
}

#[test]
fn bounds_scalar_case() {
    let dir = tempfile::tempdir().unwrap();
    let a = diag12(dir.path());
    let o = kaczmarz(&[
        "bounds",
        "--matrix",
        p(&a),
        "--alpha",
        "1",
        "--threads",
        "1",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let kv = parse_kv(stdout(&o).trim());
    assert_eq!(kv[0].0, "rate");
    assert!((kv[0].1.parse::<f64>().unwrap() - 0.8).abs() < 1e-15);
    assert_eq!(kv[1], ("horizon_step".into(), "0".into()));
    assert_eq!(kv[2], ("horizon_limit".into(), "0".into()));
}

#[test]
fn bounds_with_inconsistent_rhs() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("A.csv");
    let b = dir.path().join("b.csv");
    fs::write(&a, "1,0\n0,1\n1,1\n").unwrap();
    // The least-squares fit is x = (1, 1), leaving r⋆ = (-1, -1, 1).
    fs::write(&b, "0\n0\n3\n").unwrap();
    let o = kaczmarz(&[
        "bounds",
        "--matrix",
        p(&a),
        "--rhs",
        p(&b),
        "--threads",
        "2",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let kv = parse_kv(stdout(&o).trim());
    let step: f64 = kv[1].1.parse().unwrap();
    // α² ‖r⋆‖² / (q ‖A‖_F²) with ‖r⋆‖² = 3, ‖A‖_F² = 4.
    assert!((step - 3.0 / 8.0).abs() < 1e-12, "{step}");

    let o = kaczmarz(&[
        "bounds",
        "--matrix",
        p(&a),
        "--rhs",
        p(&b),
        "--scheme",
        "rownorm-w-uniform-p",
    ]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("horizon_step=NA horizon_limit=NA"));
}

#[test]
fn bounds_reject_uncoupled_scheme() {
    let dir = tempfile::tempdir().unwrap();
    let a = diag12(dir.path());
    let o = kaczmarz(&[
        "bounds",
        "--matrix",
        p(&a),
        "--scheme",
        "uniform-w-uniform-p",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("CouplingViolated"));
}

#[test]
fn rank_deficient_matrix_fails_with_error_name() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("A.csv");
    fs::write(&a, "1,2\n2,4\n3,6\n").unwrap();
    let o = kaczmarz(&["bounds", "--matrix", p(&a)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("RankDeficient"));
    let o = kaczmarz(&["bounds", "--matrix", p(&dir.path().join("missing.csv"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("IoError"));
}

#[test]
fn alpha_prints_two_decimals() {
    let o = kaczmarz(&[
        "alpha",
        "--smin",
        "0.0579",
        "--smax",
        "0.1667",
        "--threads",
        "100",
    ]);
    assert!(o.status.success());
    let kv = parse_kv(stdout(&o).trim());
    assert_eq!(kv[0], ("alpha_star".into(), "8.61".into()));
    let rt: f64 = kv[1].1.parse().unwrap();
    assert!((rt - 5.72).abs() <= 0.01 + 1e-12, "{rt}");
    assert_eq!(kv[1].1.split('.').nth(1).unwrap().len(), 2);

    let dir = tempfile::tempdir().unwrap();
    let a = diag12(dir.path());
    let o = kaczmarz(&["alpha", "--matrix", p(&a), "--threads", "1"]);
    assert_eq!(stdout(&o), "alpha_star=1.00 alpha_rt=1.00\n");
}

#[test]
fn usage_errors_exit_two() {
    for args in [
        &["solve", "--threads", "0"][..],
        &["solve", "--matrix", "A", "--rhs", "b", "--threads", "0"],
        &["alpha", "--smin", "-1", "--smax", "0.5", "--threads", "2"],
        &["experiment", "fig-nope", "--out", "d"],
    ] {
        let o = kaczmarz(args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
    }
    let o = kaczmarz(&["solve", "--matrix", "A", "--rhs", "b", "--threads", "0"]);
    assert!(stderr(&o).contains("--threads"));
}

#[test]
fn solve_recovers_planted_solution() {
    let dir = tempfile::tempdir().unwrap();
    let a = DenseMatrix::from_rows(&[
        vec![1.0, 2.0, 0.5],
        vec![-1.0, 0.3, 2.0],
        vec![0.7, -1.2, 1.0],
        vec![2.0, 0.1, -0.4],
        vec![0.2, 0.9, 1.5],
    ])
    .unwrap();
    let x = [0.3, -0.6, 0.9];
    let b = a.matvec(&x).unwrap();
    let (ap, bp, xp) = (
        dir.path().join("A.csv"),
        dir.path().join("b.csv"),
        dir.path().join("x.csv"),
    );
    let (trace, out) = (dir.path().join("trace.csv"), dir.path().join("sol.csv"));
    write_matrix(&ap, &a).unwrap();
    write_vector(&bp, &b).unwrap();
    write_vector(&xp, &x).unwrap();
    let o = kaczmarz(&[
        "solve",
        "--matrix",
        p(&ap),
        "--rhs",
        p(&bp),
        "--x-star",
        p(&xp),
        "--threads",
        "3",
        "--iters",
        "2000",
        "--alpha",
        "1",
        "--scheme",
        "uniform-w-rownorm-p",
        "--seed",
        "7",
        "--trace",
        p(&trace),
        "--out",
        p(&out),
        "--parallel",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let sol = read_vector(&out).unwrap();
    for (s, t) in sol.iter().zip(x) {
        assert!((s - t).abs() < 1e-8, "{s} vs {t}");
    }
    let table = Table::read(&trace).unwrap();
    assert_eq!(table.header, ["iteration", "sq_residual", "sq_err"]);
    assert_eq!(table.rows.len(), 2001);
    assert_eq!(table.provenance.get("seed"), Some("7"));
    assert_eq!(table.provenance.get("m"), Some("5"));

    // Plain RK with a relaxation and the iterate on standard output.
    let o = kaczmarz(&[
        "solve",
        "--matrix",
        p(&ap),
        "--rhs",
        p(&bp),
        "--iters",
        "3000",
        "--lambda",
        "1.2",
        "--tol",
        "1e-12",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let printed: Vec<f64> = stdout(&o).lines().map(|l| l.parse().unwrap()).collect();
    assert_eq!(printed.len(), 3);
    assert!(printed.iter().zip(x).all(|(s, t)| (s - t).abs() < 1e-8));
    assert!(stderr(&o).contains("stopped_early=true"));
}

#[test]
fn solve_warns_on_uncoupled_scheme() {
    let dir = tempfile::tempdir().unwrap();
    let a = diag12(dir.path());
    let b = dir.path().join("b.csv");
    fs::write(&b, "1\n1\n").unwrap();
    let o = kaczmarz(&[
        "solve",
        "--matrix",
        p(&a),
        "--rhs",
        p(&b),
        "--scheme",
        "uniform-w-uniform-p",
        "--threads",
        "2",
        "--iters",
        "50",
    ]);
    assert!(o.status.success());
    assert!(stderr(&o).contains("warning: weights and probabilities are not coupled"));
    let o = kaczmarz(&["solve", "--matrix", p(&a), "--rhs", p(&b), "--iters", "5"]);
    assert!(!stderr(&o).contains("warning"));
}

#[test]
fn malformed_matrix_reports_position() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("A.csv");
    fs::write(&a, "1,0\n0,abc\n").unwrap();
    let o = kaczmarz(&["bounds", "--matrix", p(&a)]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("ParseError") && err.contains(":2:2:"), "{err}");
}

#[test]
fn fig_threads_writes_traces_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = kaczmarz(&["experiment", "fig-threads", "--out", p(&out), "--seed", "1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let manifest = fs::read_to_string(out.join("manifest.txt")).unwrap();
    let files: Vec<&str> = manifest.lines().skip(1).collect();
    assert_eq!(files.len(), 3);
    for (file, q) in files.iter().zip([1, 10, 100]) {
        let text = fs::read_to_string(out.join(file)).unwrap();
        assert!(text.starts_with("# seed=1 m=100 n=10 "));
        let table = Table::parse(file, &text).unwrap();
        assert_eq!(table.header, TRACE_HEADER);
        assert_eq!(table.rows.len(), 501);
        assert_eq!(table.provenance.get("q"), Some(q.to_string().as_str()));
        assert_eq!(table.to_csv().unwrap(), text);
    }
}

#[test]
fn sweep_and_bound_tables_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    for (fig, header, file) in [
        (
            "fig-alpha-sweep",
            &SWEEP_HEADER[..],
            "sweep_uniform-w-rownorm-p.csv",
        ),
        ("fig-bounds", &BOUND_HEADER[..], "bounds_q10.csv"),
        (
            "fig-alpha",
            &TRACE_HEADER[..],
            "alpha_uniform-w-rownorm-p_a0.5.csv",
        ),
    ] {
        let out = dir.path().join(fig);
        let o = kaczmarz(&[
            "experiment",
            fig,
            "--out",
            p(&out),
            "--seed",
            "3",
            "--m",
            "30",
            "--n",
            "4",
            "--trials",
            "5",
            "--iters",
            "20",
            "--threads",
            "10",
            "--alpha",
            "0.5,1",
            "--scheme",
            "uniform-w-rownorm-p",
        ]);
        assert!(o.status.success(), "{fig}: {}", stderr(&o));
        let text = fs::read_to_string(out.join(file)).unwrap();
        let table = Table::parse(file, &text).unwrap();
        assert_eq!(table.header, header);
        assert_eq!(table.to_csv().unwrap(), text);
        assert_eq!(table.provenance.get("experiment"), Some(fig));
    }
}
