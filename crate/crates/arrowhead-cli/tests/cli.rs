//! Binary-level tests: flags, exit codes, file artifacts, determinism.

use std::path::Path;
use std::process::{Command, Output};

use arrowhead_cli::{strip_wall_columns, CSV_HEADER};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_arrowhead"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn gen_writes_matrix_and_rhs_per_sweep_point() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "gen",
        "--problem",
        "sphere",
        "--sizes",
        "5,6,7",
        "--rhs",
        "3",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for s in [5, 6, 7] {
        assert!(dir.path().join(format!("sphere_s{s}_A.mtx")).exists());
        assert!(dir.path().join(format!("sphere_s{s}_b.mtx")).exists());
    }
    assert_eq!(stdout(&out).lines().count(), 6);
}

#[test]
fn gen_is_deterministic_under_fixed_seed() {
    let d1 = tempfile::tempdir().unwrap();
    let d2 = tempfile::tempdir().unwrap();
    for d in [&d1, &d2] {
        let out = run(&[
            "gen",
            "--sizes",
            "6",
            "--rhs",
            "5",
            "--seed",
            "9",
            "--out",
            d.path().to_str().unwrap(),
        ]);
        assert!(out.status.success());
    }
    for name in ["sphere_s6_A.mtx", "sphere_s6_b.mtx"] {
        let a = std::fs::read(d1.path().join(name)).unwrap();
        let b = std::fs::read(d2.path().join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
    }
}

#[test]
fn gen_array_has_row_times_col_rhs_columns() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "gen",
        "--problem",
        "array",
        "--sizes",
        "24",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let b: arrowhead::DenseMatrix<f64> =
        arrowhead::read_dense(dir.path().join("array_s24_b.mtx")).unwrap();
    assert_eq!(b.cols(), 200);
}

fn gen_small(dir: &Path) -> (String, String) {
    let out = run(&[
        "gen",
        "--sizes",
        "6",
        "--rhs",
        "2",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    (
        dir.join("sphere_s6_A.mtx").to_str().unwrap().into(),
        dir.join("sphere_s6_b.mtx").to_str().unwrap().into(),
    )
}

#[test]
fn solve_writes_solution_and_stats_row() {
    let dir = tempfile::tempdir().unwrap();
    let (a_path, b_path) = gen_small(dir.path());
    let x_path = dir.path().join("x.mtx");
    let out = run(&[
        "solve",
        "--problem",
        "mtx",
        "--files",
        &a_path,
        &b_path,
        "--method",
        "dd",
        "--out",
        x_path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], CSV_HEADER);
    assert_eq!(lines.len(), 3);
    assert!(lines[1].ends_with(",ok") && lines[2].ends_with(",ok"));

    let a: arrowhead::RealMatrix = arrowhead::read_sym_sparse(&a_path).unwrap();
    let b: arrowhead::DenseMatrix<f64> = arrowhead::read_dense(&b_path).unwrap();
    let x: arrowhead::DenseMatrix<f64> = arrowhead::read_dense(&x_path).unwrap();
    assert!(arrowhead_cli::max_relres(&a, &x, &b) <= 1e-10);
}

#[test]
fn solve_methods_agree_on_shared_files() {
    let dir = tempfile::tempdir().unwrap();
    let (a_path, b_path) = gen_small(dir.path());
    let mut xs = Vec::new();
    for method in ["dd", "baseline"] {
        let x_path = dir.path().join(format!("x_{method}.mtx"));
        let out = run(&[
            "solve",
            "--problem",
            "mtx",
            "--files",
            &a_path,
            &b_path,
            "--method",
            method,
            "--out",
            x_path.to_str().unwrap(),
        ]);
        assert!(out.status.success());
        xs.push(arrowhead::read_dense::<f64>(&x_path).unwrap());
    }
    let (xd, xb) = (&xs[0], &xs[1]);
    let mut diff = 0.0f64;
    let mut scale = 0.0f64;
    for i in 0..xd.rows() {
        for j in 0..xd.cols() {
            diff = diff.max((xd.at(i, j) - xb.at(i, j)).abs());
            scale = scale.max(xb.at(i, j).abs());
        }
    }
    assert!(diff <= 1e-9 * scale.max(1.0), "methods diverge: {diff}");
}

#[test]
fn solve_identity_system_returns_rhs() {
    let dir = tempfile::tempdir().unwrap();
    let n = 12;
    let eye = arrowhead::RealMatrix::from_triplets(n, (0..n).map(|i| (i, i, 1.0))).unwrap();
    let b = arrowhead::DenseMatrix::from_fn(n, 2, |i, j| (i * 2 + j) as f64 - 5.0);
    let a_path = dir.path().join("eye.mtx");
    let b_path = dir.path().join("b.mtx");
    arrowhead::write_sym_sparse(&a_path, &eye).unwrap();
    arrowhead::write_dense(&b_path, &b).unwrap();
    let x_path = dir.path().join("x.mtx");
    let out = run(&[
        "solve",
        "--problem",
        "mtx",
        "--files",
        a_path.to_str().unwrap(),
        b_path.to_str().unwrap(),
        "--method",
        "baseline",
        "--out",
        x_path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let x: arrowhead::DenseMatrix<f64> = arrowhead::read_dense(&x_path).unwrap();
    for i in 0..n {
        for j in 0..2 {
            assert_eq!(x.at(i, j), b.at(i, j));
        }
    }
}

#[test]
fn residual_failure_has_distinct_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let (a_path, b_path) = gen_small(dir.path());
    let out = run(&[
        "solve",
        "--problem",
        "mtx",
        "--files",
        &a_path,
        &b_path,
        "--method",
        "dd",
        "--threshold",
        "1e-30",
        "--out",
        dir.path().join("x.mtx").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn unreadable_input_exits_with_io_code() {
    let out = run(&[
        "solve",
        "--problem",
        "mtx",
        "--files",
        "/nonexistent/a.mtx",
        "--method",
        "dd",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bench_csv_and_plot_are_consistent() {
    let dir = tempfile::tempdir().unwrap();
    let csv_path = dir.path().join("bench.csv");
    let plot_path = dir.path().join("bench.dat");
    let out = run(&[
        "bench",
        "--sizes",
        "6,7",
        "--rhs",
        "2",
        "--seed",
        "5",
        "--out",
        csv_path.to_str().unwrap(),
        "--plot-data",
        plot_path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(&csv_path).unwrap();
    let plot = std::fs::read_to_string(&plot_path).unwrap();
    let csv_lines: Vec<&str> = csv.lines().collect();
    assert_eq!(csv_lines[0], CSV_HEADER);
    // 2 sizes × 2 methods × 2 phases + 2 ratio rows.
    assert_eq!(csv_lines.len(), 11);
    assert_eq!(plot.lines().count(), csv_lines.len());
    assert!(csv.contains(",both,mem_ratio,"));
    for (c, p) in csv_lines.iter().zip(plot.lines()) {
        assert_eq!(c.split(',').count(), 13);
        assert_eq!(p.trim_start_matches("# ").split_whitespace().count(), 13);
    }
}

#[test]
fn bench_runs_are_byte_identical_modulo_wall_times() {
    let dir = tempfile::tempdir().unwrap();
    let mut csvs = Vec::new();
    for run_idx in 0..2 {
        let path = dir.path().join(format!("b{run_idx}.csv"));
        let out = run(&[
            "bench",
            "--sizes",
            "6,7",
            "--rhs",
            "2",
            "--seed",
            "5",
            "--threads",
            "1",
            "--out",
            path.to_str().unwrap(),
        ]);
        assert!(out.status.success());
        csvs.push(std::fs::read_to_string(&path).unwrap());
    }
    assert_ne!(csvs[0], csvs[1], "wall times should differ");
    assert_eq!(strip_wall_columns(&csvs[0]), strip_wall_columns(&csvs[1]));
}

#[test]
fn bench_survives_a_failing_sweep_point() {
    // Size 25 cannot host the 10×20 source array; the point must fail
    // gracefully while the rest of the sweep completes.
    let out = run(&["bench", "--problem", "array", "--sizes", "25,4", "--method", "dd"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let ok = text.lines().filter(|l| l.ends_with(",ok")).count();
    let err = text.lines().filter(|l| l.contains(",error:")).count();
    assert_eq!(ok, 2, "large point factor+solve rows:\n{text}");
    assert_eq!(err, 1, "small point aborted:\n{text}");
}

#[test]
fn env_var_supplies_thread_default() {
    let out = bin()
        .args(["bench", "--sizes", "6", "--rhs", "2"])
        .env("DD_SOLVER_THREADS", "2")
        .output()
        .unwrap();
    assert!(out.status.success());
}
