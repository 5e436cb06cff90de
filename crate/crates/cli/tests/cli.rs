use std::path::Path;
use std::process::{Command, Output};

fn ddmec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ddmec"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

/// Parses the `u (...): [a, b, ...]` line of `solve`.
fn solved_input(text: &str) -> Vec<f64> {
    let line = text.lines().find(|l| l.starts_with("u ")).expect("input line");
    let inner = &line[line.find('[').unwrap() + 1..line.rfind(']').unwrap()];
    inner.split(", ").map(|v| v.parse().unwrap()).collect()
}

fn scalar_files(dir: &Path) -> (String, String) {
    let (data, sys) = (path(dir, "scalar.json"), path(dir, "scalar_sys.json"));
    let o = ddmec(&["demo-scalar", "--a", "0.5", "--out", &data, "--sys-out", &sys]);
    assert!(o.status.success());
    (data, sys)
}

#[test]
fn generate_is_deterministic_and_reports_rank() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (path(dir.path(), "a.json"), path(dir.path(), "b.json"));
    let flags = [
        "generate",
        "--n",
        "20",
        "--m",
        "2",
        "--horizons",
        "3,4,5,6",
        "--count",
        "40",
        "--seed",
        "7",
        "--out",
    ];
    let first = ddmec(&[&flags[..], &[a.as_str()]].concat());
    let second = ddmec(&[&flags[..], &[b.as_str()]].concat());
    assert!(first.status.success() && second.status.success());
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let report = stdout(&first);
    assert_eq!(
        report
            .lines()
            .filter(|l| l.starts_with("set ") && l.ends_with(", ok"))
            .count(),
        4
    );
}

#[test]
fn zero_count_is_a_flag_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(dir.path(), "d.json");
    let o = ddmec(&[
        "generate",
        "--n",
        "3",
        "--m",
        "1",
        "--horizons",
        "2",
        "--count",
        "0",
        "--seed",
        "1",
        "--out",
        &out,
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--count"));
}

#[test]
fn malformed_flags_exit_with_two() {
    assert_eq!(ddmec(&["solve", "--T", "four"]).status.code(), Some(2));
    assert_eq!(
        ddmec(&["fig1", "--trials", "0", "--out", "x.csv"]).status.code(),
        Some(2)
    );
}

#[test]
fn scalar_example_solves_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let (data, sys) = scalar_files(dir.path());
    let o = ddmec(&[
        "solve", "--data", &data, "--T", "4", "--x0", "1", "--xf", "0", "--method", "thm3", "--sys", &sys,
    ]);
    assert!(o.status.success());
    let text = stdout(&o);
    let u = solved_input(&text);
    let expected = [1.0, 0.5, 0.25, 0.125].map(|c| -c * 4.0 / 85.0);
    for (a, b) in u.iter().zip(expected) {
        assert!((a - b).abs() < 1e-12, "{u:?}");
    }
    let err: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("final error: "))
        .unwrap()
        .parse()
        .unwrap();
    assert!(err <= 1e-10);
}

#[test]
fn both_formulas_agree_from_the_command_line() {
    let dir = tempfile::tempdir().unwrap();
    let data = path(dir.path(), "d.json");
    let o = ddmec(&[
        "generate",
        "--n",
        "4",
        "--m",
        "2",
        "--horizons",
        "3,4",
        "--count",
        "20",
        "--seed",
        "5",
        "--out",
        &data,
    ]);
    assert!(o.status.success());
    let run = |method: &str| {
        let o = ddmec(&[
            "solve",
            "--data",
            &data,
            "--T",
            "7",
            "--x0",
            "1,-1,0.5,2",
            "--xf",
            "0,1,-2,0.25",
            "--method",
            method,
            "--epsilon",
            "1e-8",
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        solved_input(&stdout(&o))
    };
    let (u2, u3) = (run("thm2"), run("thm3"));
    assert_eq!(u2.len(), 14);
    assert!(u2.iter().zip(&u3).all(|(a, b)| (a - b).abs() <= 1e-6));
}

#[test]
fn uncomposable_horizon_exits_with_four() {
    let dir = tempfile::tempdir().unwrap();
    let (data, _) = scalar_files(dir.path());
    let o = ddmec(&[
        "solve", "--data", &data, "--T", "5", "--x0", "1", "--xf", "0", "--method", "thm3",
    ]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn rank_deficient_data_exit_with_five() {
    let dir = tempfile::tempdir().unwrap();
    let data = path(dir.path(), "d.json");
    // 6 experiments cannot span the 3 + 2*2 = 7 rows of [X0; U].
    let o = ddmec(&[
        "generate",
        "--n",
        "3",
        "--m",
        "2",
        "--horizons",
        "2",
        "--count",
        "6",
        "--seed",
        "1",
        "--out",
        &data,
    ]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("RANK DEFICIENT"));
    let o = ddmec(&[
        "solve", "--data", &data, "--T", "2", "--x0", "1,0,0", "--xf", "0,0,1", "--method", "thm2",
    ]);
    assert_eq!(o.status.code(), Some(5));
}

#[test]
fn missing_or_malformed_files_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let missing = path(dir.path(), "nope.json");
    let o = ddmec(&[
        "solve", "--data", &missing, "--T", "2", "--x0", "1", "--xf", "0", "--method", "thm3",
    ]);
    assert_eq!(o.status.code(), Some(3));
    let bad = path(dir.path(), "bad.json");
    std::fs::write(&bad, "{\"n\": 1}").unwrap();
    let o = ddmec(&[
        "solve", "--data", &bad, "--T", "2", "--x0", "1", "--xf", "0", "--method", "thm3",
    ]);
    assert_eq!(o.status.code(), Some(3));
    let o = ddmec(&[
        "fig1",
        "--trials",
        "1",
        "--n-grid",
        "4",
        "--out",
        &path(dir.path(), "no/such/dir.csv"),
    ]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn fig1_csv_shape_does_not_depend_on_trials() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (path(dir.path(), "a.csv"), path(dir.path(), "b.csv"));
    for (trials, out) in [("2", &a), ("3", &b)] {
        let o = ddmec(&["fig1", "--trials", trials, "--n-grid", "10,34", "--out", out]);
        assert!(o.status.success());
    }
    let (ta, tb) = (
        std::fs::read_to_string(&a).unwrap(),
        std::fs::read_to_string(&b).unwrap(),
    );
    assert!(!ta.contains('\r'));
    assert_eq!(ta.lines().next(), Some("N,method,mean_input_norm,mean_final_err"));
    let shape = |t: &str| {
        t.lines()
            .map(|l| l.split(',').take(2).collect::<Vec<_>>().join(","))
            .collect::<Vec<_>>()
    };
    assert_eq!(shape(&ta), shape(&tb));
    assert_eq!(ta.lines().count(), 1 + 2 * 3);
}

#[test]
fn fig2_zero_variance_columns_coincide() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(dir.path(), "f2.csv");
    let o = ddmec(&[
        "fig2",
        "--trials",
        "4",
        "--variance",
        "0",
        "--n-grid",
        "50,200",
        "--out",
        &out,
    ]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(&out).unwrap();
    let rows: Vec<Vec<String>> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .collect();
    assert_eq!(rows.len(), 8);
    let values = |n: &str, method: &str| -> Vec<f64> {
        let row = rows.iter().find(|r| r[0] == n && r[1] == method).unwrap();
        row[2..].iter().map(|v| v.parse().unwrap()).collect()
    };
    for n in ["50", "200"] {
        for (plain, corrected) in [("thm2", "thm2_corrected"), ("thm3", "thm3_corrected")] {
            for (a, b) in values(n, plain).iter().zip(values(n, corrected)) {
                assert!((a - b).abs() <= 1e-10, "{n} {plain}: {a} vs {b}");
            }
        }
    }
}

#[test]
fn sweeps_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (path(dir.path(), "a.csv"), path(dir.path(), "b.csv"));
    for out in [&a, &b] {
        assert!(
            ddmec(&["fig2", "--trials", "3", "--n-grid", "60", "--seed", "9", "--out", out])
                .status
                .success()
        );
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}
