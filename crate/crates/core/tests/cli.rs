use std::path::Path;
use std::process::{Command, Output};

use tseng_qvi::certify::Certificate;
use tseng_qvi::io::CsvTable;
use tseng_qvi::solvers::IterationTrace;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tseng-qvi"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

const L2: &str = r#"{"family":"l2_example","n":50,"alpha":2}"#;
const HALFLINE: &str =
    r#"{"family":"single_set_vi","operator":{"scale":1,"offset":[0]},"base":{"box":{"lo":[1],"hi":[null]}}}"#;

#[test]
fn certify_example_constants() {
    let o = run(&["certify", "--L", "3", "--rho", "1", "--l", "0.1", "--lambda", "0.1"]);
    assert_eq!(o.status.code(), Some(0));
    let cert: Certificate = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((cert.theta - 1.043398).abs() < 1e-6);
    assert!(!cert.flags.discrete_ok);

    let o = run(&["certify", "--L", "1", "--rho", "1", "--l", "0", "--lambda", "1"]);
    let cert: Certificate = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(cert.theta, 0.0);
}

#[test]
fn certify_validation_exit_code() {
    let o = run(&["certify", "--L", "1", "--rho", "2", "--l", "0", "--lambda", "0.1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("rho exceeds L"));
    let o = run(&["certify", "--L", "1"]);
    assert_eq!(o.status.code(), Some(1));
    let o = run(&["solve", "--problem", L2, "--lambda", "-1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("lambda"));
}

#[test]
fn certify_best_lambda() {
    let o = run(&[
        "certify",
        "--L",
        "3",
        "--rho",
        "1",
        "--l",
        "0.1",
        "--best-lambda-grid",
        "101",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["lambda"].as_f64().unwrap() > 0.0);
}

#[test]
fn solve_csv_and_json() {
    let o = run(&["solve", "--problem", L2, "--lambda", "0.1", "--max-iter", "300"]);
    assert_eq!(o.status.code(), Some(0));
    let t = CsvTable::parse(&stdout(&o)).unwrap();
    assert_eq!(t.header, ["k", "residual", "dist_to_solution"]);
    assert_eq!(t.meta_value("status"), Some("converged"));
    assert_eq!(t.meta_value("warnings"), Some("discrete_condition_unmet"));
    let res = t.column_f64("residual").unwrap();
    assert!(res.last().unwrap().unwrap() <= 1e-10);

    let o = run(&["solve", "--problem", L2, "--lambda", "0.1", "--format", "json"]);
    let trace: IterationTrace = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(trace.records.len(), t.rows.len());
}

#[test]
fn solve_numeric_failure_exit_code() {
    // declared monotone but F(x) = −x: iterates blow up
    let bad = r#"{"family":"single_set_vi","operator":{"matrix":[[-1]],"offset":[0]},"base":{"box":{"lo":[null],"hi":[null]}}}"#;
    let o = run(&["solve", "--problem", bad, "--lambda", "1"]);
    // rejected before running: the matrix is not strongly monotone
    assert_eq!(o.status.code(), Some(1));

    let huge = r#"{"family":"single_set_vi","operator":{"scale":1e300,"offset":[0]},"base":{"box":{"lo":[null],"hi":[null]}}}"#;
    let o = run(&["solve", "--problem", huge, "--lambda", "1e10", "--x0", "1e10"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn compare_halfline_dist_column() {
    let o = run(&[
        "compare",
        "--problem",
        HALFLINE,
        "--lambda",
        "0.1",
        "--variants",
        "tseng",
        "--x0",
        "2",
        "--max-iter",
        "5",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let t = CsvTable::parse(&stdout(&o)).unwrap();
    assert_eq!(t.header, ["variant", "lambda", "k", "residual", "dist_to_solution"]);
    let d: Vec<f64> = t
        .column_f64("dist_to_solution")
        .unwrap()
        .into_iter()
        .map(Option::unwrap)
        .collect();
    let want = [1.0, 0.82, 0.6562, 0.507142, 0.37149922, 0.2480642902];
    assert_eq!(d.len(), want.len());
    for (a, b) in d.iter().zip(want) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn compare_l2_all_variants() {
    let o = run(&["compare", "--problem", L2, "--lambda", "0.1", "--max-iter", "300"]);
    let t = CsvTable::parse(&stdout(&o)).unwrap();
    for v in ["tseng", "gradient_projection", "extragradient"] {
        let key = format!("status:{v}@1.0000000000000001e-1");
        assert_eq!(t.meta_value(&key), Some("converged"), "{key}");
    }
    let o = run(&[
        "compare",
        "--problem",
        L2,
        "--lambda",
        "0.1",
        "--x0",
        &vec!["0"; 50].join(","),
    ]);
    let t = CsvTable::parse(&stdout(&o)).unwrap();
    assert_eq!(t.rows.len(), 3);
    assert!(t.column_str("k").unwrap().iter().all(|k| *k == "0"));
}

#[test]
fn flow_csv() {
    let o = run(&[
        "flow",
        "--problem",
        HALFLINE,
        "--lambda",
        "0.1",
        "--h",
        "0.5",
        "--t-end",
        "0.5",
        "--scheme",
        "euler",
        "--x0",
        "2",
        "--coords",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let t = CsvTable::parse(&stdout(&o)).unwrap();
    assert_eq!(t.header, ["t", "V", "envelope", "x0"]);
    let x = t.column_f64("x0").unwrap();
    assert!((x[1].unwrap() - 1.91).abs() < 1e-15);
    assert!(t
        .meta_value("envelope_check")
        .unwrap()
        .starts_with("condition infeasible"));
    let o = run(&[
        "flow",
        "--problem",
        HALFLINE,
        "--lambda",
        "0.1",
        "--h",
        "0.5",
        "--t-end",
        "1",
        "--alpha-table",
        "0:1,0.5:2",
    ]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn sweep_empty_grid_rejected() {
    let o = run(&["sweep", "--L", "1", "--rho", "1", "--lambda-grid", "", "--l-grid", "0"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn sweep_with_solves() {
    let o = run(&[
        "sweep",
        "--problem",
        L2,
        "--lambda-grid",
        "0.05,0.1,0.2",
        "--solve",
        "--max-iter",
        "500",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let t = CsvTable::parse(&stdout(&o)).unwrap();
    let rates = t.column_f64("empirical_rate").unwrap();
    assert!(rates.iter().all(|r| r.unwrap() < 1.0));
    assert_eq!(t.column_str("status").unwrap(), ["converged"; 3]);
}

fn files_equal(a: &Path, b: &Path) -> bool {
    std::fs::read(a).unwrap() == std::fs::read(b).unwrap()
}

#[test]
fn identical_config_gives_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    for (i, args) in [
        vec!["solve", "--problem", L2, "--lambda", "0.1"],
        vec!["compare", "--problem", L2, "--lambda", "0.1,0.2"],
        vec![
            "sweep",
            "--L",
            "3",
            "--rho",
            "1",
            "--lambda-grid",
            "0.01:2:50",
            "--l-grid",
            "0,0.05,0.1",
        ],
        vec![
            "flow",
            "--problem",
            L2,
            "--lambda",
            "0.1",
            "--h",
            "0.1",
            "--t-end",
            "2",
            "--coords",
        ],
        vec![
            "certify", "--L", "3", "--rho", "1", "--l", "0.1", "--lambda", "0.1", "--beta", "0.05",
        ],
    ]
    .into_iter()
    .enumerate()
    {
        let a = dir.path().join(format!("{i}a"));
        let b = dir.path().join(format!("{i}b"));
        for out in [&a, &b] {
            let mut full = args.clone();
            full.extend(["--out", out.to_str().unwrap()]);
            assert_eq!(run(&full).status.code(), Some(0), "{args:?}");
        }
        assert!(files_equal(&a, &b), "{args:?}");
        let text = std::fs::read_to_string(&a).unwrap();
        assert!(!text.contains('\r'));
        if args[0] == "certify" {
            serde_json::from_str::<Certificate>(&text).unwrap();
        } else {
            CsvTable::parse(&text).unwrap();
        }
    }
}

#[test]
fn config_file_drives_commands() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("trace.csv");
    let cfg = dir.path().join("run.json");
    let problem = dir.path().join("problem.json");
    std::fs::write(&problem, L2).unwrap();
    std::fs::write(
        &cfg,
        serde_json::json!({
            "command": "solve",
            "problem": problem.to_str().unwrap(),
            "lambda": 0.1,
            "tol": 1e-10,
            "out": out.to_str().unwrap(),
        })
        .to_string(),
    )
    .unwrap();
    let o = run(&["--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let via_config = std::fs::read_to_string(&out).unwrap();
    let direct = run(&["solve", "--problem", problem.to_str().unwrap(), "--lambda", "0.1"]);
    assert_eq!(via_config, stdout(&direct));

    std::fs::write(
        &cfg,
        serde_json::json!({"command": "sweep", "L": 1, "rho": 1, "lambda_grid": [0.5, 1.0], "l_grid": "0", "problem": {"family": "l2_example", "n": 3}})
            .to_string(),
    )
    .unwrap();
    let o = run(&["--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));

    std::fs::write(&cfg, r#"{"command":"certify","L":1}"#).unwrap();
    assert_eq!(run(&["--config", cfg.to_str().unwrap()]).status.code(), Some(1));
}
