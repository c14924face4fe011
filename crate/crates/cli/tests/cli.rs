use std::fs;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::tempdir;

fn abundanza(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_abundanza"))
        .args(args)
        .env_remove("ABUNDANZA_MAX_PRECISION")
        .output()
        .expect("spawn abundanza")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn json(o: &Output) -> Value {
    assert!(o.status.success(), "stderr: {}", stderr(o));
    serde_json::from_slice(&o.stdout).unwrap()
}

#[test]
fn ca_list_csv() {
    let o = abundanza(&["ca", "list", "--count", "5"]);
    assert!(o.status.success());
    let out = stdout(&o);
    let mut lines = out.lines();
    assert!(lines.next().unwrap().starts_with("index,n,factorization,"));
    let ns: Vec<&str> = lines.map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(ns, ["2", "6", "12", "60", "120"]);
}

#[test]
fn ca_list_json_uses_strings_and_factor_pairs() {
    let v = json(&abundanza(&["--format", "json", "ca", "list", "--count", "6"]));
    let rows = v.as_array().unwrap();
    assert_eq!(rows.len(), 6);
    assert_eq!(rows[5]["n"], "360");
    assert_eq!(rows[5]["factorization"], serde_json::json!([[2, 3], [3, 2], [5, 1]]));
    assert_eq!(rows[5]["quotient"], serde_json::json!([[3, 1]]));
    assert!(rows[0]["t"].is_null());
    assert!(rows[5]["t"]["midpoint"].is_string());
}

#[test]
fn sa_list() {
    let o = abundanza(&["sa", "list", "--limit", "60"]);
    assert!(o.status.success());
    let ns: Vec<String> = stdout(&o)
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().to_string())
        .collect();
    assert_eq!(ns, ["1", "2", "4", "6", "12", "24", "36", "48", "60"]);
}

#[test]
fn ha_example_json() {
    let v = json(&abundanza(&["--format", "json", "ha", "compute", "--lo", "2", "--hi", "120"]));
    assert_eq!(v["ha_numbers"], serde_json::json!(["2", "6", "12", "60", "120"]));
    assert_eq!(v["envelope_minimizer"], "120");
    assert_eq!(v["domain"], serde_json::json!(["2", "120"]));
}

#[test]
fn ha_fractional_weight_starts_at_three() {
    let o = abundanza(&["ha", "compute", "--lo", "2", "--hi", "120", "--s", "1/2"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let o = abundanza(&["ha", "compute", "--lo", "3", "--hi", "120", "--s", "1/2"]);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn figure_to_separate_file() {
    let dir = tempdir().unwrap();
    let fig = dir.path().join("fig.csv");
    let o = abundanza(&[
        "ha",
        "compute",
        "--lo",
        "2",
        "--hi",
        "120",
        "--figure",
        "--figure-output",
        fig.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let text = fs::read_to_string(&fig).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows[0], "n,R_s_midpoint,R_s_radius,is_vertex,envelope_midpoint");
    assert_eq!(rows.len(), 120);
    let vertices: Vec<&str> = rows[1..]
        .iter()
        .filter(|r| r.split(',').nth(3) == Some("1"))
        .map(|r| r.split(',').next().unwrap())
        .collect();
    assert_eq!(vertices, ["2", "6", "12", "60", "120"]);
    // The report itself carries no figure table.
    assert_eq!(stdout(&o).lines().count(), 6);
}

#[test]
fn envelope_on_parabola_keeps_every_point() {
    let dir = tempdir().unwrap();
    let input = dir.path().join("p.csv");
    let body: String = (-5i64..=5).map(|x| format!("{x},{}\n", x * x)).collect();
    fs::write(&input, format!("x,y_midpoint\n{body}")).unwrap();
    let o = abundanza(&["envelope", "--input", input.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().count(), 12);

    let v = json(&abundanza(&["--format", "json", "envelope", "--input", input.to_str().unwrap()]));
    assert_eq!(v["vertices"].as_array().unwrap().len(), 11);
}

#[test]
fn envelope_reports_bad_line() {
    let dir = tempdir().unwrap();
    let input = dir.path().join("bad.csv");
    fs::write(&input, "x,y\n1,1\n2,abc\n").unwrap();
    let o = abundanza(&["envelope", "--input", input.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
}

#[test]
fn ambiguous_envelope_is_a_precision_error() {
    let dir = tempdir().unwrap();
    let input = dir.path().join("blur.csv");
    fs::write(&input, "0,0,0.1\n1,0,0.1\n2,0,0.1\n").unwrap();
    let o = abundanza(&["envelope", "--input", input.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn budget_exceeded_exits_4() {
    let o = abundanza(&["--sieve-budget", "1000", "verify", "robin", "--lo", "3", "--hi", "5000"]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
}

#[test]
fn bad_precision_is_rejected() {
    let o = abundanza(&["--precision", "8", "ca", "list", "--count", "3"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn max_precision_from_environment() {
    let o = Command::new(env!("CARGO_BIN_EXE_abundanza"))
        .args(["ca", "list", "--count", "3"])
        .env("ABUNDANZA_MAX_PRECISION", "64")
        .output()
        .unwrap();
    // The ladder cannot end below its 128-bit start.
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let o = Command::new(env!("CARGO_BIN_EXE_abundanza"))
        .args(["ca", "list", "--count", "3"])
        .env("ABUNDANZA_MAX_PRECISION", "256")
        .output()
        .unwrap();
    assert!(o.status.success());
}

#[test]
fn verify_robin_expected_violations_exit_zero() {
    let v = json(&abundanza(&["--format", "json", "verify", "robin", "--lo", "3", "--hi", "200"]));
    assert_eq!(v["violations"].as_array().unwrap().len(), 20);
    assert_eq!(v["unexpected_violations"], serde_json::json!([]));
    assert_eq!(v["records"][0]["verdicts"]["robin"], "negative");
}

#[test]
fn verify_unexpected_violation_exits_one() {
    let o = abundanza(&["verify", "robin-lower", "--lo", "3", "--hi", "100"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).lines().nth(1).unwrap().starts_with("12,28,"));
}

#[test]
fn verify_resumes_from_frontier() {
    let dir = tempdir().unwrap();
    let frontier = dir.path().join("frontier");
    let full = dir.path().join("full.csv");
    let split = dir.path().join("split.csv");
    let f = frontier.to_str().unwrap();
    let args = |hi: &str, out: &std::path::Path| {
        abundanza(&[
            "-o",
            out.to_str().unwrap(),
            "verify",
            "robin",
            "--lo",
            "3",
            "--hi",
            hi,
            "--all-records",
            "--frontier",
            f,
        ])
    };
    assert!(args("1000", &split).status.success());
    assert_eq!(fs::read_to_string(&frontier).unwrap().trim(), "last_certified=1000");
    assert!(args("6000", &split).status.success());
    assert_eq!(fs::read_to_string(&frontier).unwrap().trim(), "last_certified=6000");
    fs::remove_file(&frontier).unwrap();
    assert!(args("6000", &full).status.success());
    assert_eq!(fs::read(&split).unwrap(), fs::read(&full).unwrap());
    // Nothing left to do.
    let o = args("6000", &split);
    assert!(o.status.success());
    assert!(stderr(&o).contains("already certified"));
}

#[test]
fn output_is_deterministic_across_thread_counts() {
    let run = |threads: &str| {
        let o = abundanza(&["--threads", threads, "ha", "compute", "--lo", "2", "--hi", "300000"]);
        assert!(o.status.success());
        o.stdout
    };
    let a = run("1");
    assert_eq!(a, run("1"));
    assert_eq!(a, run("3"));
}
