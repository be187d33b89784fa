use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn qmf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qmf")).args(args).env_remove("QMF_THREADS").output().expect("qmf runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn read_csv(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).expect("csv file");
    r.records().map(|rec| rec.unwrap().iter().map(str::to_owned).collect()).collect()
}

#[test]
fn series_emits_raw_and_component_records() {
    let o = qmf(&["series", "--id", "1", "--order", "10"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["id"], 1);
    assert_eq!(v["raw"]["order"], 10);
    assert!(["F", "G", "H"].contains(&v["component"]["family"].as_str().unwrap()));
    assert!(v["component"]["j"].as_u64().unwrap() < 4);
    assert!(v["raw"]["coeffs"].is_array());
}

#[test]
fn unknown_series_id_is_a_usage_error() {
    assert_eq!(code(&qmf(&["series", "--id", "13"])), 2);
    assert_eq!(code(&qmf(&["series", "--id", "0"])), 2);
    assert_eq!(code(&qmf(&["no-such-command"])), 2);
}

#[test]
fn tables_reproduce_every_reference_cell() {
    let o = qmf(&["tables", "--output", "json"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let cells: Vec<Value> = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(cells.len(), 66);
    for c in &cells {
        let d = c["difference"].as_f64().unwrap();
        assert!(d <= c["tolerance"].as_f64().unwrap(), "{c}");
        // round trip: difference is the distance between the two pairs
        let (a, b) = (&c["computed"], &c["published"]);
        let dist = (a[0].as_f64().unwrap() - b[0].as_f64().unwrap()).hypot(a[1].as_f64().unwrap() - b[1].as_f64().unwrap());
        assert!((dist - d).abs() <= 1e-12 * dist.max(1.0));
    }
}

#[test]
fn quantum_writes_values_and_transformation_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("g.csv");
    let o = qmf(&["quantum", "--family", "G", "--denominator-max", "12", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));

    // Farey points p/q ∈ (−1, 1), q even ≤ 12, in lowest terms
    let mut n = 0;
    for q in (2..=12i64).step_by(2) {
        n += (-(q - 1)..q).filter(|p| num_integer::gcd(*p, q) == 1).count();
    }
    let rows = read_csv(&out);
    assert_eq!(rows.len(), 4 * n);
    let at = rows.iter().find(|r| r[0] == "11" && r[1] == "12" && r[2] == "0").expect("11/12 row");
    let (re, im): (f64, f64) = (at[3].parse().unwrap(), at[4].parse().unwrap());
    assert!((re + 0.8418504490893569688).abs() < 1e-10 && (im + 1.532692070451105313).abs() < 1e-10, "{re} {im}");

    let transform = read_csv(&dir.path().join("g_transform.csv"));
    assert_eq!(transform.len(), 4 * (n - 1), "−1/2 is excluded");
    for r in &transform {
        let v: Vec<f64> = r[3..].iter().map(|s| s.parse().unwrap()).collect();
        assert!((v[0] - v[2]).hypot(v[1] - v[3]) < 1e-6, "{r:?}");
    }
}

#[test]
fn quantum_argument_errors() {
    assert_eq!(code(&qmf(&["quantum", "--family", "F", "--denominator-max", "8"])), 2, "missing --out");
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.csv");
    assert_eq!(code(&qmf(&["quantum", "--family", "F", "--denominator-max", "201", "--out", out.to_str().unwrap()])), 2);
    assert_eq!(code(&qmf(&["quantum", "--family", "K", "--out", out.to_str().unwrap()])), 2);
}

#[test]
fn verify_multipliers_passes() {
    let o = qmf(&["verify", "--suite", "multipliers"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let records: Vec<Value> = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(records.len(), 6);
    assert!(records.iter().all(|r| r["status"] == "pass"));
}

#[test]
fn eval_cusp_and_error_codes() {
    let o = qmf(&["eval", "--family", "G", "--j", "0", "--x", "11/12", "--output", "json"]);
    assert_eq!(code(&o), 0);
    let v: Vec<Value> = serde_json::from_slice(&o.stdout).unwrap();
    assert!((v[0]["gamma"][0].as_f64().unwrap() - 0.10974649141040139).abs() < 1e-15);
    assert_eq!(code(&qmf(&["eval", "--family", "G", "--x", "1/3"])), 2, "odd denominator");
    assert_eq!(code(&qmf(&["eval", "--family", "G", "--tau", "0.1", "-0.5"])), 2, "lower half-plane");
}

#[test]
fn output_is_independent_of_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let run = |threads: &str, via_env: bool, name: &str| {
        let out = dir.path().join(name);
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_qmf"));
        cmd.args(["quantum", "--family", "H", "--denominator-max", "10", "--out", out.to_str().unwrap()]);
        if via_env {
            cmd.env("QMF_THREADS", threads);
        } else {
            cmd.args(["--threads", threads]).env_remove("QMF_THREADS");
        }
        assert!(cmd.status().unwrap().success());
        (std::fs::read(&out).unwrap(), std::fs::read(dir.path().join(name.replace(".csv", "_transform.csv"))).unwrap())
    };
    let one = run("1", false, "a.csv");
    let four = run("4", false, "b.csv");
    let env = run("3", true, "c.csv");
    assert_eq!(one, four);
    assert_eq!(one, env);
}
