use std::process::{Command, Output};

fn steering(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_steering")).args(args).env_remove("STEERING_SOLVER").output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn reference_epr_prints_tsirelson_value() {
    let o = steering(&["reference", "epr"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("trS = 2.828427"));
    assert!(text.contains("appendix_d = 2.000000"));
}

#[test]
fn reference_ghz2_and_json_dump() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ghz2.json");
    let o = steering(&["reference", "ghz2", "--out", path.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("trB2 = 4.000000"));
    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert!((doc["functionals"]["trB2"].as_f64().unwrap() - 4.0).abs() < 1e-9);
    assert_eq!(doc["assemblage"]["elements"].as_array().unwrap().len(), 4);
}

#[test]
fn reference_npair_reduced_state_is_flat() {
    let o = steering(&["reference", "npair", "--n", "2"]);
    assert!(o.status.success());
    let json_start = stdout(&o).find('{').unwrap();
    let doc: serde_json::Value = serde_json::from_str(&stdout(&o)[json_start..]).unwrap();
    let rho = doc["reduced_state"].as_array().unwrap();
    assert_eq!(rho.len(), 4);
    for (i, row) in rho.iter().enumerate() {
        for (j, z) in row.as_array().unwrap().iter().enumerate() {
            let expected = if i == j { 0.25 } else { 0.0 };
            assert!((z[0].as_f64().unwrap() - expected).abs() < 1e-12);
            assert!(z[1].as_f64().unwrap().abs() < 1e-12);
        }
    }
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(steering(&["reference", "bell"]).status.code(), Some(2));
    assert_eq!(steering(&["reference", "npair", "--n", "9"]).status.code(), Some(2));
    assert_eq!(steering(&["verify", "lemmas", "--samples", "0"]).status.code(), Some(2));
    assert_eq!(steering(&["sweep", "epr", "--eta-max", "5"]).status.code(), Some(2));
    assert_eq!(steering(&["sweep", "epr", "--tol", "0"]).status.code(), Some(2));
    assert_eq!(steering(&["sweep", "epr", "--steps", "0"]).status.code(), Some(2));
    let o = Command::new(env!("CARGO_BIN_EXE_steering")).args(["sweep", "epr"]).env("STEERING_SOLVER", "nope").output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn verify_all_fast_path() {
    let o = steering(&["verify", "all", "--samples", "1"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let lines: Vec<serde_json::Value> = stdout(&o).lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert!(lines.iter().all(|v| v["pass"].as_bool() == Some(true)));
    assert!(lines.iter().any(|v| v["name"] == "optimality_distance eps=0.05"));
}

#[test]
fn verify_lemmas_with_seed() {
    let o = steering(&["verify", "lemmas", "--samples", "50", "--seed", "7"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().count(), 5);
}

#[test]
fn sweep_epr_rows_and_reproducibility() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for (p, jobs) in [(&a, "1"), (&b, "3")] {
        let o = steering(&["sweep", "epr", "--eta-max", "0.4", "--steps", "21", "--jobs", jobs, "--reproducible", "--out", p.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0));
        assert!(String::from_utf8_lossy(&o.stderr).contains("fitted line"));
    }
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text, std::fs::read_to_string(&b).unwrap());
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "eta,lower_bound,distance_bound,status,solve_seconds");
    assert_eq!(lines.len(), 22);
    let first: Vec<&str> = lines[1].split(',').collect();
    assert!(first[1].parse::<f64>().unwrap() >= 0.999999);
}

#[test]
fn sweep_json_format() {
    let o = steering(&["sweep", "ghz2", "--eta-max", "0.5", "--steps", "3", "--format", "json"]);
    assert_eq!(o.status.code(), Some(0));
    let rows: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let rows = rows.as_array().unwrap();
    assert_eq!(rows.len(), 3);
    assert!((rows[0]["lower_bound"].as_f64().unwrap() - 1.0).abs() < 1e-5);
}

#[test]
fn dump_writes_sdpa() {
    let o = steering(&["dump", "epr", "--eta", "0.1", "--real"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let body: Vec<&str> = text.lines().filter(|l| !l.starts_with('*')).collect();
    assert_eq!(body[1], "2");
    assert_eq!(body[2], "8 1");
}
