use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dsp-policy"))
}

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn listing1() -> String {
    fixture("data-amount-deletion-anonymization.ttl").display().to_string()
}

#[test]
fn validate_listing_one() {
    let o = run(&["validate", &listing1()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).trim(), "valid");
}

#[test]
fn validate_reports_findings() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.ttl");
    std::fs::write(
        &path,
        "@prefix odrl: <http://www.w3.org/ns/odrl/2/> .\n\
         <http://example.com/p> a odrl:Agreement ; odrl:permission [ odrl:action odrl:read ] .\n",
    )
    .unwrap();
    let o = run(&["validate", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    for line in stdout(&o).lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(v["policy"], "http://example.com/p");
    }
}

#[test]
fn parse_and_io_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.ttl");
    std::fs::write(&path, "<http://example.com/p> a [ .").unwrap();
    let o = run(&["validate", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stdout(&o).is_empty());
    assert!(!o.stderr.is_empty());
    assert_eq!(run(&["canon", "/nonexistent/file.ttl"]).status.code(), Some(3));
}

#[test]
fn usage_errors_exit_2() {
    let o = run(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
    assert_eq!(run(&["validate"]).status.code(), Some(2));
    assert_eq!(run(&["patterns", "new", "no-such-pattern"]).status.code(), Some(2));
}

#[test]
fn canon_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let first = stdout(&run(&["canon", &listing1()]));
    let path = dir.path().join("c.ttl");
    std::fs::write(&path, &first).unwrap();
    let second = stdout(&run(&["canon", path.to_str().unwrap()]));
    assert_eq!(first, second);
    assert_eq!(first, std::fs::read_to_string(fixture("data-amount-deletion-anonymization.canonical.ttl")).unwrap());
}

#[test]
fn patterns_list_has_22_lines() {
    let o = run(&["patterns", "list"]);
    assert_eq!(o.status.code(), Some(0));
    let lines: Vec<_> = stdout(&o).lines().map(str::to_owned).collect();
    assert_eq!(lines.len(), 22);
    let first: serde_json::Value = serde_json::from_str(&lines[0]).unwrap();
    assert_eq!(first["id"], "allow-access");
    let md = stdout(&run(&["patterns", "markdown"]));
    assert_eq!(md.lines().count(), 24);
}

#[test]
fn patterns_new_then_validate_and_classify() {
    let dir = tempfile::tempdir().unwrap();
    let params = dir.path().join("p.json");
    std::fs::write(
        &params,
        r#"{"target": "http://example.com/a", "assigner": "http://example.com/p",
            "assignee": "http://example.com/c", "action": "odrl:read", "max": 5}"#,
    )
    .unwrap();
    let out = dir.path().join("p.ttl");
    let o = run(&["patterns", "new", "access-count", "--params", params.to_str().unwrap(), "-o", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(run(&["validate", out.to_str().unwrap()]).status.code(), Some(0));
    let c = stdout(&run(&["classify", out.to_str().unwrap()]));
    let v: serde_json::Value = serde_json::from_str(c.trim()).unwrap();
    assert!(v["patterns"].as_array().unwrap().iter().any(|p| p == "access-count"));

    std::fs::write(
        &params,
        r#"{"target": "http://example.com/a", "assigner": "http://example.com/p", "max": "many"}"#,
    )
    .unwrap();
    let o = run(&["patterns", "new", "access-count", "--params", params.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("max"));
}

#[test]
fn evaluate_prints_decision_and_threads_state() {
    let dir = tempfile::tempdir().unwrap();
    let state = dir.path().join("state.json");
    let request = fixture("read-request.json").display().to_string();
    let o = run(&["evaluate", "--agreement", &listing1(), "--request", &request, "--next-state", state.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let d: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(d["outcome"], "Permit");
    let s: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&state).unwrap()).unwrap();
    assert_eq!(s["entries"][0]["executed_count"], 1);

    let o = run(&[
        "evaluate", "--agreement", &listing1(), "--request", &request, "--state", state.to_str().unwrap(),
    ]);
    let d: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(d["outcome"], "Permit");
}

#[test]
fn audit_check_flags_missed_deletion() {
    let log = fixture("violating-deletion.ndjson").display().to_string();
    let o = run(&["audit-check", "--agreement", &listing1(), "--log", &log, "--now", "2023-07-11T00:00:00Z"]);
    assert_eq!(o.status.code(), Some(1));
    let statuses: Vec<serde_json::Value> =
        stdout(&o).lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    let violated: Vec<_> = statuses.iter().filter(|s| s["status"] == "Violated").collect();
    assert_eq!(violated.len(), 1);
    assert_eq!(violated[0]["duty"]["action"]["action"], "http://www.w3.org/ns/odrl/2/delete");

    let o = run(&["audit-check", "--agreement", &listing1(), "--log", &log, "--now", "2023-07-05T00:00:00Z"]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn simulate_writes_report_and_log() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = fixture("scenarios/demo.json").display().to_string();
    let o = run(&["simulate", &scenario, "-o", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let log1 = std::fs::read_to_string(dir.path().join("audit.ndjson")).unwrap();
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["name"], "transconnect-trafficinsights");
    assert!(!log1.is_empty());

    let dir2 = tempfile::tempdir().unwrap();
    run(&["simulate", &scenario, "-o", dir2.path().to_str().unwrap()]);
    assert_eq!(log1, std::fs::read_to_string(dir2.path().join("audit.ndjson")).unwrap());

    let violating = fixture("scenarios/deletion-violated.json").display().to_string();
    let o = run(&["simulate", &violating, "-o", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn alternate_profile_from_env() {
    let dir = tempfile::tempdir().unwrap();
    let profile = dir.path().join("profile.ttl");
    std::fs::write(
        &profile,
        "@prefix odrl: <http://www.w3.org/ns/odrl/2/> .\n\
         @prefix rdfs: <http://www.w3.org/2000/01/rdf-schema#> .\n\
         odrl:read a odrl:Action ; rdfs:isDefinedBy odrl:core .\n",
    )
    .unwrap();
    let o = bin().env("DSP_PROFILE", &profile).args(["validate", &listing1()]).output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stderr).contains("warning"));
    let o = bin().env("DSP_PROFILE", dir.path().join("missing.ttl")).args(["validate", &listing1()]).output().unwrap();
    assert_eq!(o.status.code(), Some(3));
}
