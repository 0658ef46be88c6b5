use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn optilog(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_optilog"))
        .args(args)
        .env("OPTILOG_THREADS", "1")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SCENARIO: &str = r#"{
  "n": 13, "f": 4, "delta": 1.2, "topology": "tree",
  "latency": {"synthetic": {"seed": 2}},
  "adversaries": [{"kind": "targeted_suspicion", "members": [1, 5], "start_round": 2}],
  "rounds": 15, "seed": 0
}
"#;

fn scenario(dir: &Path, text: &str) -> String {
    let p = dir.join("scenario.json");
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn run_writes_replications_summary_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let sc = scenario(dir.path(), SCENARIO);
    let out = dir.path().join("out");
    let o = optilog(&["run", &sc, "--reps", "3", "--out", out.to_str().unwrap(), "--seed", "9"]);
    assert!(o.status.success(), "{}", stderr(&o));
    for i in 0..3 {
        let csv = fs::read_to_string(out.join(format!("rep-{i:03}.csv"))).unwrap();
        assert!(csv.starts_with("round,epoch,config,"));
        assert_eq!(csv.lines().count(), 16);
    }
    let summary: serde_json::Value = serde_json::from_slice(&fs::read(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["replications"], 3);
    assert_eq!(summary["metrics"]["committed_rounds"]["count"], 3);
    assert!(summary["metrics"]["mean_duration_us"]["ci95"].is_array());
    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seeds"].as_array().unwrap().len(), 3);
}

#[test]
fn rerun_reproduces_and_detects_tampering() {
    let dir = tempfile::tempdir().unwrap();
    let sc = scenario(dir.path(), SCENARIO);
    let out = dir.path().join("out");
    assert!(optilog(&["run", &sc, "--reps", "2", "--out", out.to_str().unwrap()]).status.success());
    let manifest = out.join("manifest.json");
    let copy = dir.path().join("copy");
    let o = optilog(&["rerun", manifest.to_str().unwrap(), "--out", copy.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    for name in ["rep-000.csv", "rep-001.json", "summary.json", "manifest.json"] {
        assert_eq!(fs::read(out.join(name)).unwrap(), fs::read(copy.join(name)).unwrap(), "{name}");
    }
    fs::write(out.join("rep-001.csv"), "tampered\n").unwrap();
    let o = optilog(&["rerun", manifest.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("rep-001.csv"), "{}", stderr(&o));
}

#[test]
fn zero_replications_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let sc = scenario(dir.path(), SCENARIO);
    let o = optilog(&["run", &sc, "--reps", "0", "--out", dir.path().join("o").to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("--reps"));
}

#[test]
fn bad_scenarios_point_at_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let sc = scenario(dir.path(), &SCENARIO.replace("\"rounds\": 15", "\"rounds\": 15,,"));
    let o = optilog(&["run", &sc, "--out", dir.path().join("o").to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains(&format!("{sc}:5:")), "{}", stderr(&o));

    let sc = scenario(dir.path(), &SCENARIO.replace("[1, 5]", "[1, 5, 6, 7, 8]"));
    let o = optilog(&["run", &sc, "--out", dir.path().join("o").to_str().unwrap()]);
    assert!(stderr(&o).contains(&format!("{sc}:4:1: adversaries")), "{}", stderr(&o));

    let sc = scenario(dir.path(), &SCENARIO.replace("\"rounds\"", "\"round_count\": 3, \"rounds\""));
    let o = optilog(&["run", &sc, "--out", dir.path().join("o").to_str().unwrap()]);
    assert!(stderr(&o).contains("round_count"), "{}", stderr(&o));
}

#[test]
fn help_documents_the_columns() {
    let o = optilog(&["run", "--help"]);
    assert!(stdout(&o).contains("retained_correct"));
    let o = optilog(&["reconfig-curve", "--help"]);
    assert!(stdout(&o).contains("kauri_sa_mean_us"));
    let o = optilog(&["candidate-bench", "--help"]);
    assert!(stdout(&o).contains("mean_ms"));
}

#[test]
fn curve_without_reconfigurations_has_one_row() {
    let o = optilog(&["reconfig-curve", "--n", "13", "--faults", "2", "--reps", "3", "--reconfigs", "0"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[1].starts_with("0,3,"));
}

#[test]
fn curve_rejects_non_tree_sizes() {
    let o = optilog(&["reconfig-curve", "--n", "12", "--faults", "1", "--reps", "1"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("admissible sizes: 7, 13, 21"), "{}", stderr(&o));
}

#[test]
fn raw_curve_rows_name_each_system() {
    let o = optilog(&["reconfig-curve", "--n", "13", "--faults", "2", "--reps", "2", "--raw"]);
    let text = stdout(&o);
    assert!(text.starts_with("rep,seed,system,reconfig,score_us"));
    for system in [",opti,", ",kauri,", ",kauri_sa,"] {
        assert!(text.contains(system));
    }
}

#[test]
fn bench_rows_are_sorted_by_n() {
    let o = optilog(&["candidate-bench", "--sizes", "25,4,10", "--graphs", "5"]);
    assert!(o.status.success());
    let ns: Vec<usize> = stdout(&o)
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(ns, vec![4, 10, 25]);
}

#[test]
fn thread_variable_must_be_a_number() {
    let o = Command::new(env!("CARGO_BIN_EXE_optilog"))
        .args(["candidate-bench", "--sizes", "4", "--graphs", "1"])
        .env("OPTILOG_THREADS", "many")
        .output()
        .unwrap();
    assert!(!o.status.success());
    assert!(stderr(&o).contains("OPTILOG_THREADS"));
}
