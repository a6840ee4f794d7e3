use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn cosym(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cosym"))
        .args(args)
        .env_remove("COSYM_REPORT_DIR")
        .output()
        .expect("cosym runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn scenario_file(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/scenarios")
        .join(format!("{name}.toml"))
        .display()
        .to_string()
}

#[test]
fn validate_passes_for_builtins_and_files() {
    for s in ["oscillator-moving-observer", "plane-wave", "q-translation"] {
        let o = cosym(&["--samples", "30", "validate", s]);
        assert_eq!(o.status.code(), Some(0), "{s}: {}", stderr(&o));
        assert!(stdout(&o).starts_with("[PASS] validate-"));
        let f = scenario_file(s);
        let o = cosym(&["--samples", "30", "validate", &f]);
        assert_eq!(o.status.code(), Some(0), "{s}: {}", stderr(&o));
    }
}

#[test]
fn json_reports_parse() {
    let o = cosym(&["--json", "--samples", "30", "reeb", "plane-wave"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v.is_object());
}

#[test]
fn reduce_at_empty_level_exits_zero() {
    let o = cosym(&["--json", "reduce", "oscillator-moving-observer", "--mu", "0.5"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["outcome"]["status"], "empty_level_set");
}

#[test]
fn report_dir_from_environment_receives_reports() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_cosym"))
        .args(["--samples", "20", "formalisms", "q-translation", "--T", "0.1"])
        .env("COSYM_REPORT_DIR", dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = std::fs::read_to_string(dir.path().join("formalisms-q-translation.txt")).unwrap();
    assert_eq!(text, stdout(&o));
}

#[test]
fn evolve_writes_csv_with_header() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("traj.csv");
    let o = cosym(&[
        "evolve",
        "oscillator-moving-observer",
        "--x0",
        "0.1,-0.2,0.3,0.0,0.5",
        "--T",
        "0.5",
        "--h",
        "0.01",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(&out).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "time,q1,q2,p1,p2,t,J_H1,H");
    assert_eq!(lines.count(), 51);
}

#[test]
fn levelset_cut_writes_gnuplot_data() {
    let dir = tempfile::tempdir().unwrap();
    let o = cosym(&[
        "--report-dir",
        dir.path().to_str().unwrap(),
        "levelset-cut",
        "plane-wave",
        "--mu",
        "0",
        "--axes",
        "q1:-3:3:7,p2:-1:1:5",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let data = std::fs::read_to_string(dir.path().join("levelset-cut-plane-wave.dat")).unwrap();
    assert_eq!(data.matches("# branch").count(), 2);
}

#[test]
fn fuzz_small_run_passes() {
    let o = cosym(&["fuzz-lemma45", "--dims", "3,5", "--cases", "50"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
}

#[test]
fn input_errors_exit_two() {
    let o = cosym(&["validate", "/nonexistent/s.toml"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("error:"));

    let o = cosym(&["--param", "zz=1", "validate", "plane-wave"]);
    assert_eq!(o.status.code(), Some(2));

    let o = cosym(&["evolve", "q-translation", "--x0", "1,2"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn missing_eta_exits_two_with_json_error() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(scenario_file("q-translation"))
        .unwrap()
        .replace("[eta]\nt = \"1\"\n", "");
    let path = dir.path().join("no-eta.toml");
    std::fs::write(&path, text).unwrap();
    let o = cosym(&["--json", "validate", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let v: Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert_eq!(v["exit_code"], 2);
    assert!(v["error"].as_str().unwrap().contains("eta"));
}

#[test]
fn invalid_momentum_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(scenario_file("q-translation"))
        .unwrap()
        .replace("J = [\"p1\"]", "J = [\"p2\"]");
    let path = dir.path().join("bad-j.toml");
    std::fs::write(&path, text).unwrap();
    let o = cosym(&["validate", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
}
