use std::f64::consts::LN_2;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_infotherm")).args(args).output().unwrap()
}

fn json_of(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn write(dir: &TempDir, name: &str, text: &str) -> String {
    let path = dir.path().join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn twobox_anchor_values() {
    let half = json_of(&run(&["twobox", "--t", "0.5"]));
    assert!((half["W_eras"].as_f64().unwrap() - LN_2).abs() < 1e-15);
    assert_eq!(half["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(half["config"]["t"].as_f64(), Some(0.5));
    let fifth = json_of(&run(&["twobox", "--t", "0.8"]));
    assert!(fifth["W_eras"].as_f64().unwrap().abs() < 1e-15);
    assert!((fifth["W_meas"].as_f64().unwrap() - LN_2).abs() < 1e-15);
}

#[test]
fn twobox_rejects_boundary_t() {
    for t in ["0", "1", "1.5"] {
        let out = run(&["twobox", "--t", t]);
        assert_eq!(out.status.code(), Some(2), "t = {t}");
    }
    assert_eq!(run(&["twobox"]).status.code(), Some(2));
}

#[test]
fn sweep_table_is_stable() {
    let out = run(&["sweep", "--grid", "0.1:0.9:0.1"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout.clone()).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,W_eras,W_meas,sum,dF,eq3_margin,eq2_margin"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 9);
    for row in rows {
        let sum: f64 = row.split(',').nth(3).unwrap().parse().unwrap();
        assert!((sum - LN_2).abs() < 1e-12);
    }
    assert_eq!(run(&["sweep", "--grid", "0.1:0.9:0.1"]).stdout, out.stdout);
    assert_eq!(run(&["sweep", "--grid", "0.9:0.1:0.1"]).status.code(), Some(2));
}

#[test]
fn qcmi_reports() {
    let dir = TempDir::new().unwrap();
    let state = write(&dir, "state.json", r#"{"dim": 2, "re": [[0.25, 0], [0, 0.75]]}"#);
    let basis = write(
        &dir,
        "basis.json",
        r#"{"outcomes": [
            {"k": 0, "operators": [{"dim": 2, "re": [[1, 0], [0, 0]]}]},
            {"k": 1, "operators": [{"dim": 2, "re": [[0, 0], [0, 1]]}]}
        ]}"#,
    );
    let r = json_of(&run(&["qcmi", "--state", &state, "--povm", &basis]));
    let h = -(0.25f64 * 0.25f64.ln() + 0.75 * 0.75f64.ln());
    assert!((r["H"].as_f64().unwrap() - h).abs() < 1e-12);
    assert!((r["I"].as_f64().unwrap() - h).abs() < 1e-8);

    let s = 0.5f64.sqrt();
    let trivial = write(
        &dir,
        "trivial.json",
        &format!(
            r#"{{"outcomes": [
                {{"k": 0, "operators": [{{"dim": 2, "re": [[{s}, 0], [0, {s}]]}}]}},
                {{"k": 1, "operators": [{{"dim": 2, "re": [[{s}, 0], [0, {s}]]}}]}}
            ]}}"#
        ),
    );
    let r = json_of(&run(&["qcmi", "--state", &state, "--povm", &trivial]));
    assert!(r["I"].as_f64().unwrap().abs() < 1e-9);
}

#[test]
fn qcmi_rejects_malformed_input() {
    let dir = TempDir::new().unwrap();
    let povm = write(
        &dir,
        "basis.json",
        r#"{"outcomes": [{"k": 0, "operators": [{"dim": 1, "re": [[1]]}]}]}"#,
    );
    let broken = write(&dir, "broken.json", "{\n  \"dim\": 2,\n  \"re\": [[1, 0], [0 0]]\n}");
    let out = run(&["qcmi", "--state", &broken, "--povm", &povm]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"), "{}", String::from_utf8_lossy(&out.stderr));

    let ragged = write(&dir, "ragged.json", r#"{"dim": 2, "re": [[1, 0], [0]]}"#);
    assert_eq!(run(&["qcmi", "--state", &ragged, "--povm", &povm]).status.code(), Some(2));
    let missing = dir.path().join("missing.json");
    assert_eq!(run(&["qcmi", "--state", path_str(&missing), "--povm", &povm]).status.code(), Some(2));
}

#[test]
fn verify_bounds_passes_and_replays() {
    let r = json_of(&run(&["verify-bounds", "--seed", "11", "--instances", "20"]));
    let summary = &r["summary"];
    assert_eq!(summary["count"], 20);
    assert!(summary["min_margin"].as_f64().unwrap() >= -1e-6);
    for row in r["szilard"].as_array().unwrap() {
        assert!(row["report"]["lhs"].as_f64().unwrap() <= 0.0);
    }

    let worst = summary["worst_seed"].as_u64().unwrap().to_string();
    let replay = json_of(&run(&["verify-bounds", "--seed", "11", "--replay", &worst]));
    let original = r["instances"]
        .as_array()
        .unwrap()
        .iter()
        .find(|i| i["seed"].as_u64().unwrap().to_string() == worst)
        .unwrap();
    assert_eq!(&replay["instances"][0], original);

    assert_eq!(run(&["verify-bounds"]).status.code(), Some(2));
}

#[test]
fn fast_protocols_leave_positive_margins() {
    let r = json_of(&run(&["verify-bounds", "--seed", "3", "--instances", "20", "--n-steps", "2"]));
    for inst in r["instances"].as_array().unwrap() {
        for key in ["measurement", "erasure", "sum"] {
            assert!(inst[key]["margin"].as_f64().unwrap() > 0.0, "{key}: {inst}");
        }
    }
}

#[test]
fn langevin_frozen_and_deterministic() {
    let dir = TempDir::new().unwrap();
    let frozen_csv = dir.path().join("frozen.csv");
    let out = run(&[
        "langevin", "--seed", "5", "--n-traj", "32", "--frozen", "--tau", "0.5", "--csv", path_str(&frozen_csv),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&frozen_csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("trajectory_index,seed,W,final_basin"));
    for line in lines {
        let w: f64 = line.split(',').nth(2).unwrap().parse().unwrap();
        assert_eq!(w, 0.0);
    }

    let args = |csv: &str| {
        vec![
            "langevin".to_owned(),
            "--seed".into(),
            "9".into(),
            "--n-traj".into(),
            "64".into(),
            "--tau".into(),
            "2".into(),
            "--csv".into(),
            csv.into(),
        ]
    };
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    let run_a = Command::new(env!("CARGO_BIN_EXE_infotherm")).args(args(path_str(&a))).output().unwrap();
    let _ = Command::new(env!("CARGO_BIN_EXE_infotherm")).args(args(path_str(&b))).output().unwrap();
    // A 2-unit protocol is far from quasi-static; only the plumbing matters here.
    assert!(run_a.status.code() == Some(0) || run_a.status.code() == Some(1));
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let report: Value = serde_json::from_slice(&run_a.stdout).unwrap();
    for key in ["landauer_margin", "reached_margin"] {
        assert!(report["analysis"][key].is_number(), "{key}");
    }
    assert!(report["analysis"]["jarzynski"]["z_score"].is_number());
}

#[test]
fn langevin_schedule_file_and_errors() {
    let dir = TempDir::new().unwrap();
    let schedule = write(
        &dir,
        "schedule.json",
        r#"{"duration": 0.5, "waypoints": [
            {"at": 0, "a": 1, "b": 6, "c": 0},
            {"at": 0.5, "a": 1, "b": 4, "c": 0},
            {"at": 1, "a": 1, "b": 6, "c": 0}
        ]}"#,
    );
    let out = run(&["langevin", "--seed", "1", "--n-traj", "16", "--schedule", &schedule]);
    assert!(out.status.code() == Some(0) || out.status.code() == Some(1));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["n_steps"], 1000);

    assert_eq!(run(&["langevin", "--n-traj", "4"]).status.code(), Some(2));
    let unstable = run(&["langevin", "--seed", "1", "--n-traj", "4", "--dt", "0.05", "--tau", "1"]);
    assert_eq!(unstable.status.code(), Some(2));
    let bad = write(&dir, "bad.json", r#"{"duration": 1, "waypoints": [{"at": 0, "a": 1, "b": 6, "c": 0}]}"#);
    assert_eq!(run(&["langevin", "--seed", "1", "--schedule", &bad]).status.code(), Some(2));
}

#[test]
fn flags_override_config_file() {
    let dir = TempDir::new().unwrap();
    let config = write(&dir, "run.json", r#"{"t": 0.8, "temperature": 2.0}"#);
    let r = json_of(&run(&["--config", &config, "twobox"]));
    assert_eq!(r["config"]["t"].as_f64(), Some(0.8));
    assert!((r["W_meas"].as_f64().unwrap() - 2.0 * LN_2).abs() < 1e-14);
    let r = json_of(&run(&["--config", &config, "twobox", "--t", "0.5"]));
    assert_eq!(r["config"]["t"].as_f64(), Some(0.5));
    assert_eq!(r["config"]["temperature"].as_f64(), Some(2.0));

    let typo = write(&dir, "typo.json", r#"{"tt": 0.8}"#);
    assert_eq!(run(&["--config", &typo, "twobox"]).status.code(), Some(2));
}

#[test]
fn reports_go_to_out_path() {
    let dir = TempDir::new().unwrap();
    let out_path = dir.path().join("report.json");
    let out = run(&["twobox", "--t", "0.3", "--out", path_str(&out_path)]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let first = std::fs::read(&out_path).unwrap();
    run(&["twobox", "--t", "0.3", "--out", path_str(&out_path)]);
    assert_eq!(std::fs::read(&out_path).unwrap(), first);
}
