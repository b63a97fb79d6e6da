use std::process::Command;

fn walle_eval(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_walle-eval")).args(args).output().unwrap()
}

#[test]
fn writes_csv_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.csv");
    let o = walle_eval(&["--category", "bottle", "--users", "1", "--attempts", "5", "--screened", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(&out).unwrap();
    assert_eq!(
        csv,
        "user_count,category,ins,vis,grasp,total_grasp\n1,bottle,100.00,100.00,100.00,100.00\ntotal,bottle,100.00,100.00,100.00,100.00\n"
    );
}

#[test]
fn config_file_and_records() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"noise": {"p_wrong_grounding": 1.0}, "llm_failure": {"mode": "none"}}"#).unwrap();
    let records = dir.path().join("records.jsonl");
    let out = dir.path().join("report.json");
    let o = walle_eval(&[
        "--config", cfg.to_str().unwrap(), "--category", "mug", "--users", "2", "--attempts", "4",
        "--records", records.to_str().unwrap(), "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let lines: Vec<serde_json::Value> = std::fs::read_to_string(&records)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 4);
    assert!(lines.iter().all(|r| r["ins_ok"] == true && r["vis_ok"] == false));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(report["rows"][0]["user_count"], 2);
}

#[test]
fn rejects_bad_arguments() {
    assert!(!walle_eval(&["--category", "spoon"]).status.success());
    assert!(!walle_eval(&["--users", "4"]).status.success());
    assert!(!walle_eval(&["--backend", "carrier-pigeon"]).status.success());
}

#[test]
fn single_cell_matches_full_table_cell() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"noise": {"p_wrong_grounding": 0.3, "sigma_t": 0.01}}"#).unwrap();
    let all = dir.path().join("all.jsonl");
    let one = dir.path().join("one.jsonl");
    let c = cfg.to_str().unwrap();
    assert!(walle_eval(&["--config", c, "--attempts", "6", "--seed", "9", "--records", all.to_str().unwrap()]).status.success());
    assert!(walle_eval(&["--config", c, "--attempts", "6", "--seed", "9", "--users", "2", "--category", "mug", "--records", one.to_str().unwrap()]).status.success());
    let all = std::fs::read_to_string(all).unwrap();
    let one = std::fs::read_to_string(one).unwrap();
    let cell: Vec<&str> = all.lines().filter(|l| l.contains("\"user_count\":2") && l.contains("\"category\":\"mug\"")).collect();
    assert_eq!(cell, one.lines().collect::<Vec<_>>());
}
