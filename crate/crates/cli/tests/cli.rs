use std::path::Path;
use std::process::Command;

fn psrl() -> Command {
    Command::new(env!("CARGO_BIN_EXE_psrl"))
}

#[test]
fn run_with_flags_writes_results() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r");
    let status = psrl()
        .args(["run", "--env", "riverswim", "--agent", "psrl", "--mode", "episodic", "--tau", "20", "--T", "400"])
        .args(["--seeds", "2", "--base-seed", "0", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    for f in ["runs.csv", "summary.json", "plot.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let output = psrl().arg("summarize").arg(&out).output().unwrap();
    assert!(output.status.success());
    let text = String::from_utf8(output.stdout).unwrap();
    assert!(text.contains("riverswim-psrl-episodic-tau20-T400"));
}

#[test]
fn run_from_config_file_with_override() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("c.json");
    std::fs::write(
        &config,
        r#"{"environment": {"kind": "random_mdp", "num_states": 3, "num_actions": 2},
            "agent": {"kind": "ucrl2", "delta": 0.1}, "mode": "infinite-horizon-doubling",
            "tau": 10, "T": 300, "num_seeds": 2}"#,
    )
    .unwrap();
    let out = dir.path().join("r");
    let output = psrl()
        .args(["run", "--config"])
        .arg(&config)
        .args(["--seeds", "3", "--out"])
        .arg(&out)
        .env("PSRL_WORKERS", "2")
        .output()
        .unwrap();
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    let summary = std::fs::read_to_string(out.join("summary.json")).unwrap();
    assert!(summary.contains("\"num_seeds\": 3"));
    assert!(summary.contains("random3x2-ucrl2-infinite-tau10-T300"));
}

#[test]
fn invalid_config_exits_nonzero() {
    let status = psrl().args(["run", "--T", "5", "--tau", "20", "--out"]).arg(Path::new("unused")).status().unwrap();
    assert!(!status.success());
    let status = psrl().args(["run", "--agent", "psrl", "--delta", "0.1"]).status().unwrap();
    assert!(!status.success());
    let status = psrl().args(["summarize", "/nonexistent/dir"]).status().unwrap();
    assert!(!status.success());
}

#[test]
fn quick_verify_writes_a_report() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("report.json");
    let status = psrl().args(["verify", "--quick", "--out"]).arg(&report).status().unwrap();
    assert!(status.success());
    let parsed: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(parsed.as_array().unwrap().len(), 6);
}
