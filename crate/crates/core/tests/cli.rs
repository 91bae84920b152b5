use std::io::Write;
use std::process::{Command, Output, Stdio};

use serde_json::Value;

fn seqtest(args: &[&str], stdin: Option<&str>) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_seqtest"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .expect("spawn seqtest");
    let mut pipe = child.stdin.take().unwrap();
    if let Some(text) = stdin {
        pipe.write_all(text.as_bytes()).unwrap();
    }
    drop(pipe);
    child.wait_with_output().unwrap()
}

fn verdict(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

const PRACTICAL: &str = r#"{"mode":"sequential_practical","alpha":0.05}"#;

#[test]
fn run_all_heads_from_stdin() {
    let heads = "H\n".repeat(20);
    let v = verdict(&seqtest(&["run", "--family", "coin", "--policy", PRACTICAL, "--nmax", "100", "--stdin"], Some(&heads)));
    assert_eq!(v["decision"], "reject");
    assert_eq!(v["tau"], 14);
    assert_eq!(v["statistic"], 14.0);
    assert_eq!(v["exhausted"], false);
    for key in ["decision", "tau", "statistic", "boundary", "exhausted"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
}

#[test]
fn run_exhausted_stream() {
    let v = verdict(&seqtest(&["run", "--family", "coin", "--policy", PRACTICAL, "--nmax", "100", "--stdin"], Some("H\nT\nH\n")));
    assert_eq!(v["decision"], "fail_to_reject");
    assert_eq!(v["tau"], 3);
    assert_eq!(v["exhausted"], true);
}

#[test]
fn run_mean_blocks_with_bound() {
    let block = "1,0|0,0\n1,0|0,0\n";
    let v = verdict(&seqtest(
        &["run", "--family", "mean", "--policy", PRACTICAL, "--nmax", "5", "--stdin", "--bound", "1"],
        Some(&block.repeat(5)),
    ));
    assert_eq!(v["tau"], 5);
    assert_eq!(v["statistic"], 1.25);
    assert_eq!(v["exhausted"], false);
}

#[test]
fn malformed_input_fails() {
    let out = seqtest(&["run", "--family", "mean", "--policy", PRACTICAL, "--nmax", "5", "--stdin"], Some("1,0|0,0\n"));
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("incomplete"));
    let out = seqtest(&["run", "--family", "mean", "--policy", PRACTICAL, "--nmax", "5", "--stdin", "--bound", "0.5"], Some("1,0|0,0\n1,0|0,0\n"));
    assert!(String::from_utf8_lossy(&out.stderr).contains("exceeds declared bound"));
}

#[test]
fn run_generator_is_seeded() {
    let args = ["run", "--family", "coin", "--policy", PRACTICAL, "--nmax", "100000", "--gen", r#"{"kind":"coin","rho":0.6}"#, "--seed", "3"];
    let a = verdict(&seqtest(&args, None));
    let b = verdict(&seqtest(&args, None));
    assert_eq!(a, b);
    assert_eq!(a["decision"], "reject");
}

#[test]
fn generator_family_must_match() {
    let out = seqtest(
        &["run", "--family", "mean", "--policy", PRACTICAL, "--nmax", "10", "--gen", r#"{"kind":"coin","rho":0.5}"#],
        None,
    );
    assert!(!out.status.success());
}

#[test]
fn batch_hoeffding() {
    let policy = r#"{"mode":"batch_hoeffding","alpha":0.05}"#;
    let v = verdict(&seqtest(&["batch", "--family", "coin", "--policy", policy, "--n", "50", "--stdin"], Some(&"H\n".repeat(50))));
    assert_eq!(v["decision"], "reject");
    assert_eq!(v["tau"], 50);
    let out = seqtest(&["batch", "--family", "coin", "--policy", policy, "--n", "50", "--stdin"], Some("H\n"));
    assert!(!out.status.success());
}

#[test]
fn experiment_writes_csv_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.json");
    std::fs::write(
        &config,
        r#"{"experiment":"stopping_distribution","spec":{"deltas":[2.0,1.5]},
            "policy":{"mode":"sequential_practical","alpha":0.05},
            "N_max":10000,"trials":40,"seed":5}"#,
    )
    .unwrap();
    let out_path = dir.path().join("stop.csv");
    let out = seqtest(&["experiment", "--config", config.to_str().unwrap(), "--out", out_path.to_str().unwrap()], None);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(&out_path).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("delta,q10,q25,q50,q75,q90,reject_frac"));
    assert_eq!(lines.count(), 2);
    let summary: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("stop.summary.json")).unwrap()).unwrap();
    assert!(summary["slope"].is_f64());
    assert!(summary["slope_stderr"].is_f64());
    assert_eq!(summary["config_echo"]["N_max"], 10000);

    let again = dir.path().join("again.csv");
    seqtest(&["experiment", "--config", config.to_str().unwrap(), "--out", again.to_str().unwrap()], None);
    assert_eq!(csv, std::fs::read_to_string(&again).unwrap());
}
