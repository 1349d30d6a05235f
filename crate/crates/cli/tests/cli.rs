use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const STORED: &str = "\
name = demo
n = 2
lambda = 0.5
policy = stored_id
policy.alpha = 1
horizon = 500
seed = 3
";

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hetdispatch"))
}

fn write_config(dir: &Path, file: &str, text: &str) -> PathBuf {
    let p = dir.join(file);
    fs::write(&p, text).unwrap();
    p
}

fn invoke(args: &[&str], config: &Path, out: &Path) -> Output {
    bin()
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// Relative path -> bytes for every file under `root`.
fn tree(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut files = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                files.push((path.strip_prefix(root).unwrap().to_path_buf(), fs::read(&path).unwrap()));
            }
        }
    }
    files.sort();
    files
}

#[test]
fn run_emits_ledger_and_report() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "s.cfg", STORED);
    let out = tmp.path().join("out");
    let o = invoke(&["run"], &cfg, &out);
    assert!(matches!(o.status.code(), Some(0 | 2 | 3)), "{}", stderr(&o));
    let dir = out.join("demo").join("3");
    let csv = fs::read_to_string(dir.join("ledger.csv")).unwrap();
    assert!(csv.starts_with("time,event_kind,server,total_workload,max_queue_len,cum_messages\n"));
    let report: serde_json::Value = serde_json::from_slice(&fs::read(dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["seed"], 3);
    assert_eq!(report["policy"], "stored_id(alpha=1)");
    assert!(report["total_messages"].as_u64().unwrap() > 0);
    assert!(out.join("demo").join("summary.json").exists());
    assert!(stdout(&o).starts_with("demo: policy stored_id"));
}

#[test]
fn missing_key_is_named_and_nothing_is_written() {
    let tmp = TempDir::new().unwrap();
    let text: String = STORED.lines().filter(|l| !l.starts_with("lambda")).map(|l| format!("{l}\n")).collect();
    let cfg = write_config(tmp.path(), "s.cfg", &text);
    let out = tmp.path().join("out");
    let o = invoke(&["run"], &cfg, &out);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("missing required key `lambda`"), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn malformed_values_report_their_line() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "s.cfg", &STORED.replace("horizon = 500", "horizon = soon"));
    let out = tmp.path().join("out");
    let o = invoke(&["run"], &cfg, &out);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 6"), "{}", stderr(&o));
    assert!(stderr(&o).contains("`horizon`"));

    let cfg = write_config(tmp.path(), "t.cfg", &format!("{STORED}colour = blue\n"));
    let o = invoke(&["run"], &cfg, &out);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 8: unknown key `colour`"), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn seed_override_matches_config_seed() {
    let tmp = TempDir::new().unwrap();
    let from_config = write_config(tmp.path(), "a.cfg", &STORED.replace("seed = 3", "seed = 11"));
    let from_flag = write_config(tmp.path(), "b.cfg", STORED);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    invoke(&["run"], &from_config, &a);
    bin()
        .args(["run", "--seed", "11", "--config"])
        .arg(&from_flag)
        .arg("--out")
        .arg(&b)
        .output()
        .unwrap();
    let ta = tree(&a);
    assert!(ta.iter().any(|(p, _)| p.ends_with("11/ledger.csv")));
    assert_eq!(ta, tree(&b));
}

#[test]
fn repeated_invocations_are_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "s.cfg", STORED);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for out in [&a, &b] {
        bin()
            .args(["run", "--reps", "3", "--jobs", "2", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(out)
            .output()
            .unwrap();
    }
    let ta = tree(&a);
    assert_eq!(ta.iter().filter(|(p, _)| p.ends_with("ledger.csv")).count(), 3);
    assert_eq!(ta, tree(&b));
}

#[test]
fn horizon_flag_overrides_config() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "s.cfg", STORED);
    let out = tmp.path().join("out");
    bin()
        .args(["run", "--horizon", "50", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    let report: serde_json::Value =
        serde_json::from_slice(&fs::read(out.join("demo/3/report.json")).unwrap()).unwrap();
    assert_eq!(report["horizon"], 50.0);
}

#[test]
fn certify_canonical_chain_passes() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "s.cfg", STORED);
    let out = tmp.path().join("out");
    let o = invoke(&["certify"], &cfg, &out);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let cert: serde_json::Value =
        serde_json::from_slice(&fs::read(out.join("demo/certificate.json")).unwrap()).unwrap();
    assert_eq!(cert["certificate"]["theta"], 6.0);
    assert_eq!(cert["certificate"]["passed"], true);
    assert!(stdout(&o).contains("theta = 6"));
}

#[test]
fn certify_broken_chain_lists_violations() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "s.cfg", STORED);
    let out = tmp.path().join("out");
    let o = invoke(&["certify", "--broken-chain", "--method", "enumeration", "--q-max", "10"], &cfg, &out);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let cert: serde_json::Value =
        serde_json::from_slice(&fs::read(out.join("demo/certificate.json")).unwrap()).unwrap();
    assert_eq!(cert["certificate"]["passed"], false);
    assert!(!cert["certificate"]["violations"].as_array().unwrap().is_empty());
}

#[test]
fn certify_rejects_small_truncation() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "s.cfg", STORED);
    let out = tmp.path().join("out");
    let o = invoke(&["certify", "--q-max", "7"], &cfg, &out);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("precondition"), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn certify_rejects_other_policies() {
    let tmp = TempDir::new().unwrap();
    let text = STORED.replace("policy = stored_id\npolicy.alpha = 1", "policy = sq_d\npolicy.d = 2");
    let cfg = write_config(tmp.path(), "s.cfg", &text);
    let o = invoke(&["certify"], &cfg, &tmp.path().join("out"));
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn sweep_two_by_two() {
    let tmp = TempDir::new().unwrap();
    let text = "\
name = grid
n = 4
lambda = 0.6
policy = uniform
horizon = 400
sweep.policy = uniform, sq_d:2
sweep.epsilon = 0.2, 0.8
";
    let cfg = write_config(tmp.path(), "s.cfg", text);
    let out = tmp.path().join("out");
    let o = invoke(&["sweep"], &cfg, &out);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let summaries: Vec<_> = tree(&out).into_iter().filter(|(p, _)| p.ends_with("summary.json")).collect();
    assert_eq!(summaries.len(), 4);
    let table = fs::read_to_string(out.join("grid/sweep_summary.csv")).unwrap();
    assert_eq!(table.lines().count(), 5);
    assert!(table.lines().skip(1).all(|l| l.contains(",ok,")));
}

#[test]
fn sweep_records_failed_points_and_continues() {
    let tmp = TempDir::new().unwrap();
    let text = "\
name = grid
n = 4
lambda = 0.6
policy = uniform
horizon = 200
sweep.n = 4, 6
sweep.policy = uniform, sq_d:5
";
    let cfg = write_config(tmp.path(), "s.cfg", text);
    let out = tmp.path().join("out");
    let o = invoke(&["sweep"], &cfg, &out);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let table = fs::read_to_string(out.join("grid/sweep_summary.csv")).unwrap();
    let rows: Vec<&str> = table.lines().skip(1).collect();
    assert_eq!(rows.len(), 4);
    assert_eq!(rows.iter().filter(|l| l.contains(",error,")).count(), 1);
}

#[test]
fn empty_sweep_grid_gives_empty_summary() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "s.cfg", STORED);
    let out = tmp.path().join("out");
    let o = invoke(&["sweep"], &cfg, &out);
    assert_eq!(o.status.code(), Some(0));
    let table = fs::read_to_string(out.join("demo/sweep_summary.csv")).unwrap();
    assert_eq!(table.lines().count(), 1);
}

#[test]
fn audit_writes_verdict() {
    let tmp = TempDir::new().unwrap();
    let text = STORED.replace("policy = stored_id\npolicy.alpha = 1", "policy = sq_d\npolicy.d = 1").replace("n = 2", "n = 5");
    let cfg = write_config(tmp.path(), "s.cfg", &text);
    let out = tmp.path().join("out");
    let o = invoke(&["audit", "--trials", "20000"], &cfg, &out);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_slice(&fs::read(out.join("demo/3/audit.json")).unwrap()).unwrap();
    assert_eq!(report["verdict"], "pass");

    let o = invoke(&["audit", "--trials", "10"], &cfg, &tmp.path().join("other"));
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn bench_requires_slow_half_rates() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "s.cfg", STORED);
    let o = invoke(&["bench"], &cfg, &tmp.path().join("out"));
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("slow_half"));
}

#[test]
fn bench_flags_sq2_with_a_very_slow_half() {
    let tmp = TempDir::new().unwrap();
    let text = "\
name = b
n = 10
lambda = 0.9
rates = slow_half:0.05
policy = sq_d
policy.d = 2
horizon = 5000
seed = 1
";
    let cfg = write_config(tmp.path(), "s.cfg", text);
    let out = tmp.path().join("out");
    let o = bin()
        .args(["bench", "--reps", "4", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2), "{}", stdout(&o));
    let bench: serde_json::Value = serde_json::from_slice(&fs::read(out.join("b/bench.json")).unwrap()).unwrap();
    let lower = bench["report"]["drift"]["ci"]["lower"].as_f64().unwrap();
    assert!(lower > bench["sq2_counting_bound"].as_f64().unwrap());
}
