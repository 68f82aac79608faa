//! End-to-end checks of the command-line interface.

use std::path::PathBuf;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_manet-sim"))
}

fn temp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("manet-cli-{tag}-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn run_prints_metrics_and_honors_flags() {
    let out = bin()
        .args([
            "run",
            "--protocol",
            "dsdv",
            "--nodes",
            "12",
            "--area",
            "400x400",
            "--duration",
            "20",
            "--seed",
            "3",
            "--flows",
            "3",
            "--packet-size",
            "64",
            "--rate",
            "100",
            "--range",
            "250",
            "--loss",
            "0",
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("protocol          dsdv"), "{stdout}");
    assert!(stdout.contains("packets_sent"));
    assert!(stdout.contains("pdr"));
    assert!(stdout.contains("nrl"));
}

#[test]
fn run_rejects_bad_arguments_with_an_error() {
    let out = bin()
        .args(["run", "--protocol", "olsr", "--duration", "5"])
        .output()
        .unwrap();
    assert!(!out.status.success());

    let out = bin()
        .args(["run", "--protocol", "aodv", "--duration", "5", "--loss", "1.5", "--nodes", "4"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("error"), "{stderr}");
}

#[test]
fn sweep_writes_reports_and_config_file_loads() {
    let dir = temp_dir("sweep");
    let cfg_path = dir.join("base.json");
    std::fs::write(
        &cfg_path,
        r#"{ "n_nodes": 12, "traffic": { "flows": 3 }, "arena": [400.0, 300.0] }"#,
    )
    .unwrap();
    let out_dir = dir.join("out");
    let out = bin()
        .args([
            "sweep",
            "--config",
            cfg_path.to_str().unwrap(),
            "--protocols",
            "aodv,dsdv,dsr",
            "--times",
            "5,10",
            "--seeds",
            "1,2",
            "--out",
            out_dir.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("throughput:"), "{stdout}");
    assert!(stdout.contains("nrl:"), "{stdout}");

    let csv = std::fs::read_to_string(out_dir.join("results.csv")).unwrap();
    assert!(csv.starts_with(manet_sim::report::CSV_HEADER));
    // 3 protocols x 2 times x 2 seeds + 6 averaged rows + header
    assert_eq!(csv.lines().count(), 1 + 12 + 6);
    for metric in ["pdr", "paper_pdr", "throughput", "avg_delay", "nrl"] {
        assert!(out_dir.join(format!("series_{metric}.dat")).exists(), "{metric}");
    }
    let summary = std::fs::read_to_string(out_dir.join("summary.txt")).unwrap();
    assert_eq!(
        summary.lines().filter(|l| l.contains(" > ") || l.contains(" < ")).count(),
        3,
        "{summary}"
    );
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn run_emits_event_trace_when_asked() {
    let dir = temp_dir("trace");
    let trace = dir.join("events.txt");
    let out = bin()
        .args([
            "run",
            "--protocol",
            "aodv",
            "--nodes",
            "8",
            "--area",
            "300x300",
            "--duration",
            "10",
            "--flows",
            "2",
            "--event-trace",
            trace.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&trace).unwrap();
    assert!(text.lines().count() > 100);
    let first = text.lines().next().unwrap();
    assert_eq!(first.split(',').count(), 3, "time_us,node,action_kind: {first}");
    std::fs::remove_dir_all(&dir).ok();
}
