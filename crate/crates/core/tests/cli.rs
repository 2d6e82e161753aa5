use std::path::Path;
use std::process::Command;

use wcsph::harness::report::read_reports_csv;

fn wcsph() -> Command {
    Command::new(env!("CARGO_BIN_EXE_wcsph"))
}

fn run_case(out: &Path, policy: &str) {
    let status = wcsph()
        .args(["run", "hydrostatic", "--dp", "0.05", "--end-time", "0.02", "--snapshots", "2", "--policy", policy])
        .arg("--out")
        .arg(out)
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let text = String::from_utf8(status.stdout).unwrap();
    assert!(text.contains("GPIPS"), "{text}");
}

#[test]
fn run_then_aggregate() {
    let dir = tempfile::tempdir().unwrap();
    let (seq, par) = (dir.path().join("seq"), dir.path().join("par"));
    run_case(&seq, "seq");
    run_case(&par, "par");

    for name in ["report.csv", "report.txt", "probes.csv", "snapshot_0000.csv", "snapshot_0001.csv"] {
        assert!(seq.join(name).is_file(), "{name} missing");
    }
    let reports = read_reports_csv(std::fs::File::open(seq.join("report.csv")).unwrap()).unwrap();
    assert_eq!(reports.len(), 1);
    let r = &reports[0];
    assert_eq!(r.status, "completed");
    assert!(r.interactions > 0);
    // same physics under both policies
    let other = read_reports_csv(std::fs::File::open(par.join("report.csv")).unwrap()).unwrap();
    assert_eq!(other[0].interactions, r.interactions);
    assert_eq!(
        std::fs::read(seq.join("snapshot_0001.csv")).unwrap(),
        std::fs::read(par.join("snapshot_0001.csv")).unwrap()
    );

    let plots = dir.path().join("plots");
    let out = wcsph()
        .arg("aggregate")
        .arg(seq.join("report.csv"))
        .arg(par.join("report.csv"))
        .arg("--out")
        .arg(&plots)
        .output()
        .unwrap();
    assert!(out.status.success());
    let runtime = std::fs::read_to_string(plots.join("runtime.svg")).unwrap();
    assert_eq!(runtime.matches("class=\"point\"").count(), 2);
    let gpips = std::fs::read_to_string(plots.join("gpips.svg")).unwrap();
    assert_eq!(gpips.matches("class=\"bar\"").count(), 2);
}

#[test]
fn csv_report_on_stdout() {
    let out = wcsph()
        .args(["run", "hydrostatic", "--dp", "0.05", "--end-time", "0.0", "--report", "csv"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let reports = read_reports_csv(out.stdout.as_slice()).unwrap();
    assert_eq!(reports[0].steps, 0);
}

#[test]
fn bad_arguments_fail_cleanly() {
    let unknown = wcsph().args(["run", "no-such-case"]).output().unwrap();
    assert!(!unknown.status.success());
    assert!(String::from_utf8_lossy(&unknown.stderr).contains("error"));

    let coarse = wcsph().args(["run", "dambreak2d", "--dp", "2.0"]).output().unwrap();
    assert!(!coarse.status.success());

    let policy = wcsph().args(["run", "dambreak2d", "--policy", "gpu"]).output().unwrap();
    assert!(!policy.status.success());
}
