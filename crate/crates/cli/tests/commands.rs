use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use commit_core::metrics::AnalysisReport;
use commit_core::store::{parse_log, MANIFEST_FILE};
use commit_core::Manifest;

fn commit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_commit"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = commit(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn repo() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn golden() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/small")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn files(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    names
}

#[test]
fn sim_run_matches_the_golden_logs() {
    let out = tempfile::tempdir().unwrap();
    let plan = repo().join("plans/small.json");
    ok(&["sim", "run", "--plan", s(&plan), "--out", s(out.path())]);
    let expected = golden();
    assert_eq!(files(out.path()), files(&expected));
    for name in files(&expected) {
        let got = std::fs::read_to_string(out.path().join(&name)).unwrap();
        let want = std::fs::read_to_string(expected.join(&name)).unwrap();
        assert!(got == want, "{name} differs from the golden copy");
    }
}

#[test]
fn analyze_emits_one_survival_column_per_lapse_window() {
    let dir = tempfile::tempdir().unwrap();
    let report_path = dir.path().join("report.json");
    let logs = golden();
    let manifest = logs.join(MANIFEST_FILE);
    ok(&[
        "analyze", "--logs", s(&logs), "--config", s(&manifest), "--out", s(&report_path),
        "--lapse-windows", "2,4", "--study-days", "6",
    ]);
    let report: AnalysisReport =
        serde_json::from_str(&std::fs::read_to_string(&report_path).unwrap()).unwrap();
    assert_eq!(report.survival_table.lapse_periods, vec![2, 4]);
    let windows: Vec<u32> = report.survival_table.columns.iter().map(|c| c.lapse_days).collect();
    assert_eq!(windows, vec![2, 4]);
    assert_eq!(report.groups.len(), 2);
    assert_eq!(report.daily_activity.len(), 6);
    for g in &report.groups {
        assert!(g.inequality.gini_all_messages.is_some());
        for m in &g.members {
            assert_eq!(m.active.len(), 6);
            assert_eq!(m.two_day_counts.len(), 3);
        }
    }
}

#[test]
fn analyze_reads_the_log_directory_manifest_by_default() {
    let dir = tempfile::tempdir().unwrap();
    let report_path = dir.path().join("r.json");
    ok(&["analyze", "--logs", s(&golden()), "--out", s(&report_path)]);
    let report: AnalysisReport =
        serde_json::from_str(&std::fs::read_to_string(&report_path).unwrap()).unwrap();
    assert_eq!(report.survival_table.lapse_periods, vec![3, 5, 7, 9, 11]);
}

#[test]
fn group_create_with_zero_cycle_hours_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("manifest.json");
    let out = commit(&[
        "group", "create", "--name", "Book Club", "--condition", "commit", "--cycle-hours", "0",
        "--members", "ann,bob", "--config", s(&manifest),
    ]);
    assert!(!out.status.success());
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert!(err["error"].as_str().unwrap().contains("cycle length"), "{err}");
    assert!(files(dir.path()).is_empty(), "nothing is written");
}

#[test]
fn group_create_provisions_a_servable_log() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("manifest.json");
    let args = [
        "group", "create", "--name", "Book Club", "--condition", "COMMIT", "--cycle-hours", "24",
        "--members", "ann=Ann Lee,bob", "--epoch", "2024-05-01T00:00:00Z", "--config", s(&manifest),
    ];
    ok(&args);
    let m = Manifest::load(&manifest).unwrap();
    assert_eq!(m.groups.len(), 1);
    assert_eq!(m.groups[0].group_id.as_str(), "book-club");
    assert_eq!(m.groups[0].cycle_hours, 24);
    let log = std::fs::read_to_string(dir.path().join("book-club.events.jsonl")).unwrap();
    let records = parse_log(&log).unwrap();
    let kinds: Vec<&str> = records.iter().map(|r| r.event.kind_name()).collect();
    assert_eq!(kinds, ["GROUP_CREATED", "MEMBER_JOINED", "MEMBER_JOINED"]);

    let again = commit(&args);
    assert!(!again.status.success(), "duplicate group ids are refused");
    ok(&[
        "group", "create", "--name", "Runners", "--condition", "control", "--members", "cy",
        "--config", s(&manifest),
    ]);
    assert_eq!(Manifest::load(&manifest).unwrap().groups.len(), 2);
}

#[test]
fn export_flattens_messages_and_keeps_records_verbatim() {
    let logs = golden();
    let csv_text = ok(&["export", "--logs", s(&logs), "--format", "csv"]);
    let mut reader = csv::Reader::from_reader(csv_text.as_bytes());
    let headers = reader.headers().unwrap().clone();
    assert_eq!(
        headers.iter().collect::<Vec<_>>(),
        ["group_id", "condition", "seq", "sent_at", "message_id", "sender_id", "kind", "body"]
    );
    let rows = reader.records().count();

    let manifest = Manifest::load(&logs.join(MANIFEST_FILE)).unwrap();
    let mut messages = 0;
    let mut lines = Vec::new();
    for g in &manifest.groups {
        let text = std::fs::read_to_string(logs.join(format!("{}.events.jsonl", g.group_id))).unwrap();
        let records = parse_log(&text).unwrap();
        messages += records.iter().filter(|r| r.event.kind_name() == "MESSAGE").count();
        lines.extend(text.lines().map(|l| (g.group_id.to_string(), l.to_string())));
    }
    assert_eq!(rows, messages);

    let jsonl = ok(&["export", "--logs", s(&logs), "--format", "jsonl"]);
    let exported: Vec<&str> = jsonl.lines().collect();
    assert_eq!(exported.len(), lines.len());
    for (line, (group, original)) in exported.iter().zip(&lines) {
        let prefix = format!("{{\"group_id\":\"{group}\",");
        assert_eq!(line.strip_prefix(&prefix).unwrap(), &original[1..]);
    }
}

#[test]
fn bad_inputs_exit_nonzero_with_a_message() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.json");
    for args in [
        vec!["analyze", "--logs", s(dir.path()), "--out", "r.json"],
        vec!["sim", "run", "--plan", s(&missing), "--out", s(dir.path())],
        vec!["export", "--logs", s(dir.path()), "--format", "csv"],
        vec!["serve", "--config", s(&missing), "--log-dir", s(dir.path())],
    ] {
        let out = commit(&args);
        assert!(!out.status.success(), "{args:?}");
        let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
        assert!(err["error"].is_string());
    }
    let bad_plan = dir.path().join("plan.json");
    std::fs::write(&bad_plan, r#"{"seed": 1, "arms": [{"condition": "COMMIT", "groups": 1, "policy": {"p_reply": 2.0}}]}"#)
        .unwrap();
    let out = commit(&["sim", "run", "--plan", s(&bad_plan), "--out", s(&dir.path().join("o"))]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("p_reply"));
    assert!(!dir.path().join("o").exists(), "invalid plans write nothing");
    let out = commit(&[
        "analyze", "--logs", s(&golden()), "--out", s(&dir.path().join("r.json")), "--lapse-windows", "0",
    ]);
    assert!(!out.status.success());
}
