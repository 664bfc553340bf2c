// SPDX-License-Identifier: Apache-2.0

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command as Proc;

use stk::flow::{list_tree, FAILED_MARKER};
use stk::format::netlist_text::parse_netlist;
use stk::format::vectors::read_vectors;
use stk::report::report_compare;
use stk::{run_flow, Command, FlowConfig, MergingPolicy, Stage};
use stk_core::netlist::validate_netlist;
use stk_core::schedule::{schedule_serial, schedule_sessions, Constraints};

const SCAN: &str = "\
core sc {
  pi 3;
  po 2;
  clockdomains clk;
  control clk clock;
  control se scan_enable;
  control te test_enable;
  chain c0 len=5 clk=clk in=si0 out=so0;
  chain c1 len=3 clk=clk in=si1 out=so1;
  patterns scan count=4;
}
";

const FUNC: &str = "\
core fn {
  pi 2;
  po 2;
  clockdomains clk;
  control clk clock;
  patterns func count=6;
}
";

fn small_soc(dir: &Path, extra: &str) -> PathBuf {
    fs::write(dir.join("sc.core"), SCAN).unwrap();
    fs::write(dir.join("fn.core"), FUNC).unwrap();
    let p = dir.join("small.soc");
    fs::write(&p, format!("soc small;\ncore sc.core;\ncore fn.core;\n{extra}")).unwrap();
    p
}

fn names(dir: &Path) -> Vec<String> {
    list_tree(dir)
        .unwrap()
        .into_iter()
        .map(|p| p.to_string_lossy().replace('\\', "/"))
        .collect()
}

#[test]
fn empty_manifest_writes_validation_only() {
    let d = tempfile::tempdir().unwrap();
    let m = d.path().join("e.soc");
    fs::write(&m, "soc empty;\n").unwrap();
    let out = d.path().join("out");
    let r = run_flow(&FlowConfig::new(&m, &out, Command::All)).unwrap();
    assert_eq!(r.warnings, ["manifest lists no cores"]);
    assert!(r.schedule.is_none());
    assert_eq!(names(&out), ["summary.txt", "validation.jsonl", "validation.txt"]);
}

#[test]
fn infeasible_budget_fails_at_schedule_and_leaves_a_marker() {
    let d = tempfile::tempdir().unwrap();
    let m = small_soc(d.path(), "pin_budget 3;\n");
    let out = d.path().join("out");
    let e = run_flow(&FlowConfig::new(&m, &out, Command::All)).unwrap_err();
    assert_eq!(e.stage, Stage::Schedule);
    let marker = fs::read_to_string(out.join(FAILED_MARKER)).unwrap();
    assert!(marker.starts_with("stage schedule\n"), "{marker}");
    assert!(out.join("validation.txt").exists());
    assert!(!out.join("schedule.txt").exists());

    // A good run in the same directory clears the stale marker.
    let mut cfg = FlowConfig::new(&m, &out, Command::Schedule);
    cfg.pins = Some(40);
    run_flow(&cfg).unwrap();
    assert!(!out.join(FAILED_MARKER).exists());
}

#[test]
fn invalid_core_fails_at_validate() {
    let d = tempfile::tempdir().unwrap();
    fs::write(
        d.path().join("bad.core"),
        "core bad { clockdomains a; chain c len=4 clk=b in=i out=o; }",
    )
    .unwrap();
    let m = d.path().join("bad.soc");
    fs::write(&m, "soc s;\ncore bad.core;\n").unwrap();
    let out = d.path().join("out");
    let e = run_flow(&FlowConfig::new(&m, &out, Command::Parse)).unwrap_err();
    assert_eq!(e.stage, Stage::Validate, "{e}");
    assert!(out.join(FAILED_MARKER).exists());
    let report = fs::read_to_string(out.join("validation.txt")).unwrap();
    assert!(report.contains("INVALID"), "{report}");
}

#[test]
fn full_flow_on_a_small_soc() {
    let d = tempfile::tempdir().unwrap();
    let m = small_soc(
        d.path(),
        "pin_budget 16;\nchip_gates 100000;\nmemory ram words=8 width=2;\n",
    );
    let out = d.path().join("out");
    let r = run_flow(&FlowConfig::new(&m, &out, Command::All)).unwrap();
    let s = r.schedule.as_ref().unwrap();
    let files = names(&out);
    for want in [
        "area.txt",
        "bist/algorithm.march",
        "bist/coverage.jsonl",
        "bist/coverage.txt",
        "bist/mbist.net",
        "netlist/inserted.net",
        "schedule.jsonl",
        "schedule.txt",
        "summary.txt",
        "vectors/preamble.vec",
        "wrappers.jsonl",
        "wrappers.txt",
    ] {
        assert!(files.iter().any(|f| f == want), "missing {want} in {files:?}");
    }
    for sess in &s.sessions {
        let text = fs::read_to_string(out.join(format!("vectors/session{}.vec", sess.index))).unwrap();
        let v = read_vectors(&text).unwrap();
        assert_eq!(v.rows.len() as u64, sess.session_time);
        assert_eq!(v.pins[..2], ["test_mode", "session_si"]);
    }
    let preamble = read_vectors(&fs::read_to_string(out.join("vectors/preamble.vec")).unwrap()).unwrap();
    assert_eq!(preamble.pins, ["test_mode", "session_si"]);
    let net = parse_netlist(&fs::read_to_string(out.join("netlist/inserted.net")).unwrap()).unwrap();
    assert!(validate_netlist(&net).is_empty());
    assert!(r.coverage.iter().all(|c| c.classes.iter().all(|k| k.complete())));
    let area = r.area.unwrap();
    assert_eq!(area.wbr_cells, 3 + 2 + 2 + 2);
    for line in fs::read_to_string(out.join("schedule.jsonl")).unwrap().lines() {
        serde_json::from_str::<serde_json::Value>(line).unwrap();
    }
}

#[test]
fn merging_policies_order_as_expected() {
    let d = tempfile::tempdir().unwrap();
    let m = small_soc(d.path(), "pin_budget 20;\n");
    let total = |merging| {
        let mut cfg = FlowConfig::new(&m, d.path().join(format!("{merging:?}")), Command::Schedule);
        cfg.merging = merging;
        run_flow(&cfg).unwrap().schedule.unwrap().total_cycles
    };
    let (h, x, s) = (
        total(MergingPolicy::Heuristic),
        total(MergingPolicy::Exhaustive),
        total(MergingPolicy::Serial),
    );
    assert!(x <= h && h <= s, "{x} {h} {s}");
}

#[test]
fn compare_identical_and_mismatched_schedules() {
    let d = tempfile::tempdir().unwrap();
    let m = stk::load_manifest(&small_soc(d.path(), "")).unwrap();
    let c = Constraints::for_soc(&m.soc);
    let a = schedule_sessions(&m.soc, &c).unwrap();
    let same = report_compare(&a, &a).unwrap();
    assert_eq!(same.delta, 0);
    assert_eq!(same.verdict, "tie (delta 0)");
    let serial = schedule_serial(&m.soc, &c).unwrap();
    let cmp = report_compare(&a, &serial).unwrap();
    assert!(cmp.delta >= 0);

    let mut other = m.soc.clone();
    other.cores.truncate(1);
    let b = schedule_sessions(&other, &c).unwrap();
    let e = report_compare(&a, &b).unwrap_err();
    assert!(e.only_b.is_empty() && !e.only_a.is_empty());
}

fn stk() -> Proc {
    let mut p = Proc::new(env!("CARGO_BIN_EXE_stk"));
    for v in [
        "STK_MANIFEST",
        "STK_OUT",
        "STK_PINS",
        "STK_POWER",
        "STK_SEED",
        "STK_MERGING",
    ] {
        p.env_remove(v);
    }
    p
}

#[test]
fn cli_subcommands_and_exit_codes() {
    let d = tempfile::tempdir().unwrap();
    let m = small_soc(d.path(), "memory ram words=4 width=1;\n");
    for sub in ["parse", "schedule", "insert", "translate", "bist"] {
        let out = d.path().join(sub);
        let r = stk()
            .args([sub, "--manifest"])
            .arg(&m)
            .arg("--out")
            .arg(&out)
            .output()
            .unwrap();
        assert!(r.status.success(), "{sub}: {}", String::from_utf8_lossy(&r.stderr));
        assert!(String::from_utf8_lossy(&r.stdout).starts_with("soc small:"));
    }
    assert!(d.path().join("translate/vectors/session0.vec").exists());
    assert!(!d.path().join("schedule/vectors").exists());
    assert!(d.path().join("bist/bist/coverage.txt").exists());

    let r = stk()
        .arg("schedule")
        .env("STK_MANIFEST", &m)
        .env("STK_OUT", d.path().join("env"))
        .env("STK_PINS", "2")
        .output()
        .unwrap();
    assert!(!r.status.success());
    assert!(String::from_utf8_lossy(&r.stderr).contains("stage schedule"));
    assert!(d.path().join("env").join(FAILED_MARKER).exists());

    let r = stk()
        .args(["all", "--manifest", "/nonexistent.soc", "--out"])
        .arg(d.path().join("x"))
        .output()
        .unwrap();
    assert!(!r.status.success());
}
