// SPDX-License-Identifier: Apache-2.0

//! Human-readable reports and their machine-readable twins (one JSON record
//! per line).

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde_json::json;
use stk_core::dft::AreaReport;
use stk_core::march::{format_fault, CoverageReport, VerifyReport};
use stk_core::model::ValidationReport;
use stk_core::schedule::{evaluate_schedule, Access, ScheduleMode, TestIoBudget, TestSchedule};
use stk_core::wrapper::{WidthPoint, WrapperConfig};

/// `1234567` as `1,234,567`.
pub fn group(n: u64) -> String {
    let digits = n.to_string();
    let mut out = String::with_capacity(digits.len() + digits.len() / 3);
    for (i, c) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i).is_multiple_of(3) {
            out.push(',');
        }
        out.push(c);
    }
    out
}

/// Right-aligns columns whose cells all start with a digit, left-aligns
/// the rest.
pub fn table(head: &[&str], rows: &[Vec<String>]) -> String {
    let n = head.len();
    let mut w: Vec<usize> = head.iter().map(|h| h.len()).collect();
    let mut numeric = vec![true; n];
    for r in rows {
        for (i, cell) in r.iter().enumerate().take(n) {
            w[i] = w[i].max(cell.chars().count());
            if cell.chars().next().is_some_and(|c| !c.is_ascii_digit()) {
                numeric[i] = false;
            }
        }
    }
    let line = |cells: &mut dyn Iterator<Item = &str>| {
        let mut s = String::new();
        for (i, c) in cells.enumerate() {
            if i > 0 {
                s.push_str("  ");
            }
            if numeric[i] {
                let _ = write!(s, "{c:>width$}", width = w[i]);
            } else {
                let _ = write!(s, "{c:<width$}", width = w[i]);
            }
        }
        s.truncate(s.trim_end().len());
        s.push('\n');
        s
    };
    let mut out = line(&mut head.iter().copied());
    let rule: Vec<String> = w.iter().map(|&k| "-".repeat(k)).collect();
    out.push_str(&line(&mut rule.iter().map(String::as_str)));
    for r in rows {
        out.push_str(&line(&mut r.iter().map(String::as_str)));
    }
    out
}

fn jsonl(records: impl IntoIterator<Item = serde_json::Value>) -> String {
    let mut s = String::new();
    for r in records {
        s.push_str(&r.to_string());
        s.push('\n');
    }
    s
}

pub fn validation_text(reports: &[ValidationReport], warnings: &[String], notes: &[String]) -> String {
    let mut s = String::from("validation\n\n");
    let rows: Vec<Vec<String>> = reports
        .iter()
        .map(|r| {
            vec![
                r.core.clone(),
                if r.is_valid() { "valid" } else { "INVALID" }.into(),
                r.violations.len().to_string(),
                r.notes.len().to_string(),
            ]
        })
        .collect();
    s.push_str(&table(&["core", "status", "violations", "notes"], &rows));
    for r in reports {
        for v in &r.violations {
            let _ = writeln!(s, "violation  {}: {v}", r.core);
        }
        for n in &r.notes {
            let _ = writeln!(s, "note       {}: {n}", r.core);
        }
    }
    for w in warnings {
        let _ = writeln!(s, "warning    {w}");
    }
    for n in notes {
        let _ = writeln!(s, "soc        {n}");
    }
    s
}

pub fn validation_records(reports: &[ValidationReport], warnings: &[String], notes: &[String]) -> String {
    let mut recs: Vec<serde_json::Value> = reports
        .iter()
        .map(|r| {
            json!({
                "record": "validation",
                "core": r.core,
                "valid": r.is_valid(),
                "violations": r.violations.iter().map(|v| v.to_string()).collect::<Vec<_>>(),
                "notes": r.notes,
            })
        })
        .collect();
    recs.extend(warnings.iter().map(|w| json!({"record": "warning", "text": w})));
    recs.extend(notes.iter().map(|n| json!({"record": "soc_note", "text": n})));
    jsonl(recs)
}

/// Per-core wrapper design: the Pareto widths and the configuration the
/// schedule picked.
pub struct WrapperTable<'a> {
    pub core: &'a str,
    pub pareto: &'a [WidthPoint],
    pub chosen: Option<&'a WrapperConfig>,
}

pub fn wrapper_text(tables: &[WrapperTable<'_>]) -> String {
    let mut s = String::from("wrappers\n");
    for t in tables {
        let _ = writeln!(s, "\ncore {}", t.core);
        if t.pareto.is_empty() {
            s.push_str("no scan patterns\n");
        } else {
            let rows: Vec<Vec<String>> = t
                .pareto
                .iter()
                .map(|p| {
                    let mark = t.chosen.is_some_and(|c| c.width == p.width);
                    vec![
                        p.width.to_string(),
                        p.si.to_string(),
                        p.so.to_string(),
                        group(p.cycles),
                        if mark { "*".into() } else { String::new() },
                    ]
                })
                .collect();
            s.push_str(&table(&["width", "si", "so", "cycles", "chosen"], &rows));
        }
        if let Some(cfg) = t.chosen {
            let _ = writeln!(
                s,
                "chains at width {} (wbr in chains: {}):",
                cfg.width, cfg.includes_wbr_in_chains
            );
            let rows: Vec<Vec<String>> = cfg
                .chains
                .iter()
                .enumerate()
                .map(|(i, ch)| {
                    let segs: Vec<String> = ch
                        .segments
                        .iter()
                        .map(|g| format!("c{}[{}+{}]", g.chain, g.start, g.len))
                        .collect();
                    vec![
                        format!("w{i}"),
                        ch.inputs.len().to_string(),
                        ch.internal_len().to_string(),
                        ch.outputs.len().to_string(),
                        segs.join(" "),
                    ]
                })
                .collect();
            s.push_str(&table(&["chain", "in", "internal", "out", "segments"], &rows));
            for w in &cfg.warnings {
                let _ = writeln!(s, "warning: {w}");
            }
        }
    }
    s
}

pub fn wrapper_records(tables: &[WrapperTable<'_>]) -> String {
    let mut recs = Vec::new();
    for t in tables {
        for p in t.pareto {
            recs.push(json!({
                "record": "pareto",
                "core": t.core,
                "width": p.width,
                "si": p.si,
                "so": p.so,
                "cycles": p.cycles,
            }));
        }
        if let Some(cfg) = t.chosen {
            for (i, ch) in cfg.chains.iter().enumerate() {
                recs.push(json!({
                    "record": "wrapper_chain",
                    "core": t.core,
                    "width": cfg.width,
                    "chain": i,
                    "inputs": ch.inputs.len(),
                    "internal": ch.internal_len(),
                    "outputs": ch.outputs.len(),
                    "segments": ch.segments.iter().map(|g| [g.chain as u32, g.start, g.len]).collect::<Vec<_>>(),
                }));
            }
        }
    }
    jsonl(recs)
}

fn mode_label(m: ScheduleMode) -> &'static str {
    match m {
        ScheduleMode::SessionBased => "session-based",
        ScheduleMode::Serial => "serial",
        ScheduleMode::NonSession => "non-session",
    }
}

fn access_label(a: Access) -> &'static str {
    match a {
        Access::Wrapper => "wrapper",
        Access::Direct => "direct",
        Access::Bist => "bist",
    }
}

pub fn schedule_text(s: &TestSchedule, io: Option<&TestIoBudget>) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{} schedule: {} sessions, {} cycles",
        mode_label(s.mode),
        s.sessions.len(),
        group(s.total_cycles)
    );
    let cap = s.power_cap.map_or("none".to_string(), |c| c.to_string());
    let _ = writeln!(
        out,
        "pin budget {}, controller pins {}, power cap {}, shared SE {}, shared TE {}\n",
        s.pin_budget, s.controller_pins, cap, s.sharing.share_se, s.sharing.share_te
    );
    let mut rows = Vec::new();
    for sess in &s.sessions {
        for a in &sess.assignments {
            let e = &s.entities[a.entity];
            rows.push(vec![
                sess.index.to_string(),
                e.name.clone(),
                access_label(a.option.access).into(),
                a.option.width.to_string(),
                a.option.data_pins.to_string(),
                group(a.cycles),
            ]);
        }
        rows.push(vec![
            String::new(),
            format!("session {} total", sess.index),
            String::new(),
            String::new(),
            format!("{} io", sess.io_used),
            group(sess.session_time),
        ]);
    }
    out.push_str(&table(
        &["session", "entity", "access", "width", "pins", "cycles"],
        &rows,
    ));
    if let Some(io) = io {
        let c = &io.control;
        let _ = writeln!(
            out,
            "\ncontrol IOs {} (clock {}, reset {}, test enable {}, scan enable {}); controller pins {}; TAM pins left {}",
            c.total(),
            c.clock,
            c.reset,
            c.test_enable,
            c.scan_enable,
            io.controller_pins,
            io.tam_pins_available
        );
    }
    let r = evaluate_schedule(s);
    if r.is_valid() {
        out.push_str("\nevaluation: valid\n");
    } else {
        for v in &r.violations {
            let _ = writeln!(out, "\nviolation: {v}");
        }
    }
    out
}

pub fn schedule_records(s: &TestSchedule) -> String {
    let mut recs = Vec::new();
    for sess in &s.sessions {
        for a in &sess.assignments {
            let e = &s.entities[a.entity];
            recs.push(json!({
                "record": "assignment",
                "mode": mode_label(s.mode),
                "session": sess.index,
                "entity": e.name,
                "access": access_label(a.option.access),
                "width": a.option.width,
                "data_pins": a.option.data_pins,
                "cycles": a.cycles,
                "wires": a.wires,
            }));
        }
        recs.push(json!({
            "record": "session",
            "mode": mode_label(s.mode),
            "session": sess.index,
            "cycles": sess.session_time,
            "io_used": sess.io_used,
            "power": sess.power_used,
            "pins": sess.pins.iter().map(|b| b.pin).collect::<Vec<_>>(),
        }));
    }
    recs.push(json!({
        "record": "schedule",
        "mode": mode_label(s.mode),
        "sessions": s.sessions.len(),
        "total_cycles": s.total_cycles,
    }));
    jsonl(recs)
}

/// One bar per entity over `cols` columns of schedule time.
pub fn gantt(s: &TestSchedule, cols: usize) -> String {
    let total = s.total_cycles.max(1);
    let cols = cols.max(1) as u64;
    let at = |t: u64| (t * cols).div_ceil(total) as usize;
    let label = s.entities.iter().map(|e| e.name.len()).max().unwrap_or(0).max(7);
    let mut out = format!("gantt ({} cycles over {} columns)\n", group(s.total_cycles), cols);
    let mut marks = vec![b' '; cols as usize];
    let mut start = 0u64;
    let mut rows = Vec::new();
    for sess in &s.sessions {
        let c0 = at(start).min(cols as usize - 1);
        marks[c0] = b'0' + (sess.index % 10) as u8;
        for a in &sess.assignments {
            let from = at(start);
            let to = at(start + a.cycles).max(from + 1).min(cols as usize);
            let mut bar = vec![b' '; cols as usize];
            bar[from.min(cols as usize - 1)..to].fill(b'#');
            rows.push((s.entities[a.entity].name.clone(), bar));
        }
        start += sess.session_time;
    }
    let _ = writeln!(out, "{:label$} |{}|", "session", String::from_utf8_lossy(&marks));
    for (name, bar) in rows {
        let _ = writeln!(out, "{name:label$} |{}|", String::from_utf8_lossy(&bar));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("schedules cover different entities: {only_a:?} vs {only_b:?}")]
pub struct CompareError {
    pub only_a: Vec<String>,
    pub only_b: Vec<String>,
}

/// Which of two schedules of the same SOC is shorter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Comparison {
    pub text: String,
    pub verdict: String,
    /// `b.total - a.total`.
    pub delta: i128,
}

pub fn report_compare(a: &TestSchedule, b: &TestSchedule) -> Result<Comparison, CompareError> {
    let names = |s: &TestSchedule| s.entities.iter().map(|e| e.name.clone()).collect::<BTreeSet<_>>();
    let (na, nb) = (names(a), names(b));
    if na != nb {
        return Err(CompareError {
            only_a: na.difference(&nb).cloned().collect(),
            only_b: nb.difference(&na).cloned().collect(),
        });
    }
    let (la, lb) = if a.mode == b.mode {
        ("A".to_string(), "B".to_string())
    } else {
        (mode_label(a.mode).to_string(), mode_label(b.mode).to_string())
    };
    let delta = i128::from(b.total_cycles) - i128::from(a.total_cycles);
    let verdict = match delta {
        0 => "tie (delta 0)".to_string(),
        d if d > 0 => format!("{la} wins"),
        _ => format!("{lb} wins"),
    };
    let mut s = String::from("schedule comparison\n\n");
    s.push_str(&table(
        &["", &la, &lb],
        &[
            vec!["total cycles".into(), group(a.total_cycles), group(b.total_cycles)],
            vec![
                "sessions".into(),
                a.sessions.len().to_string(),
                b.sessions.len().to_string(),
            ],
        ],
    ));
    for (label, sch) in [(&la, a), (&lb, b)] {
        let _ = writeln!(s, "\n{label} sessions:");
        for sess in &sch.sessions {
            let names: Vec<&str> = sess
                .assignments
                .iter()
                .map(|x| sch.entities[x.entity].name.as_str())
                .collect();
            let _ = writeln!(
                s,
                "  {}: {} cycles  [{}]",
                sess.index,
                group(sess.session_time),
                names.join(", ")
            );
        }
    }
    let sign = if delta < 0 { "-" } else { "" };
    let _ = writeln!(
        s,
        "\ndelta ({lb} - {la}): {sign}{} cycles",
        group(delta.unsigned_abs() as u64)
    );
    let _ = writeln!(s, "verdict: {verdict}");
    Ok(Comparison {
        text: s,
        verdict,
        delta,
    })
}

pub fn coverage_text(reports: &[CoverageReport], verify: Option<&VerifyReport>) -> String {
    let mut s = String::from("memory BIST coverage\n\n");
    let mut rows = Vec::new();
    for r in reports {
        for c in &r.classes {
            rows.push(vec![
                r.memory.clone(),
                format!("{}x{}", r.words, r.width),
                c.class.name().into(),
                group(c.detected),
                group(c.total),
                format!("{:.2}%", 100.0 * c.coverage()),
            ]);
        }
    }
    s.push_str(&table(
        &["memory", "shape", "model", "detected", "total", "coverage"],
        &rows,
    ));
    for r in reports {
        for c in &r.classes {
            for f in &c.escapes {
                let _ = writeln!(s, "escape {} {}: {}", r.memory, c.class.name(), format_fault(f));
            }
        }
    }
    if let Some(v) = verify {
        let _ = writeln!(
            s,
            "\nfabric verification: {} memories match the March trace op for op; done after {} cycles",
            v.memories.len(),
            group(v.cycles)
        );
    }
    s
}

pub fn coverage_records(reports: &[CoverageReport]) -> String {
    jsonl(reports.iter().flat_map(|r| {
        r.classes.iter().map(move |c| {
            json!({
                "record": "coverage",
                "algorithm": r.algorithm,
                "memory": r.memory,
                "words": r.words,
                "width": r.width,
                "model": c.class.name(),
                "detected": c.detected,
                "total": c.total,
            })
        })
    }))
}

pub fn area_text(a: &AreaReport) -> String {
    let rows = vec![
        vec!["wrapper boundary cells".into(), group(a.wbr_cells), group(a.wbr_area)],
        vec!["test controller".into(), String::new(), group(a.controller_area)],
        vec!["TAM multiplexer".into(), String::new(), group(a.tam_mux_area)],
        vec!["total".into(), String::new(), group(a.total)],
    ];
    let mut s = String::from("test area (NAND2 equivalents)\n\n");
    s.push_str(&table(&["item", "cells", "area"], &rows));
    let _ = writeln!(
        s,
        "\nchip gates {}; overhead {:.4}%",
        group(a.chip_gates),
        100.0 * a.overhead_fraction
    );
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grouping_digits() {
        assert_eq!(group(0), "0");
        assert_eq!(group(999), "999");
        assert_eq!(group(1000), "1,000");
        assert_eq!(group(4_371_194), "4,371,194");
    }

    #[test]
    fn table_aligns_columns() {
        let t = table(
            &["a", "bb"],
            &[vec!["xyz".into(), "1".into()], vec!["q".into(), "100".into()]],
        );
        assert_eq!(t, "a     bb\n---  ---\nxyz    1\nq    100\n");
        let t = table(
            &["n", "s"],
            &[vec!["12".into(), "x".into()], vec!["3".into(), "yy".into()]],
        );
        assert_eq!(t, " n  s\n--  --\n12  x\n 3  yy\n");
    }
}
