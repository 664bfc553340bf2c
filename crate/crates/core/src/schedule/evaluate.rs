// SPDX-License-Identifier: Apache-2.0

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::Serialize;

use super::{count_control_pins, member_timing, TestSchedule};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SessionSummary {
    pub index: usize,
    pub entities: Vec<String>,
    pub widths: Vec<u32>,
    pub cycles: u64,
    pub control_pins: u32,
    pub data_pins: u32,
    pub io_used: u32,
    pub power: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScheduleReport {
    pub total_cycles: u64,
    pub sessions: Vec<SessionSummary>,
    pub violations: Vec<String>,
}

impl ScheduleReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Recomputes times, pin use and power of every session from the entity
/// models and reports anything that disagrees with the stored schedule or
/// breaks a constraint.
pub fn evaluate_schedule(s: &TestSchedule) -> ScheduleReport {
    let mut v = Vec::new();
    let mut seen = alloc::vec![0usize; s.entities.len()];
    let mut summaries = Vec::with_capacity(s.sessions.len());
    let mut total = 0u64;

    for (pos, sess) in s.sessions.iter().enumerate() {
        let tag = format!("session {pos}");
        if sess.index != pos {
            v.push(format!("{tag}: stored index {}", sess.index));
        }
        let mut members = Vec::with_capacity(sess.assignments.len());
        let mut options = Vec::with_capacity(sess.assignments.len());
        let mut cores = BTreeSet::new();
        for a in &sess.assignments {
            let Some(e) = s.entities.get(a.entity) else {
                v.push(format!("{tag}: unknown entity index {}", a.entity));
                continue;
            };
            seen[a.entity] += 1;
            if !cores.insert(e.core.as_str()) {
                v.push(format!("{tag}: two tests of core {} in one session", e.core));
            }
            if !e.options.contains(&a.option) {
                v.push(format!("{tag}: {} uses a width option it does not offer", e.name));
            }
            if a.wires.len() as u32 != a.option.data_pins {
                v.push(format!(
                    "{tag}: {} has {} wires for {} data pins",
                    e.name,
                    a.wires.len(),
                    a.option.data_pins
                ));
            }
            members.push(a.entity);
            options.push(a.option);
        }

        let mut pins = BTreeSet::new();
        for b in &sess.pins {
            if !pins.insert(b.pin) {
                v.push(format!("{tag}: pin {} bound twice", b.pin));
            }
            if b.pin >= s.pin_budget {
                v.push(format!("{tag}: pin {} beyond budget {}", b.pin, s.pin_budget));
            }
        }
        let mut wires = BTreeSet::new();
        for a in &sess.assignments {
            for &w in &a.wires {
                if !wires.insert(w) {
                    v.push(format!("{tag}: wire {w} assigned twice"));
                }
                if !pins.contains(&w) {
                    v.push(format!("{tag}: wire {w} has no pin binding"));
                }
            }
        }

        let valid_members: Vec<usize> = members.iter().copied().filter(|&i| i < s.entities.len()).collect();
        let control = count_control_pins(valid_members.iter().map(|&i| &s.entities[i]), &s.sharing).total();
        let data: u32 = options.iter().map(|o| o.data_pins).sum();
        let io = s.controller_pins + control + data;
        if io > s.pin_budget {
            v.push(format!("{tag}: uses {io} pins, budget is {}", s.pin_budget));
        }
        if io != sess.io_used {
            v.push(format!("{tag}: io_used {} but recomputed {io}", sess.io_used));
        }
        let expected_bindings = io - s.controller_pins.saturating_sub(2).min(io);
        if sess.pins.len() as u32 != expected_bindings && valid_members.len() == members.len() {
            v.push(format!(
                "{tag}: {} pin bindings, expected {expected_bindings}",
                sess.pins.len()
            ));
        }

        let power: f64 = valid_members.iter().map(|&i| s.entities[i].power).sum();
        if let Some(cap) = s.power_cap {
            if power > cap {
                v.push(format!("{tag}: power {power} above cap {cap}"));
            }
        }
        if (power - sess.power_used).abs() > 1e-9 {
            v.push(format!("{tag}: power_used {} but recomputed {power}", sess.power_used));
        }

        let cycles = if valid_members.len() == members.len() {
            let timing = member_timing(&s.entities, &members, &options, &s.sharing);
            for (a, t) in sess.assignments.iter().zip(&timing) {
                if a.cycles != t.0 {
                    v.push(format!(
                        "{tag}: {} stored {} cycles, recomputed {}",
                        s.entities[a.entity].name, a.cycles, t.0
                    ));
                }
            }
            timing.iter().map(|t| t.0).max().unwrap_or(0)
        } else {
            sess.session_time
        };
        if cycles != sess.session_time {
            v.push(format!(
                "{tag}: session_time {} but recomputed {cycles}",
                sess.session_time
            ));
        }
        total += cycles;

        summaries.push(SessionSummary {
            index: pos,
            entities: valid_members.iter().map(|&i| s.entities[i].name.clone()).collect(),
            widths: options.iter().map(|o| o.width).collect(),
            cycles,
            control_pins: control,
            data_pins: data,
            io_used: io,
            power,
        });
    }

    for (i, &n) in seen.iter().enumerate() {
        if n != 1 {
            v.push(format!("entity {} scheduled {n} times", s.entities[i].name));
        }
    }
    if total != s.total_cycles {
        v.push(format!("total_cycles {} but sessions sum to {total}", s.total_cycles));
    }

    ScheduleReport {
        total_cycles: total,
        sessions: summaries,
        violations: v,
    }
}
