// SPDX-License-Identifier: Apache-2.0

use alloc::vec;
use alloc::vec::Vec;

use super::*;
use crate::testutil::{dsc, jpeg, tv, usb};

fn fixed(name: &str, core: &str, cycles: u64, data_pins: u32) -> TestEntity {
    TestEntity {
        name: name.into(),
        core: core.into(),
        kind: EntityKind::Functional,
        patterns: cycles,
        capture: CaptureMode::Normal,
        control_pins: vec![ControlPin::new("clk", ControlKind::Clock)],
        options: vec![WidthOption {
            width: data_pins,
            data_pins,
            access: Access::Direct,
            si: 0,
            so: 0,
            cycles,
        }],
        power: 1.0,
        pi: data_pins,
        po: 0,
    }
}

#[test]
fn control_io_breakdown() {
    let soc = dsc();
    let c = Constraints::default();
    let es = build_entities(&soc, &c).unwrap();
    let mut cores: Vec<TestEntity> = Vec::new();
    for core in &soc.cores {
        // all control pins of each core, as in a full-chip test
        let mut e = es.iter().find(|e| e.core == core.name).unwrap().clone();
        e.control_pins = core.control_pins.clone();
        cores.push(e);
    }
    let none = count_control_pins(&cores, &SharingPolicy::none());
    assert_eq!(
        (none.clock, none.reset, none.test_enable, none.scan_enable),
        (6, 4, 7, 2)
    );
    assert_eq!(none.total(), 19);
    assert_eq!(count_control_pins(&cores, &SharingPolicy::default()).total(), 18);
    let empty = io_accounting([], &SharingPolicy::default(), 80, 2).unwrap();
    assert_eq!(empty.control_pins_used, 0);
    assert_eq!(empty.tam_pins_available, 78);
}

#[test]
fn lockstep_plan_matches_formula() {
    assert_eq!(ShiftPlan::solo(577, 576).cycles(229), 132_938);
    assert_eq!(ShiftPlan::lockstep(5).cycles(3), 5 + 2 * 5 + 3 + 5);
    assert_eq!(ShiftPlan::solo(3, 3).cycles(0), 0);
}

#[test]
fn max_rule_and_forced_serialization() {
    let es = vec![fixed("a", "a", 100, 10), fixed("b", "b", 60, 10)];
    let c = Constraints::default();
    let s = schedule_entities(es.clone(), &c).unwrap();
    assert_eq!(s.sessions.len(), 1);
    assert_eq!(s.total_cycles, 100);

    let tight = Constraints {
        pin_budget: 2 + 1 + 10,
        ..Constraints::default()
    };
    let s = schedule_entities(es, &tight).unwrap();
    assert_eq!(s.sessions.len(), 2);
    assert_eq!(s.total_cycles, 160);
    assert!(evaluate_schedule(&s).is_valid());
}

#[test]
fn dsc_three_sessions_beat_serial() {
    let soc = dsc();
    let c = Constraints::for_soc(&soc);
    let h = schedule_sessions(&soc, &c).unwrap();
    let s = schedule_serial(&soc, &c).unwrap();
    let rh = evaluate_schedule(&h);
    let rs = evaluate_schedule(&s);
    assert!(rh.is_valid(), "{:?}", rh.violations);
    assert!(rs.is_valid(), "{:?}", rs.violations);
    assert_eq!(h.sessions.len(), 3);
    assert_eq!(s.sessions.len(), 4);
    assert!(rh.total_cycles < rs.total_cycles);
    let x = exhaustive_schedule(&soc, &c).unwrap();
    assert!(x.total_cycles <= h.total_cycles);
    assert!(h.total_cycles * 10 <= x.total_cycles * 11);
}

#[test]
fn allocation_matches_brute_force_on_dsc_blocks() {
    let soc = dsc();
    let c = Constraints::for_soc(&soc);
    let es = build_entities(&soc, &c).unwrap();
    for p in set_partitions(es.len()) {
        for block in p {
            let a = allocate(&es, &block, &c).map(|a| a.time);
            let b = best_session(&es, &block, &c).map(|b| b.1);
            assert_eq!(a, b, "block {block:?}");
        }
    }
}

#[test]
fn bell_numbers() {
    let counts: Vec<usize> = (0..7).map(|n| set_partitions(n).len()).collect();
    assert_eq!(counts, vec![1, 1, 2, 5, 15, 52, 203]);
}

#[test]
fn overlapping_wires_are_flagged() {
    let soc = dsc();
    let c = Constraints::for_soc(&soc);
    let mut h = schedule_sessions(&soc, &c).unwrap();
    let sess = h.sessions.iter_mut().find(|s| s.assignments.len() > 1).unwrap();
    let w = sess.assignments[0].wires[0];
    sess.assignments[1].wires[0] = w;
    assert!(evaluate_schedule(&h)
        .violations
        .iter()
        .any(|v| v.contains("assigned twice")));
}

#[test]
fn empty_schedule_totals_zero() {
    let s = schedule_entities(Vec::new(), &Constraints::default()).unwrap();
    let r = evaluate_schedule(&s);
    assert_eq!(r.total_cycles, 0);
    assert!(r.is_valid());
}

#[test]
fn jpeg_needs_serialized_access_at_80_pins() {
    let c = Constraints::default();
    let soc = SocDescription::new("j", vec![jpeg()]);
    let es = build_entities(&soc, &c).unwrap();
    assert!(es[0].options.iter().all(|o| o.access == Access::Wrapper));
    let direct = Constraints {
        functional: FunctionalAccess::DirectOnly,
        ..c
    };
    assert!(matches!(
        build_entities(&soc, &direct),
        Err(ScheduleError::InfeasibleEntity { .. })
    ));
}

#[test]
fn tiny_budget_is_infeasible() {
    let soc = SocDescription::new("u", vec![usb()]);
    let c = Constraints {
        pin_budget: 5,
        ..Constraints::default()
    };
    assert!(schedule_sessions(&soc, &c).is_err());
    assert!(!feasibility_notes(&soc, &c).is_empty());
}

#[test]
fn session_pins_are_laid_out_in_order() {
    let soc = SocDescription::new("t", vec![tv()]);
    let s = schedule_sessions(&soc, &Constraints::default()).unwrap();
    for sess in &s.sessions {
        assert_eq!(sess.role_of(0), Some(&PinRole::TestMode));
        assert_eq!(sess.role_of(1), Some(&PinRole::SessionIn));
        let pins: Vec<u32> = sess.pins.iter().map(|b| b.pin).collect();
        let expect: Vec<u32> = (0..sess.io_used).collect();
        assert_eq!(pins, expect);
    }
}
