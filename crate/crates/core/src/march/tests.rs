// SPDX-License-Identifier: Apache-2.0

use super::*;
use crate::netlist::{validate_netlist, Conn, Instance};

fn mem(name: &str, words: u32, width: u32) -> MemoryConfig {
    MemoryConfig::new(name, words, width)
}

#[test]
fn mats_plus_parses() {
    let m = parse_march("{*(w0); ^(r0,w1); v(r1,w0)}").unwrap();
    assert_eq!(m.elements.len(), 3);
    assert_eq!(m.op_count(), 5);
    assert_eq!(m.elements[2].order, AddressOrder::Down);
    assert_eq!(m.elements[1].ops, vec![MarchOp::R0, MarchOp::W1]);
}

#[test]
fn march_c_minus_has_ten_ops() {
    let m = march_c_minus();
    assert_eq!(m.elements.len(), 6);
    assert_eq!(m.op_count(), 10);
    assert_eq!(m.name, "March C-");
}

#[test]
fn unicode_orders_are_aliases() {
    let a = parse_march("{ ⇕(w0); ⇑(r0,w1); ⇓(r1,w0) }").unwrap();
    let b = parse_march("{*(w0); ^(r0,w1); v(r1,w0)}").unwrap();
    assert_eq!(a, b);
}

#[test]
fn parse_errors() {
    assert_eq!(parse_march("{}"), Err(MarchError::NoElements));
    assert!(parse_march("{}").unwrap_err().to_string().contains("elements nonempty"));
    assert_eq!(parse_march("{^(w0); v()}"), Err(MarchError::EmptyElement(1)));
    assert!(matches!(parse_march("{^(w2)}"), Err(MarchError::UnknownOp { op, .. }) if op == "w2"));
    assert!(matches!(parse_march("^(w0)"), Err(MarchError::Syntax { .. })));
    assert!(matches!(parse_march("{x(w0)}"), Err(MarchError::Syntax { .. })));
    assert!(matches!(parse_march("{^(w0)} extra"), Err(MarchError::Syntax { .. })));
}

#[test]
fn serialization_round_trips() {
    for m in [mats_plus(), march_c_minus(), parse_march("{^(r1)}").unwrap()] {
        let text = m.to_string();
        assert_eq!(parse_march(&text).unwrap(), m, "{text}");
    }
    assert_eq!(mats_plus().to_string(), MATS_PLUS);
}

#[test]
fn test_time_is_words_times_ops() {
    assert_eq!(bist_test_time(&march_c_minus(), &mem("m", 16, 1)), 160);
    assert_eq!(bist_test_time(&mats_plus(), &mem("m", 8, 1)), 40);
    assert_eq!(
        bist_test_time(&parse_march("{^(w0)}").unwrap(), &mem("m", 1024, 8)),
        1024
    );
}

#[test]
fn fault_free_memories_pass() {
    for m in [mats_plus(), march_c_minus()] {
        for (w, b) in [(1, 1), (8, 1), (16, 4), (5, 3)] {
            let run = run_march(&m, &mem("m", w, b), None);
            assert_eq!(run.outcome, MarchOutcome::Pass);
            assert_eq!(run.cycles, bist_test_time(&m, &mem("m", w, b)));
        }
    }
}

#[test]
fn mats_plus_catches_saf0_in_last_element() {
    let out = simulate_march(&mats_plus(), &mem("m", 8, 1), Some(Fault::stuck((3, 0), false)));
    assert_eq!(
        out,
        MarchOutcome::Fail(FailPoint {
            element: 2,
            op: 0,
            address: 3
        })
    );
}

#[test]
fn march_c_minus_catches_rising_coupling() {
    let f = Fault::coupling((0, 0), true, (5, 0), true);
    let out = simulate_march(&march_c_minus(), &mem("m", 8, 1), Some(f));
    assert!(matches!(out, MarchOutcome::Fail(_)), "{out:?}");
}

#[test]
fn saf1_cell_starts_high_and_stays() {
    let m = mem("m", 4, 2);
    let mut ram = FaultyMemory::new(&m, Some(Fault::stuck((2, 1), true)));
    assert_eq!(ram.read(2), 0b10);
    ram.write(2, 0);
    assert_eq!(ram.read(2), 0b10);
    ram.write(1, 0b11);
    assert_eq!(ram.read(1), 0b11);
}

#[test]
fn transition_fault_blocks_one_direction() {
    let m = mem("m", 2, 1);
    let mut ram = FaultyMemory::new(&m, Some(Fault::transition((1, 0), true)));
    ram.write(1, 1);
    assert_eq!(ram.read(1), 0);
    let mut ram = FaultyMemory::new(&m, Some(Fault::transition((1, 0), false)));
    ram.write(1, 1);
    ram.write(1, 0);
    assert_eq!(ram.read(1), 1);
}

#[test]
fn coupling_fires_only_on_its_transition() {
    let m = mem("m", 4, 1);
    let mut ram = FaultyMemory::new(&m, Some(Fault::coupling((0, 0), false, (3, 0), true)));
    ram.write(0, 1);
    assert_eq!(ram.read(3), 0);
    ram.write(0, 1);
    assert_eq!(ram.read(3), 0);
    ram.write(0, 0);
    assert_eq!(ram.read(3), 1);
}

#[test]
fn write_only_algorithm_detects_nothing() {
    let m = parse_march("{*(w0)}").unwrap();
    let r = fault_coverage(&m, &mem("m", 8, 2), &[FaultClass::Saf]).unwrap();
    assert_eq!(r.classes[0].detected, 0);
    assert_eq!(r.classes[0].total, 32);
    assert_eq!(r.classes[0].coverage(), 0.0);
}

#[test]
fn mats_plus_covers_saf_on_16x4() {
    let r = fault_coverage(&mats_plus(), &mem("m", 16, 4), &[FaultClass::Saf]).unwrap();
    assert!(r.classes[0].complete(), "{:?}", r.classes[0].escapes);
    assert_eq!(r.classes[0].total, 128);
}

#[test]
fn mats_plus_misses_some_transition_faults() {
    let r = fault_coverage(&mats_plus(), &mem("m", 8, 1), &[FaultClass::Tf]).unwrap();
    assert!(!r.classes[0].complete());
}

#[test]
fn march_c_minus_covers_everything_on_16x1() {
    let classes = [FaultClass::Saf, FaultClass::Tf, FaultClass::CfId];
    let r = fault_coverage(&march_c_minus(), &mem("m", 16, 1), &classes).unwrap();
    for c in &r.classes {
        assert!(c.complete(), "{:?}: {:?}", c.class, c.escapes);
    }
    assert_eq!(r.class(FaultClass::CfId).unwrap().total, 4 * 16 * 15);
}

#[test]
fn coverage_guard() {
    let err = fault_coverage(&march_c_minus(), &mem("m", 64, 8), &[FaultClass::CfId]).unwrap_err();
    assert!(matches!(err, MarchError::TooManyFaults { .. }));
    assert_eq!(
        fault_count(&mem("m", 4, 2), FaultClass::CfId),
        enumerate_faults(&mem("m", 4, 2), FaultClass::CfId).len() as u64
    );
}

#[test]
fn trace_matches_time_model() {
    let m = march_c_minus();
    let t = march_trace(&m, &mem("m", 4, 3));
    assert_eq!(t.len(), 40);
    assert_eq!(
        t[0],
        RamOp {
            write: true,
            addr: 0,
            data: 0
        }
    );
    assert_eq!(
        t[5],
        RamOp {
            write: true,
            addr: 0,
            data: 0b111
        }
    );
    // First op of the first descending element.
    assert_eq!(t[20].addr, 3);
}

#[test]
fn minimal_fabric() {
    let f = generate_bist(&[mem("ram", 8, 1)], &mats_plus(), GroupingPolicy::default()).unwrap();
    assert_eq!(f.sequencers.len(), 1);
    assert_eq!(f.tpgs.len(), 1);
    assert_eq!(f.cycles, 42);
    assert!(
        validate_netlist(&f.netlist()).is_empty(),
        "{:?}",
        validate_netlist(&f.netlist())
    );
    let r = verify_fabric(&f, &[mem("ram", 8, 1)], &mats_plus()).unwrap();
    assert_eq!(r.memories, vec![("ram".into(), 40)]);
}

#[test]
fn fabric_groups_by_shape() {
    let mems = [mem("a", 16, 4), mem("b", 8, 1), mem("c", 16, 4)];
    let f = generate_bist(&mems, &march_c_minus(), GroupingPolicy::PerShape).unwrap();
    assert_eq!(f.sequencers.len(), 2);
    assert_eq!(f.tpgs.len(), 3);
    assert_eq!(f.tpgs[0].sequencer, f.tpgs[2].sequencer);
    assert_ne!(f.tpgs[0].sequencer, f.tpgs[1].sequencer);
    assert_eq!(f.cycles, 162);
    assert!(validate_netlist(&f.netlist()).is_empty());
    verify_fabric(&f, &mems, &march_c_minus()).unwrap();

    let per = generate_bist(&mems, &march_c_minus(), GroupingPolicy::PerMemory).unwrap();
    assert_eq!(per.sequencers.len(), 3);
    verify_fabric(&per, &mems, &march_c_minus()).unwrap();
    let depth = generate_bist(
        &[mem("a", 8, 4), mem("b", 8, 1)],
        &mats_plus(),
        GroupingPolicy::PerDepth,
    )
    .unwrap();
    assert_eq!(depth.sequencers.len(), 1);
    verify_fabric(&depth, &[mem("a", 8, 4), mem("b", 8, 1)], &mats_plus()).unwrap();
}

#[test]
fn fabric_rejects_bad_input() {
    assert_eq!(
        generate_bist(&[], &mats_plus(), GroupingPolicy::default()),
        Err(MarchError::NoMemories)
    );
    let empty = MarchAlgorithm {
        name: String::new(),
        elements: Vec::new(),
    };
    assert_eq!(
        generate_bist(&[mem("m", 4, 1)], &empty, GroupingPolicy::default()),
        Err(MarchError::NoElements)
    );
    assert!(matches!(
        generate_bist(
            &[mem("m", 4, 1), mem("m", 8, 1)],
            &mats_plus(),
            GroupingPolicy::default()
        ),
        Err(MarchError::BadMemory { .. })
    ));
}

#[test]
fn odd_depths_and_single_word() {
    for words in [1, 3, 5, 6] {
        let mems = [mem("m", words, 2)];
        let f = generate_bist(&mems, &march_c_minus(), GroupingPolicy::default()).unwrap();
        verify_fabric(&f, &mems, &march_c_minus()).unwrap();
    }
}

#[test]
fn descending_first_element() {
    let m = parse_march("{v(w1); ^(r1,w0); v(r0)}").unwrap();
    let mems = [mem("m", 6, 1)];
    let f = generate_bist(&mems, &m, GroupingPolicy::default()).unwrap();
    verify_fabric(&f, &mems, &m).unwrap();
}

/// Rewires the TPG write enable to fire on every active cycle.
fn reads_become_writes(f: &mut BistFabric) {
    let tpg = &mut f.tpgs[0].module;
    tpg.add_net("tie_hi");
    tpg.instances
        .push(Instance::new("STK_TIE1", "mut_hi").pin("y", "tie_hi"));
    let we = tpg
        .instances
        .iter_mut()
        .find(|i| i.conn("y") == Some(&Conn::Net("we".into())))
        .unwrap();
    for (p, c) in &mut we.conns {
        if p == "b" {
            *c = Conn::Net("tie_hi".into());
        }
    }
}

#[test]
fn mutated_tpg_diverges_at_first_read() {
    let mems = [mem("ram", 8, 1)];
    let mut f = generate_bist(&mems, &mats_plus(), GroupingPolicy::default()).unwrap();
    reads_become_writes(&mut f);
    match verify_fabric(&f, &mems, &mats_plus()) {
        // Eight w0 ops run in cycles 1..=8; the first read is in cycle 9.
        Err(MarchError::Divergence { memory, cycle, .. }) => {
            assert_eq!(memory, "ram");
            assert_eq!(cycle, 9);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn fabric_flags_a_faulty_memory() {
    let mems = [mem("a", 8, 2), mem("b", 4, 1), mem("c", 8, 2)];
    let f = generate_bist(&mems, &march_c_minus(), GroupingPolicy::default()).unwrap();
    let faults = [None, Some(Fault::stuck((2, 0), false)), None];
    let run = run_fabric(&f, &mems, &faults).unwrap();
    assert!(run.fail);
    assert_eq!(run.diag, vec![false, true, false]);
    assert_eq!(run.done_cycle, Some(f.cycles - 1));
    let clean = run_fabric(&f, &mems, &[]).unwrap();
    assert!(!clean.fail);
}

#[test]
fn fabric_needs_wmode_to_start() {
    let mems = [mem("m", 4, 1)];
    let f = generate_bist(&mems, &mats_plus(), GroupingPolicy::default()).unwrap();
    let mut sim = crate::netlist::GateSim::new(&f.netlist()).unwrap();
    sim.set_many([("wmode", false), ("start", true)]).unwrap();
    sim.tick().unwrap();
    sim.set("start", false).unwrap();
    assert!(!sim.get("m_we").unwrap());
    assert!(!sim.get("m_re").unwrap());
}

#[test]
fn entity_spec_and_block() {
    let f = generate_bist(&[mem("m", 16, 4)], &march_c_minus(), GroupingPolicy::default()).unwrap();
    let e = f.entity_spec(2.0);
    assert_eq!(e.cycles, 162);
    assert_eq!(e.data_pins, 4);
    let b = f.block();
    assert_eq!(b.top_module, BIST_ENTITY);
    assert_eq!(b.modules.len(), 4);
    for p in ["wmode", "t_clk", "start", "done", "fail", "diag"] {
        assert!(f.top.port(p).is_some(), "{p}");
    }
}

#[test]
fn consistency() {
    assert!(mats_plus().consistent());
    assert!(march_c_minus().consistent());
    assert!(!parse_march("{^(r0)}").unwrap().consistent());
    assert!(!parse_march("{^(w0); v(r1)}").unwrap().consistent());
}
