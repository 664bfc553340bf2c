// SPDX-License-Identifier: Apache-2.0

use proptest::prelude::*;
use stk_core::march::*;
use stk_core::MemoryConfig;

fn order() -> impl Strategy<Value = AddressOrder> {
    prop_oneof![
        Just(AddressOrder::Up),
        Just(AddressOrder::Down),
        Just(AddressOrder::Either)
    ]
}

fn op() -> impl Strategy<Value = MarchOp> {
    (0u8..4).prop_map(MarchOp::from_code)
}

fn element() -> impl Strategy<Value = MarchElement> {
    (order(), prop::collection::vec(op(), 1..4)).prop_map(|(order, ops)| MarchElement { order, ops })
}

/// Any notation, consistent or not.
fn any_algorithm() -> impl Strategy<Value = MarchAlgorithm> {
    (prop::collection::vec(element(), 1..6), "[A-Za-z][A-Za-z0-9+ -]{0,8}").prop_map(|(elements, name)| {
        MarchAlgorithm {
            name: name.trim().to_string(),
            elements,
        }
    })
}

/// Consistent algorithms: an initializing write, then reads that expect the
/// last written value. Ops are drawn as (is_write, value) pairs.
fn algorithm() -> impl Strategy<Value = MarchAlgorithm> {
    (
        any::<bool>(),
        prop::collection::vec(
            (order(), prop::collection::vec((any::<bool>(), any::<bool>()), 1..4)),
            1..6,
        ),
    )
        .prop_map(|(init, raw)| {
            let mut v = init;
            let mut elements = vec![MarchElement {
                order: AddressOrder::Either,
                ops: vec![if init { MarchOp::W1 } else { MarchOp::W0 }],
            }];
            for (order, ops) in raw {
                let ops = ops
                    .into_iter()
                    .map(|(w, x)| {
                        if w {
                            v = x;
                            if x {
                                MarchOp::W1
                            } else {
                                MarchOp::W0
                            }
                        } else if v {
                            MarchOp::R1
                        } else {
                            MarchOp::R0
                        }
                    })
                    .collect();
                elements.push(MarchElement { order, ops });
            }
            MarchAlgorithm {
                name: String::new(),
                elements,
            }
        })
}

fn memory() -> impl Strategy<Value = MemoryConfig> {
    (1u32..12, 1u32..5).prop_map(|(w, b)| MemoryConfig::new("m", w, b))
}

fn fault(mem: &MemoryConfig) -> impl Strategy<Value = Fault> {
    let (words, width) = (mem.words, mem.width);
    let cell = move || (0..words, 0..width);
    prop_oneof![
        (cell(), any::<bool>()).prop_map(|(c, v)| Fault::stuck(c, v)),
        (cell(), any::<bool>()).prop_map(|(c, r)| Fault::transition(c, r)),
        (cell(), cell(), any::<bool>(), any::<bool>())
            .prop_filter("distinct words", |(a, v, _, _)| a.0 != v.0)
            .prop_map(|(a, v, r, f)| Fault::coupling(a, r, v, f)),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn notation_round_trips(m in any_algorithm()) {
        let text = m.to_string();
        prop_assert_eq!(parse_march(&text).unwrap(), m);
    }

    #[test]
    fn fault_free_memories_pass_in_exact_time(m in algorithm(), mem in memory()) {
        prop_assert!(m.consistent());
        let run = run_march(&m, &mem, None);
        prop_assert_eq!(run.outcome, MarchOutcome::Pass);
        prop_assert_eq!(run.cycles, bist_test_time(&m, &mem));
        prop_assert_eq!(march_trace(&m, &mem).len() as u64, run.cycles);
    }

    #[test]
    fn appending_elements_keeps_first_failure(
        (mem, f) in memory().prop_filter("two words", |m| m.words > 1).prop_flat_map(|m| {
            let f = fault(&m);
            (Just(m), f)
        }),
        m in any_algorithm(),
        extra in prop::collection::vec(element(), 1..3),
    ) {
        let first = simulate_march(&m, &mem, Some(f));
        let mut longer = m.clone();
        longer.elements.extend(extra);
        let second = simulate_march(&longer, &mem, Some(f));
        if let MarchOutcome::Fail(_) = first {
            prop_assert_eq!(first, second);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn generated_fabrics_match_the_simulator(
        m in algorithm(),
        mems in prop::collection::vec((1u32..10, 1u32..4), 1..4),
        policy in prop_oneof![Just(GroupingPolicy::PerShape), Just(GroupingPolicy::PerDepth), Just(GroupingPolicy::PerMemory)],
    ) {
        let mems: Vec<MemoryConfig> = mems
            .iter()
            .enumerate()
            .map(|(i, &(w, b))| MemoryConfig::new(format!("m{i}"), w, b))
            .collect();
        let f = generate_bist(&mems, &m, policy).unwrap();
        prop_assert!(stk_core::netlist::validate_netlist(&f.netlist()).is_empty());
        let r = verify_fabric(&f, &mems, &m).unwrap();
        for (mem, (_, ops)) in mems.iter().zip(&r.memories) {
            prop_assert_eq!(*ops, bist_test_time(&m, mem));
        }
    }

    #[test]
    fn fabric_fail_flag_agrees_with_the_simulator(
        m in algorithm(),
        (mem, f) in (2u32..8, 1u32..3).prop_map(|(w, b)| MemoryConfig::new("m", w, b)).prop_flat_map(|m| {
            let f = fault(&m);
            (Just(m), f)
        }),
    ) {
        let mems = [mem.clone()];
        let fab = generate_bist(&mems, &m, GroupingPolicy::default()).unwrap();
        let run = run_fabric(&fab, &mems, &[Some(f)]).unwrap();
        let expect = matches!(simulate_march(&m, &mem, Some(f)), MarchOutcome::Fail(_));
        prop_assert_eq!(run.fail, expect);
        prop_assert_eq!(run.diag, vec![expect]);
    }
}
