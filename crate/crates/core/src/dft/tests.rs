// SPDX-License-Identifier: Apache-2.0

use super::*;
use crate::netlist::{functional_connectivity, validate_netlist, GateSim};
use crate::schedule::{schedule_sessions, Constraints};
use crate::testutil::{dsc, tv, usb};
use crate::wrapper::WrapperOptions;

fn with_lib(core: &CoreTestInfo, wrapper: Module) -> Netlist {
    let mut modules = cell_library();
    modules.push(core_module(core));
    let top = wrapper.name.clone();
    modules.push(wrapper);
    Netlist { top, modules }
}

fn count(m: &Module, cell: &str) -> usize {
    m.instances.iter().filter(|i| i.module == cell).count()
}

#[test]
fn tv_wrapper_shape() {
    let core = tv();
    let cfg = design_wrapper(&core, 2, &WrapperOptions::default()).unwrap();
    let m = generate_wrapper_netlist(&core, &cfg, false).unwrap();
    assert_eq!(count(&m, "STK_WBR"), 65);
    assert!(m.port("wsi1").is_some() && m.port("wso1").is_some() && m.port("wsi2").is_none());
    let selectors = m
        .instances
        .iter()
        .filter(|i| i.module == "STK_MUX2" && i.conn("a") == Some(&Conn::Net("tie0".into())))
        .count();
    assert_eq!(selectors, 1);
    let v = validate_netlist(&with_lib(&core, m));
    assert!(v.is_empty(), "{v:?}");
}

#[test]
fn usb_wrapper_validates() {
    let core = usb();
    let cfg = design_wrapper(&core, 2, &WrapperOptions::default()).unwrap();
    let m = generate_wrapper_netlist(&core, &cfg, true).unwrap();
    assert_eq!(count(&m, "STK_WBR"), 325);
    let v = validate_netlist(&with_lib(&core, m));
    assert!(v.is_empty(), "{v:?}");
}

#[test]
fn pinless_core_passes_its_chain_through() {
    let mut core = CoreTestInfo::empty("bare");
    core.clock_domains = vec!["clk".into()];
    core.scan_chains = vec![crate::model::ScanChain {
        name: "c0".into(),
        length: 4,
        clock_domain: "clk".into(),
        scan_in: "si0".into(),
        scan_out: ScanOut::Dedicated("so0".into()),
    }];
    let cfg = design_wrapper(&core, 1, &WrapperOptions::default()).unwrap();
    let m = generate_wrapper_netlist(&core, &cfg, false).unwrap();
    assert_eq!(count(&m, "STK_WBR"), 0);
    let inst = m.instance(CORE_INSTANCE).unwrap();
    assert_eq!(inst.conn("si0"), Some(&Conn::Net("wsi0".into())));
    assert!(validate_netlist(&with_lib(&core, m)).is_empty());
}

#[test]
fn soft_partial_segments_are_rejected() {
    let mut core = usb();
    core.softness = crate::model::Softness::Soft;
    let cfg = design_wrapper(&core, 4, &WrapperOptions::default()).unwrap();
    assert!(matches!(
        generate_wrapper_netlist(&core, &cfg, false),
        Err(DftError::PartialSegment { .. })
    ));
}

fn controller_sim(sched: &TestSchedule) -> GateSim {
    let mut modules = cell_library();
    modules.push(generate_test_controller(sched));
    GateSim::new(&Netlist {
        top: CONTROLLER_MODULE.into(),
        modules,
    })
    .unwrap()
}

fn load(sim: &mut GateSim, k: u32, s: usize) {
    sim.set("test_mode", false).unwrap();
    for bit in (0..k).rev() {
        sim.set("session_si", (s >> bit) & 1 == 1).unwrap();
        sim.tick().unwrap();
    }
    sim.set("test_mode", true).unwrap();
}

fn check_controller(sched: &TestSchedule, k: u32) {
    let m = generate_test_controller(sched);
    assert_eq!(count(&m, "STK_DFFE") as u32, k);
    let mut sim = controller_sim(sched);
    for s in 0..sched.sessions.len() {
        load(&mut sim, k, s);
        for (port, want) in controller_truth(sched, s) {
            assert_eq!(sim.get(&port).unwrap(), want, "session {s} port {port}");
        }
        // holding test_mode keeps the session through clock edges
        sim.tick().unwrap();
        assert!(sim.get(&format!("sess{s}")).unwrap());
    }
}

#[test]
fn dsc_controller_decodes_every_session() {
    let soc = dsc();
    let sched = schedule_sessions(&soc, &Constraints::for_soc(&soc)).unwrap();
    assert_eq!(sched.sessions.len(), 3);
    check_controller(&sched, 2);
}

fn fixed_schedule(n: usize) -> TestSchedule {
    use crate::schedule::{schedule_serial_entities, Access, EntityKind, TestEntity, WidthOption};
    let entities: Vec<TestEntity> = (0..n)
        .map(|i| TestEntity {
            name: format!("e{i}"),
            core: format!("c{i}"),
            kind: EntityKind::Functional,
            patterns: 10,
            capture: crate::model::CaptureMode::Normal,
            control_pins: vec![crate::model::ControlPin::new("clk", ControlKind::Clock)],
            options: vec![WidthOption {
                width: 2,
                data_pins: 2,
                access: Access::Direct,
                si: 0,
                so: 0,
                cycles: 10,
            }],
            power: 1.0,
            pi: 1,
            po: 1,
        })
        .collect();
    schedule_serial_entities(entities, &Constraints::default()).unwrap()
}

#[test]
fn five_sessions_need_three_bits() {
    let sched = fixed_schedule(5);
    check_controller(&sched, 3);
}

#[test]
fn single_session_controller_is_degenerate() {
    let sched = fixed_schedule(1);
    let m = generate_test_controller(&sched);
    assert_eq!(count(&m, "STK_DFFE"), 0);
    check_controller(&sched, 0);
}

#[test]
fn tam_selectors_follow_pin_sharing() {
    let one = fixed_schedule(1);
    assert_eq!(count(&generate_tam_mux(&one), "STK_MUX2"), 0);
    // two sessions observe the same output pad, so each such pad gets one selector
    let two = fixed_schedule(2);
    let tam = generate_tam_mux(&two);
    let shared_out = (0..200u32)
        .filter(|&p| two.sessions.iter().all(|s| s.role_of(p).is_some_and(|r| r.is_output())))
        .count();
    assert_eq!(shared_out, 1);
    assert_eq!(count(&tam, "STK_MUX2"), shared_out);
}

fn dsc_inserted() -> (Netlist, Netlist) {
    let soc = dsc();
    let c = Constraints::for_soc(&soc);
    let sched = schedule_sessions(&soc, &c).unwrap();
    let fabric = generate_fabric(&soc.cores, &sched, &c.wrapper, None).unwrap();
    let before = synthetic_soc_netlist("dsc", &soc.cores, &[]);
    let after = insert_dft(&before, &soc.cores, &fabric).unwrap();
    (before, after)
}

#[test]
fn dsc_insertion_is_valid_and_transparent() {
    let (before, after) = dsc_inserted();
    assert!(validate_netlist(&before).is_empty());
    let v = validate_netlist(&after);
    assert!(v.is_empty(), "{:?}", &v[..v.len().min(5)]);
    let cores = dsc().cores;
    let skip = |m: &str, p: &str| cores.iter().any(|c| c.name == m && is_scan_port(c, p));
    let a = functional_connectivity(&before, CORE_INSTANCE, skip).unwrap();
    let b = functional_connectivity(&after, CORE_INSTANCE, skip).unwrap();
    assert_eq!(a, b);
}

#[test]
fn empty_fabric_changes_nothing() {
    let soc = dsc();
    let n = synthetic_soc_netlist("dsc", &soc.cores, &[]);
    assert_eq!(insert_dft(&n, &soc.cores, &GeneratedTestFabric::empty()).unwrap(), n);
}

#[test]
fn missing_core_instance_is_an_error() {
    let soc = dsc();
    let c = Constraints::for_soc(&soc);
    let sched = schedule_sessions(&soc, &c).unwrap();
    let fabric = generate_fabric(&soc.cores, &sched, &c.wrapper, None).unwrap();
    let n = synthetic_soc_netlist("dsc", &soc.cores[..2], &[]);
    let err = insert_dft(&n, &soc.cores, &fabric).unwrap_err();
    assert_eq!(err, DftError::MissingCoreInstance("jpeg".into()));
    assert!(err.to_string().contains("missing core instance"));
}

#[test]
fn area_arithmetic() {
    let k = AreaConstants::default();
    assert_eq!(area_from_cells(0, &k, 1_000_000).unwrap().total, 503);
    let r = area_from_cells(100, &k, 1_000_000).unwrap();
    assert_eq!(r.total, 3_103);
    assert!((r.overhead_fraction - 0.003103).abs() < 1e-12);
    assert_eq!(area_from_cells(1, &k, 0), Err(DftError::ZeroChipGates));

    let cells = 325 + 65 + 269;
    let total = 26 * cells + 503;
    assert_eq!(total, 17_637);
    let r = area_from_cells(cells, &k, (total as f64 / 0.003).round() as u64).unwrap();
    assert!((r.overhead_fraction - 0.003).abs() < 0.0005);
}

#[test]
fn dsc_fabric_cell_count() {
    let soc = dsc();
    let c = Constraints::for_soc(&soc);
    let sched = schedule_sessions(&soc, &c).unwrap();
    let fabric = generate_fabric(&soc.cores, &sched, &c.wrapper, None).unwrap();
    assert_eq!(fabric.wbr_cells(), 659);
    assert_eq!(area_report(&fabric, 10_000_000).unwrap().total, 17_637);
}
