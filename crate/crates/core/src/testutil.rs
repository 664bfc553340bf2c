// SPDX-License-Identifier: Apache-2.0

//! In-code copies of the DSC cores for unit tests.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::model::*;

fn chain(name: &str, length: u32, clk: &str, si: &str, so: ScanOut) -> ScanChain {
    ScanChain {
        name: name.into(),
        length,
        clock_domain: clk.into(),
        scan_in: si.into(),
        scan_out: so,
    }
}

pub fn usb() -> CoreTestInfo {
    let mut c = CoreTestInfo::empty("usb");
    c.ti = 18;
    c.to = 4;
    c.pi = 221;
    c.po = 104;
    let domains = ["clk_a", "clk_b", "clk_c", "clk_d"];
    c.clock_domains = domains.iter().map(|d| String::from(*d)).collect();
    let mut pins: Vec<ControlPin> = domains
        .iter()
        .map(|d| ControlPin::new(*d, ControlKind::Clock))
        .collect();
    pins.extend((0..3).map(|k| ControlPin::new(format!("rst{k}"), ControlKind::Reset)));
    pins.push(ControlPin::new("se", ControlKind::ScanEnable));
    pins.extend((0..6).map(|k| ControlPin::new(format!("te{k}"), ControlKind::TestEnable)));
    c.control_pins = pins;
    c.scan_chains = [1629, 78, 293, 45]
        .iter()
        .enumerate()
        .map(|(k, &len)| {
            chain(
                &format!("c{k}"),
                len,
                domains[k],
                &format!("si{k}"),
                ScanOut::Dedicated(format!("so{k}")),
            )
        })
        .collect();
    c.pattern_sets = vec![PatternSet {
        kind: PatternKind::Scan,
        count: 716,
        capture: CaptureMode::PulseClock,
        vectors: None,
    }];
    c
}

pub fn tv() -> CoreTestInfo {
    let mut c = CoreTestInfo::empty("tv");
    c.ti = 6;
    c.to = 1;
    c.pi = 25;
    c.po = 40;
    c.clock_domains = vec!["clk".into()];
    c.control_pins = vec![
        ControlPin::new("clk", ControlKind::Clock),
        ControlPin::new("rst", ControlKind::Reset),
        ControlPin::new("se", ControlKind::ScanEnable),
        ControlPin::new("te", ControlKind::TestEnable),
    ];
    c.scan_chains = vec![
        chain("c0", 577, "clk", "si0", ScanOut::Dedicated("so0".into())),
        chain("c1", 576, "clk", "si1", ScanOut::Shared("po7".into())),
    ];
    c.pattern_sets = vec![
        PatternSet::counts_only(PatternKind::Scan, 229),
        PatternSet::counts_only(PatternKind::Functional, 202_673),
    ];
    c
}

pub fn jpeg() -> CoreTestInfo {
    let mut c = CoreTestInfo::empty("jpeg");
    c.ti = 1;
    c.pi = 165;
    c.po = 104;
    c.clock_domains = vec!["clk".into()];
    c.control_pins = vec![ControlPin::new("clk", ControlKind::Clock)];
    c.pattern_sets = vec![PatternSet::counts_only(PatternKind::Functional, 235_696)];
    c
}

pub fn dsc() -> SocDescription {
    SocDescription::new("dsc", vec![usb(), tv(), jpeg()])
}
