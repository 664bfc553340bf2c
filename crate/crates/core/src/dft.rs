// SPDX-License-Identifier: Apache-2.0

//! Test fabric generation (wrappers, TAM multiplexer, session controller),
//! insertion into the SOC netlist, and the area model.
//!
//! Naming conventions of the inserted design:
//!
//! * chip test pads are top-level ports `test_mode`, `session_si` and
//!   `tp<k>` for data/control pin `k` of the schedule;
//! * wrapper-side test signals are nets `<core>__<wrapper port>`;
//! * the session register loads serially on the top-level clock while
//!   `test_mode` is low, most significant bit first, and holds while it is
//!   high.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::Serialize;
use thiserror::Error;

use crate::model::{ControlKind, CoreTestInfo, ScanOut};
use crate::netlist::{cell_library, Conn, Direction, Instance, Module, Netlist, Port};
use crate::schedule::{Access, EntityKind, PinRole, TestSchedule};
use crate::wrapper::{design_wrapper, wbr_cell_count, WrapperConfig, WrapperError, WrapperOptions};

/// Instance name of the core inside its wrapper.
pub const CORE_INSTANCE: &str = "u_core";
pub const CONTROLLER_MODULE: &str = "stk_controller";
pub const TAM_MODULE: &str = "stk_tam";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DftError {
    #[error("wrapper config is for core {found}, not {expected}")]
    CoreMismatch { expected: String, found: String },
    #[error("core {core}: wrapper chain {chain} cuts internal chain {segment}; only whole chains can be wired")]
    PartialSegment {
        core: String,
        chain: usize,
        segment: String,
    },
    #[error("core {core}: wrapper config places {found} cells, core has {expected} functional pins")]
    CellMismatch { core: String, expected: u32, found: u32 },
    #[error("missing core instance: no instance of {0} in the top module")]
    MissingCoreInstance(String),
    #[error("core {0} is instantiated more than once in the top module")]
    DuplicateCoreInstance(String),
    #[error("core {core}: port {port} does not match the test description")]
    PortMismatch { core: String, port: String },
    #[error("core {core}: scan port {port} is connected in the SOC netlist")]
    ScanPortConnected { core: String, port: String },
    #[error("name {0} already exists in the top module")]
    NameClash(String),
    #[error("top module has no clock {0} for the test controller")]
    MissingClock(String),
    #[error("top module {0} is not defined")]
    MissingTop(String),
    #[error("core {0} is not part of the SOC description")]
    UnknownCore(String),
    #[error("chip gate count must be positive")]
    ZeroChipGates,
    #[error("test area {test} exceeds chip gate count {chip}")]
    AreaExceedsChip { test: u64, chip: u64 },
    #[error(transparent)]
    Wrapper(#[from] WrapperError),
}

/// Ports of a core as it appears in the SOC netlist.
pub fn core_ports(core: &CoreTestInfo) -> Vec<Port> {
    let mut ports = Vec::new();
    for p in &core.control_pins {
        ports.push(Port::new(p.name.clone(), Direction::In));
    }
    for k in 0..core.pi {
        ports.push(Port::new(format!("pi{k}"), Direction::In));
    }
    for k in 0..core.po {
        ports.push(Port::new(format!("po{k}"), Direction::Out));
    }
    for c in &core.scan_chains {
        ports.push(Port::new(c.scan_in.clone(), Direction::In));
        if let ScanOut::Dedicated(so) = &c.scan_out {
            ports.push(Port::new(so.clone(), Direction::Out));
        }
    }
    ports
}

/// The core as a black-box leaf module.
pub fn core_module(core: &CoreTestInfo) -> Module {
    let mut m = Module::new(core.name.clone());
    m.ports = core_ports(core);
    m
}

/// Scan-data ports of `core`: chain inputs and dedicated chain outputs.
pub fn is_scan_port(core: &CoreTestInfo, port: &str) -> bool {
    core.scan_chains
        .iter()
        .any(|c| c.scan_in == port || matches!(&c.scan_out, ScanOut::Dedicated(so) if so == port))
}

pub fn wrapper_name(core: &str) -> String {
    format!("{core}_wrapper")
}

/// Test-side ports a wrapper adds, with their direction.
pub fn wrapper_test_ports(core: &CoreTestInfo, width: u32, direct: bool) -> Vec<Port> {
    let mut ports = Vec::new();
    for p in &core.control_pins {
        ports.push(Port::new(format!("t_{}", p.name), Direction::In));
    }
    for j in 0..width {
        ports.push(Port::new(format!("wsi{j}"), Direction::In));
    }
    for j in 0..width {
        ports.push(Port::new(format!("wso{j}"), Direction::Out));
    }
    for name in ["wmode", "wint", "wdir", "wse"] {
        ports.push(Port::new(name, Direction::In));
    }
    if direct {
        for k in 0..core.pi {
            ports.push(Port::new(format!("fdi{k}"), Direction::In));
        }
        for k in 0..core.po {
            ports.push(Port::new(format!("fdo{k}"), Direction::Out));
        }
    }
    ports
}

pub(crate) struct Builder {
    pub(crate) m: Module,
    gates: usize,
}

impl Builder {
    pub(crate) fn new(name: String) -> Self {
        Builder {
            m: Module::new(name),
            gates: 0,
        }
    }

    pub(crate) fn net(&mut self, name: String) -> String {
        self.m.add_net(name)
    }

    pub(crate) fn fresh(&mut self, stem: &str) -> String {
        self.gates += 1;
        let n = format!("{stem}_{}", self.gates);
        self.m.add_net(n)
    }

    pub(crate) fn cell(&mut self, inst: Instance) {
        self.m.instances.push(inst);
    }

    pub(crate) fn gate2(&mut self, kind: &str, a: &str, b: &str, y: &str) {
        self.gates += 1;
        let name = format!("g{}", self.gates);
        self.cell(Instance::new(kind, name).pin("a", a).pin("b", b).pin("y", y));
    }

    pub(crate) fn gate1(&mut self, kind: &str, a: &str, y: &str) {
        self.gates += 1;
        let name = format!("g{}", self.gates);
        self.cell(Instance::new(kind, name).pin("a", a).pin("y", y));
    }

    pub(crate) fn tie(&mut self, kind: &str, y: &str) {
        self.gates += 1;
        let name = format!("g{}", self.gates);
        self.cell(Instance::new(kind, name).pin("y", y));
    }

    pub(crate) fn mux(&mut self, a: &str, b: &str, s: &str, y: &str) {
        self.gates += 1;
        let name = format!("g{}", self.gates);
        self.cell(
            Instance::new("STK_MUX2", name)
                .pin("a", a)
                .pin("b", b)
                .pin("s", s)
                .pin("y", y),
        );
    }

    /// Reduces `inputs` with a chain of two-input `kind` gates into `y`.
    pub(crate) fn reduce(&mut self, kind: &str, inputs: &[String], y: &str, empty: &str) {
        match inputs {
            [] => self.tie(empty, y),
            [one] => self.gate1("STK_BUF", one, y),
            [first, rest @ ..] => {
                let mut cur = first.clone();
                for (i, x) in rest.iter().enumerate() {
                    let out = if i + 1 == rest.len() {
                        y.to_string()
                    } else {
                        self.fresh("r")
                    };
                    self.gate2(kind, &cur, x, &out);
                    cur = out;
                }
            }
        }
    }
}

/// Builds the wrapper module of `core` for `cfg`.
///
/// Control pins pass through a selector (functional pin on `a`, `t_<pin>`
/// on `b`, switched by `wmode`). WBR cells enter test mode with `wint`. With
/// `direct` set, `fdi<k>` reach the core inputs through the transparent
/// cells when `wdir` is high and `fdo<k>` observe the core outputs.
pub fn generate_wrapper_netlist(core: &CoreTestInfo, cfg: &WrapperConfig, direct: bool) -> Result<Module, DftError> {
    if cfg.core != core.name {
        return Err(DftError::CoreMismatch {
            expected: core.name.clone(),
            found: cfg.core.clone(),
        });
    }
    if cfg.includes_wbr_in_chains {
        let ins: usize = cfg.chains.iter().map(|c| c.inputs.len()).sum();
        let outs: usize = cfg.chains.iter().map(|c| c.outputs.len()).sum();
        if ins as u32 != core.pi || outs as u32 != core.po {
            return Err(DftError::CellMismatch {
                core: core.name.clone(),
                expected: core.pi + core.po,
                found: (ins + outs) as u32,
            });
        }
    }
    for (j, ch) in cfg.chains.iter().enumerate() {
        for s in &ch.segments {
            if s.chain >= core.scan_chains.len() || !s.whole(core) {
                return Err(DftError::PartialSegment {
                    core: core.name.clone(),
                    chain: j,
                    segment: core
                        .scan_chains
                        .get(s.chain)
                        .map_or_else(|| format!("#{}", s.chain), |c| c.name.clone()),
                });
            }
        }
    }

    let mut b = Builder::new(wrapper_name(&core.name));
    for p in core_ports(core) {
        if !is_scan_port(core, &p.name) {
            b.m.ports.push(p);
        }
    }
    b.m.ports.extend(wrapper_test_ports(core, cfg.width, direct));

    let mut core_inst = Instance::new(core.name.clone(), CORE_INSTANCE);
    let tie0 = b.net("tie0".into());
    b.tie("STK_TIE0", &tie0);

    for p in &core.control_pins {
        let n = b.net(format!("c_{}", p.name));
        b.mux(&p.name, &format!("t_{}", p.name), "wmode", &n);
        core_inst = core_inst.pin(p.name.clone(), n);
    }
    let ck = core
        .control_pins
        .iter()
        .find(|p| p.kind == ControlKind::Clock)
        .map_or(tie0.clone(), |p| format!("c_{}", p.name));

    let mut pi_net = Vec::with_capacity(core.pi as usize);
    for k in 0..core.pi {
        let src = if direct {
            let n = b.net(format!("d_{k}"));
            b.mux(&format!("pi{k}"), &format!("fdi{k}"), "wdir", &n);
            n
        } else {
            format!("pi{k}")
        };
        pi_net.push(src);
        let ci = b.net(format!("ci_{k}"));
        core_inst = core_inst.pin(format!("pi{k}"), ci);
    }
    for k in 0..core.po {
        let co = b.net(format!("co_{k}"));
        core_inst = core_inst.pin(format!("po{k}"), co.clone());
        if direct {
            b.gate1("STK_BUF", &co, &format!("fdo{k}"));
        }
    }

    let wbr = |b: &mut Builder, name: String, fi: &str, si: &str, fo: &str| -> String {
        let so = b.net(format!("s_{name}"));
        b.cell(
            Instance::new("STK_WBR", name)
                .pin("fi", fi)
                .pin("si", si)
                .pin("se", "wse")
                .pin("tm", "wint")
                .pin("ck", ck.as_str())
                .pin("fo", fo)
                .pin("so", so.clone()),
        );
        so
    };

    let mut placed_in = BTreeSet::new();
    let mut placed_out = BTreeSet::new();
    for (j, ch) in cfg.chains.iter().enumerate() {
        let mut cur = format!("wsi{j}");
        for &k in &ch.inputs {
            placed_in.insert(k);
            cur = wbr(
                &mut b,
                format!("wi{k}"),
                &pi_net[k as usize].clone(),
                &cur,
                &format!("ci_{k}"),
            );
        }
        for s in &ch.segments {
            let chain = &core.scan_chains[s.chain];
            core_inst = core_inst.pin(chain.scan_in.clone(), cur.clone());
            cur = match &chain.scan_out {
                ScanOut::Dedicated(so) => {
                    let n = b.net(format!("cso_{}", chain.name));
                    core_inst = core_inst.pin(so.clone(), n.clone());
                    n
                }
                ScanOut::Shared(po) => {
                    let k = crate::model::functional_pin_index(po, "po").unwrap_or(0);
                    let n = b.net(format!("ssel_{}", chain.name));
                    b.mux(&tie0, &format!("co_{k}"), "wint", &n);
                    n
                }
            };
        }
        for &k in &ch.outputs {
            placed_out.insert(k);
            cur = wbr(&mut b, format!("wo{k}"), &format!("co_{k}"), &cur, &format!("po{k}"));
        }
        b.gate1("STK_BUF", &cur, &format!("wso{j}"));
    }
    for k in 0..core.pi {
        if !placed_in.contains(&k) {
            wbr(
                &mut b,
                format!("wi{k}"),
                &pi_net[k as usize].clone(),
                &tie0,
                &format!("ci_{k}"),
            );
        }
    }
    for k in 0..core.po {
        if !placed_out.contains(&k) {
            wbr(&mut b, format!("wo{k}"), &format!("co_{k}"), &tie0, &format!("po{k}"));
        }
    }
    for j in cfg.chains.len() as u32..cfg.width {
        b.gate1("STK_BUF", &format!("wsi{j}"), &format!("wso{j}"));
    }

    b.m.instances.push(core_inst);
    Ok(b.m)
}

/// Distinct tested cores (and BIST blocks) of a schedule, in entity order.
pub fn scheduled_cores(s: &TestSchedule) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for e in &s.entities {
        if !out.contains(&e.core) {
            out.push(e.core.clone());
        }
    }
    out
}

/// Width of the serial session register for `n` sessions.
pub fn session_bits(n: usize) -> u32 {
    let mut k = 0;
    while (1usize << k) < n {
        k += 1;
    }
    k
}

/// Session controller: a `k`-bit serial session register and its decode.
///
/// Outputs `sess<s>` (high in session `s` while `test_mode` is high) and per
/// core `<core>__wmode`, `<core>__wint` (wrapper-chain access) and
/// `<core>__wdir` (direct functional access).
pub fn generate_test_controller(s: &TestSchedule) -> Module {
    let n = s.sessions.len();
    let k = session_bits(n);
    let mut b = Builder::new(CONTROLLER_MODULE.into());
    for p in ["clk", "test_mode", "session_si"] {
        b.m.add_port(p, Direction::In);
    }
    for i in 0..n {
        b.m.add_port(format!("sess{i}"), Direction::Out);
    }
    let cores = scheduled_cores(s);
    for c in &cores {
        for w in ["wmode", "wint", "wdir"] {
            b.m.add_port(format!("{c}__{w}"), Direction::Out);
        }
    }

    let load = b.net("load".into());
    b.gate1("STK_INV", "test_mode", &load);
    let mut bits = Vec::with_capacity(k as usize);
    let mut prev = "session_si".to_string();
    for i in 0..k {
        let q = b.net(format!("r{i}"));
        b.cell(
            Instance::new("STK_DFFE", format!("reg{i}"))
                .pin("d", prev.clone())
                .pin("en", load.clone())
                .pin("ck", "clk")
                .pin("q", q.clone()),
        );
        let qn = b.net(format!("rn{i}"));
        b.gate1("STK_INV", &q, &qn);
        bits.push((q.clone(), qn));
        prev = q;
    }
    for i in 0..n {
        let mut terms = vec!["test_mode".to_string()];
        for (bit, (q, qn)) in bits.iter().enumerate() {
            terms.push(if (i >> bit) & 1 == 1 { q.clone() } else { qn.clone() });
        }
        b.reduce("STK_AND2", &terms, &format!("sess{i}"), "STK_TIE1");
    }

    for c in &cores {
        let mut mode = Vec::new();
        let mut int = Vec::new();
        let mut dir = Vec::new();
        for (i, sess) in s.sessions.iter().enumerate() {
            let line = format!("sess{i}");
            let mut member = false;
            for a in &sess.assignments {
                if &s.entities[a.entity].core != c {
                    continue;
                }
                member = true;
                match a.option.access {
                    Access::Wrapper => int.push(line.clone()),
                    Access::Direct => dir.push(line.clone()),
                    Access::Bist => {}
                }
            }
            if member {
                mode.push(line);
            }
        }
        b.reduce("STK_OR2", &mode, &format!("{c}__wmode"), "STK_TIE0");
        b.reduce("STK_OR2", &int, &format!("{c}__wint"), "STK_TIE0");
        b.reduce("STK_OR2", &dir, &format!("{c}__wdir"), "STK_TIE0");
    }
    b.m
}

/// Expected controller outputs for session `s`: every `sess`/`wmode`/`wint`/
/// `wdir` output and its value.
pub fn controller_truth(sched: &TestSchedule, session: usize) -> BTreeMap<String, bool> {
    let mut out = BTreeMap::new();
    for i in 0..sched.sessions.len() {
        out.insert(format!("sess{i}"), i == session);
    }
    for c in scheduled_cores(sched) {
        let mut v = (false, false, false);
        for a in &sched.sessions[session].assignments {
            if sched.entities[a.entity].core == c {
                v.0 = true;
                match a.option.access {
                    Access::Wrapper => v.1 = true,
                    Access::Direct => v.2 = true,
                    Access::Bist => {}
                }
            }
        }
        out.insert(format!("{c}__wmode"), v.0);
        out.insert(format!("{c}__wint"), v.1);
        out.insert(format!("{c}__wdir"), v.2);
    }
    out
}

/// Signals a chip pin carries in one session: core-side inputs it drives,
/// or the single core-side output it observes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum PinRoute {
    Drives(Vec<String>),
    Observes(String),
    Controller,
}

/// Maps one session pin role to wrapper-side signal names.
pub fn route_role(s: &TestSchedule, session: usize, role: &PinRole) -> PinRoute {
    let ent = |i: usize| &s.entities[i];
    let sess = &s.sessions[session];
    match role {
        PinRole::TestMode | PinRole::SessionIn => PinRoute::Controller,
        PinRole::Control { core, pin, kind } => {
            let mut d = vec![format!("{core}__t_{pin}")];
            if *kind == ControlKind::ScanEnable {
                d.push(format!("{core}__wse"));
            }
            PinRoute::Drives(d)
        }
        PinRole::SharedScanEnable | PinRole::SharedTestEnable => {
            let kind = if *role == PinRole::SharedScanEnable {
                ControlKind::ScanEnable
            } else {
                ControlKind::TestEnable
            };
            let mut d = Vec::new();
            for a in &sess.assignments {
                let e = ent(a.entity);
                for p in e.control_pins.iter().filter(|p| p.kind == kind && p.shareable) {
                    d.push(format!("{}__t_{}", e.core, p.name));
                    if kind == ControlKind::ScanEnable {
                        d.push(format!("{}__wse", e.core));
                    }
                }
            }
            PinRoute::Drives(d)
        }
        PinRole::WrapperIn { entity, chain } => PinRoute::Drives(vec![format!("{}__wsi{chain}", ent(*entity).core)]),
        PinRole::WrapperOut { entity, chain } => PinRoute::Observes(format!("{}__wso{chain}", ent(*entity).core)),
        PinRole::WrapperShiftEnable { entity } => PinRoute::Drives(vec![format!("{}__wse", ent(*entity).core)]),
        PinRole::FuncIn { entity, index } => PinRoute::Drives(vec![format!("{}__fdi{index}", ent(*entity).core)]),
        PinRole::FuncOut { entity, index } => PinRoute::Observes(format!("{}__fdo{index}", ent(*entity).core)),
        PinRole::BistStart { entity } => PinRoute::Drives(vec![format!("{}__start", ent(*entity).core)]),
        PinRole::BistDone { entity } => PinRoute::Observes(format!("{}__done", ent(*entity).core)),
        PinRole::BistFail { entity } => PinRoute::Observes(format!("{}__fail", ent(*entity).core)),
        PinRole::BistDiag { entity } => PinRoute::Observes(format!("{}__diag", ent(*entity).core)),
    }
}

pub fn pad_name(pin: u32) -> String {
    crate::schedule::pin_name(pin)
}

/// TAM multiplexer: one bidirectional pad buffer per data/control pad,
/// selectors on the pad drive value for pads observed in several sessions,
/// and selectors on core-side inputs fed from different pads per session.
pub fn generate_tam_mux(s: &TestSchedule) -> Module {
    let mut b = Builder::new(TAM_MODULE.into());
    // pad -> [(session, route)]
    let mut pads: BTreeMap<u32, Vec<(usize, PinRoute)>> = BTreeMap::new();
    for (i, sess) in s.sessions.iter().enumerate() {
        for bind in &sess.pins {
            let r = route_role(s, i, &bind.role);
            if r != PinRoute::Controller {
                pads.entry(bind.pin).or_default().push((i, r));
            }
        }
    }
    let mut dests: BTreeMap<String, Vec<(usize, u32)>> = BTreeMap::new();
    let mut sources: BTreeSet<String> = BTreeSet::new();
    for (&pad, uses) in &pads {
        for (i, r) in uses {
            match r {
                PinRoute::Drives(d) => {
                    for x in d {
                        dests.entry(x.clone()).or_default().push((*i, pad));
                    }
                }
                PinRoute::Observes(x) => {
                    sources.insert(x.clone());
                }
                PinRoute::Controller => {}
            }
        }
    }

    for &pad in pads.keys() {
        b.m.add_port(pad_name(pad), Direction::InOut);
    }
    for i in 0..s.sessions.len() {
        b.m.add_port(format!("sess{i}"), Direction::In);
    }
    for x in &sources {
        b.m.add_port(x.clone(), Direction::In);
    }
    for x in dests.keys() {
        b.m.add_port(x.clone(), Direction::Out);
    }

    for (&pad, uses) in &pads {
        let y = b.net(format!("in_{pad}"));
        let drv = b.net(format!("drv_{pad}"));
        let oe = b.net(format!("oe_{pad}"));
        let outs: Vec<(usize, String)> = uses
            .iter()
            .filter_map(|(i, r)| match r {
                PinRoute::Observes(x) => Some((*i, x.clone())),
                _ => None,
            })
            .collect();
        match outs.as_slice() {
            [] => b.tie("STK_TIE0", &drv),
            [(_, x)] => b.gate1("STK_BUF", x, &drv),
            [(_, first), rest @ ..] => {
                let mut cur = first.clone();
                for (n, (i, x)) in rest.iter().enumerate() {
                    let out = if n + 1 == rest.len() { drv.clone() } else { b.fresh("d") };
                    b.mux(&cur, x, &format!("sess{i}"), &out);
                    cur = out;
                }
            }
        }
        let lines: Vec<String> = outs.iter().map(|(i, _)| format!("sess{i}")).collect();
        b.reduce("STK_OR2", &lines, &oe, "STK_TIE0");
        b.cell(
            Instance::new("STK_IOBUF", format!("io{pad}"))
                .pin("a", drv)
                .pin("oe", oe)
                .pin("y", y)
                .pin("pad", pad_name(pad)),
        );
    }

    for (x, srcs) in &dests {
        let mut by_pad: Vec<(usize, u32)> = Vec::new();
        for &(i, pad) in srcs {
            if !by_pad.iter().any(|&(_, p)| p == pad) {
                by_pad.push((i, pad));
            }
        }
        match by_pad.as_slice() {
            [(_, pad)] => b.gate1("STK_BUF", &format!("in_{pad}"), x),
            [(_, first), rest @ ..] => {
                let mut cur = format!("in_{first}");
                for (n, (i, pad)) in rest.iter().enumerate() {
                    let out = if n + 1 == rest.len() { x.clone() } else { b.fresh("m") };
                    b.mux(&cur, &format!("in_{pad}"), &format!("sess{i}"), &out);
                    cur = out;
                }
            }
            [] => {}
        }
    }
    b.m
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GeneratedWrapper {
    pub core: String,
    pub config: WrapperConfig,
    pub direct: bool,
    pub module: Module,
    pub wbr_cells: u64,
}

/// Memory BIST block to instantiate at the top level.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BistBlock {
    pub entity: String,
    pub top_module: String,
    pub modules: Vec<Module>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GeneratedTestFabric {
    pub wrappers: Vec<GeneratedWrapper>,
    pub controller: Option<Module>,
    pub tam_mux: Option<Module>,
    pub bist: Option<BistBlock>,
    pub session_count: usize,
    /// Highest pin index used by any session, plus one.
    pub pads: Vec<u32>,
    pub controller_pins: u32,
}

impl GeneratedTestFabric {
    pub fn empty() -> Self {
        GeneratedTestFabric {
            wrappers: Vec::new(),
            controller: None,
            tam_mux: None,
            bist: None,
            session_count: 0,
            pads: Vec::new(),
            controller_pins: 0,
        }
    }

    pub fn wbr_cells(&self) -> u64 {
        self.wrappers.iter().map(|w| w.wbr_cells).sum()
    }

    pub fn modules(&self) -> Vec<&Module> {
        let mut v: Vec<&Module> = self.wrappers.iter().map(|w| &w.module).collect();
        v.extend(self.controller.iter());
        v.extend(self.tam_mux.iter());
        if let Some(b) = &self.bist {
            v.extend(b.modules.iter());
        }
        v
    }
}

/// Wrapper width each core needs: that of its wrapper-access test, else 1.
fn wrapper_width(s: &TestSchedule, core: &str) -> (u32, bool) {
    let mut width = None;
    let mut direct = false;
    for sess in &s.sessions {
        for a in &sess.assignments {
            if s.entities[a.entity].core != core {
                continue;
            }
            match a.option.access {
                Access::Wrapper => width = Some(a.option.width),
                Access::Direct => direct = true,
                Access::Bist => {}
            }
        }
    }
    (width.unwrap_or(1), direct)
}

/// Generates wrappers for every scheduled core, the session controller and
/// the TAM multiplexer.
pub fn generate_fabric(
    cores: &[CoreTestInfo],
    s: &TestSchedule,
    opts: &WrapperOptions,
    bist: Option<BistBlock>,
) -> Result<GeneratedTestFabric, DftError> {
    let mut wrappers = Vec::new();
    for name in scheduled_cores(s) {
        let is_bist = s.entities.iter().any(|e| e.core == name && e.kind == EntityKind::Bist);
        if is_bist {
            continue;
        }
        let core = cores
            .iter()
            .find(|c| c.name == name)
            .ok_or_else(|| DftError::UnknownCore(name.clone()))?;
        let (width, direct) = wrapper_width(s, &name);
        let scanless = core.scan_chains.is_empty();
        let wopts = WrapperOptions {
            include_wbr_in_chains: opts.include_wbr_in_chains || scanless,
            ..*opts
        };
        let config = design_wrapper(core, width, &wopts)?;
        let module = generate_wrapper_netlist(core, &config, direct)?;
        wrappers.push(GeneratedWrapper {
            core: name,
            direct,
            module,
            wbr_cells: wbr_cell_count(core, config.wraps_test_pins),
            config,
        });
    }
    let mut pads = BTreeSet::new();
    for sess in &s.sessions {
        for b in &sess.pins {
            if b.pin >= s.controller_pins {
                pads.insert(b.pin);
            }
        }
    }
    Ok(GeneratedTestFabric {
        wrappers,
        controller: Some(generate_test_controller(s)),
        tam_mux: Some(generate_tam_mux(s)),
        bist,
        session_count: s.sessions.len(),
        pads: pads.into_iter().collect(),
        controller_pins: s.controller_pins,
    })
}

/// A plain SOC netlist around black-box cores: a PLL leaf drives every core
/// clock, a glue-logic leaf sources all other core inputs and sinks all core
/// outputs, and scan ports stay open. Memories hang off the glue block.
pub fn synthetic_soc_netlist(name: &str, cores: &[CoreTestInfo], memories: &[crate::model::MemoryConfig]) -> Netlist {
    let mut top = Module::new(name);
    top.add_port(CONTROLLER_CLOCK, Direction::In);
    top.add_port("rst_n", Direction::In);
    const GPIO: u32 = 8;
    for k in 0..GPIO {
        top.add_port(format!("gpio_in{k}"), Direction::In);
    }
    for k in 0..GPIO {
        top.add_port(format!("gpio_out{k}"), Direction::Out);
    }

    let mut pll = Module::new(format!("{name}_pll"));
    pll.add_port("ref", Direction::In);
    let mut glue = Module::new(format!("{name}_glue"));
    glue.add_port("rst_n", Direction::In);
    for k in 0..GPIO {
        glue.add_port(format!("gpio_in{k}"), Direction::In);
        glue.add_port(format!("gpio_out{k}"), Direction::Out);
    }
    let mut pll_inst = Instance::new(pll.name.clone(), "u_pll").pin("ref", CONTROLLER_CLOCK);
    let mut glue_inst = Instance::new(glue.name.clone(), "u_glue").pin("rst_n", "rst_n");
    for k in 0..GPIO {
        glue_inst = glue_inst
            .pin(format!("gpio_in{k}"), format!("gpio_in{k}"))
            .pin(format!("gpio_out{k}"), format!("gpio_out{k}"));
    }

    let mut core_insts = Vec::new();
    let mut leaves = Vec::new();
    for core in cores {
        let mut inst = Instance::new(core.name.clone(), format!("{}_i", core.name));
        for p in core_ports(core) {
            let net = format!("{}_{}", core.name, p.name);
            let clock = core
                .control_pins
                .iter()
                .any(|c| c.name == p.name && c.kind == ControlKind::Clock);
            if is_scan_port(core, &p.name) {
                inst = inst.open(p.name.clone());
                continue;
            }
            top.add_net(net.clone());
            if clock {
                pll.add_port(net.clone(), Direction::Out);
                pll_inst = pll_inst.pin(net.clone(), net.clone());
            } else {
                let dir = if p.dir == Direction::In {
                    Direction::Out
                } else {
                    Direction::In
                };
                glue.add_port(net.clone(), dir);
                glue_inst = glue_inst.pin(net.clone(), net.clone());
            }
            inst = inst.pin(p.name.clone(), net);
        }
        core_insts.push(inst);
        leaves.push(core_module(core));
    }
    for mem in memories {
        let mut m = Module::new(format!("sram_{}x{}", mem.words, mem.width));
        for (p, d) in [("ck", Direction::In), ("d", Direction::In), ("q", Direction::Out)] {
            m.add_port(p, d);
        }
        let mut inst = Instance::new(m.name.clone(), format!("{}_i", mem.name)).pin("ck", CONTROLLER_CLOCK);
        for (p, gdir) in [("d", Direction::Out), ("q", Direction::In)] {
            let net = top.add_net(format!("{}_{p}", mem.name));
            glue.add_port(net.clone(), gdir);
            glue_inst = glue_inst.pin(net.clone(), net.clone());
            inst = inst.pin(p, net);
        }
        core_insts.push(inst);
        if !leaves.iter().any(|l: &Module| l.name == m.name) {
            leaves.push(m);
        }
    }
    top.instances.push(pll_inst);
    top.instances.push(glue_inst);
    top.instances.extend(core_insts);

    let mut modules = vec![top, pll, glue];
    modules.extend(leaves);
    Netlist {
        top: name.to_string(),
        modules,
    }
}

/// Name of the top-level clock the session register runs on.
pub const CONTROLLER_CLOCK: &str = "clk";

/// Re-parents each wrapped core into its wrapper and adds pads, controller,
/// TAM multiplexer and BIST block to the top module.
pub fn insert_dft(soc: &Netlist, cores: &[CoreTestInfo], fabric: &GeneratedTestFabric) -> Result<Netlist, DftError> {
    let mut out = soc.clone();
    let top_name = out.top.clone();
    if out.module(&top_name).is_none() {
        return Err(DftError::MissingTop(top_name));
    }
    if fabric.wrappers.is_empty() && fabric.controller.is_none() && fabric.tam_mux.is_none() && fabric.bist.is_none() {
        return Ok(out);
    }

    let mut used: BTreeSet<String> = {
        let top = out.module(&top_name).expect("checked above");
        top.ports
            .iter()
            .map(|p| p.name.clone())
            .chain(top.nets.iter().cloned())
            .chain(top.instances.iter().map(|i| i.name.clone()))
            .collect()
    };
    let mut claim = |name: String| -> Result<String, DftError> {
        if used.insert(name.clone()) {
            Ok(name)
        } else {
            Err(DftError::NameClash(name))
        }
    };

    // signals driven by the controller and the TAM multiplexer
    let mut driven: BTreeSet<String> = BTreeSet::new();
    for m in fabric.controller.iter().chain(fabric.tam_mux.iter()) {
        for p in &m.ports {
            if p.dir == Direction::Out {
                driven.insert(p.name.clone());
            }
        }
    }

    let mut new_nets: Vec<String> = Vec::new();
    let mut new_ports: Vec<Port> = Vec::new();
    let mut new_insts: Vec<Instance> = Vec::new();
    let tie = claim("stk_tie0".into())?;
    new_nets.push(tie.clone());
    new_insts.push(Instance::new("STK_TIE0", claim("u_stk_tie0".into())?).pin("y", tie.clone()));

    for w in &fabric.wrappers {
        let core = cores
            .iter()
            .find(|c| c.name == w.core)
            .ok_or_else(|| DftError::UnknownCore(w.core.clone()))?;
        let expected = core_ports(core);
        if let Some(def) = out.module(&core.name) {
            let have: BTreeSet<(&str, Direction)> = def.ports.iter().map(|p| (p.name.as_str(), p.dir)).collect();
            let want: BTreeSet<(&str, Direction)> = expected.iter().map(|p| (p.name.as_str(), p.dir)).collect();
            if let Some(p) = have.symmetric_difference(&want).next() {
                return Err(DftError::PortMismatch {
                    core: core.name.clone(),
                    port: p.0.to_string(),
                });
            }
        }
        let top = out.module_mut(&top_name).expect("checked above");
        let hits = top.instances.iter().filter(|i| i.module == core.name).count();
        if hits == 0 {
            return Err(DftError::MissingCoreInstance(core.name.clone()));
        }
        if hits > 1 {
            return Err(DftError::DuplicateCoreInstance(core.name.clone()));
        }
        let inst = top
            .instances
            .iter_mut()
            .find(|i| i.module == core.name)
            .expect("found above");
        let mut conns = Vec::new();
        for (port, conn) in &inst.conns {
            if !expected.iter().any(|p| &p.name == port) {
                return Err(DftError::PortMismatch {
                    core: core.name.clone(),
                    port: port.clone(),
                });
            }
            if is_scan_port(core, port) {
                if *conn != Conn::Open {
                    return Err(DftError::ScanPortConnected {
                        core: core.name.clone(),
                        port: port.clone(),
                    });
                }
                continue;
            }
            conns.push((port.clone(), conn.clone()));
        }
        let mut inst_test = Vec::new();
        for p in wrapper_test_ports(core, w.config.width, w.direct) {
            let sig = format!("{}__{}", core.name, p.name);
            let ctrl = ["wmode", "wint", "wdir"].contains(&p.name.as_str());
            let conn = if driven.contains(&sig) || (ctrl && fabric.controller.is_some()) {
                Conn::Net(sig.clone())
            } else if p.dir == Direction::In {
                Conn::Net(tie.clone())
            } else {
                Conn::Open
            };
            if let Conn::Net(n) = &conn {
                if *n != tie && !new_nets.contains(n) {
                    inst_test.push(n.clone());
                }
            }
            conns.push((p.name.clone(), conn));
        }
        inst.module = w.module.name.clone();
        inst.conns = conns;
        for n in inst_test {
            new_nets.push(claim(n)?);
        }
    }

    if let Some(ctrl) = &fabric.controller {
        {
            let top = out.module(&top_name).expect("checked above");
            let clock_ok = top
                .ports
                .iter()
                .any(|p| p.name == CONTROLLER_CLOCK && p.dir != Direction::Out)
                || top.nets.iter().any(|n| n == CONTROLLER_CLOCK);
            if !clock_ok {
                return Err(DftError::MissingClock(CONTROLLER_CLOCK.into()));
            }
        }
        for p in ["test_mode", "session_si"] {
            new_ports.push(Port::new(claim(p.into())?, Direction::In));
        }
        let mut inst = Instance::new(CONTROLLER_MODULE, claim("u_stk_ctrl".into())?)
            .pin("clk", CONTROLLER_CLOCK)
            .pin("test_mode", "test_mode")
            .pin("session_si", "session_si");
        for p in ctrl.ports.iter().filter(|p| p.dir == Direction::Out) {
            let net = if p.name.starts_with("sess") {
                format!("stk_{}", p.name)
            } else {
                p.name.clone()
            };
            if !new_nets.contains(&net) {
                new_nets.push(claim(net.clone())?);
            }
            inst = inst.pin(p.name.clone(), net);
        }
        new_insts.push(inst);
    }

    if let Some(tam) = &fabric.tam_mux {
        let mut inst = Instance::new(TAM_MODULE, claim("u_stk_tam".into())?);
        for p in &tam.ports {
            let net = if p.dir == Direction::InOut {
                new_ports.push(Port::new(claim(p.name.clone())?, Direction::InOut));
                p.name.clone()
            } else if p.name.starts_with("sess") {
                format!("stk_{}", p.name)
            } else {
                if !new_nets.contains(&p.name) {
                    new_nets.push(claim(p.name.clone())?);
                }
                p.name.clone()
            };
            inst = inst.pin(p.name.clone(), net);
        }
        new_insts.push(inst);
    }

    if let Some(bist) = &fabric.bist {
        let def = bist
            .modules
            .iter()
            .find(|m| m.name == bist.top_module)
            .ok_or_else(|| DftError::UnknownCore(bist.top_module.clone()))?;
        let mut inst = Instance::new(def.name.clone(), claim(format!("u_{}", bist.entity))?);
        for p in &def.ports {
            let sig = format!("{}__{}", bist.entity, p.name);
            let conn = if driven.contains(&sig) || p.dir == Direction::Out {
                if !new_nets.contains(&sig) {
                    new_nets.push(claim(sig.clone())?);
                }
                Conn::Net(sig)
            } else {
                Conn::Net(tie.clone())
            };
            inst.conns.push((p.name.clone(), conn));
        }
        new_insts.push(inst);
    }

    {
        let top = out.module_mut(&top_name).expect("checked above");
        top.ports.extend(new_ports);
        top.nets.extend(new_nets);
        top.instances.extend(new_insts);
    }
    for m in cell_library() {
        out.add_module(m);
    }
    for m in fabric.modules() {
        out.add_module(m.clone());
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct AreaConstants {
    pub wbr_cell: u64,
    pub controller: u64,
    pub tam_mux: u64,
}

impl Default for AreaConstants {
    fn default() -> Self {
        AreaConstants {
            wbr_cell: crate::wrapper::WBR_CELL_AREA,
            controller: 371,
            tam_mux: 132,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AreaReport {
    pub wbr_cells: u64,
    pub wbr_area: u64,
    pub controller_area: u64,
    pub tam_mux_area: u64,
    pub total: u64,
    pub chip_gates: u64,
    pub overhead_fraction: f64,
}

pub fn area_report(fabric: &GeneratedTestFabric, chip_gates: u64) -> Result<AreaReport, DftError> {
    area_from_cells(fabric.wbr_cells(), &AreaConstants::default(), chip_gates)
}

pub fn area_from_cells(cells: u64, k: &AreaConstants, chip_gates: u64) -> Result<AreaReport, DftError> {
    if chip_gates == 0 {
        return Err(DftError::ZeroChipGates);
    }
    let wbr_area = k.wbr_cell * cells;
    let total = wbr_area + k.controller + k.tam_mux;
    if total > chip_gates {
        return Err(DftError::AreaExceedsChip {
            test: total,
            chip: chip_gates,
        });
    }
    Ok(AreaReport {
        wbr_cells: cells,
        wbr_area,
        controller_area: k.controller,
        tam_mux_area: k.tam_mux,
        total,
        chip_gates,
        overhead_fraction: total as f64 / chip_gates as f64,
    })
}

#[cfg(test)]
mod tests;
