// SPDX-License-Identifier: Apache-2.0

//! Gate-level BIST fabric: one shared controller, address sequencers that
//! step through the March algorithm, and one TPG per memory that turns the
//! sequencer's command into RAM signals and compares read data.
//!
//! Sequencer commands are `active`, `cmd_w` (write), `cmd_v` (data value)
//! and the address. A TPG drives `we`, `re`, `a<i>`, `d<j>` and reads `q<j>`
//! combinationally. Start is synchronous: the cycle with `start` high resets
//! every sequencer, the March ops follow one per cycle, and `done` rises one
//! cycle after the last op. Once done, `diag` shifts out the per-memory fail
//! flags, last memory first.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::Serialize;

use super::{check_memory, march_trace, Fault, FaultyMemory, MarchAlgorithm, MarchError, RamOp};
use crate::dft::{BistBlock, Builder};
use crate::model::{ControlKind, ControlPin, MemoryConfig};
use crate::netlist::{cell_library, Direction, GateSim, Instance, Module, Netlist};
use crate::schedule::BistEntitySpec;

/// Name of the BIST test entity and of its top module.
pub const BIST_ENTITY: &str = "mbist";

/// How memories are bound to sequencers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum GroupingPolicy {
    /// One sequencer per distinct (words, width).
    #[default]
    PerShape,
    /// One sequencer per distinct depth.
    PerDepth,
    PerMemory,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Sequencer {
    pub module: Module,
    pub words: u32,
    pub address_bits: u32,
    /// Indices into the memory list.
    pub memories: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Tpg {
    pub memory: String,
    pub module: Module,
    pub sequencer: usize,
    pub address_bits: u32,
    pub width: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BistFabric {
    pub entity: String,
    pub algorithm: MarchAlgorithm,
    pub controller: Module,
    pub sequencers: Vec<Sequencer>,
    pub tpgs: Vec<Tpg>,
    pub top: Module,
    /// Start cycle, the longest sequencer's ops, and the done cycle.
    pub cycles: u64,
}

impl BistFabric {
    pub fn modules(&self) -> Vec<&Module> {
        let mut out = vec![&self.top, &self.controller];
        out.extend(self.sequencers.iter().map(|s| &s.module));
        out.extend(self.tpgs.iter().map(|t| &t.module));
        out
    }

    pub fn block(&self) -> BistBlock {
        BistBlock {
            entity: self.entity.clone(),
            top_module: self.top.name.clone(),
            modules: self.modules().into_iter().cloned().collect(),
        }
    }

    /// Stand-alone netlist with the fabric's top module as top.
    pub fn netlist(&self) -> Netlist {
        let mut modules = cell_library();
        modules.extend(self.modules().into_iter().cloned());
        Netlist {
            top: self.top.name.clone(),
            modules,
        }
    }

    /// The fabric as a schedulable test: start/done/fail/diag plus a clock.
    pub fn entity_spec(&self, power: f64) -> BistEntitySpec {
        BistEntitySpec {
            name: self.entity.clone(),
            cycles: self.cycles,
            data_pins: 4,
            control_pins: vec![ControlPin::new("clk", ControlKind::Clock)],
            power,
        }
    }

    /// Library cells in the controller, sequencers and TPGs.
    pub fn cell_count(&self) -> usize {
        self.modules().iter().skip(1).map(|m| m.instances.len()).sum()
    }
}

fn bit(v: u32, i: u32) -> bool {
    (v >> i) & 1 == 1
}

/// Flattened program: (element, op) per step.
struct Program<'a> {
    m: &'a MarchAlgorithm,
    steps: Vec<(usize, super::MarchOp)>,
    first: Vec<usize>,
}

impl<'a> Program<'a> {
    fn new(m: &'a MarchAlgorithm) -> Self {
        let mut steps = Vec::new();
        let mut first = Vec::new();
        for (e, el) in m.elements.iter().enumerate() {
            first.push(steps.len());
            steps.extend(el.ops.iter().map(|&op| (e, op)));
        }
        Program { m, steps, first }
    }

    fn last_of_element(&self, s: usize) -> bool {
        s + 1 == self.steps.len() || self.steps[s + 1].0 != self.steps[s].0
    }

    fn down(&self, e: usize) -> bool {
        self.m.elements[e].order.descending()
    }
}

fn sequencer_module(name: String, m: &MarchAlgorithm, words: u32, abits: u32) -> Module {
    let p = Program::new(m);
    let n = p.steps.len();
    let mut b = Builder::new(name);
    for port in ["ck", "rst"] {
        b.m.add_port(port, Direction::In);
    }
    for port in ["active", "cmd_w", "cmd_v", "done"] {
        b.m.add_port(port, Direction::Out);
    }
    for i in 0..abits {
        b.m.add_port(format!("a{i}"), Direction::Out);
    }
    let lo = b.net("lo".into());
    b.tie("STK_TIE0", &lo);
    let hi = b.net("hi".into());
    b.tie("STK_TIE1", &hi);
    let nrst = b.net("nrst".into());
    b.gate1("STK_INV", "rst", &nrst);

    let pc: Vec<String> = (0..n).map(|s| b.net(format!("pc{s}"))).collect();
    let na: Vec<String> = (0..abits)
        .map(|i| {
            let x = b.net(format!("na{i}"));
            b.gate1("STK_INV", &format!("a{i}"), &x);
            x
        })
        .collect();
    let top = words - 1;
    let lits: Vec<String> = (0..abits)
        .map(|i| {
            if bit(top, i) {
                format!("a{i}")
            } else {
                na[i as usize].clone()
            }
        })
        .collect();
    let at_top = b.net("at_top".into());
    b.reduce("STK_AND2", &lits, &at_top, "STK_TIE1");
    let at_zero = b.net("at_zero".into());
    b.reduce("STK_AND2", &na, &at_zero, "STK_TIE1");
    let not_top = b.net("not_top".into());
    b.gate1("STK_INV", &at_top, &not_top);
    let not_zero = b.net("not_zero".into());
    b.gate1("STK_INV", &at_zero, &not_zero);

    // Per last-op step: advance to the next element or wrap to this one.
    let mut adv = vec![String::new(); n];
    let mut wrap = vec![String::new(); n];
    for s in (0..n).filter(|&s| p.last_of_element(s)) {
        let down = p.down(p.steps[s].0);
        let (end, more) = if down {
            (&at_zero, &not_zero)
        } else {
            (&at_top, &not_top)
        };
        adv[s] = b.net(format!("adv{s}"));
        b.gate2("STK_AND2", &pc[s], end, &adv[s]);
        wrap[s] = b.net(format!("wrap{s}"));
        b.gate2("STK_AND2", &pc[s], more, &wrap[s]);
    }
    for t in 0..n {
        let mut from = Vec::new();
        if t > 0 {
            from.push(if p.last_of_element(t - 1) {
                adv[t - 1].clone()
            } else {
                pc[t - 1].clone()
            });
        }
        for s in (0..n).filter(|&s| p.last_of_element(s) && p.first[p.steps[s].0] == t) {
            from.push(wrap[s].clone());
        }
        let next = b.fresh("pcn");
        b.reduce("STK_OR2", &from, &next, "STK_TIE0");
        let d = b.fresh("pcd");
        if t == 0 {
            b.gate2("STK_OR2", "rst", &next, &d);
        } else {
            b.gate2("STK_AND2", &nrst, &next, &d);
        }
        b.cell(
            Instance::new("STK_DFF", format!("pc_reg{t}"))
                .pin("d", d)
                .pin("ck", "ck")
                .pin("q", pc[t].clone()),
        );
    }

    // Address counter.
    let wraps: Vec<String> = wrap.iter().filter(|w| !w.is_empty()).cloned().collect();
    let step = b.net("step".into());
    b.reduce("STK_OR2", &wraps, &step, "STK_TIE0");
    let downs: Vec<String> = (0..n)
        .filter(|&s| p.down(p.steps[s].0))
        .map(|s| pc[s].clone())
        .collect();
    let dn = b.net("dn".into());
    b.reduce("STK_OR2", &downs, &dn, "STK_TIE0");
    let mut reload_up = Vec::new();
    let mut reload_dn = Vec::new();
    for s in (0..n).filter(|&s| p.last_of_element(s) && s + 1 < n) {
        if p.down(p.steps[s].0 + 1) {
            reload_dn.push(adv[s].clone());
        } else {
            reload_up.push(adv[s].clone());
        }
    }
    let rl_up = b.net("reload_up".into());
    b.reduce("STK_OR2", &reload_up, &rl_up, "STK_TIE0");
    let rl_dn = b.net("reload_dn".into());
    b.reduce("STK_OR2", &reload_dn, &rl_dn, "STK_TIE0");
    let start = if p.down(0) { top } else { 0 };
    let mut carry = hi.clone();
    for i in 0..abits {
        let a = format!("a{i}");
        let t = b.fresh("t");
        b.gate2("STK_XOR2", &a, &dn, &t);
        let inc = b.fresh("inc");
        b.gate2("STK_XOR2", &a, &carry, &inc);
        let c = b.fresh("c");
        b.gate2("STK_AND2", &carry, &t, &c);
        carry = c;
        let x1 = b.fresh("x");
        b.mux(&a, &inc, &step, &x1);
        let x2 = b.fresh("x");
        b.mux(&x1, if bit(top, i) { &hi } else { &lo }, &rl_dn, &x2);
        let x3 = b.fresh("x");
        b.mux(&x2, &lo, &rl_up, &x3);
        let d = b.fresh("ad");
        b.mux(&x3, if bit(start, i) { &hi } else { &lo }, "rst", &d);
        b.cell(
            Instance::new("STK_DFF", format!("a_reg{i}"))
                .pin("d", d)
                .pin("ck", "ck")
                .pin("q", a),
        );
    }

    let held = b.fresh("dh");
    b.gate2("STK_OR2", "done", &adv[n - 1], &held);
    let dd = b.fresh("dd");
    b.gate2("STK_AND2", &nrst, &held, &dd);
    b.cell(
        Instance::new("STK_DFF", "done_reg")
            .pin("d", dd)
            .pin("ck", "ck")
            .pin("q", "done"),
    );

    b.reduce("STK_OR2", &pc, "active", "STK_TIE0");
    let writes: Vec<String> = (0..n)
        .filter(|&s| p.steps[s].1.is_write())
        .map(|s| pc[s].clone())
        .collect();
    b.reduce("STK_OR2", &writes, "cmd_w", "STK_TIE0");
    let ones: Vec<String> = (0..n)
        .filter(|&s| p.steps[s].1.value())
        .map(|s| pc[s].clone())
        .collect();
    b.reduce("STK_OR2", &ones, "cmd_v", "STK_TIE0");
    b.m
}

fn tpg_module(name: String, abits: u32, width: u32) -> Module {
    let mut b = Builder::new(name);
    for port in ["active", "cmd_w", "cmd_v"] {
        b.m.add_port(port, Direction::In);
    }
    for i in 0..abits {
        b.m.add_port(format!("s_a{i}"), Direction::In);
    }
    for j in 0..width {
        b.m.add_port(format!("q{j}"), Direction::In);
    }
    for port in ["we", "re", "fail"] {
        b.m.add_port(port, Direction::Out);
    }
    for i in 0..abits {
        b.m.add_port(format!("a{i}"), Direction::Out);
    }
    for j in 0..width {
        b.m.add_port(format!("d{j}"), Direction::Out);
    }
    let ncw = b.net("ncw".into());
    b.gate1("STK_INV", "cmd_w", &ncw);
    b.gate2("STK_AND2", "active", "cmd_w", "we");
    b.gate2("STK_AND2", "active", &ncw, "re");
    for i in 0..abits {
        b.gate1("STK_BUF", &format!("s_a{i}"), &format!("a{i}"));
    }
    let mut diffs = Vec::new();
    for j in 0..width {
        b.gate1("STK_BUF", "cmd_v", &format!("d{j}"));
        let x = b.net(format!("x{j}"));
        b.gate2("STK_XOR2", &format!("q{j}"), "cmd_v", &x);
        diffs.push(x);
    }
    let any = b.net("miscompare".into());
    b.reduce("STK_OR2", &diffs, &any, "STK_TIE0");
    b.gate2("STK_AND2", "re", &any, "fail");
    b.m
}

fn controller_module(name: String, sequencers: usize, memories: usize) -> Module {
    let mut b = Builder::new(name);
    for port in ["ck", "start", "wmode"] {
        b.m.add_port(port, Direction::In);
    }
    for k in 0..sequencers {
        b.m.add_port(format!("sdone{k}"), Direction::In);
    }
    for m in 0..memories {
        b.m.add_port(format!("mfail{m}"), Direction::In);
    }
    for port in ["rst", "done", "fail", "diag"] {
        b.m.add_port(port, Direction::Out);
    }
    b.gate2("STK_AND2", "start", "wmode", "rst");
    let nrst = b.net("nrst".into());
    b.gate1("STK_INV", "rst", &nrst);
    let sdone: Vec<String> = (0..sequencers).map(|k| format!("sdone{k}")).collect();
    b.reduce("STK_AND2", &sdone, "done", "STK_TIE1");
    let mfail: Vec<String> = (0..memories).map(|m| format!("mfail{m}")).collect();
    let any = b.net("any_fail".into());
    b.reduce("STK_OR2", &mfail, &any, "STK_TIE0");
    let keep = b.fresh("fk");
    b.gate2("STK_OR2", "fail", &any, &keep);
    let fd = b.fresh("fd");
    b.gate2("STK_AND2", &nrst, &keep, &fd);
    b.cell(
        Instance::new("STK_DFF", "fail_reg")
            .pin("d", fd)
            .pin("ck", "ck")
            .pin("q", "fail"),
    );

    let lo = b.net("lo".into());
    b.tie("STK_TIE0", &lo);
    let flags: Vec<String> = (0..memories).map(|m| b.net(format!("flag{m}"))).collect();
    for m in 0..memories {
        let acc = b.fresh("fa");
        b.gate2("STK_OR2", &flags[m], &mfail[m], &acc);
        let clr = b.fresh("fc");
        b.gate2("STK_AND2", &nrst, &acc, &clr);
        let prev = if m == 0 { lo.clone() } else { flags[m - 1].clone() };
        let d = b.fresh("fs");
        b.mux(&clr, &prev, "done", &d);
        b.cell(
            Instance::new("STK_DFF", format!("flag_reg{m}"))
                .pin("d", d)
                .pin("ck", "ck")
                .pin("q", flags[m].clone()),
        );
    }
    match flags.last() {
        Some(f) => b.gate1("STK_BUF", &f.clone(), "diag"),
        None => b.tie("STK_TIE0", "diag"),
    }
    b.m
}

/// Memory-side port names of the fabric top for memory `name`.
pub fn memory_port(name: &str, signal: &str) -> String {
    format!("{name}_{signal}")
}

pub fn generate_bist(
    memories: &[MemoryConfig],
    m: &MarchAlgorithm,
    grouping: GroupingPolicy,
) -> Result<BistFabric, MarchError> {
    if memories.is_empty() {
        return Err(MarchError::NoMemories);
    }
    if m.elements.is_empty() {
        return Err(MarchError::NoElements);
    }
    if let Some(i) = m.elements.iter().position(|e| e.ops.is_empty()) {
        return Err(MarchError::EmptyElement(i));
    }
    for (i, mem) in memories.iter().enumerate() {
        check_memory(mem)?;
        if memories[..i].iter().any(|o| o.name == mem.name) {
            return Err(MarchError::BadMemory {
                name: mem.name.clone(),
                detail: "declared twice".into(),
            });
        }
    }
    let entity = BIST_ENTITY.to_string();

    let mut groups: BTreeMap<(u32, u32, usize), Vec<usize>> = BTreeMap::new();
    for (i, mem) in memories.iter().enumerate() {
        let key = match grouping {
            GroupingPolicy::PerShape => (mem.words, mem.width, 0),
            GroupingPolicy::PerDepth => (mem.words, 0, 0),
            GroupingPolicy::PerMemory => (mem.words, mem.width, i),
        };
        groups.entry(key).or_default().push(i);
    }
    let mut sequencers = Vec::new();
    let mut bound = vec![0usize; memories.len()];
    for (k, members) in groups.into_values().enumerate() {
        let mem = &memories[members[0]];
        let abits = mem.address_bits();
        for &i in &members {
            bound[i] = k;
        }
        sequencers.push(Sequencer {
            module: sequencer_module(format!("{entity}_seq{k}"), m, mem.words, abits),
            words: mem.words,
            address_bits: abits,
            memories: members,
        });
    }
    let tpgs: Vec<Tpg> = memories
        .iter()
        .enumerate()
        .map(|(i, mem)| {
            let abits = mem.address_bits();
            Tpg {
                memory: mem.name.clone(),
                module: tpg_module(format!("{entity}_tpg_{}", mem.name), abits, mem.width),
                sequencer: bound[i],
                address_bits: abits,
                width: mem.width,
            }
        })
        .collect();
    let controller = controller_module(format!("{entity}_ctrl"), sequencers.len(), memories.len());

    let mut top = Module::new(entity.clone());
    for port in ["wmode", "t_clk", "start"] {
        top.add_port(port, Direction::In);
    }
    for port in ["done", "fail", "diag"] {
        top.add_port(port, Direction::Out);
    }
    for (mem, t) in memories.iter().zip(&tpgs) {
        for s in ["we", "re"] {
            top.add_port(memory_port(&mem.name, s), Direction::Out);
        }
        for i in 0..t.address_bits {
            top.add_port(memory_port(&mem.name, &format!("a{i}")), Direction::Out);
        }
        for j in 0..mem.width {
            top.add_port(memory_port(&mem.name, &format!("d{j}")), Direction::Out);
        }
        for j in 0..mem.width {
            top.add_port(memory_port(&mem.name, &format!("q{j}")), Direction::In);
        }
    }
    let rst = top.add_net("rst");
    let mut ctrl = Instance::new(controller.name.clone(), "u_ctrl")
        .pin("ck", "t_clk")
        .pin("start", "start")
        .pin("wmode", "wmode")
        .pin("rst", rst.clone())
        .pin("done", "done")
        .pin("fail", "fail")
        .pin("diag", "diag");
    for (k, sq) in sequencers.iter().enumerate() {
        let net = |s: &str| format!("seq{k}_{s}");
        let mut inst = Instance::new(sq.module.name.clone(), format!("u_seq{k}"))
            .pin("ck", "t_clk")
            .pin("rst", rst.clone());
        for s in ["active", "cmd_w", "cmd_v", "done"] {
            inst = inst.pin(s, top.add_net(net(s)));
        }
        for i in 0..sq.address_bits {
            inst = inst.pin(format!("a{i}"), top.add_net(net(&format!("a{i}"))));
        }
        top.instances.push(inst);
        ctrl = ctrl.pin(format!("sdone{k}"), net("done"));
    }
    for (i, (mem, t)) in memories.iter().zip(&tpgs).enumerate() {
        let k = t.sequencer;
        let seq = |s: &str| format!("seq{k}_{s}");
        let port = |s: &str| memory_port(&mem.name, s);
        let fail = top.add_net(format!("mfail{i}"));
        let mut inst = Instance::new(t.module.name.clone(), format!("u_tpg_{}", mem.name))
            .pin("active", seq("active"))
            .pin("cmd_w", seq("cmd_w"))
            .pin("cmd_v", seq("cmd_v"))
            .pin("we", port("we"))
            .pin("re", port("re"))
            .pin("fail", fail.clone());
        for a in 0..t.address_bits {
            inst = inst
                .pin(format!("s_a{a}"), seq(&format!("a{a}")))
                .pin(format!("a{a}"), port(&format!("a{a}")));
        }
        for j in 0..mem.width {
            inst = inst
                .pin(format!("q{j}"), port(&format!("q{j}")))
                .pin(format!("d{j}"), port(&format!("d{j}")));
        }
        top.instances.push(inst);
        ctrl = ctrl.pin(format!("mfail{i}"), fail);
    }
    top.instances.push(ctrl);

    let ops = memories
        .iter()
        .map(|mem| super::bist_test_time(m, mem))
        .max()
        .unwrap_or(0);
    Ok(BistFabric {
        entity,
        algorithm: m.clone(),
        controller,
        sequencers,
        tpgs,
        top,
        cycles: ops + 2,
    })
}

/// One RAM access observed on the fabric's memory ports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RamEvent {
    pub cycle: u64,
    pub op: RamOp,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FabricRun {
    /// Per memory, in input order.
    pub traces: Vec<Vec<RamEvent>>,
    pub done_cycle: Option<u64>,
    pub fail: bool,
    /// Per-memory fail flags read from the diagnostic shift-out.
    pub diag: Vec<bool>,
}

/// Gate-level simulation of the fabric against behavioral memories, each
/// optionally carrying one fault.
pub fn run_fabric(
    f: &BistFabric,
    memories: &[MemoryConfig],
    faults: &[Option<Fault>],
) -> Result<FabricRun, MarchError> {
    let mut sim = GateSim::new(&f.netlist())?;
    let mut rams: Vec<FaultyMemory> = memories
        .iter()
        .enumerate()
        .map(|(i, m)| FaultyMemory::new(m, faults.get(i).copied().flatten()))
        .collect();
    let names: Vec<Vec<(String, String)>> = memories
        .iter()
        .map(|m| {
            (0..m.width)
                .map(|j| {
                    (
                        memory_port(&m.name, &format!("q{j}")),
                        memory_port(&m.name, &format!("d{j}")),
                    )
                })
                .collect()
        })
        .collect();
    let abits: Vec<u32> = memories.iter().map(MemoryConfig::address_bits).collect();

    sim.set_many([("wmode", true), ("t_clk", true), ("start", true)])?;
    sim.tick()?;
    sim.set("start", false)?;
    let mut traces = vec![Vec::new(); memories.len()];
    let mut done_cycle = None;
    let limit = f.cycles + 2;
    for cycle in 1..limit {
        let mut addrs = Vec::with_capacity(memories.len());
        for (i, m) in memories.iter().enumerate() {
            let mut a = 0u32;
            for b in 0..abits[i] {
                if sim.get(&memory_port(&m.name, &format!("a{b}")))? {
                    a |= 1 << b;
                }
            }
            addrs.push(a);
        }
        let mut inputs = Vec::new();
        for (i, m) in memories.iter().enumerate() {
            let word = if addrs[i] < m.words { rams[i].read(addrs[i]) } else { 0 };
            for (j, (q, _)) in names[i].iter().enumerate() {
                inputs.push((q.as_str(), (word >> j) & 1 == 1));
            }
        }
        sim.set_many(inputs)?;
        for (i, m) in memories.iter().enumerate() {
            let we = sim.get(&memory_port(&m.name, "we"))?;
            let re = sim.get(&memory_port(&m.name, "re"))?;
            if !we && !re {
                continue;
            }
            let mut data = 0u64;
            for (j, (_, d)) in names[i].iter().enumerate() {
                if sim.get(d)? {
                    data |= 1 << j;
                }
            }
            if addrs[i] >= m.words {
                return Err(MarchError::Divergence {
                    memory: m.name.clone(),
                    cycle,
                    detail: format!("address {} out of range", addrs[i]),
                });
            }
            traces[i].push(RamEvent {
                cycle,
                op: RamOp {
                    write: we,
                    addr: addrs[i],
                    data,
                },
            });
            if we {
                rams[i].write(addrs[i], data);
            }
        }
        if sim.get("done")? {
            done_cycle = Some(cycle);
            break;
        }
        sim.tick()?;
    }
    let fail = sim.get("fail")?;
    let mut diag = vec![false; memories.len()];
    if done_cycle.is_some() {
        for k in 0..memories.len() {
            diag[memories.len() - 1 - k] = sim.get("diag")?;
            sim.tick()?;
        }
    }
    Ok(FabricRun {
        traces,
        done_cycle,
        fail,
        diag,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VerifyReport {
    /// (memory, ops compared).
    pub memories: Vec<(String, u64)>,
    pub cycles: u64,
}

/// Checks that the fabric drives every memory with exactly the fault-free
/// trace of `m`, finishes on time and reports no failure.
pub fn verify_fabric(
    f: &BistFabric,
    memories: &[MemoryConfig],
    m: &MarchAlgorithm,
) -> Result<VerifyReport, MarchError> {
    let run = run_fabric(f, memories, &[])?;
    let mut out = Vec::new();
    for (i, mem) in memories.iter().enumerate() {
        let want = march_trace(m, mem);
        let got = &run.traces[i];
        let diverge = |cycle: u64, detail: String| MarchError::Divergence {
            memory: mem.name.clone(),
            cycle,
            detail,
        };
        for (k, w) in want.iter().enumerate() {
            match got.get(k) {
                Some(g) if g.op == *w => {}
                Some(g) => return Err(diverge(g.cycle, format!("expected {w:?}, fabric drove {:?}", g.op))),
                None => return Err(diverge(k as u64 + 1, format!("expected {w:?}, fabric idle"))),
            }
        }
        if let Some(extra) = got.get(want.len()) {
            return Err(diverge(extra.cycle, format!("unexpected {:?}", extra.op)));
        }
        out.push((mem.name.clone(), want.len() as u64));
    }
    let expect_done = f.cycles - 1;
    if run.done_cycle != Some(expect_done) {
        return Err(MarchError::Divergence {
            memory: f.entity.clone(),
            cycle: expect_done,
            detail: format!("done expected at cycle {expect_done}, seen at {:?}", run.done_cycle),
        });
    }
    if run.fail || run.diag.iter().any(|&d| d) {
        return Err(MarchError::Divergence {
            memory: f.entity.clone(),
            cycle: expect_done,
            detail: "fail raised on fault-free memories".into(),
        });
    }
    Ok(VerifyReport {
        memories: out,
        cycles: f.cycles,
    })
}
