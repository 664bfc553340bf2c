// SPDX-License-Identifier: Apache-2.0

//! March memory tests: notation, test time, a bit-accurate fault simulator,
//! exhaustive coverage, and the generated BIST fabric (see [`fabric`]).
//!
//! Data backgrounds are solid: `w1` writes all ones into the word, `r0`
//! expects all zeros. `either` address order runs ascending.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::model::MemoryConfig;

mod fabric;
pub use fabric::*;

/// Most single faults [`fault_coverage`] will enumerate.
pub const FAULT_LIMIT: u64 = 65_536;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum AddressOrder {
    Up,
    Down,
    Either,
}

impl AddressOrder {
    pub fn symbol(self) -> char {
        match self {
            AddressOrder::Up => '^',
            AddressOrder::Down => 'v',
            AddressOrder::Either => '*',
        }
    }

    pub fn descending(self) -> bool {
        self == AddressOrder::Down
    }
}

/// One March operation. Encoded as two bits: write flag, then data value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum MarchOp {
    R0,
    R1,
    W0,
    W1,
}

impl MarchOp {
    pub fn is_write(self) -> bool {
        matches!(self, MarchOp::W0 | MarchOp::W1)
    }

    pub fn value(self) -> bool {
        matches!(self, MarchOp::R1 | MarchOp::W1)
    }

    pub fn code(self) -> u8 {
        (u8::from(self.is_write()) << 1) | u8::from(self.value())
    }

    pub fn from_code(c: u8) -> Self {
        match c & 3 {
            0 => MarchOp::R0,
            1 => MarchOp::R1,
            2 => MarchOp::W0,
            _ => MarchOp::W1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            MarchOp::R0 => "r0",
            MarchOp::R1 => "r1",
            MarchOp::W0 => "w0",
            MarchOp::W1 => "w1",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MarchElement {
    pub order: AddressOrder,
    pub ops: Vec<MarchOp>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MarchAlgorithm {
    pub name: String,
    pub elements: Vec<MarchElement>,
}

impl MarchAlgorithm {
    pub fn op_count(&self) -> u64 {
        self.elements.iter().map(|e| e.ops.len() as u64).sum()
    }

    /// Whether every read expects the value last written, so a fault-free
    /// memory passes whatever its power-up contents.
    pub fn consistent(&self) -> bool {
        let mut value = None;
        for op in self.elements.iter().flat_map(|e| &e.ops) {
            if op.is_write() {
                value = Some(op.value());
            } else if value != Some(op.value()) {
                return false;
            }
        }
        true
    }

    pub fn has_reads(&self) -> bool {
        self.elements.iter().flat_map(|e| &e.ops).any(|o| !o.is_write())
    }
}

impl fmt::Display for MarchAlgorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if !self.name.is_empty() {
            write!(f, "{}: ", self.name)?;
        }
        f.write_str("{")?;
        for (i, e) in self.elements.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{}(", e.order.symbol())?;
            for (k, op) in e.ops.iter().enumerate() {
                if k > 0 {
                    f.write_str(",")?;
                }
                f.write_str(op.name())?;
            }
            f.write_str(")")?;
        }
        f.write_str("}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MarchError {
    #[error("march syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown march operation {op:?} at offset {offset}")]
    UnknownOp { op: String, offset: usize },
    #[error("march elements nonempty: the algorithm has no elements")]
    NoElements,
    #[error("march element {0} has no operations")]
    EmptyElement(usize),
    #[error("{count} faults exceed the enumeration limit of {limit}")]
    TooManyFaults { count: u64, limit: u64 },
    #[error("memory {name}: {detail}")]
    BadMemory { name: String, detail: String },
    #[error("no memories to test")]
    NoMemories,
    #[error("memory {memory}: fabric diverges from the march trace at cycle {cycle}: {detail}")]
    Divergence { memory: String, cycle: u64, detail: String },
    #[error(transparent)]
    Sim(#[from] crate::netlist::SimError),
}

pub const MATS_PLUS: &str = "MATS+: {*(w0); ^(r0,w1); v(r1,w0)}";
pub const MARCH_C_MINUS: &str = "March C-: {*(w0); ^(r0,w1); ^(r1,w0); v(r0,w1); v(r1,w0); *(r0)}";

pub fn mats_plus() -> MarchAlgorithm {
    parse_march(MATS_PLUS).expect("valid built-in")
}

pub fn march_c_minus() -> MarchAlgorithm {
    parse_march(MARCH_C_MINUS).expect("valid built-in")
}

/// Parses `[name:] { <order>(<op>,...); ... }`. Orders are `^`/`⇑` (up),
/// `v`/`⇓` (down) and `*`/`⇕` (either); ops are `r0 r1 w0 w1`.
pub fn parse_march(text: &str) -> Result<MarchAlgorithm, MarchError> {
    let syntax = |offset: usize, message: &str| MarchError::Syntax {
        offset,
        message: message.to_string(),
    };
    let open = text.find('{').ok_or_else(|| syntax(0, "expected '{'"))?;
    let head = text[..open].trim();
    let name = match head.strip_suffix(':') {
        Some(n) => n.trim().to_string(),
        None if head.is_empty() => String::new(),
        None => return Err(syntax(0, "expected '<name>:' before '{'")),
    };
    let close = text.rfind('}').ok_or_else(|| syntax(text.len(), "expected '}'"))?;
    if close < open || !text[close + 1..].trim().is_empty() {
        return Err(syntax(close, "text after '}'"));
    }
    let body = &text[open + 1..close];
    let base = open + 1;
    let mut elements = Vec::new();
    let mut at = 0;
    for raw in body.split(';') {
        let off = base + at;
        at += raw.len() + 1;
        let item = raw.trim();
        if item.is_empty() {
            continue;
        }
        let mut chars = item.chars();
        let order = match chars.next() {
            Some('^' | '⇑') => AddressOrder::Up,
            Some('v' | 'V' | '⇓') => AddressOrder::Down,
            Some('*' | '⇕') => AddressOrder::Either,
            _ => return Err(syntax(off, "expected address order ^, v or *")),
        };
        let rest = chars.as_str().trim();
        let inner = rest
            .strip_prefix('(')
            .and_then(|r| r.strip_suffix(')'))
            .ok_or_else(|| syntax(off, "expected '(ops)'"))?;
        let mut ops = Vec::new();
        for tok in inner.split(',') {
            let tok = tok.trim();
            if tok.is_empty() {
                continue;
            }
            ops.push(match tok {
                "r0" => MarchOp::R0,
                "r1" => MarchOp::R1,
                "w0" => MarchOp::W0,
                "w1" => MarchOp::W1,
                _ => {
                    return Err(MarchError::UnknownOp {
                        op: tok.to_string(),
                        offset: off,
                    })
                }
            });
        }
        if ops.is_empty() {
            return Err(MarchError::EmptyElement(elements.len()));
        }
        elements.push(MarchElement { order, ops });
    }
    if elements.is_empty() {
        return Err(MarchError::NoElements);
    }
    Ok(MarchAlgorithm { name, elements })
}

/// One op per cycle over every word.
pub fn bist_test_time(m: &MarchAlgorithm, mem: &MemoryConfig) -> u64 {
    u64::from(mem.words) * m.op_count()
}

pub fn check_memory(mem: &MemoryConfig) -> Result<(), MarchError> {
    let bad = |detail: &str| MarchError::BadMemory {
        name: mem.name.clone(),
        detail: detail.to_string(),
    };
    if mem.words == 0 {
        return Err(bad("needs at least one word"));
    }
    if mem.width == 0 || mem.width > 64 {
        return Err(bad("width must be 1..=64 bits"));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum FaultKind {
    Saf0,
    Saf1,
    TfUp,
    TfDown,
    /// Idempotent coupling: a transition of the aggressor forces the victim.
    CfId,
}

/// Groups of fault kinds reported together.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum FaultClass {
    Saf,
    Tf,
    CfId,
}

impl FaultClass {
    pub fn name(self) -> &'static str {
        match self {
            FaultClass::Saf => "SAF",
            FaultClass::Tf => "TF",
            FaultClass::CfId => "CFid",
        }
    }
}

/// Cell address: (word, bit).
pub type Cell = (u32, u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct Fault {
    pub kind: FaultKind,
    pub victim: Cell,
    /// CFid only.
    pub aggressor: Option<Cell>,
    /// CFid: aggressor transition that triggers (true = 0 to 1).
    pub rising: bool,
    /// CFid: value forced into the victim.
    pub forced: bool,
}

impl Fault {
    pub fn stuck(victim: Cell, value: bool) -> Self {
        Fault {
            kind: if value { FaultKind::Saf1 } else { FaultKind::Saf0 },
            victim,
            aggressor: None,
            rising: false,
            forced: value,
        }
    }

    pub fn transition(victim: Cell, rising: bool) -> Self {
        Fault {
            kind: if rising { FaultKind::TfUp } else { FaultKind::TfDown },
            victim,
            aggressor: None,
            rising,
            forced: false,
        }
    }

    pub fn coupling(aggressor: Cell, rising: bool, victim: Cell, forced: bool) -> Self {
        Fault {
            kind: FaultKind::CfId,
            victim,
            aggressor: Some(aggressor),
            rising,
            forced,
        }
    }
}

/// Word-addressed memory with at most one injected fault.
#[derive(Debug, Clone)]
pub struct FaultyMemory {
    width: u32,
    words: Vec<u64>,
    fault: Option<Fault>,
}

impl FaultyMemory {
    pub fn new(mem: &MemoryConfig, fault: Option<Fault>) -> Self {
        let mut m = FaultyMemory {
            width: mem.width,
            words: vec![0; mem.words as usize],
            fault,
        };
        if let Some(f) = fault {
            if f.kind == FaultKind::Saf1 {
                m.set_bit(f.victim, true);
            }
        }
        m
    }

    fn mask(&self) -> u64 {
        if self.width >= 64 {
            u64::MAX
        } else {
            (1u64 << self.width) - 1
        }
    }

    fn bit(&self, (w, b): Cell) -> bool {
        (self.words[w as usize] >> b) & 1 == 1
    }

    fn set_bit(&mut self, (w, b): Cell, v: bool) {
        let word = &mut self.words[w as usize];
        if v {
            *word |= 1 << b;
        } else {
            *word &= !(1 << b);
        }
    }

    pub fn read(&self, addr: u32) -> u64 {
        self.words[addr as usize]
    }

    pub fn write(&mut self, addr: u32, data: u64) {
        let old = self.words[addr as usize];
        let mut new = data & self.mask();
        if let Some(f) = self.fault {
            if f.victim.0 == addr {
                let bit = 1u64 << f.victim.1;
                let was = old & bit != 0;
                let want = new & bit != 0;
                let keep = match f.kind {
                    FaultKind::Saf0 | FaultKind::Saf1 => true,
                    FaultKind::TfUp => !was && want,
                    FaultKind::TfDown => was && !want,
                    FaultKind::CfId => false,
                };
                if keep {
                    new = (new & !bit) | (old & bit);
                }
            }
        }
        self.words[addr as usize] = new;
        if let Some(f) = self.fault {
            if let Some(a) = f.aggressor {
                if a.0 == addr {
                    let bit = 1u64 << a.1;
                    let (was, now) = (old & bit != 0, new & bit != 0);
                    if was != now && now == f.rising {
                        self.set_bit(f.victim, f.forced);
                    }
                }
            }
        }
    }

    pub fn cell(&self, c: Cell) -> bool {
        self.bit(c)
    }
}

/// One memory access as the BIST drives it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RamOp {
    pub write: bool,
    pub addr: u32,
    /// Write data, or the value a read is expected to return.
    pub data: u64,
}

/// First read that disagreed with its expected value (0-based indices).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct FailPoint {
    pub element: usize,
    pub op: usize,
    pub address: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum MarchOutcome {
    Pass,
    Fail(FailPoint),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MarchRun {
    pub outcome: MarchOutcome,
    /// Cycles executed (the whole algorithm, even after a failure).
    pub cycles: u64,
}

/// Addresses of one element in the order they are visited.
pub fn addresses(order: AddressOrder, words: u32) -> impl Iterator<Item = u32> {
    let down = order.descending();
    (0..words).map(move |i| if down { words - 1 - i } else { i })
}

fn solid(v: bool, width: u32) -> u64 {
    if !v {
        0
    } else if width >= 64 {
        u64::MAX
    } else {
        (1u64 << width) - 1
    }
}

/// Runs the whole algorithm and reports the first failing read.
pub fn run_march(m: &MarchAlgorithm, mem: &MemoryConfig, fault: Option<Fault>) -> MarchRun {
    let mut ram = FaultyMemory::new(mem, fault);
    let mut first = None;
    let mut cycles = 0;
    for (ei, e) in m.elements.iter().enumerate() {
        for addr in addresses(e.order, mem.words) {
            for (oi, op) in e.ops.iter().enumerate() {
                cycles += 1;
                let data = solid(op.value(), mem.width);
                if op.is_write() {
                    ram.write(addr, data);
                } else if ram.read(addr) != data && first.is_none() {
                    first = Some(FailPoint {
                        element: ei,
                        op: oi,
                        address: addr,
                    });
                }
            }
        }
    }
    MarchRun {
        outcome: first.map_or(MarchOutcome::Pass, MarchOutcome::Fail),
        cycles,
    }
}

pub fn simulate_march(m: &MarchAlgorithm, mem: &MemoryConfig, fault: Option<Fault>) -> MarchOutcome {
    run_march(m, mem, fault).outcome
}

/// The RAM signal trace of a fault-free run.
pub fn march_trace(m: &MarchAlgorithm, mem: &MemoryConfig) -> Vec<RamOp> {
    let mut out = Vec::with_capacity(bist_test_time(m, mem) as usize);
    for e in &m.elements {
        for addr in addresses(e.order, mem.words) {
            for op in &e.ops {
                out.push(RamOp {
                    write: op.is_write(),
                    addr,
                    data: solid(op.value(), mem.width),
                });
            }
        }
    }
    out
}

/// Every single fault of a class. Coupling faults are enumerated between
/// cells of different words only: with solid backgrounds both cells of an
/// intra-word pair are always written together, so no March test separates
/// them.
pub fn enumerate_faults(mem: &MemoryConfig, class: FaultClass) -> Vec<Fault> {
    let cells: Vec<Cell> = (0..mem.words)
        .flat_map(|w| (0..mem.width).map(move |b| (w, b)))
        .collect();
    let mut out = Vec::new();
    match class {
        FaultClass::Saf => {
            for &c in &cells {
                out.push(Fault::stuck(c, false));
                out.push(Fault::stuck(c, true));
            }
        }
        FaultClass::Tf => {
            for &c in &cells {
                out.push(Fault::transition(c, true));
                out.push(Fault::transition(c, false));
            }
        }
        FaultClass::CfId => {
            for &a in &cells {
                for &v in cells.iter().filter(|v| v.0 != a.0) {
                    for rising in [true, false] {
                        for forced in [false, true] {
                            out.push(Fault::coupling(a, rising, v, forced));
                        }
                    }
                }
            }
        }
    }
    out
}

pub fn fault_count(mem: &MemoryConfig, class: FaultClass) -> u64 {
    let cells = u64::from(mem.words) * u64::from(mem.width);
    match class {
        FaultClass::Saf | FaultClass::Tf => 2 * cells,
        FaultClass::CfId => 4 * cells * (cells - u64::from(mem.width)),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassCoverage {
    pub class: FaultClass,
    pub detected: u64,
    pub total: u64,
    /// Up to a few undetected faults, for diagnosis.
    pub escapes: Vec<Fault>,
}

impl ClassCoverage {
    pub fn coverage(&self) -> f64 {
        if self.total == 0 {
            1.0
        } else {
            self.detected as f64 / self.total as f64
        }
    }

    pub fn complete(&self) -> bool {
        self.detected == self.total
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageReport {
    pub algorithm: String,
    pub memory: String,
    pub words: u32,
    pub width: u32,
    pub classes: Vec<ClassCoverage>,
}

/// Exhaustive single-fault simulation of every fault of every class.
pub fn fault_coverage(
    m: &MarchAlgorithm,
    mem: &MemoryConfig,
    classes: &[FaultClass],
) -> Result<CoverageReport, MarchError> {
    check_memory(mem)?;
    let count: u64 = classes.iter().map(|&c| fault_count(mem, c)).sum();
    if count > FAULT_LIMIT {
        return Err(MarchError::TooManyFaults {
            count,
            limit: FAULT_LIMIT,
        });
    }
    let mut out = Vec::with_capacity(classes.len());
    for &class in classes {
        let faults = enumerate_faults(mem, class);
        let mut detected = 0;
        let mut escapes = Vec::new();
        for f in &faults {
            if simulate_march(m, mem, Some(*f)) == MarchOutcome::Pass {
                if escapes.len() < 4 {
                    escapes.push(*f);
                }
            } else {
                detected += 1;
            }
        }
        out.push(ClassCoverage {
            class,
            detected,
            total: faults.len() as u64,
            escapes,
        });
    }
    Ok(CoverageReport {
        algorithm: m.name.clone(),
        memory: mem.name.clone(),
        words: mem.words,
        width: mem.width,
        classes: out,
    })
}

impl CoverageReport {
    pub fn class(&self, c: FaultClass) -> Option<&ClassCoverage> {
        self.classes.iter().find(|x| x.class == c)
    }
}

pub fn format_fault(f: &Fault) -> String {
    match f.aggressor {
        Some(a) => format!(
            "{:?} a=({},{}){} v=({},{})->{}",
            f.kind,
            a.0,
            a.1,
            if f.rising { "^" } else { "v" },
            f.victim.0,
            f.victim.1,
            u8::from(f.forced)
        ),
        None => format!("{:?} ({},{})", f.kind, f.victim.0, f.victim.1),
    }
}

#[cfg(test)]
mod tests;
