// SPDX-License-Identifier: Apache-2.0

//! In-memory test model: per-core test interfaces, pattern sets and the SOC
//! description the rest of the flow consumes.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::Serialize;

/// One scan/response bit. `X` is a don't-care (never driven, never compared).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Logic {
    Zero,
    One,
    X,
}

impl Logic {
    pub fn from_bool(b: bool) -> Self {
        if b {
            Logic::One
        } else {
            Logic::Zero
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Logic::Zero => '0',
            Logic::One => '1',
            Logic::X => 'X',
        }
    }

    pub fn from_char(c: char) -> Option<Self> {
        match c {
            '0' => Some(Logic::Zero),
            '1' => Some(Logic::One),
            'X' | 'x' => Some(Logic::X),
            _ => None,
        }
    }

    /// Value used when a don't-care has to be driven onto a pin.
    pub fn drive_value(self) -> bool {
        matches!(self, Logic::One)
    }
}

/// A string of [`Logic`] values. Index 0 is the cell nearest the scan input
/// when the string describes chain contents.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize)]
pub struct Bits(pub Vec<Logic>);

impl Bits {
    pub fn new() -> Self {
        Bits(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> Logic {
        self.0[i]
    }

    pub fn parse(s: &str) -> Option<Self> {
        s.chars().map(Logic::from_char).collect::<Option<Vec<_>>>().map(Bits)
    }

    pub fn from_bools(bits: impl IntoIterator<Item = bool>) -> Self {
        Bits(bits.into_iter().map(Logic::from_bool).collect())
    }
}

impl fmt::Display for Bits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for l in &self.0 {
            write!(f, "{}", l.as_char())?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum ControlKind {
    Clock,
    Reset,
    ScanEnable,
    TestEnable,
}

impl ControlKind {
    pub fn keyword(self) -> &'static str {
        match self {
            ControlKind::Clock => "clock",
            ControlKind::Reset => "reset",
            ControlKind::ScanEnable => "scan_enable",
            ControlKind::TestEnable => "test_enable",
        }
    }

    pub fn from_keyword(s: &str) -> Option<Self> {
        Some(match s {
            "clock" => ControlKind::Clock,
            "reset" => ControlKind::Reset,
            "scan_enable" | "se" => ControlKind::ScanEnable,
            "test_enable" | "te" => ControlKind::TestEnable,
            _ => return None,
        })
    }

    /// Scan and test enables may be pooled across co-scheduled cores when the
    /// sharing policy allows it; clocks and resets never are.
    pub fn default_shareable(self) -> bool {
        matches!(self, ControlKind::ScanEnable | ControlKind::TestEnable)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct ControlPin {
    pub name: String,
    pub kind: ControlKind,
    pub shareable: bool,
}

impl ControlPin {
    pub fn new(name: impl Into<String>, kind: ControlKind) -> Self {
        ControlPin {
            name: name.into(),
            kind,
            shareable: kind.default_shareable(),
        }
    }
}

/// Where a scan chain's output leaves the core.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub enum ScanOut {
    Dedicated(String),
    /// Shared with a functional output, named `po<k>`.
    Shared(String),
}

impl ScanOut {
    pub fn pin(&self) -> &str {
        match self {
            ScanOut::Dedicated(p) | ScanOut::Shared(p) => p,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct ScanChain {
    pub name: String,
    pub length: u32,
    pub clock_domain: String,
    pub scan_in: String,
    pub scan_out: ScanOut,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum PatternKind {
    Scan,
    Functional,
}

/// How the capture cycle of a scan pattern is applied.
///
/// `PulseClock` keeps scan enable asserted through capture; the capture pulse
/// is released by dropping the core's test enables for that one cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum CaptureMode {
    Normal,
    PulseClock,
}

/// One explicit pattern.
///
/// Scan patterns carry one load and one unload string per internal chain
/// (same order as `CoreTestInfo::scan_chains`); `pi`/`po` are optional for
/// scan patterns and mandatory for functional ones.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Pattern {
    pub load: Vec<Bits>,
    pub unload: Vec<Bits>,
    pub pi: Bits,
    pub po: Bits,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PatternSet {
    pub kind: PatternKind,
    pub count: u64,
    pub capture: CaptureMode,
    pub vectors: Option<Vec<Pattern>>,
}

impl PatternSet {
    pub fn counts_only(kind: PatternKind, count: u64) -> Self {
        PatternSet {
            kind,
            count,
            capture: CaptureMode::Normal,
            vectors: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Softness {
    Hard,
    Soft,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoreTestInfo {
    pub name: String,
    pub ti: u32,
    pub to: u32,
    pub pi: u32,
    pub po: u32,
    pub clock_domains: Vec<String>,
    pub control_pins: Vec<ControlPin>,
    pub scan_chains: Vec<ScanChain>,
    pub pattern_sets: Vec<PatternSet>,
    pub softness: Softness,
    pub test_power: f64,
}

pub const DEFAULT_TEST_POWER: f64 = 1.0;

impl CoreTestInfo {
    pub fn empty(name: impl Into<String>) -> Self {
        CoreTestInfo {
            name: name.into(),
            ti: 0,
            to: 0,
            pi: 0,
            po: 0,
            clock_domains: Vec::new(),
            control_pins: Vec::new(),
            scan_chains: Vec::new(),
            pattern_sets: Vec::new(),
            softness: Softness::Hard,
            test_power: DEFAULT_TEST_POWER,
        }
    }

    pub fn pattern_set(&self, kind: PatternKind) -> Option<&PatternSet> {
        self.pattern_sets.iter().find(|p| p.kind == kind)
    }

    pub fn scan_patterns(&self) -> u64 {
        self.pattern_set(PatternKind::Scan).map_or(0, |p| p.count)
    }

    pub fn functional_patterns(&self) -> u64 {
        self.pattern_set(PatternKind::Functional).map_or(0, |p| p.count)
    }

    pub fn total_flops(&self) -> u64 {
        self.scan_chains.iter().map(|c| u64::from(c.length)).sum()
    }

    pub fn scan_enable(&self) -> Option<&ControlPin> {
        self.control_pins.iter().find(|p| p.kind == ControlKind::ScanEnable)
    }

    pub fn control_pins_of(&self, kind: ControlKind) -> impl Iterator<Item = &ControlPin> {
        self.control_pins.iter().filter(move |p| p.kind == kind)
    }

    /// (scan chain output, functional output) pairs.
    pub fn shared_pins(&self) -> Vec<(&str, &str)> {
        self.scan_chains
            .iter()
            .filter_map(|c| match &c.scan_out {
                ScanOut::Shared(p) => Some((c.name.as_str(), p.as_str())),
                ScanOut::Dedicated(_) => None,
            })
            .collect()
    }

    pub fn is_soft(&self) -> bool {
        self.softness == Softness::Soft
    }
}

/// Parses `pi<k>` / `po<k>` functional pin names.
pub fn functional_pin_index(name: &str, prefix: &str) -> Option<u32> {
    let rest = name.strip_prefix(prefix)?;
    if rest.is_empty() || (rest.len() > 1 && rest.starts_with('0')) {
        return None;
    }
    rest.parse().ok()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum Violation {
    ChainLength {
        chain: String,
    },
    DuplicateChain {
        chain: String,
    },
    UnknownClockDomain {
        chain: String,
        domain: String,
    },
    DuplicateClockDomain {
        domain: String,
    },
    DuplicatePin {
        pin: String,
    },
    BadSharedPin {
        chain: String,
        pin: String,
    },
    DuplicatePatternSet {
        kind: PatternKind,
    },
    VectorCount {
        kind: PatternKind,
        declared: u64,
        present: u64,
    },
    VectorShape {
        kind: PatternKind,
        pattern: usize,
        detail: String,
    },
    MissingScanEnable,
    ScanWithoutChains,
    PulseClockWithoutTestEnable,
    BadPower,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::ChainLength { chain } => write!(f, "chain {chain}: chain length >= 1"),
            Violation::DuplicateChain { chain } => write!(f, "chain {chain}: duplicate chain name"),
            Violation::UnknownClockDomain { chain, domain } => {
                write!(f, "chain {chain}: unknown clock domain {domain}")
            }
            Violation::DuplicateClockDomain { domain } => {
                write!(f, "clock domain {domain} declared twice")
            }
            Violation::DuplicatePin { pin } => write!(f, "pin {pin} declared twice"),
            Violation::BadSharedPin { chain, pin } => write!(
                f,
                "chain {chain}: shared output {pin} is not a distinct functional output"
            ),
            Violation::DuplicatePatternSet { kind } => {
                write!(f, "more than one {kind:?} pattern set")
            }
            Violation::VectorCount {
                kind,
                declared,
                present,
            } => write!(f, "{kind:?} patterns: count={declared} but {present} vectors present"),
            Violation::VectorShape { kind, pattern, detail } => write!(f, "{kind:?} vector {pattern}: {detail}"),
            Violation::MissingScanEnable => f.write_str("scan patterns need a scan_enable pin"),
            Violation::ScanWithoutChains => f.write_str("scan patterns declared without chains"),
            Violation::PulseClockWithoutTestEnable => f.write_str("pulse_clock capture needs a test_enable pin"),
            Violation::BadPower => f.write_str("test power must be finite and nonnegative"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub core: String,
    pub violations: Vec<Violation>,
    pub notes: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks every [`CoreTestInfo`] invariant. Never fails; an empty violation
/// list means the core is valid.
pub fn validate_core(core: &CoreTestInfo) -> ValidationReport {
    let mut v = Vec::new();
    let mut notes = Vec::new();

    let mut domains = BTreeSet::new();
    for d in &core.clock_domains {
        if !domains.insert(d.as_str()) {
            v.push(Violation::DuplicateClockDomain { domain: d.clone() });
        }
    }

    let mut pins: BTreeSet<String> = BTreeSet::new();
    let mut claim = |name: &str, v: &mut Vec<Violation>| {
        let functional = functional_pin_index(name, "pi").is_some() || functional_pin_index(name, "po").is_some();
        if functional || !pins.insert(name.to_string()) {
            v.push(Violation::DuplicatePin { pin: name.to_string() });
        }
    };
    for p in &core.control_pins {
        claim(p.name.as_str(), &mut v);
    }

    let mut chain_names = BTreeSet::new();
    let mut shared_outs = BTreeSet::new();
    for c in &core.scan_chains {
        if c.length == 0 {
            v.push(Violation::ChainLength { chain: c.name.clone() });
        }
        if !chain_names.insert(c.name.as_str()) {
            v.push(Violation::DuplicateChain { chain: c.name.clone() });
        }
        if !domains.contains(c.clock_domain.as_str()) {
            v.push(Violation::UnknownClockDomain {
                chain: c.name.clone(),
                domain: c.clock_domain.clone(),
            });
        }
        claim(c.scan_in.as_str(), &mut v);
        match &c.scan_out {
            ScanOut::Dedicated(p) => claim(p.as_str(), &mut v),
            ScanOut::Shared(p) => {
                let ok = functional_pin_index(p, "po").is_some_and(|k| k < core.po) && shared_outs.insert(p.as_str());
                if ok {
                    notes.push(format!(
                        "shared pin: chain {} scan-out shares functional output {}",
                        c.name, p
                    ));
                } else {
                    v.push(Violation::BadSharedPin {
                        chain: c.name.clone(),
                        pin: p.clone(),
                    });
                }
            }
        }
    }

    let mut kinds = BTreeSet::new();
    for set in &core.pattern_sets {
        let key = matches!(set.kind, PatternKind::Scan);
        if !kinds.insert(key) {
            v.push(Violation::DuplicatePatternSet { kind: set.kind });
        }
        if set.kind == PatternKind::Scan && set.count > 0 {
            if core.scan_chains.is_empty() {
                v.push(Violation::ScanWithoutChains);
            }
            if core.scan_enable().is_none() {
                v.push(Violation::MissingScanEnable);
            }
            if set.capture == CaptureMode::PulseClock && core.control_pins_of(ControlKind::TestEnable).next().is_none()
            {
                v.push(Violation::PulseClockWithoutTestEnable);
            }
        }
        if let Some(vectors) = &set.vectors {
            if vectors.len() as u64 != set.count {
                v.push(Violation::VectorCount {
                    kind: set.kind,
                    declared: set.count,
                    present: vectors.len() as u64,
                });
            }
            for (i, p) in vectors.iter().enumerate() {
                if let Some(detail) = vector_shape_error(core, set.kind, p) {
                    v.push(Violation::VectorShape {
                        kind: set.kind,
                        pattern: i,
                        detail,
                    });
                }
            }
        }
    }

    if !(core.test_power.is_finite() && core.test_power >= 0.0) {
        v.push(Violation::BadPower);
    }

    let scan_ins = core.scan_chains.len() as u32;
    let controls = core.control_pins.len() as u32;
    if core.ti != controls + scan_ins {
        notes.push(format!(
            "ti={} differs from control pins ({}) + scan inputs ({})",
            core.ti, controls, scan_ins
        ));
    }
    let dedicated_outs = core
        .scan_chains
        .iter()
        .filter(|c| matches!(c.scan_out, ScanOut::Dedicated(_)))
        .count() as u32;
    if core.to != dedicated_outs {
        notes.push(format!(
            "to={} differs from dedicated scan outputs ({})",
            core.to, dedicated_outs
        ));
    }

    ValidationReport {
        core: core.name.clone(),
        violations: v,
        notes,
    }
}

pub(crate) fn vector_shape_error(core: &CoreTestInfo, kind: PatternKind, p: &Pattern) -> Option<String> {
    let side_ok = |bits: &Bits, n: u32, required: bool| bits.len() as u32 == n || (!required && bits.is_empty());
    match kind {
        PatternKind::Scan => {
            if p.load.len() != core.scan_chains.len() || p.unload.len() != core.scan_chains.len() {
                return Some(format!(
                    "expected {} load/unload strings, found {}/{}",
                    core.scan_chains.len(),
                    p.load.len(),
                    p.unload.len()
                ));
            }
            for (c, (l, u)) in core.scan_chains.iter().zip(p.load.iter().zip(&p.unload)) {
                if l.len() as u32 != c.length || u.len() as u32 != c.length {
                    return Some(format!(
                        "chain {} has length {} but load/unload are {}/{} bits",
                        c.name,
                        c.length,
                        l.len(),
                        u.len()
                    ));
                }
            }
            if !side_ok(&p.pi, core.pi, false) || !side_ok(&p.po, core.po, false) {
                return Some("pi/po strings must be empty or match pin counts".into());
            }
        }
        PatternKind::Functional => {
            if !p.load.is_empty() || !p.unload.is_empty() {
                return Some("functional vectors carry no chain data".into());
            }
            if !side_ok(&p.pi, core.pi, true) || !side_ok(&p.po, core.po, true) {
                return Some(format!(
                    "pi/po must be {}/{} bits, found {}/{}",
                    core.pi,
                    core.po,
                    p.pi.len(),
                    p.po.len()
                ));
            }
        }
    }
    None
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum MemoryPorts {
    SinglePort,
    TwoPort,
}

/// An embedded synchronous SRAM targeted by the BIST compiler.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct MemoryConfig {
    pub name: String,
    pub words: u32,
    pub width: u32,
    pub ports: MemoryPorts,
}

impl MemoryConfig {
    pub fn new(name: impl Into<String>, words: u32, width: u32) -> Self {
        MemoryConfig {
            name: name.into(),
            words,
            width,
            ports: MemoryPorts::SinglePort,
        }
    }

    pub fn address_bits(&self) -> u32 {
        let mut bits = 0;
        while (1u64 << bits) < u64::from(self.words) {
            bits += 1;
        }
        bits.max(1)
    }

    /// Memories of the same shape share one sequencer by default.
    pub fn shape(&self) -> (u32, u32) {
        (self.words, self.width)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SocDescription {
    pub name: String,
    pub cores: Vec<CoreTestInfo>,
    pub memories: Vec<MemoryConfig>,
    pub pin_budget: u32,
    /// Per-session power limit; `None` is unbounded.
    pub power_cap: Option<f64>,
    pub netlist_path: Option<String>,
    /// Total chip gate count used for the area overhead report.
    pub chip_gates: Option<u64>,
    pub notes: Vec<String>,
}

pub const DEFAULT_PIN_BUDGET: u32 = 80;

impl SocDescription {
    pub fn new(name: impl Into<String>, cores: Vec<CoreTestInfo>) -> Self {
        SocDescription {
            name: name.into(),
            cores,
            memories: Vec::new(),
            pin_budget: DEFAULT_PIN_BUDGET,
            power_cap: None,
            netlist_path: None,
            chip_gates: None,
            notes: Vec::new(),
        }
    }

    pub fn core(&self, name: &str) -> Option<&CoreTestInfo> {
        self.cores.iter().find(|c| c.name == name)
    }
}
