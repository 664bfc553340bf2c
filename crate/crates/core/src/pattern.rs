// SPDX-License-Identifier: Apache-2.0

//! Pattern translation: core-level patterns to wrapper-chain strings, then
//! to cycle-based chip-level rows, merged per session.
//!
//! Shift convention. A wrapper chain is numbered from its scan input
//! (position 0) to its scan output. In a shift phase of `S` cycles the bit
//! for position `k` is driven at step `S - 1 - k`, so the first bit shifted
//! in ends in the deepest cell. The content of position `k` before the
//! phase is on the scan output at step `len - 1 - k` and is compared there,
//! before that cycle's shift.
//!
//! Capture convention. Normal capture drops every scan enable of the entity
//! for one cycle. Pulse-clock capture keeps a dedicated scan enable at 1 and
//! drops the test enables instead. A pooled scan enable drops at capture
//! when any entity sharing it uses normal capture; the scheduler runs all
//! pool members in lock-step, so the capture cycles coincide.
//!
//! Streams are lazy: a session of millions of cycles is produced row by row
//! and core patterns are fetched (or synthesized) one at a time.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::Serialize;
use thiserror::Error;

use crate::model::{
    vector_shape_error, Bits, CaptureMode, ControlKind, CoreTestInfo, Logic, Pattern, PatternKind, PatternSet,
};
use crate::schedule::{pin_name, Access, EntityKind, PinRole, ShiftPlan, TestSchedule};
use crate::wrapper::{design_wrapper, WrapperConfig, WrapperError, WrapperOptions};

/// Default seed for synthetic payloads.
pub const DEFAULT_SEED: u64 = 0x5eed_2002;

/// One tester symbol: drive 0/1, release (Z), don't care (X), expect
/// high/low (H/L).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Symbol {
    Zero,
    One,
    Z,
    X,
    H,
    L,
}

impl Symbol {
    pub fn as_char(self) -> char {
        match self {
            Symbol::Zero => '0',
            Symbol::One => '1',
            Symbol::Z => 'Z',
            Symbol::X => 'X',
            Symbol::H => 'H',
            Symbol::L => 'L',
        }
    }

    pub fn from_char(c: char) -> Option<Self> {
        Some(match c {
            '0' => Symbol::Zero,
            '1' => Symbol::One,
            'Z' => Symbol::Z,
            'X' => Symbol::X,
            'H' => Symbol::H,
            'L' => Symbol::L,
            _ => return None,
        })
    }

    pub fn drive(l: Logic) -> Self {
        match l {
            Logic::Zero => Symbol::Zero,
            Logic::One => Symbol::One,
            Logic::X => Symbol::X,
        }
    }

    pub fn expect(l: Logic) -> Self {
        match l {
            Logic::Zero => Symbol::L,
            Logic::One => Symbol::H,
            Logic::X => Symbol::X,
        }
    }

    pub fn level(b: bool) -> Self {
        if b {
            Symbol::One
        } else {
            Symbol::Zero
        }
    }

    /// Expected value, for H and L.
    pub fn expected(self) -> Option<bool> {
        match self {
            Symbol::H => Some(true),
            Symbol::L => Some(false),
            _ => None,
        }
    }

    /// Driven value, for 0 and 1.
    pub fn driven(self) -> Option<bool> {
        match self {
            Symbol::One => Some(true),
            Symbol::Zero => Some(false),
            _ => None,
        }
    }

    /// Union of two symbols on one pin in one cycle: X yields to anything.
    pub fn merge(self, other: Symbol) -> Option<Symbol> {
        match (self, other) {
            (Symbol::X, s) | (s, Symbol::X) => Some(s),
            (a, b) if a == b => Some(a),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PatternError {
    #[error("core {core} has no {kind:?} patterns")]
    NoPatterns { core: String, kind: PatternKind },
    #[error("core {core}: {kind:?} pattern {index} does not exist")]
    MissingVector {
        core: String,
        kind: PatternKind,
        index: u64,
    },
    #[error("core {core}: {kind:?} pattern {index}: {detail}")]
    Shape {
        core: String,
        kind: PatternKind,
        index: u64,
        detail: String,
    },
    #[error("unknown core {0}")]
    UnknownCore(String),
    #[error("entity {entity} is not in session {session}")]
    NotScheduled { entity: String, session: usize },
    #[error("no session {0}")]
    NoSession(usize),
    #[error("entity {entity}: no chip pin for {what}")]
    Unmapped { entity: String, what: String },
    #[error("entity {entity}: wrapper has si/so {found:?}, schedule assumed {expected:?}")]
    WrapperMismatch {
        entity: String,
        expected: (u32, u32),
        found: (u32, u32),
    },
    #[error("pin {pin}: pulse-clock capture conflicts with another user of the shared test enable")]
    ModeConflict { pin: String },
    #[error("pin {pin}: conflicting symbols in cycle {cycle}")]
    Collision { pin: String, cycle: u64 },
    #[error(transparent)]
    Wrapper(#[from] WrapperError),
}

/// A scan or functional pattern fetched from the core, or synthesized when
/// the core only carries counts.
pub fn core_pattern(core: &CoreTestInfo, kind: PatternKind, seed: u64, index: u64) -> Result<Pattern, PatternError> {
    let set = core.pattern_set(kind).ok_or_else(|| PatternError::NoPatterns {
        core: core.name.clone(),
        kind,
    })?;
    if index >= set.count {
        return Err(PatternError::MissingVector {
            core: core.name.clone(),
            kind,
            index,
        });
    }
    let p = match &set.vectors {
        Some(v) => v
            .get(index as usize)
            .cloned()
            .ok_or_else(|| PatternError::MissingVector {
                core: core.name.clone(),
                kind,
                index,
            })?,
        None => synthetic_pattern(core, kind, seed, index),
    };
    if let Some(detail) = vector_shape_error(core, kind, &p) {
        return Err(PatternError::Shape {
            core: core.name.clone(),
            kind,
            index,
            detail,
        });
    }
    Ok(p)
}

fn name_hash(s: &str) -> u64 {
    // FNV-1a
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Reproducible pseudo-random payload for pattern `index` of a counts-only
/// core. Each (seed, core, kind, index) has its own ChaCha stream, so any
/// pattern can be produced without generating the ones before it.
pub fn synthetic_pattern(core: &CoreTestInfo, kind: PatternKind, seed: u64, index: u64) -> Pattern {
    let tag = match kind {
        PatternKind::Scan => "scan",
        PatternKind::Functional => "func",
    };
    let key = seed ^ name_hash(&core.name).rotate_left(17) ^ name_hash(tag);
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(index);
    let mut bits = |n: u32| {
        let mut out = Vec::with_capacity(n as usize);
        let mut word = 0u64;
        for i in 0..n {
            if i % 64 == 0 {
                word = rng.next_u64();
            }
            out.push((word >> (i % 64)) & 1 == 1);
        }
        Bits::from_bools(out)
    };
    match kind {
        PatternKind::Scan => {
            let load = core.scan_chains.iter().map(|c| bits(c.length)).collect();
            let unload = core.scan_chains.iter().map(|c| bits(c.length)).collect();
            Pattern {
                load,
                unload,
                pi: bits(core.pi),
                po: bits(core.po),
            }
        }
        PatternKind::Functional => Pattern {
            load: Vec::new(),
            unload: Vec::new(),
            pi: bits(core.pi),
            po: bits(core.po),
        },
    }
}

fn side(bits: &Bits, k: u32) -> Logic {
    if bits.is_empty() {
        Logic::X
    } else {
        bits.get(k as usize)
    }
}

/// Re-orders one core pattern into wrapper-chain strings. Load string `j`
/// covers the scan-in path of wrapper chain `j` (input cells, then chain
/// segments), unload string `j` its scan-out path (segments, then output
/// cells). With WBR cells outside the chains, `pi`/`po` stay as they are;
/// otherwise they are consumed into the strings.
pub fn translate_pattern(cfg: &WrapperConfig, p: &Pattern) -> Pattern {
    let mut load = Vec::with_capacity(cfg.chains.len());
    let mut unload = Vec::with_capacity(cfg.chains.len());
    for ch in &cfg.chains {
        let mut l = Vec::with_capacity(ch.scan_in_len() as usize);
        let mut u = Vec::with_capacity(ch.scan_out_len() as usize);
        l.extend(ch.inputs.iter().map(|&k| side(&p.pi, k)));
        for s in &ch.segments {
            let range = s.start as usize..(s.start + s.len) as usize;
            l.extend_from_slice(&p.load[s.chain].0[range.clone()]);
            u.extend_from_slice(&p.unload[s.chain].0[range]);
        }
        u.extend(ch.outputs.iter().map(|&k| side(&p.po, k)));
        load.push(Bits(l));
        unload.push(Bits(u));
    }
    let keep = !cfg.includes_wbr_in_chains;
    Pattern {
        load,
        unload,
        pi: if keep { p.pi.clone() } else { Bits::new() },
        po: if keep { p.po.clone() } else { Bits::new() },
    }
}

/// Wrapper-level version of a whole explicit pattern set.
pub fn translate_to_wrapper(
    core: &CoreTestInfo,
    set: &PatternSet,
    cfg: &WrapperConfig,
) -> Result<PatternSet, PatternError> {
    let vectors = set.vectors.as_ref().ok_or_else(|| PatternError::NoPatterns {
        core: core.name.clone(),
        kind: set.kind,
    })?;
    let mut out = Vec::with_capacity(vectors.len());
    for (i, p) in vectors.iter().enumerate() {
        if let Some(detail) = vector_shape_error(core, set.kind, p) {
            return Err(PatternError::Shape {
                core: core.name.clone(),
                kind: set.kind,
                index: i as u64,
                detail,
            });
        }
        out.push(translate_pattern(cfg, p));
    }
    Ok(PatternSet {
        kind: set.kind,
        count: set.count,
        capture: set.capture,
        vectors: Some(out),
    })
}

/// The wrapper an entity's patterns are shifted through. Scan-less cores
/// always have their boundary cells in the chains.
pub fn entity_wrapper(core: &CoreTestInfo, width: u32, opts: &WrapperOptions) -> Result<WrapperConfig, WrapperError> {
    let opts = WrapperOptions {
        include_wbr_in_chains: opts.include_wbr_in_chains || core.scan_chains.is_empty(),
        ..*opts
    };
    design_wrapper(core, width, &opts)
}

/// Where one entity's signals sit on the chip pins during its session, and
/// how its shift/capture sequence is timed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TranslationMap {
    pub entity: usize,
    pub session: usize,
    pub access: Access,
    pub plan: Option<ShiftPlan>,
    pub patterns: u64,
    pub cycles: u64,
    pub capture: CaptureMode,
    pub wsi: Vec<u32>,
    pub wso: Vec<u32>,
    pub func_in: Vec<u32>,
    pub func_out: Vec<u32>,
    pub clocks: Vec<u32>,
    pub resets: Vec<u32>,
    /// Shift-enable pins with their value in a capture cycle (1 while
    /// shifting).
    pub scan_enable: Vec<(u32, Symbol)>,
    /// Test-enable pins with their value in a capture cycle (1 otherwise).
    pub test_enable: Vec<(u32, Symbol)>,
    /// start, done, fail, diag (as many as were bound).
    pub bist: Vec<u32>,
}

impl TranslationMap {
    /// Recomputes the cycle count after `plan` was changed.
    pub fn retime(&mut self) {
        if let Some(plan) = self.plan {
            self.cycles = plan.cycles(self.patterns);
        }
    }
}

fn uses_pooled_te(e: &crate::schedule::TestEntity, s: &TestSchedule) -> bool {
    s.sharing.share_te
        && e.control_pins
            .iter()
            .any(|p| p.kind == ControlKind::TestEnable && p.shareable)
}

/// Pulse-clock capture keeps scan enable high and drops test enable. A core
/// without a test-enable pin has nothing else to drop, so it captures with
/// scan enable low like a normal capture.
fn holds_se(e: &crate::schedule::TestEntity) -> bool {
    e.capture == CaptureMode::PulseClock && e.control_pins.iter().any(|p| p.kind == ControlKind::TestEnable)
}

pub fn translation_map(s: &TestSchedule, session: usize, entity: usize) -> Result<TranslationMap, PatternError> {
    let sess = s.sessions.get(session).ok_or(PatternError::NoSession(session))?;
    let e = s
        .entities
        .get(entity)
        .ok_or_else(|| PatternError::UnknownCore(format!("entity #{entity}")))?;
    let a = sess
        .assignments
        .iter()
        .find(|a| a.entity == entity)
        .ok_or_else(|| PatternError::NotScheduled {
            entity: e.name.clone(),
            session,
        })?;
    let members: Vec<&crate::schedule::TestEntity> = sess.assignments.iter().map(|a| &s.entities[a.entity]).collect();
    let pulse = holds_se(e);
    let pool_se_capture = if members.iter().any(|m| m.shares_se(&s.sharing) && !holds_se(m)) {
        Symbol::Zero
    } else {
        Symbol::One
    };

    let te_users: Vec<&&crate::schedule::TestEntity> = members.iter().filter(|m| uses_pooled_te(m, s)).collect();
    let lockstep = |m: &crate::schedule::TestEntity| {
        m.shares_se(&s.sharing) && members.iter().filter(|x| x.shares_se(&s.sharing)).count() >= 2
    };
    if te_users.len() > 1
        && te_users.iter().any(|m| m.capture == CaptureMode::PulseClock)
        && !te_users.iter().all(|m| lockstep(m))
    {
        let pin = sess
            .pins
            .iter()
            .find(|b| b.role == PinRole::SharedTestEnable)
            .map_or_else(|| "shared test enable".to_string(), |b| pin_name(b.pin));
        return Err(PatternError::ModeConflict { pin });
    }

    let width = a.option.width as usize;
    let mut map = TranslationMap {
        entity,
        session,
        access: a.option.access,
        plan: a.shift,
        patterns: e.patterns,
        cycles: a.cycles,
        capture: e.capture,
        wsi: vec![u32::MAX; if a.option.access == Access::Wrapper { width } else { 0 }],
        wso: vec![u32::MAX; if a.option.access == Access::Wrapper { width } else { 0 }],
        func_in: vec![
            u32::MAX;
            if a.option.access == Access::Direct {
                e.pi as usize
            } else {
                0
            }
        ],
        func_out: vec![
            u32::MAX;
            if a.option.access == Access::Direct {
                e.po as usize
            } else {
                0
            }
        ],
        clocks: Vec::new(),
        resets: Vec::new(),
        scan_enable: Vec::new(),
        test_enable: Vec::new(),
        bist: Vec::new(),
    };
    let te_capture = if pulse { Symbol::Zero } else { Symbol::One };
    let has_pin = |name: &str| e.control_pins.iter().any(|p| p.name == name);
    for b in &sess.pins {
        match &b.role {
            PinRole::Control { core, pin, kind } if *core == e.core && has_pin(pin) => match kind {
                ControlKind::Clock => map.clocks.push(b.pin),
                ControlKind::Reset => map.resets.push(b.pin),
                ControlKind::ScanEnable => {
                    let v = if pulse { Symbol::One } else { Symbol::Zero };
                    map.scan_enable.push((b.pin, v));
                }
                ControlKind::TestEnable => map.test_enable.push((b.pin, te_capture)),
            },
            PinRole::SharedScanEnable if e.shares_se(&s.sharing) => {
                map.scan_enable.push((b.pin, pool_se_capture));
            }
            PinRole::SharedTestEnable if uses_pooled_te(e, s) => {
                map.test_enable.push((b.pin, te_capture));
            }
            PinRole::WrapperIn { entity: x, chain } if *x == entity => {
                if let Some(slot) = map.wsi.get_mut(*chain as usize) {
                    *slot = b.pin;
                }
            }
            PinRole::WrapperOut { entity: x, chain } if *x == entity => {
                if let Some(slot) = map.wso.get_mut(*chain as usize) {
                    *slot = b.pin;
                }
            }
            PinRole::WrapperShiftEnable { entity: x } if *x == entity => {
                map.scan_enable.push((b.pin, Symbol::Zero));
            }
            PinRole::FuncIn { entity: x, index } if *x == entity => {
                if let Some(slot) = map.func_in.get_mut(*index as usize) {
                    *slot = b.pin;
                }
            }
            PinRole::FuncOut { entity: x, index } if *x == entity => {
                if let Some(slot) = map.func_out.get_mut(*index as usize) {
                    *slot = b.pin;
                }
            }
            PinRole::BistStart { entity: x }
            | PinRole::BistDone { entity: x }
            | PinRole::BistFail { entity: x }
            | PinRole::BistDiag { entity: x }
                if *x == entity =>
            {
                map.bist.push(b.pin);
            }
            _ => {}
        }
    }
    let unmapped = |what: &str| PatternError::Unmapped {
        entity: e.name.clone(),
        what: what.to_string(),
    };
    for (v, what) in [
        (&map.wsi, "wrapper scan-in"),
        (&map.wso, "wrapper scan-out"),
        (&map.func_in, "functional input"),
        (&map.func_out, "functional output"),
    ] {
        if v.contains(&u32::MAX) {
            return Err(unmapped(what));
        }
    }
    if map.access == Access::Wrapper {
        if map.plan.is_none() {
            return Err(unmapped("shift plan"));
        }
        if map.scan_enable.is_empty() {
            return Err(unmapped("shift enable"));
        }
    }
    Ok(map)
}

/// One chip-level cycle over a session's pin header.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CyclePattern {
    pub cycle: u64,
    pub symbols: Vec<Symbol>,
}

impl CyclePattern {
    pub fn to_line(&self) -> String {
        self.symbols.iter().map(|s| s.as_char()).collect()
    }
}

/// Symbols one entity puts on its pins in one cycle.
pub type EntityRow = Vec<(u32, Symbol)>;

/// Lazily produced chip-level cycles of one entity.
pub struct EntityStream<'a> {
    map: TranslationMap,
    core: &'a CoreTestInfo,
    cfg: Option<WrapperConfig>,
    kind: PatternKind,
    seed: u64,
    t: u64,
    phase: u64,
    step: u32,
    phase_len: u32,
    cur: Option<Pattern>,
    prev: Option<Pattern>,
    failed: bool,
}

/// Builds the stream of `entity` in `session`. `opts` must be the wrapper
/// options the schedule was computed with.
pub fn translate_to_chip<'a>(
    s: &TestSchedule,
    session: usize,
    entity: usize,
    core: &'a CoreTestInfo,
    opts: &WrapperOptions,
    seed: u64,
) -> Result<EntityStream<'a>, PatternError> {
    let map = translation_map(s, session, entity)?;
    let e = &s.entities[entity];
    let a = s.sessions[session]
        .assignments
        .iter()
        .find(|a| a.entity == entity)
        .expect("mapped above");
    let cfg = if map.access == Access::Wrapper {
        let cfg = entity_wrapper(core, a.option.width, opts)?;
        if (cfg.si, cfg.so) != (a.option.si, a.option.so) {
            return Err(PatternError::WrapperMismatch {
                entity: e.name.clone(),
                expected: (a.option.si, a.option.so),
                found: (cfg.si, cfg.so),
            });
        }
        Some(cfg)
    } else {
        None
    };
    let kind = match e.kind {
        EntityKind::Scan => PatternKind::Scan,
        _ => PatternKind::Functional,
    };
    EntityStream::with_map(map, core, cfg, kind, seed)
}

impl<'a> EntityStream<'a> {
    /// A stream from an explicit map, e.g. one whose shift plan was altered.
    pub fn with_map(
        map: TranslationMap,
        core: &'a CoreTestInfo,
        cfg: Option<WrapperConfig>,
        kind: PatternKind,
        seed: u64,
    ) -> Result<Self, PatternError> {
        let mut s = EntityStream {
            phase_len: map.plan.map_or(0, |p| p.first),
            map,
            core,
            cfg,
            kind,
            seed,
            t: 0,
            phase: 0,
            step: 0,
            cur: None,
            prev: None,
            failed: false,
        };
        if s.map.access == Access::Wrapper && s.map.patterns > 0 {
            s.cur = Some(s.wrapper_pattern(0)?);
        }
        Ok(s)
    }

    pub fn map(&self) -> &TranslationMap {
        &self.map
    }

    pub fn len(&self) -> u64 {
        self.map.cycles
    }

    pub fn is_empty(&self) -> bool {
        self.map.cycles == 0
    }

    fn wrapper_pattern(&self, index: u64) -> Result<Pattern, PatternError> {
        let p = core_pattern(self.core, self.kind, self.seed, index)?;
        let cfg = self.cfg.as_ref().expect("wrapper access has a config");
        Ok(translate_pattern(cfg, &p))
    }

    fn control(&self, row: &mut EntityRow, capture: bool) {
        row.extend(self.map.clocks.iter().map(|&p| (p, Symbol::One)));
        row.extend(self.map.resets.iter().map(|&p| (p, Symbol::Zero)));
        for &(p, v) in &self.map.scan_enable {
            row.push((p, if capture { v } else { Symbol::One }));
        }
        for &(p, v) in &self.map.test_enable {
            row.push((p, if capture { v } else { Symbol::One }));
        }
    }

    fn wrapper_row(&mut self) -> Result<EntityRow, PatternError> {
        let plan = self.map.plan.expect("checked in translation_map");
        let mut row = Vec::with_capacity(self.map.clocks.len() + 2 * self.map.wsi.len() + 4);
        if self.step < self.phase_len {
            self.control(&mut row, false);
            let cfg = self.cfg.as_ref().expect("wrapper access has a config");
            let s = self.phase_len;
            let t = self.step;
            for (j, ch) in cfg.chains.iter().enumerate() {
                let drive = match &self.cur {
                    Some(p) if s - 1 - t < p.load[j].len() as u32 => Symbol::drive(p.load[j].get((s - 1 - t) as usize)),
                    _ => Symbol::X,
                };
                row.push((self.map.wsi[j], drive));
                let len = ch.total_len();
                let lead = ch.inputs.len() as u32;
                let observe = match &self.prev {
                    Some(p) if t < len && len - 1 - t >= lead => {
                        Symbol::expect(p.unload[j].get((len - 1 - t - lead) as usize))
                    }
                    _ => Symbol::X,
                };
                row.push((self.map.wso[j], observe));
            }
            self.step += 1;
        } else {
            self.control(&mut row, true);
            for (&i, &o) in self.map.wsi.iter().zip(&self.map.wso) {
                row.push((i, Symbol::X));
                row.push((o, Symbol::X));
            }
            self.phase += 1;
            self.prev = self.cur.take();
            if self.phase < self.map.patterns {
                self.cur = Some(self.wrapper_pattern(self.phase)?);
            }
            self.step = 0;
            self.phase_len = if self.phase == self.map.patterns {
                plan.last
            } else {
                plan.middle
            };
        }
        Ok(row)
    }

    fn direct_row(&mut self) -> Result<EntityRow, PatternError> {
        let p = core_pattern(self.core, self.kind, self.seed, self.t)?;
        let mut row = Vec::with_capacity(self.map.func_in.len() + self.map.func_out.len() + 4);
        self.control(&mut row, false);
        for (k, &pin) in self.map.func_in.iter().enumerate() {
            row.push((pin, Symbol::drive(side(&p.pi, k as u32))));
        }
        for (k, &pin) in self.map.func_out.iter().enumerate() {
            row.push((pin, Symbol::expect(side(&p.po, k as u32))));
        }
        Ok(row)
    }

    fn bist_row(&self) -> EntityRow {
        let mut row = Vec::with_capacity(self.map.clocks.len() + 8);
        self.control(&mut row, false);
        let last = self.t + 1 == self.map.cycles;
        let values = [
            Symbol::level(self.t == 0),
            if last { Symbol::H } else { Symbol::L },
            Symbol::L,
            Symbol::X,
        ];
        row.extend(self.map.bist.iter().zip(values).map(|(&p, v)| (p, v)));
        row
    }
}

impl Iterator for EntityStream<'_> {
    type Item = Result<EntityRow, PatternError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed || self.t >= self.map.cycles {
            return None;
        }
        let row = match self.map.access {
            Access::Wrapper => self.wrapper_row(),
            Access::Direct => self.direct_row(),
            Access::Bist => Ok(self.bist_row()),
        };
        self.t += 1;
        if row.is_err() {
            self.failed = true;
        }
        Some(row)
    }
}

/// Cycle-wise union of the streams of one session over the session's pins.
/// `test_mode` is held at 1 and `session_si` at 0; pins of a stream that has
/// ended are padded with X.
pub struct MergedStream<I> {
    header: Vec<u32>,
    column: Vec<usize>,
    streams: Vec<I>,
    cycle: u64,
    failed: bool,
}

pub fn merge_session_patterns<I>(pins: &[u32], streams: Vec<I>) -> MergedStream<I>
where
    I: Iterator<Item = Result<EntityRow, PatternError>>,
{
    let mut header = pins.to_vec();
    header.sort_unstable();
    header.dedup();
    let mut column = vec![usize::MAX; header.last().map_or(0, |&p| p as usize + 1)];
    for (c, &p) in header.iter().enumerate() {
        column[p as usize] = c;
    }
    MergedStream {
        header,
        column,
        streams,
        cycle: 0,
        failed: false,
    }
}

impl<I> MergedStream<I> {
    pub fn header(&self) -> &[u32] {
        &self.header
    }

    /// Header line of the vector file.
    pub fn header_line(&self) -> String {
        header_line(&self.header)
    }
}

pub fn header_line(pins: &[u32]) -> String {
    let names: Vec<String> = pins.iter().map(|&p| pin_name(p)).collect();
    names.join(" ")
}

impl<I> Iterator for MergedStream<I>
where
    I: Iterator<Item = Result<EntityRow, PatternError>>,
{
    type Item = Result<CyclePattern, PatternError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        let mut symbols: Vec<Symbol> = self
            .header
            .iter()
            .map(|&p| match p {
                0 => Symbol::One,
                1 => Symbol::Zero,
                _ => Symbol::X,
            })
            .collect();
        let mut any = false;
        for s in &mut self.streams {
            let row = match s.next() {
                None => continue,
                Some(Ok(r)) => r,
                Some(Err(e)) => {
                    self.failed = true;
                    return Some(Err(e));
                }
            };
            any = true;
            for (pin, sym) in row {
                let col = self.column.get(pin as usize).copied().unwrap_or(usize::MAX);
                let err = if col == usize::MAX {
                    Some(PatternError::Unmapped {
                        entity: format!("stream pin {}", pin_name(pin)),
                        what: "session header column".into(),
                    })
                } else {
                    match symbols[col].merge(sym) {
                        Some(m) => {
                            symbols[col] = m;
                            None
                        }
                        None => Some(PatternError::Collision {
                            pin: pin_name(pin),
                            cycle: self.cycle,
                        }),
                    }
                };
                if let Some(e) = err {
                    self.failed = true;
                    return Some(Err(e));
                }
            }
        }
        if !any {
            return None;
        }
        let out = CyclePattern {
            cycle: self.cycle,
            symbols,
        };
        self.cycle += 1;
        Some(Ok(out))
    }
}

/// The merged stream of every entity in one session.
pub fn session_stream<'a>(
    s: &TestSchedule,
    session: usize,
    cores: &'a [CoreTestInfo],
    opts: &WrapperOptions,
    seed: u64,
) -> Result<MergedStream<EntityStream<'a>>, PatternError> {
    let sess = s.sessions.get(session).ok_or(PatternError::NoSession(session))?;
    let mut streams = Vec::with_capacity(sess.assignments.len());
    for a in &sess.assignments {
        let e = &s.entities[a.entity];
        if e.kind == EntityKind::Bist {
            let map = translation_map(s, session, a.entity)?;
            streams.push(EntityStream::with_map(
                map,
                bist_placeholder(),
                None,
                PatternKind::Functional,
                seed,
            )?);
            continue;
        }
        let core = cores
            .iter()
            .find(|c| c.name == e.core)
            .ok_or_else(|| PatternError::UnknownCore(e.core.clone()))?;
        streams.push(translate_to_chip(s, session, a.entity, core, opts, seed)?);
    }
    let pins: Vec<u32> = sess.pins.iter().map(|b| b.pin).collect();
    Ok(merge_session_patterns(&pins, streams))
}

fn bist_placeholder() -> &'static CoreTestInfo {
    static EMPTY: CoreTestInfo = CoreTestInfo {
        name: String::new(),
        ti: 0,
        to: 0,
        pi: 0,
        po: 0,
        clock_domains: Vec::new(),
        control_pins: Vec::new(),
        scan_chains: Vec::new(),
        pattern_sets: Vec::new(),
        softness: crate::model::Softness::Hard,
        test_power: 1.0,
    };
    &EMPTY
}

impl fmt::Display for CyclePattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.symbols {
            write!(f, "{}", s.as_char())?;
        }
        Ok(())
    }
}
