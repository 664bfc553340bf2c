// SPDX-License-Identifier: Apache-2.0

//! Session-based test scheduling under a chip test-pin budget.
//!
//! Every core test (scan, functional, memory BIST) becomes a [`TestEntity`]
//! with a small menu of [`WidthOption`]s: how many chip data pins it takes
//! and how many cycles it then needs. A session runs several entities
//! concurrently; its pins are the controller pins, the control pins of its
//! members (after sharing) and the members' data pins, and its length is the
//! longest member. The total test time is the sum of the session lengths.
//!
//! A shared scan enable couples co-scheduled scan tests: entities on one SE
//! pin must run with a common shift length (lock-step) so their capture
//! cycles coincide.

mod evaluate;
mod exhaustive;
mod heuristic;
#[cfg(test)]
mod tests;

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::Serialize;
use thiserror::Error;

use crate::model::{CaptureMode, ControlKind, ControlPin, CoreTestInfo, PatternKind, SocDescription};
use crate::wrapper::{design_wrapper, pareto_filter, scan_cycles, WidthPoint, WrapperError, WrapperOptions};

pub use evaluate::{evaluate_schedule, ScheduleReport, SessionSummary};
pub use exhaustive::{best_session, exhaustive_entities, exhaustive_schedule, set_partitions, EXHAUSTIVE_LIMIT};
pub use heuristic::{schedule_entities, schedule_serial, schedule_serial_entities, schedule_sessions};

/// Pins reserved for the test controller in every session
/// (`test_mode`, `session_shift_in`).
pub const CONTROLLER_PINS: u32 = 2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScheduleError {
    #[error("entity {entity} cannot run alone: needs at least {needed} pins, budget is {budget}")]
    InfeasibleEntity { entity: String, needed: u32, budget: u32 },
    #[error("entity {entity} draws {power} power units, above the session cap {cap}")]
    PowerExceeded { entity: String, power: f64, cap: f64 },
    #[error("control and controller pins need {needed} pins, budget is {budget}")]
    PinBudgetExceeded { needed: u32, budget: u32 },
    #[error("exhaustive search supports at most {limit} entities, got {count}")]
    TooLarge { count: usize, limit: usize },
    #[error(transparent)]
    Wrapper(#[from] WrapperError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SharingPolicy {
    /// One scan-enable pin for all co-scheduled cores.
    pub share_se: bool,
    /// One test-enable pin for all co-scheduled cores.
    pub share_te: bool,
}

impl Default for SharingPolicy {
    fn default() -> Self {
        SharingPolicy {
            share_se: true,
            share_te: false,
        }
    }
}

impl SharingPolicy {
    pub fn none() -> Self {
        SharingPolicy {
            share_se: false,
            share_te: false,
        }
    }
}

/// Which access routes a functional test may use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FunctionalAccess {
    /// Direct pin application, and for scan-less cores also vectors
    /// serialized through the wrapper boundary register.
    Any,
    DirectOnly,
    SerializedOnly,
}

/// Memory BIST as a schedulable test: fixed cycles on a fixed pin set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BistEntitySpec {
    pub name: String,
    pub cycles: u64,
    /// start, done, fail, diagnostic shift-out.
    pub data_pins: u32,
    pub control_pins: Vec<ControlPin>,
    pub power: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Constraints {
    pub pin_budget: u32,
    pub power_cap: Option<f64>,
    pub controller_pins: u32,
    pub sharing: SharingPolicy,
    pub wrapper: WrapperOptions,
    pub functional: FunctionalAccess,
    pub bist: Option<BistEntitySpec>,
}

impl Default for Constraints {
    fn default() -> Self {
        Constraints {
            pin_budget: crate::model::DEFAULT_PIN_BUDGET,
            power_cap: None,
            controller_pins: CONTROLLER_PINS,
            sharing: SharingPolicy::default(),
            wrapper: WrapperOptions::default(),
            functional: FunctionalAccess::Any,
            bist: None,
        }
    }
}

impl Constraints {
    pub fn for_soc(soc: &SocDescription) -> Self {
        Constraints {
            pin_budget: soc.pin_budget,
            power_cap: soc.power_cap,
            ..Constraints::default()
        }
    }

    fn power_ok(&self, power: f64) -> bool {
        self.power_cap.is_none_or(|cap| power <= cap)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EntityKind {
    Scan,
    Functional,
    Bist,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Access {
    /// Through the wrapper chains: `width` scan-in and `width` scan-out pins.
    Wrapper,
    /// Functional pins driven straight from chip pins.
    Direct,
    Bist,
}

/// One point of an entity's time function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct WidthOption {
    pub width: u32,
    pub data_pins: u32,
    pub access: Access,
    pub si: u32,
    pub so: u32,
    /// Cycles when the entity runs without lock-step coupling.
    pub cycles: u64,
}

impl WidthOption {
    pub fn max_shift(&self) -> u32 {
        self.si.max(self.so)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestEntity {
    pub name: String,
    pub core: String,
    pub kind: EntityKind,
    pub patterns: u64,
    pub capture: CaptureMode,
    pub control_pins: Vec<ControlPin>,
    /// Pareto options, ascending pins, strictly descending cycles.
    pub options: Vec<WidthOption>,
    pub power: f64,
    /// Functional input and output counts of the core.
    pub pi: u32,
    pub po: u32,
}

impl TestEntity {
    pub fn min_width(&self) -> u32 {
        self.options.first().map_or(0, |o| o.width)
    }

    pub fn max_width(&self) -> u32 {
        self.options.last().map_or(0, |o| o.width)
    }

    /// Whether this entity drives the pooled scan-enable pin.
    pub fn shares_se(&self, sharing: &SharingPolicy) -> bool {
        self.kind == EntityKind::Scan
            && sharing.share_se
            && self
                .control_pins
                .iter()
                .any(|p| p.kind == ControlKind::ScanEnable && p.shareable)
    }
}

/// Control pins of a set of entities after sharing.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ControlBreakdown {
    pub clock: u32,
    pub reset: u32,
    pub test_enable: u32,
    pub scan_enable: u32,
}

impl ControlBreakdown {
    pub fn total(&self) -> u32 {
        self.clock + self.reset + self.test_enable + self.scan_enable
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TestIoBudget {
    pub total_pins: u32,
    pub controller_pins: u32,
    pub control: ControlBreakdown,
    pub control_pins_used: u32,
    pub tam_pins_available: u32,
}

/// How a control pin is realized on the chip within one session.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum ControlKey {
    Dedicated { core: String, pin: String },
    PooledSe,
    PooledTe,
}

fn control_key(entity: &TestEntity, pin: &ControlPin, sharing: &SharingPolicy) -> ControlKey {
    match pin.kind {
        ControlKind::ScanEnable if sharing.share_se && pin.shareable => ControlKey::PooledSe,
        ControlKind::TestEnable if sharing.share_te && pin.shareable => ControlKey::PooledTe,
        _ => ControlKey::Dedicated {
            core: entity.core.clone(),
            pin: pin.name.clone(),
        },
    }
}

pub fn count_control_pins<'a>(
    entities: impl IntoIterator<Item = &'a TestEntity>,
    sharing: &SharingPolicy,
) -> ControlBreakdown {
    let mut seen = BTreeSet::new();
    let mut out = ControlBreakdown::default();
    for e in entities {
        for p in &e.control_pins {
            if seen.insert(control_key(e, p, sharing)) {
                match p.kind {
                    ControlKind::Clock => out.clock += 1,
                    ControlKind::Reset => out.reset += 1,
                    ControlKind::TestEnable => out.test_enable += 1,
                    ControlKind::ScanEnable => out.scan_enable += 1,
                }
            }
        }
    }
    out
}

/// Pin accounting for a set of co-scheduled entities: what is left for test
/// data once control and controller pins are paid for.
pub fn io_accounting<'a>(
    entities: impl IntoIterator<Item = &'a TestEntity>,
    sharing: &SharingPolicy,
    total_pins: u32,
    controller_pins: u32,
) -> Result<TestIoBudget, ScheduleError> {
    let control = count_control_pins(entities, sharing);
    let used = control.total() + controller_pins;
    if used > total_pins {
        return Err(ScheduleError::PinBudgetExceeded {
            needed: used,
            budget: total_pins,
        });
    }
    Ok(TestIoBudget {
        total_pins,
        controller_pins,
        control,
        control_pins_used: control.total(),
        tam_pins_available: total_pins - used,
    })
}

/// Shift timing of one wrapper-access test: first load, overlapped
/// load/unload, final unload. One capture cycle follows every load.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ShiftPlan {
    pub first: u32,
    pub middle: u32,
    pub last: u32,
}

impl ShiftPlan {
    pub fn solo(si: u32, so: u32) -> Self {
        ShiftPlan {
            first: si,
            middle: si.max(so),
            last: so,
        }
    }

    pub fn lockstep(shift: u32) -> Self {
        ShiftPlan {
            first: shift,
            middle: shift,
            last: shift,
        }
    }

    pub fn cycles(&self, patterns: u64) -> u64 {
        if patterns == 0 {
            return 0;
        }
        u64::from(self.first) + (patterns - 1) * u64::from(self.middle) + patterns + u64::from(self.last)
    }
}

fn lockstep_cycles(shift: u32, patterns: u64) -> u64 {
    ShiftPlan::lockstep(shift).cycles(patterns)
}

/// Members of `members` that run in lock-step (only when two or more).
fn lockstep_group(entities: &[TestEntity], members: &[usize], sharing: &SharingPolicy) -> Vec<usize> {
    let group: Vec<usize> = (0..members.len())
        .filter(|&k| entities[members[k]].shares_se(sharing))
        .collect();
    if group.len() >= 2 {
        group
    } else {
        Vec::new()
    }
}

/// Per-member cycles and shift plans for a fixed choice of options.
pub(crate) fn member_timing(
    entities: &[TestEntity],
    members: &[usize],
    options: &[WidthOption],
    sharing: &SharingPolicy,
) -> Vec<(u64, Option<ShiftPlan>)> {
    let group = lockstep_group(entities, members, sharing);
    let shift = group.iter().map(|&k| options[k].max_shift()).max().unwrap_or(0);
    (0..members.len())
        .map(|k| {
            let e = &entities[members[k]];
            let o = &options[k];
            match o.access {
                Access::Wrapper if group.contains(&k) => {
                    let plan = ShiftPlan::lockstep(shift);
                    (plan.cycles(e.patterns), Some(plan))
                }
                Access::Wrapper => {
                    let plan = ShiftPlan::solo(o.si, o.so);
                    (plan.cycles(e.patterns), Some(plan))
                }
                Access::Direct | Access::Bist => (o.cycles, None),
            }
        })
        .collect()
}

pub(crate) fn session_cycles(
    entities: &[TestEntity],
    members: &[usize],
    options: &[WidthOption],
    sharing: &SharingPolicy,
) -> u64 {
    member_timing(entities, members, options, sharing)
        .iter()
        .map(|t| t.0)
        .max()
        .unwrap_or(0)
}

/// Why a set of entities cannot share a session, if it cannot.
pub(crate) fn block_conflict(entities: &[TestEntity], members: &[usize], c: &Constraints) -> bool {
    let mut cores = BTreeSet::new();
    if !members.iter().all(|&i| cores.insert(entities[i].core.as_str())) {
        return true;
    }
    let power: f64 = members.iter().map(|&i| entities[i].power).sum();
    !c.power_ok(power)
}

/// Data pins left for `members` after control and controller pins.
pub(crate) fn data_budget(entities: &[TestEntity], members: &[usize], c: &Constraints) -> Option<u32> {
    io_accounting(
        members.iter().map(|&i| &entities[i]),
        &c.sharing,
        c.pin_budget,
        c.controller_pins,
    )
    .ok()
    .map(|b| b.tam_pins_available)
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Allocation {
    pub options: Vec<WidthOption>,
    pub time: u64,
}

/// Minimum session length for `members` with the best width per member,
/// found by the smallest feasible time threshold.
pub(crate) fn allocate(entities: &[TestEntity], members: &[usize], c: &Constraints) -> Option<Allocation> {
    if members.is_empty() {
        return Some(Allocation {
            options: Vec::new(),
            time: 0,
        });
    }
    if block_conflict(entities, members, c) {
        return None;
    }
    let budget = data_budget(entities, members, c)?;
    let group = lockstep_group(entities, members, &c.sharing);

    let mut candidates: Vec<u64> = Vec::new();
    let group_shifts: Vec<u32> = group
        .iter()
        .flat_map(|&k| entities[members[k]].options.iter().map(WidthOption::max_shift))
        .collect();
    for (k, &i) in members.iter().enumerate() {
        let e = &entities[i];
        if group.contains(&k) {
            candidates.extend(group_shifts.iter().map(|&m| lockstep_cycles(m, e.patterns)));
        } else {
            candidates.extend(e.options.iter().map(|o| o.cycles));
        }
    }
    candidates.sort_unstable();
    candidates.dedup();

    let pick = |tau: u64| -> Option<Vec<WidthOption>> {
        let shift_cap = group
            .iter()
            .map(|&k| {
                let p = entities[members[k]].patterns;
                if p == 0 {
                    Some(u64::MAX)
                } else if tau < p {
                    None
                } else {
                    Some((tau - p) / (p + 1))
                }
            })
            .try_fold(u64::MAX, |acc, m| m.map(|m| acc.min(m)))?;
        let mut chosen = Vec::with_capacity(members.len());
        let mut pins = 0u32;
        for (k, &i) in members.iter().enumerate() {
            let e = &entities[i];
            let fits = |o: &&WidthOption| {
                if group.contains(&k) {
                    u64::from(o.max_shift()) <= shift_cap
                } else {
                    o.cycles <= tau
                }
            };
            let o = e.options.iter().find(fits)?;
            pins = pins.checked_add(o.data_pins)?;
            chosen.push(*o);
        }
        (pins <= budget).then_some(chosen)
    };

    // feasibility is monotone in the threshold
    let first_ok = candidates.partition_point(|&tau| pick(tau).is_none());
    let tau = *candidates.get(first_ok)?;
    let options = pick(tau)?;
    let time = session_cycles(entities, members, &options, &c.sharing);
    Some(Allocation { options, time })
}

/// Builds the schedulable entities of an SOC: one scan entity and one
/// functional entity per core with patterns of that kind, plus memory BIST.
pub fn build_entities(soc: &SocDescription, c: &Constraints) -> Result<Vec<TestEntity>, ScheduleError> {
    let mut out = Vec::new();
    for core in &soc.cores {
        if let Some(e) = scan_entity(core, c)? {
            out.push(e);
        }
        if let Some(e) = functional_entity(core, c)? {
            out.push(e);
        }
    }
    if let Some(b) = &c.bist {
        out.push(TestEntity {
            name: b.name.clone(),
            core: b.name.clone(),
            kind: EntityKind::Bist,
            patterns: b.cycles,
            capture: CaptureMode::Normal,
            control_pins: b.control_pins.clone(),
            options: vec![WidthOption {
                width: 1,
                data_pins: b.data_pins,
                access: Access::Bist,
                si: 0,
                so: 0,
                cycles: b.cycles,
            }],
            power: b.power,
            pi: 0,
            po: 0,
        });
    }
    for e in &out {
        check_alone(e, c)?;
    }
    Ok(out)
}

/// Notes for every entity that cannot be scheduled even on its own.
pub fn feasibility_notes(soc: &SocDescription, c: &Constraints) -> Vec<String> {
    let mut notes = Vec::new();
    for core in &soc.cores {
        let one = SocDescription {
            cores: vec![core.clone()],
            memories: Vec::new(),
            ..soc.clone()
        };
        let mut cc = c.clone();
        cc.bist = None;
        if let Err(e) = build_entities(&one, &cc) {
            notes.push(format!("infeasible: {e}"));
        }
    }
    notes
}

/// Fewest pins `e` needs to run on its own.
pub(crate) fn min_pins(e: &TestEntity, c: &Constraints) -> u32 {
    let control = count_control_pins([e], &c.sharing).total();
    let data = e.options.first().map_or(e.kind_min_pins(), |o| o.data_pins);
    c.controller_pins + control + data
}

pub(crate) fn check_alone(e: &TestEntity, c: &Constraints) -> Result<(), ScheduleError> {
    if !c.power_ok(e.power) {
        return Err(ScheduleError::PowerExceeded {
            entity: e.name.clone(),
            power: e.power,
            cap: c.power_cap.unwrap_or(f64::INFINITY),
        });
    }
    if e.options.is_empty() || min_pins(e, c) > c.pin_budget {
        return Err(ScheduleError::InfeasibleEntity {
            entity: e.name.clone(),
            needed: min_pins(e, c),
            budget: c.pin_budget,
        });
    }
    Ok(())
}

impl TestEntity {
    fn kind_min_pins(&self) -> u32 {
        match self.kind {
            EntityKind::Scan => 2,
            EntityKind::Functional => 3,
            EntityKind::Bist => 4,
        }
    }
}

/// Data pins available to `entity` when it runs alone.
fn alone_data_pins(core: &CoreTestInfo, pins: &[ControlPin], c: &Constraints) -> Option<u32> {
    let probe = TestEntity {
        name: String::new(),
        core: core.name.clone(),
        kind: EntityKind::Scan,
        patterns: 0,
        capture: CaptureMode::Normal,
        control_pins: pins.to_vec(),
        options: Vec::new(),
        power: 0.0,
        pi: 0,
        po: 0,
    };
    data_budget(core::slice::from_ref(&probe), &[0], c)
}

fn scan_entity(core: &CoreTestInfo, c: &Constraints) -> Result<Option<TestEntity>, ScheduleError> {
    let Some(set) = core.pattern_set(PatternKind::Scan) else {
        return Ok(None);
    };
    if set.count == 0 {
        return Ok(None);
    }
    let control = core.control_pins.clone();
    let data = alone_data_pins(core, &control, c).unwrap_or(0);
    let w_max = (data / 2).min(useful_width(core, &c.wrapper));
    let mut sweep = Vec::new();
    for w in 1..=w_max {
        match design_wrapper(core, w, &c.wrapper) {
            Ok(cfg) => sweep.push(WidthPoint {
                width: w,
                si: cfg.si,
                so: cfg.so,
                cycles: scan_cycles(cfg.si, cfg.so, set.count),
            }),
            Err(WrapperError::InfeasibleWidth { .. }) => continue,
            Err(e) => return Err(e.into()),
        }
    }
    let options = pareto_filter(sweep)
        .into_iter()
        .map(|p| WidthOption {
            width: p.width,
            data_pins: 2 * p.width,
            access: Access::Wrapper,
            si: p.si,
            so: p.so,
            cycles: p.cycles,
        })
        .collect();
    Ok(Some(TestEntity {
        name: format!("{}.scan", core.name),
        core: core.name.clone(),
        kind: EntityKind::Scan,
        patterns: set.count,
        capture: set.capture,
        control_pins: control,
        options,
        power: core.test_power,
        pi: core.pi,
        po: core.po,
    }))
}

/// Beyond this many wires no wrapper chain can get shorter.
fn useful_width(core: &CoreTestInfo, opts: &WrapperOptions) -> u32 {
    let items = if core.is_soft() {
        core.total_flops()
    } else {
        core.scan_chains.len() as u64
    };
    let cells = if opts.include_wbr_in_chains {
        u64::from(core.pi.max(core.po))
    } else {
        0
    };
    (items + cells).clamp(1, u64::from(u32::MAX)) as u32
}

fn functional_entity(core: &CoreTestInfo, c: &Constraints) -> Result<Option<TestEntity>, ScheduleError> {
    let p = core.functional_patterns();
    if p == 0 {
        return Ok(None);
    }
    let control: Vec<ControlPin> = core
        .control_pins
        .iter()
        .filter(|p| p.kind != ControlKind::ScanEnable)
        .cloned()
        .collect();
    let data = alone_data_pins(core, &control, c).unwrap_or(0);
    let mut raw: Vec<WidthOption> = Vec::new();

    let serial_ok =
        core.scan_chains.is_empty() && c.functional != FunctionalAccess::DirectOnly && core.pi + core.po > 0;
    if serial_ok {
        // wrapper chains of WBR cells only, plus one wrapper shift-enable pin
        let opts = WrapperOptions {
            include_wbr_in_chains: true,
            ..c.wrapper
        };
        let w_max = (data.saturating_sub(1) / 2).min(core.pi.max(core.po));
        for w in 1..=w_max {
            let cfg = design_wrapper(core, w, &opts)?;
            raw.push(WidthOption {
                width: w,
                data_pins: 2 * w + 1,
                access: Access::Wrapper,
                si: cfg.si,
                so: cfg.so,
                cycles: scan_cycles(cfg.si, cfg.so, p),
            });
        }
    }
    let direct_pins = core.pi + core.po;
    if c.functional != FunctionalAccess::SerializedOnly && direct_pins <= data {
        raw.push(WidthOption {
            width: direct_pins,
            data_pins: direct_pins,
            access: Access::Direct,
            si: 0,
            so: 0,
            cycles: p,
        });
    }
    raw.sort_by_key(|o| (o.data_pins, o.cycles));
    let mut options: Vec<WidthOption> = Vec::new();
    for o in raw {
        if options.last().is_none_or(|l| o.cycles < l.cycles) {
            options.push(o);
        }
    }
    Ok(Some(TestEntity {
        name: format!("{}.func", core.name),
        core: core.name.clone(),
        kind: EntityKind::Functional,
        patterns: p,
        capture: CaptureMode::Normal,
        control_pins: control,
        options,
        power: core.test_power,
        pi: core.pi,
        po: core.po,
    }))
}

/// What a chip test pin carries during one session.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum PinRole {
    TestMode,
    SessionIn,
    Control {
        core: String,
        pin: String,
        kind: ControlKind,
    },
    SharedScanEnable,
    SharedTestEnable,
    WrapperIn {
        entity: usize,
        chain: u32,
    },
    WrapperOut {
        entity: usize,
        chain: u32,
    },
    WrapperShiftEnable {
        entity: usize,
    },
    FuncIn {
        entity: usize,
        index: u32,
    },
    FuncOut {
        entity: usize,
        index: u32,
    },
    BistStart {
        entity: usize,
    },
    BistDone {
        entity: usize,
    },
    BistFail {
        entity: usize,
    },
    BistDiag {
        entity: usize,
    },
}

impl PinRole {
    /// Pins the tester observes rather than drives.
    pub fn is_output(&self) -> bool {
        matches!(
            self,
            PinRole::WrapperOut { .. }
                | PinRole::FuncOut { .. }
                | PinRole::BistDone { .. }
                | PinRole::BistFail { .. }
                | PinRole::BistDiag { .. }
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PinBinding {
    pub pin: u32,
    pub role: PinRole,
}

/// Chip-level name of test pin `k`.
pub fn pin_name(k: u32) -> String {
    match k {
        0 => "test_mode".to_string(),
        1 => "session_si".to_string(),
        _ => format!("tp{k}"),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Assignment {
    pub entity: usize,
    pub option: WidthOption,
    pub cycles: u64,
    pub shift: Option<ShiftPlan>,
    /// Chip pins carrying this entity's data, in role order.
    pub wires: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Session {
    pub index: usize,
    pub assignments: Vec<Assignment>,
    pub pins: Vec<PinBinding>,
    pub session_time: u64,
    pub io_used: u32,
    pub power_used: f64,
}

impl Session {
    pub fn role_of(&self, pin: u32) -> Option<&PinRole> {
        self.pins.iter().find(|b| b.pin == pin).map(|b| &b.role)
    }

    pub fn has_entity(&self, entity: usize) -> bool {
        self.assignments.iter().any(|a| a.entity == entity)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ScheduleMode {
    SessionBased,
    Serial,
    NonSession,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestSchedule {
    pub entities: Vec<TestEntity>,
    pub sessions: Vec<Session>,
    pub total_cycles: u64,
    pub mode: ScheduleMode,
    pub pin_budget: u32,
    pub power_cap: Option<f64>,
    pub controller_pins: u32,
    pub sharing: SharingPolicy,
}

impl TestSchedule {
    pub fn session_of(&self, entity: usize) -> Option<&Session> {
        self.sessions.iter().find(|s| s.has_entity(entity))
    }

    pub fn entity_index(&self, name: &str) -> Option<usize> {
        self.entities.iter().position(|e| e.name == name)
    }
}

/// Lays out pins for the given sessions and fixed option choices.
pub(crate) fn build_schedule(
    entities: Vec<TestEntity>,
    blocks: Vec<(Vec<usize>, Vec<WidthOption>)>,
    c: &Constraints,
    mode: ScheduleMode,
) -> TestSchedule {
    let mut sessions = Vec::with_capacity(blocks.len());
    for (index, (members, options)) in blocks.into_iter().enumerate() {
        sessions.push(lay_out_session(&entities, index, &members, &options, c));
    }
    let total_cycles = sessions.iter().map(|s| s.session_time).sum();
    TestSchedule {
        entities,
        sessions,
        total_cycles,
        mode,
        pin_budget: c.pin_budget,
        power_cap: c.power_cap,
        controller_pins: c.controller_pins,
        sharing: c.sharing,
    }
}

fn lay_out_session(
    entities: &[TestEntity],
    index: usize,
    members: &[usize],
    options: &[WidthOption],
    c: &Constraints,
) -> Session {
    let mut pins = Vec::new();
    let mut next = 0u32;
    if c.controller_pins >= 1 {
        bind(&mut pins, &mut next, PinRole::TestMode);
    }
    if c.controller_pins >= 2 {
        bind(&mut pins, &mut next, PinRole::SessionIn);
    }
    next = next.max(c.controller_pins);

    let mut seen = BTreeSet::new();
    for &i in members {
        let e = &entities[i];
        for p in &e.control_pins {
            let key = control_key(e, p, &c.sharing);
            if !seen.insert(key.clone()) {
                continue;
            }
            let role = match key {
                ControlKey::Dedicated { core, pin } => PinRole::Control {
                    core,
                    pin,
                    kind: p.kind,
                },
                ControlKey::PooledSe => PinRole::SharedScanEnable,
                ControlKey::PooledTe => PinRole::SharedTestEnable,
            };
            bind(&mut pins, &mut next, role);
        }
    }

    let timing = member_timing(entities, members, options, &c.sharing);
    let mut assignments = Vec::with_capacity(members.len());
    for (k, &i) in members.iter().enumerate() {
        let e = &entities[i];
        let o = options[k];
        let mut wires = Vec::with_capacity(o.data_pins as usize);
        let mut roles = Vec::with_capacity(o.data_pins as usize);
        match (o.access, e.kind) {
            (Access::Wrapper, kind) => {
                if kind == EntityKind::Functional {
                    roles.push(PinRole::WrapperShiftEnable { entity: i });
                }
                roles.extend((0..o.width).map(|chain| PinRole::WrapperIn { entity: i, chain }));
                roles.extend((0..o.width).map(|chain| PinRole::WrapperOut { entity: i, chain }));
            }
            (Access::Direct, _) => {
                roles.extend((0..e.pi).map(|index| PinRole::FuncIn { entity: i, index }));
                roles.extend((0..e.po).map(|index| PinRole::FuncOut { entity: i, index }));
            }
            (Access::Bist, _) => {
                roles.push(PinRole::BistStart { entity: i });
                roles.push(PinRole::BistDone { entity: i });
                roles.push(PinRole::BistFail { entity: i });
                roles.push(PinRole::BistDiag { entity: i });
                roles.truncate(o.data_pins as usize);
            }
        }
        for r in roles {
            wires.push(bind(&mut pins, &mut next, r));
        }
        assignments.push(Assignment {
            entity: i,
            option: o,
            cycles: timing[k].0,
            shift: timing[k].1,
            wires,
        });
    }

    Session {
        index,
        session_time: timing.iter().map(|t| t.0).max().unwrap_or(0),
        io_used: next,
        power_used: members.iter().map(|&i| entities[i].power).sum(),
        assignments,
        pins,
    }
}

fn bind(pins: &mut Vec<PinBinding>, next: &mut u32, role: PinRole) -> u32 {
    pins.push(PinBinding { pin: *next, role });
    *next += 1;
    *next - 1
}
