// SPDX-License-Identifier: Apache-2.0

//! Behavioral oracles for pattern translation: a small deterministic core
//! logic, golden patterns computed from it, and a cycle simulator of the
//! wrapped cores of one session driven by chip-level rows.

use alloc::vec;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::model::{Bits, CoreTestInfo, Pattern, PatternKind};
use crate::pattern::{entity_wrapper, translation_map, CyclePattern, PatternError, Symbol, TranslationMap};
use crate::schedule::{Access, EntityKind, TestSchedule};
use crate::wrapper::WrapperOptions;

/// Stand-in logic of a core. Flops are numbered chain by chain in declared
/// order. Outputs depend on the inputs only, the next state on both.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CoreLogic {
    pub flops: usize,
    pub pi: usize,
    pub po: usize,
}

impl CoreLogic {
    pub fn of(core: &CoreTestInfo) -> Self {
        CoreLogic {
            flops: core.total_flops() as usize,
            pi: core.pi as usize,
            po: core.po as usize,
        }
    }

    fn input(&self, x: &[bool], k: usize) -> bool {
        if self.pi == 0 {
            k.is_multiple_of(2)
        } else {
            x[k % self.pi]
        }
    }

    pub fn next_state(&self, s: &[bool], x: &[bool]) -> Vec<bool> {
        let n = self.flops;
        (0..n)
            .map(|f| s[(f + n - 1) % n] ^ (s[(f + 1) % n] & self.input(x, f)) ^ (f % 3 == 0))
            .collect()
    }

    pub fn outputs(&self, x: &[bool]) -> Vec<bool> {
        (0..self.po)
            .map(|k| self.input(x, k) ^ (self.input(x, k + 1) & !self.input(x, 3 * k + 2)) ^ (k % 2 == 1))
            .collect()
    }
}

fn random_bools(rng: &mut ChaCha8Rng, n: usize) -> Vec<bool> {
    (0..n).map(|_| rng.next_u32() & 1 == 1).collect()
}

/// Patterns with random stimuli and the responses of [`CoreLogic`].
/// With `drive_pi` off, scan patterns keep all inputs at 0, which is what
/// boundary cells outside the shift path hold.
pub fn golden_patterns(
    core: &CoreTestInfo,
    kind: PatternKind,
    count: usize,
    seed: u64,
    drive_pi: bool,
) -> Vec<Pattern> {
    let logic = CoreLogic::of(core);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let pi = if drive_pi || kind == PatternKind::Functional {
                random_bools(&mut rng, logic.pi)
            } else {
                vec![false; logic.pi]
            };
            let po = logic.outputs(&pi);
            if kind == PatternKind::Functional {
                return Pattern {
                    load: Vec::new(),
                    unload: Vec::new(),
                    pi: Bits::from_bools(pi),
                    po: Bits::from_bools(po),
                };
            }
            let state = random_bools(&mut rng, logic.flops);
            let next = logic.next_state(&state, &pi);
            let mut load = Vec::new();
            let mut unload = Vec::new();
            let mut at = 0;
            for c in &core.scan_chains {
                let r = at..at + c.length as usize;
                load.push(Bits::from_bools(state[r.clone()].iter().copied()));
                unload.push(Bits::from_bools(next[r].iter().copied()));
                at += c.length as usize;
            }
            Pattern {
                load,
                unload,
                pi: Bits::from_bools(pi),
                po: Bits::from_bools(po),
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Cell {
    In(usize),
    Flop(usize),
    Out(usize),
}

struct Unit {
    map: TranslationMap,
    logic: CoreLogic,
    chains: Vec<Vec<Cell>>,
    loose_in: Vec<usize>,
    loose_out: Vec<usize>,
    flops: Vec<bool>,
    pi: Vec<bool>,
    po: Vec<bool>,
}

/// A compare of an expect symbol against the simulated value that failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Mismatch {
    pub cycle: u64,
    pub pin: u32,
    pub expected: bool,
}

/// Cycle simulator of every core tested in one session.
pub struct SessionSim {
    column: Vec<usize>,
    units: Vec<Unit>,
    pub compared: u64,
    pub mismatches: Vec<Mismatch>,
}

impl SessionSim {
    pub fn new(
        s: &TestSchedule,
        session: usize,
        cores: &[CoreTestInfo],
        opts: &WrapperOptions,
        header: &[u32],
    ) -> Result<Self, PatternError> {
        let sess = s.sessions.get(session).ok_or(PatternError::NoSession(session))?;
        let mut maps = Vec::new();
        for a in &sess.assignments {
            if s.entities[a.entity].kind != EntityKind::Bist {
                maps.push((translation_map(s, session, a.entity)?, a.option.width));
            }
        }
        Self::from_maps(s, maps, cores, opts, header)
    }

    /// A simulator for explicitly given maps, e.g. with altered shift plans.
    pub fn from_maps(
        s: &TestSchedule,
        maps: Vec<(TranslationMap, u32)>,
        cores: &[CoreTestInfo],
        opts: &WrapperOptions,
        header: &[u32],
    ) -> Result<Self, PatternError> {
        let mut column = vec![usize::MAX; header.iter().max().map_or(0, |&p| p as usize + 1)];
        for (c, &p) in header.iter().enumerate() {
            column[p as usize] = c;
        }
        let mut units = Vec::new();
        for (map, width) in maps {
            let name = &s.entities[map.entity].core;
            let core = cores
                .iter()
                .find(|c| &c.name == name)
                .ok_or_else(|| PatternError::UnknownCore(name.clone()))?;
            let logic = CoreLogic::of(core);
            let mut chains = Vec::new();
            let mut placed_in = vec![false; logic.pi];
            let mut placed_out = vec![false; logic.po];
            if map.access == Access::Wrapper {
                let cfg = entity_wrapper(core, width, opts)?;
                let offsets: Vec<usize> = core
                    .scan_chains
                    .iter()
                    .scan(0usize, |acc, c| {
                        let o = *acc;
                        *acc += c.length as usize;
                        Some(o)
                    })
                    .collect();
                for ch in &cfg.chains {
                    let mut cells = Vec::new();
                    for &k in &ch.inputs {
                        placed_in[k as usize] = true;
                        cells.push(Cell::In(k as usize));
                    }
                    for seg in &ch.segments {
                        let base = offsets[seg.chain] + seg.start as usize;
                        cells.extend((base..base + seg.len as usize).map(Cell::Flop));
                    }
                    for &k in &ch.outputs {
                        placed_out[k as usize] = true;
                        cells.push(Cell::Out(k as usize));
                    }
                    chains.push(cells);
                }
            }
            units.push(Unit {
                map,
                logic,
                chains,
                loose_in: (0..logic.pi).filter(|&k| !placed_in[k]).collect(),
                loose_out: (0..logic.po).filter(|&k| !placed_out[k]).collect(),
                flops: vec![false; logic.flops],
                pi: vec![false; logic.pi],
                po: vec![false; logic.po],
            });
        }
        Ok(SessionSim {
            column,
            units,
            compared: 0,
            mismatches: Vec::new(),
        })
    }

    fn sym(&self, row: &CyclePattern, pin: u32) -> Symbol {
        match self.column.get(pin as usize) {
            Some(&c) if c != usize::MAX => row.symbols[c],
            _ => Symbol::X,
        }
    }

    fn check(&mut self, row: &CyclePattern, pin: u32, actual: bool) {
        if let Some(exp) = self.sym(row, pin).expected() {
            self.compared += 1;
            if exp != actual {
                self.mismatches.push(Mismatch {
                    cycle: row.cycle,
                    pin,
                    expected: exp,
                });
            }
        }
    }

    /// Applies one chip-level cycle.
    pub fn apply(&mut self, row: &CyclePattern) {
        for u in 0..self.units.len() {
            self.step_unit(u, row);
        }
    }

    fn step_unit(&mut self, u: usize, row: &CyclePattern) {
        let unit = &self.units[u];
        let clocked = unit.map.clocks.iter().all(|&p| self.sym(row, p) == Symbol::One);
        if !clocked {
            return;
        }
        match unit.map.access {
            Access::Direct => {
                let x: Vec<bool> = unit
                    .map
                    .func_in
                    .iter()
                    .map(|&p| self.sym(row, p).driven().unwrap_or(false))
                    .collect();
                let po = unit.logic.outputs(&x);
                let outs = unit.map.func_out.clone();
                let next = unit.logic.next_state(&unit.flops, &x);
                for (k, &p) in outs.iter().enumerate() {
                    self.check(row, p, po[k]);
                }
                self.units[u].flops = next;
            }
            Access::Wrapper => {
                let levels: Vec<Symbol> = unit
                    .map
                    .scan_enable
                    .iter()
                    .chain(&unit.map.test_enable)
                    .map(|&(p, _)| self.sym(row, p))
                    .collect();
                if levels.contains(&Symbol::X) {
                    return;
                }
                if levels.contains(&Symbol::Zero) {
                    let unit = &mut self.units[u];
                    let po = unit.logic.outputs(&unit.pi);
                    unit.flops = unit.logic.next_state(&unit.flops, &unit.pi);
                    unit.po = po;
                } else {
                    self.shift(u, row);
                }
            }
            Access::Bist => {}
        }
    }

    fn read(unit: &Unit, c: Cell) -> bool {
        match c {
            Cell::In(k) => unit.pi[k],
            Cell::Flop(k) => unit.flops[k],
            Cell::Out(k) => unit.po[k],
        }
    }

    fn write(unit: &mut Unit, c: Cell, v: bool) {
        match c {
            Cell::In(k) => unit.pi[k] = v,
            Cell::Flop(k) => unit.flops[k] = v,
            Cell::Out(k) => unit.po[k] = v,
        }
    }

    fn shift(&mut self, u: usize, row: &CyclePattern) {
        for j in 0..self.units[u].chains.len() {
            let (wsi, wso) = (self.units[u].map.wsi[j], self.units[u].map.wso[j]);
            let out = self.units[u].chains[j].last().map(|&c| Self::read(&self.units[u], c));
            if let Some(v) = out {
                self.check(row, wso, v);
            }
            let input = self.sym(row, wsi).driven().unwrap_or(false);
            let unit = &mut self.units[u];
            let cells = unit.chains[j].clone();
            for k in (1..cells.len()).rev() {
                let v = Self::read(unit, cells[k - 1]);
                Self::write(unit, cells[k], v);
            }
            if let Some(&first) = cells.first() {
                Self::write(unit, first, input);
            }
        }
        let unit = &mut self.units[u];
        for k in unit.loose_in.clone() {
            unit.pi[k] = false;
        }
        for k in unit.loose_out.clone() {
            unit.po[k] = false;
        }
    }
}
