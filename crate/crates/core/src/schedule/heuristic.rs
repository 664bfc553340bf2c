// SPDX-License-Identifier: Apache-2.0

//! Greedy session packing with a move/swap improvement pass.

use alloc::vec::Vec;

use super::{
    allocate, build_entities, build_schedule, check_alone, min_pins, Constraints, ScheduleError, ScheduleMode,
    TestEntity, TestSchedule,
};
use crate::model::SocDescription;

/// Upper bound on improvement rounds; each accepted step strictly lowers the
/// total, so this only guards pathological inputs.
const MAX_ROUNDS: usize = 64;

pub fn schedule_sessions(soc: &SocDescription, c: &Constraints) -> Result<TestSchedule, ScheduleError> {
    schedule_entities(build_entities(soc, c)?, c)
}

pub fn schedule_serial(soc: &SocDescription, c: &Constraints) -> Result<TestSchedule, ScheduleError> {
    schedule_serial_entities(build_entities(soc, c)?, c)
}

/// One entity per session, each at its fastest feasible width.
pub fn schedule_serial_entities(entities: Vec<TestEntity>, c: &Constraints) -> Result<TestSchedule, ScheduleError> {
    let mut blocks = Vec::with_capacity(entities.len());
    for i in 0..entities.len() {
        let a = alone(&entities, i, c)?;
        blocks.push((alloc::vec![i], a.options));
    }
    Ok(build_schedule(entities, blocks, c, ScheduleMode::Serial))
}

fn alone(entities: &[TestEntity], i: usize, c: &Constraints) -> Result<super::Allocation, ScheduleError> {
    let e = &entities[i];
    check_alone(e, c)?;
    allocate(entities, &[i], c).ok_or_else(|| ScheduleError::InfeasibleEntity {
        entity: e.name.clone(),
        needed: min_pins(e, c),
        budget: c.pin_budget,
    })
}

struct Packing<'a> {
    entities: &'a [TestEntity],
    c: &'a Constraints,
    sessions: Vec<Vec<usize>>,
    times: Vec<u64>,
}

impl Packing<'_> {
    fn time_of(&self, members: &[usize]) -> Option<u64> {
        allocate(self.entities, members, self.c).map(|a| a.time)
    }

    fn total(&self) -> u64 {
        self.times.iter().sum()
    }

    /// Moves one entity to another (or a fresh) session when that shortens
    /// the schedule.
    fn try_move(&mut self) -> bool {
        for from in 0..self.sessions.len() {
            for k in 0..self.sessions[from].len() {
                let e = self.sessions[from][k];
                let mut rest = self.sessions[from].clone();
                rest.remove(k);
                let Some(rest_time) = self.time_of(&rest) else {
                    continue;
                };
                for to in 0..=self.sessions.len() {
                    if to == from {
                        continue;
                    }
                    let (target, old_to) = if to == self.sessions.len() {
                        if rest.is_empty() {
                            continue;
                        }
                        (alloc::vec![e], 0)
                    } else {
                        let mut t = self.sessions[to].clone();
                        t.push(e);
                        t.sort_unstable();
                        (t, self.times[to])
                    };
                    let Some(new_to) = self.time_of(&target) else {
                        continue;
                    };
                    if rest_time + new_to < self.times[from] + old_to {
                        self.sessions[from] = rest;
                        self.times[from] = rest_time;
                        if to == self.sessions.len() {
                            self.sessions.push(target);
                            self.times.push(new_to);
                        } else {
                            self.sessions[to] = target;
                            self.times[to] = new_to;
                        }
                        self.compact();
                        return true;
                    }
                }
            }
        }
        false
    }

    fn try_swap(&mut self) -> bool {
        let n = self.sessions.len();
        for a in 0..n {
            for b in a + 1..n {
                for ka in 0..self.sessions[a].len() {
                    for kb in 0..self.sessions[b].len() {
                        let mut sa = self.sessions[a].clone();
                        let mut sb = self.sessions[b].clone();
                        core::mem::swap(&mut sa[ka], &mut sb[kb]);
                        sa.sort_unstable();
                        sb.sort_unstable();
                        let (Some(ta), Some(tb)) = (self.time_of(&sa), self.time_of(&sb)) else {
                            continue;
                        };
                        if ta + tb < self.times[a] + self.times[b] {
                            self.sessions[a] = sa;
                            self.sessions[b] = sb;
                            self.times[a] = ta;
                            self.times[b] = tb;
                            return true;
                        }
                    }
                }
            }
        }
        false
    }

    fn compact(&mut self) {
        let mut k = 0;
        while k < self.sessions.len() {
            if self.sessions[k].is_empty() {
                self.sessions.remove(k);
                self.times.remove(k);
            } else {
                k += 1;
            }
        }
    }
}

/// Longest-first greedy packing: each session is opened by the longest
/// unscheduled entity, and later entities join it only if the session grows
/// by less than their stand-alone time.
pub fn schedule_entities(entities: Vec<TestEntity>, c: &Constraints) -> Result<TestSchedule, ScheduleError> {
    let mut solo = Vec::with_capacity(entities.len());
    for i in 0..entities.len() {
        solo.push(alone(&entities, i, c)?.time);
    }
    let mut order: Vec<usize> = (0..entities.len()).collect();
    order.sort_by_key(|&i| core::cmp::Reverse(solo[i]));

    let mut packing = Packing {
        entities: &entities,
        c,
        sessions: Vec::new(),
        times: Vec::new(),
    };
    let mut placed = alloc::vec![false; entities.len()];
    for (pos, &seed) in order.iter().enumerate() {
        if placed[seed] {
            continue;
        }
        placed[seed] = true;
        let mut members = alloc::vec![seed];
        let mut time = solo[seed];
        for &e in &order[pos + 1..] {
            if placed[e] {
                continue;
            }
            let mut trial = members.clone();
            trial.push(e);
            trial.sort_unstable();
            if let Some(t) = packing.time_of(&trial) {
                if t < time + solo[e] {
                    members = trial;
                    time = t;
                    placed[e] = true;
                }
            }
        }
        members.sort_unstable();
        packing.sessions.push(members);
        packing.times.push(time);
    }

    for _ in 0..MAX_ROUNDS {
        let before = packing.total();
        if !(packing.try_move() || packing.try_swap()) {
            break;
        }
        debug_assert!(packing.total() < before);
    }

    let mut blocks = Vec::with_capacity(packing.sessions.len());
    for members in &packing.sessions {
        let a = allocate(&entities, members, c).expect("packed sessions stay feasible");
        blocks.push((members.clone(), a.options));
    }
    Ok(build_schedule(entities, blocks, c, ScheduleMode::SessionBased))
}
