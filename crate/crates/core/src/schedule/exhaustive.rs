// SPDX-License-Identifier: Apache-2.0

//! Brute-force optimum over all set partitions and width choices, used as
//! the quality oracle for the heuristic.

use alloc::vec;
use alloc::vec::Vec;

use super::{
    block_conflict, build_entities, build_schedule, data_budget, session_cycles, Constraints, ScheduleError,
    ScheduleMode, TestEntity, TestSchedule, WidthOption,
};
use crate::model::SocDescription;

type Choice = (Vec<WidthOption>, u64);

pub const EXHAUSTIVE_LIMIT: usize = 6;

/// All set partitions of `0..n`, in restricted-growth-string order.
pub fn set_partitions(n: usize) -> Vec<Vec<Vec<usize>>> {
    let mut out = Vec::new();
    let mut rgs = vec![0usize; n];
    fn rec(k: usize, max: usize, rgs: &mut Vec<usize>, out: &mut Vec<Vec<Vec<usize>>>) {
        let n = rgs.len();
        if k == n {
            let blocks = if n == 0 { 0 } else { max + 1 };
            let mut p = vec![Vec::new(); blocks];
            for (i, &b) in rgs.iter().enumerate() {
                p[b].push(i);
            }
            out.push(p);
            return;
        }
        let limit = if k == 0 { 0 } else { max + 1 };
        for b in 0..=limit {
            rgs[k] = b;
            rec(k + 1, max.max(b), rgs, out);
        }
    }
    rec(0, 0, &mut rgs, &mut out);
    out
}

/// Fastest way to run `members` together, trying every option combination.
pub fn best_session(entities: &[TestEntity], members: &[usize], c: &Constraints) -> Option<(Vec<WidthOption>, u64)> {
    if members.is_empty() {
        return Some((Vec::new(), 0));
    }
    if block_conflict(entities, members, c) {
        return None;
    }
    let budget = data_budget(entities, members, c)?;
    let mut best: Option<(Vec<WidthOption>, u64)> = None;
    let mut chosen = Vec::with_capacity(members.len());
    dfs(entities, members, c, budget, &mut chosen, &mut best);
    best
}

fn dfs(
    entities: &[TestEntity],
    members: &[usize],
    c: &Constraints,
    pins_left: u32,
    chosen: &mut Vec<WidthOption>,
    best: &mut Option<(Vec<WidthOption>, u64)>,
) {
    let k = chosen.len();
    if k == members.len() {
        let t = session_cycles(entities, members, chosen, &c.sharing);
        if best.as_ref().is_none_or(|b| t < b.1) {
            *best = Some((chosen.clone(), t));
        }
        return;
    }
    for o in &entities[members[k]].options {
        if o.data_pins > pins_left {
            break;
        }
        chosen.push(*o);
        dfs(entities, members, c, pins_left - o.data_pins, chosen, best);
        chosen.pop();
    }
}

pub fn exhaustive_schedule(soc: &SocDescription, c: &Constraints) -> Result<TestSchedule, ScheduleError> {
    exhaustive_entities(build_entities(soc, c)?, c)
}

pub fn exhaustive_entities(entities: Vec<TestEntity>, c: &Constraints) -> Result<TestSchedule, ScheduleError> {
    let n = entities.len();
    if n > EXHAUSTIVE_LIMIT {
        return Err(ScheduleError::TooLarge {
            count: n,
            limit: EXHAUSTIVE_LIMIT,
        });
    }
    for e in &entities {
        super::check_alone(e, c)?;
    }
    let mut memo: Vec<Option<Option<Choice>>> = vec![None; 1 << n];
    let mut best: Option<(u64, Vec<Vec<usize>>)> = None;
    'partitions: for p in set_partitions(n) {
        let mut total = 0u64;
        for block in &p {
            let mask = block.iter().fold(0usize, |m, &i| m | (1 << i));
            let entry = memo[mask].get_or_insert_with(|| best_session(&entities, block, c));
            match entry {
                Some((_, t)) => total += *t,
                None => continue 'partitions,
            }
        }
        if best.as_ref().is_none_or(|b| total < b.0) {
            best = Some((total, p));
        }
    }
    let (_, blocks) = best.unwrap_or_default();
    let blocks = blocks
        .into_iter()
        .map(|b| {
            let mask = b.iter().fold(0usize, |m, &i| m | (1 << i));
            let options = memo[mask].clone().flatten().map(|x| x.0).unwrap_or_default();
            (b, options)
        })
        .collect();
    Ok(build_schedule(entities, blocks, c, ScheduleMode::SessionBased))
}
