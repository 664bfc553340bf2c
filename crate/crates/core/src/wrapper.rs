// SPDX-License-Identifier: Apache-2.0

//! Wrapper scan-chain design for one core at one TAM width, plus the
//! per-core test-time and wrapper-area models.
//!
//! A wrapper chain is laid out, from its scan input to its scan output, as
//! `[input WBR cells] [internal chain segments...] [output WBR cells]`.
//! Hard cores keep their internal chains whole and spread them over the
//! wrapper chains longest-first; soft cores have their flops re-cut into
//! near-equal chains. WBR cells are then dealt out one at a time to the
//! chain with the shortest scan-in (inputs) or scan-out (outputs) path.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::Serialize;
use thiserror::Error;

use crate::model::{CoreTestInfo, PatternKind};

/// NAND2-equivalent area of one wrapper boundary register cell.
pub const WBR_CELL_AREA: u64 = 26;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct WrapperOptions {
    /// Put the WBR cells in the shift path (default on).
    pub include_wbr_in_chains: bool,
    /// Allow chains of different clock domains in one wrapper chain
    /// (lock-up latches assumed).
    pub allow_cross_domain: bool,
    /// Also place WBR cells on the core's test-data pins.
    pub wrap_test_pins: bool,
}

impl Default for WrapperOptions {
    fn default() -> Self {
        WrapperOptions {
            include_wbr_in_chains: true,
            allow_cross_domain: true,
            wrap_test_pins: false,
        }
    }
}

impl WrapperOptions {
    pub fn without_wbr() -> Self {
        WrapperOptions {
            include_wbr_in_chains: false,
            ..WrapperOptions::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WrapperError {
    #[error("TAM width must be at least 1")]
    ZeroWidth,
    #[error("core {core}: width {width} is below its {domains} clock domains with cross-domain merging disabled")]
    InfeasibleWidth { core: String, width: u32, domains: u32 },
    #[error("core {core} has no scan patterns")]
    NoScanPatterns { core: String },
}

/// A contiguous slice `[start, start + len)` of internal chain `chain`,
/// measured from that chain's scan input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Segment {
    pub chain: usize,
    pub start: u32,
    pub len: u32,
}

impl Segment {
    pub fn whole(&self, core: &CoreTestInfo) -> bool {
        self.start == 0 && self.len == core.scan_chains[self.chain].length
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct WrapperChain {
    /// Functional input indices (`pi<k>`) of the input cells, scan-in first.
    pub inputs: Vec<u32>,
    pub segments: Vec<Segment>,
    /// Functional output indices (`po<k>`) of the output cells.
    pub outputs: Vec<u32>,
}

impl WrapperChain {
    pub fn internal_len(&self) -> u32 {
        self.segments.iter().map(|s| s.len).sum()
    }

    pub fn scan_in_len(&self) -> u32 {
        self.inputs.len() as u32 + self.internal_len()
    }

    pub fn scan_out_len(&self) -> u32 {
        self.internal_len() + self.outputs.len() as u32
    }

    pub fn total_len(&self) -> u32 {
        self.inputs.len() as u32 + self.internal_len() + self.outputs.len() as u32
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct WrapperConfig {
    pub core: String,
    pub width: u32,
    pub chains: Vec<WrapperChain>,
    pub includes_wbr_in_chains: bool,
    pub wraps_test_pins: bool,
    /// Longest scan-in path.
    pub si: u32,
    /// Longest scan-out path.
    pub so: u32,
    pub warnings: Vec<String>,
}

impl WrapperConfig {
    pub fn max_shift(&self) -> u32 {
        self.si.max(self.so)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CoreTestTime {
    pub kind: PatternKind,
    pub cycles: u64,
}

/// Builds the wrapper chains of `core` for `width` TAM wires.
pub fn design_wrapper(core: &CoreTestInfo, width: u32, opts: &WrapperOptions) -> Result<WrapperConfig, WrapperError> {
    if width == 0 {
        return Err(WrapperError::ZeroWidth);
    }
    let w = width as usize;
    let mut chains = vec![WrapperChain::default(); w];
    let mut warnings = Vec::new();

    if core.is_soft() {
        cut_soft(core, &mut chains);
    } else if opts.allow_cross_domain {
        let items: Vec<usize> = (0..core.scan_chains.len()).collect();
        lpt(core, &items, &mut chains);
        for (j, ch) in chains.iter().enumerate() {
            let mut domains: Vec<&str> = ch
                .segments
                .iter()
                .map(|s| core.scan_chains[s.chain].clock_domain.as_str())
                .collect();
            domains.sort_unstable();
            domains.dedup();
            if domains.len() > 1 {
                warnings.push(format!(
                    "wrapper chain {j} merges clock domains {} (lock-up latches assumed)",
                    domains.join(",")
                ));
            }
        }
    } else {
        lpt_per_domain(core, width, &mut chains)?;
    }

    if opts.include_wbr_in_chains {
        deal_cells(&mut chains, core.pi, |c| c.scan_in_len(), |c, k| c.inputs.push(k));
        deal_cells(&mut chains, core.po, |c| c.scan_out_len(), |c, k| c.outputs.push(k));
        renumber_cells(&mut chains);
    }

    let si = chains.iter().map(WrapperChain::scan_in_len).max().unwrap_or(0);
    let so = chains.iter().map(WrapperChain::scan_out_len).max().unwrap_or(0);
    Ok(WrapperConfig {
        core: core.name.clone(),
        width,
        chains,
        includes_wbr_in_chains: opts.include_wbr_in_chains,
        wraps_test_pins: opts.wrap_test_pins,
        si,
        so,
        warnings,
    })
}

/// Longest-processing-time-first: longest item to the currently shortest bin.
/// Ties keep input order for items and lowest index for bins.
fn lpt(core: &CoreTestInfo, items: &[usize], bins: &mut [WrapperChain]) {
    let mut order = items.to_vec();
    order.sort_by_key(|&i| core::cmp::Reverse(core.scan_chains[i].length));
    for i in order {
        let len = core.scan_chains[i].length;
        let bin = argmin(bins.iter().map(WrapperChain::internal_len));
        bins[bin].segments.push(Segment {
            chain: i,
            start: 0,
            len,
        });
    }
}

fn lpt_per_domain(core: &CoreTestInfo, width: u32, chains: &mut [WrapperChain]) -> Result<(), WrapperError> {
    let mut groups: Vec<(&str, Vec<usize>)> = Vec::new();
    for (i, c) in core.scan_chains.iter().enumerate() {
        match groups.iter_mut().find(|(d, _)| *d == c.clock_domain) {
            Some((_, v)) => v.push(i),
            None => groups.push((c.clock_domain.as_str(), vec![i])),
        }
    }
    let d = groups.len() as u32;
    if d == 0 {
        return Ok(());
    }
    if width < d {
        return Err(WrapperError::InfeasibleWidth {
            core: core.name.clone(),
            width,
            domains: d,
        });
    }
    let makespan = |items: &[usize], bins: usize| {
        let mut tmp = vec![WrapperChain::default(); bins];
        lpt(core, items, &mut tmp);
        tmp.iter().map(WrapperChain::internal_len).max().unwrap_or(0)
    };
    let mut counts = vec![1usize; groups.len()];
    for _ in d..width {
        let worst = argmax(groups.iter().zip(&counts).map(|((_, items), &n)| makespan(items, n)));
        counts[worst] += 1;
    }
    let mut offset = 0;
    for ((_, items), n) in groups.iter().zip(counts) {
        lpt(core, items, &mut chains[offset..offset + n]);
        offset += n;
    }
    Ok(())
}

/// Re-cuts the soft core's flops (in declared chain order) into near-equal
/// chains: the first `total % w` chains get one extra flop.
fn cut_soft(core: &CoreTestInfo, chains: &mut [WrapperChain]) {
    let w = chains.len() as u64;
    let total = core.total_flops();
    let mut src = 0usize;
    let mut pos = 0u32;
    for (j, ch) in chains.iter_mut().enumerate() {
        let mut need = total / w + u64::from((j as u64) < total % w);
        while need > 0 {
            let avail = core.scan_chains[src].length - pos;
            if avail == 0 {
                src += 1;
                pos = 0;
                continue;
            }
            let take = (avail as u64).min(need) as u32;
            ch.segments.push(Segment {
                chain: src,
                start: pos,
                len: take,
            });
            pos += take;
            need -= u64::from(take);
        }
    }
}

fn deal_cells(
    chains: &mut [WrapperChain],
    cells: u32,
    key: impl Fn(&WrapperChain) -> u32,
    mut add: impl FnMut(&mut WrapperChain, u32),
) {
    for k in 0..cells {
        let j = argmin(chains.iter().map(&key));
        add(&mut chains[j], k);
    }
}

/// Cells were dealt round-robin style; number them so each chain holds a
/// contiguous, ascending run of pin indices.
fn renumber_cells(chains: &mut [WrapperChain]) {
    let mut next_in = 0;
    let mut next_out = 0;
    for ch in chains.iter_mut() {
        for k in ch.inputs.iter_mut() {
            *k = next_in;
            next_in += 1;
        }
        for k in ch.outputs.iter_mut() {
            *k = next_out;
            next_out += 1;
        }
    }
}

fn argmin(it: impl Iterator<Item = u32>) -> usize {
    let mut best = (0, u32::MAX);
    for (i, v) in it.enumerate() {
        if v < best.1 {
            best = (i, v);
        }
    }
    best.0
}

fn argmax(it: impl Iterator<Item = u32>) -> usize {
    let mut best: (usize, Option<u32>) = (0, None);
    for (i, v) in it.enumerate() {
        if best.1.is_none_or(|b| v > b) {
            best = (i, Some(v));
        }
    }
    best.0
}

/// Pipelined scan test length: `(1 + max(si, so)) * p + min(si, so)`.
pub fn scan_cycles(si: u32, so: u32, patterns: u64) -> u64 {
    if patterns == 0 {
        return 0;
    }
    (1 + u64::from(si.max(so))) * patterns + u64::from(si.min(so))
}

pub fn scan_test_time(core: &CoreTestInfo, cfg: &WrapperConfig) -> Result<CoreTestTime, WrapperError> {
    let set = core
        .pattern_set(PatternKind::Scan)
        .ok_or_else(|| WrapperError::NoScanPatterns {
            core: core.name.clone(),
        })?;
    Ok(CoreTestTime {
        kind: PatternKind::Scan,
        cycles: scan_cycles(cfg.si, cfg.so, set.count),
    })
}

/// Directly applied functional vectors: one cycle each.
pub fn functional_test_time(core: &CoreTestInfo) -> CoreTestTime {
    CoreTestTime {
        kind: PatternKind::Functional,
        cycles: core.functional_patterns(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct WidthPoint {
    pub width: u32,
    pub si: u32,
    pub so: u32,
    pub cycles: u64,
}

/// Raw sweep of widths `1..=w_max`; widths that are infeasible for the core
/// are skipped.
pub fn width_sweep(core: &CoreTestInfo, w_max: u32, opts: &WrapperOptions) -> Vec<WidthPoint> {
    let p = core.scan_patterns();
    (1..=w_max)
        .filter_map(|w| design_wrapper(core, w, opts).ok())
        .map(|cfg| WidthPoint {
            width: cfg.width,
            si: cfg.si,
            so: cfg.so,
            cycles: scan_cycles(cfg.si, cfg.so, p),
        })
        .collect()
}

/// Widths at which the scan test time strictly drops.
pub fn pareto_tam_widths(core: &CoreTestInfo, w_max: u32, opts: &WrapperOptions) -> Vec<WidthPoint> {
    pareto_filter(width_sweep(core, w_max, opts))
}

pub fn pareto_filter(sweep: Vec<WidthPoint>) -> Vec<WidthPoint> {
    let mut out: Vec<WidthPoint> = Vec::new();
    for pt in sweep {
        if out.last().is_none_or(|last| pt.cycles < last.cycles) {
            out.push(pt);
        }
    }
    out
}

/// One WBR cell per wrapped pin.
pub fn wrapper_area(core: &CoreTestInfo, cfg: &WrapperConfig) -> u64 {
    WBR_CELL_AREA * wbr_cell_count(core, cfg.wraps_test_pins)
}

pub fn wbr_cell_count(core: &CoreTestInfo, wrap_test_pins: bool) -> u64 {
    let mut cells = u64::from(core.pi) + u64::from(core.po);
    if wrap_test_pins {
        cells += u64::from(core.ti) + u64::from(core.to);
    }
    cells
}
