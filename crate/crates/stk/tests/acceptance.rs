// SPDX-License-Identifier: Apache-2.0

//! Acceptance criteria, one line each:
//!
//! ```text
//! PASS  3 serial beats every merged session under pin pressure  (0.04 s)  ...
//! ```
//!
//! Exits non-zero when any criterion fails.

use std::fs;
use std::io::Read as _;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Command as Proc, ExitCode};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};
use stk::flow::{check_transparent, list_tree};
use stk::format::netlist_text::parse_netlist;
use stk::format::vectors::{read_vectors, write_vectors};
use stk::load_manifest;
use stk_core::dft::{area_report, generate_fabric, insert_dft};
use stk_core::march::{
    fault_coverage, generate_bist, march_c_minus, mats_plus, verify_fabric, FaultClass, GroupingPolicy, MarchAlgorithm,
};
use stk_core::model::{
    Bits, CaptureMode, ControlKind, ControlPin, Logic, MemoryConfig, PatternKind, PatternSet, ScanChain, ScanOut,
    Softness,
};
use stk_core::netlist::validate_netlist;
use stk_core::pattern::{session_stream, CyclePattern};
use stk_core::schedule::{
    best_session, build_entities, count_control_pins, evaluate_schedule, exhaustive_schedule, schedule_serial,
    schedule_sessions, Access, Constraints, EntityKind, SharingPolicy, TestSchedule,
};
use stk_core::sim::{golden_patterns, SessionSim};
use stk_core::wrapper::{design_wrapper, functional_test_time, scan_test_time, WrapperConfig, WrapperOptions};
use stk_core::{CoreTestInfo, SocDescription};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($msg)+));
        }
    };
}

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn dsc() -> SocDescription {
    load_manifest(&fixtures().join("dsc/dsc.soc"))
        .expect("dsc manifest")
        .soc
}

/// The three cores with default constraints and no memory BIST.
fn dsc_cores() -> (SocDescription, Constraints) {
    let mut soc = dsc();
    soc.memories.clear();
    let c = Constraints::for_soc(&soc);
    (soc, c)
}

fn core_data() -> Outcome {
    let soc = dsc();
    // name, ti, to, pi, po, chains, scan patterns, functional patterns
    type Row<'a> = (&'a str, u32, u32, u32, u32, &'a [u32], u64, u64);
    let want: [Row; 3] = [
        ("usb", 18, 4, 221, 104, &[1629, 78, 293, 45], 716, 0),
        ("tv", 6, 1, 25, 40, &[577, 576], 229, 202_673),
        ("jpeg", 1, 0, 165, 104, &[], 0, 235_696),
    ];
    ensure!(soc.cores.len() == 3, "{} cores", soc.cores.len());
    for (c, w) in soc.cores.iter().zip(want) {
        let chains: Vec<u32> = c.scan_chains.iter().map(|s| s.length).collect();
        let have = (
            c.name.as_str(),
            c.ti,
            c.to,
            c.pi,
            c.po,
            chains.as_slice(),
            c.scan_patterns(),
            c.functional_patterns(),
        );
        ensure!(have == w, "{have:?} != {w:?}");
    }
    Ok("usb, tv, jpeg match exactly".into())
}

fn dsc_sessions() -> Outcome {
    let (soc, c) = dsc_cores();
    ensure!(
        c.pin_budget == 80 && c.power_cap.is_none() && c.sharing.share_se,
        "defaults changed"
    );
    let s = schedule_sessions(&soc, &c).map_err(|e| e.to_string())?;
    let serial = schedule_serial(&soc, &c).map_err(|e| e.to_string())?;
    let (a, b) = (evaluate_schedule(&s), evaluate_schedule(&serial));
    ensure!(a.is_valid() && b.is_valid(), "invalid schedule");
    ensure!(s.sessions.len() == 3, "{} sessions", s.sessions.len());
    ensure!(
        a.total_cycles < b.total_cycles,
        "{} !< {}",
        a.total_cycles,
        b.total_cycles
    );
    let range = 1_000_000..=10_000_000;
    ensure!(
        range.contains(&a.total_cycles) && range.contains(&b.total_cycles),
        "totals out of range"
    );
    Ok(format!("3 sessions, {} < {} serial", a.total_cycles, b.total_cycles))
}

fn counterexample() -> Outcome {
    let m = load_manifest(&fixtures().join("counterexample/pinbound.soc")).map_err(|e| e.to_string())?;
    let soc = m.soc;
    let c = Constraints::for_soc(&soc);
    let entities = build_entities(&soc, &c).map_err(|e| e.to_string())?;
    let n = entities.len();
    let solo: Vec<u64> = (0..n)
        .map(|i| {
            best_session(&entities, &[i], &c)
                .map(|(_, t)| t)
                .ok_or(format!("entity {i} alone infeasible"))
        })
        .collect::<Result<_, _>>()?;
    let mut merged = 0;
    for mask in 1usize..(1 << n) {
        let members: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
        if members.len() < 2 {
            continue;
        }
        if let Some((_, t)) = best_session(&entities, &members, &c) {
            merged += 1;
            let serial: u64 = members.iter().map(|&i| solo[i]).sum();
            ensure!(serial < t, "{members:?} merged in {t} vs serial {serial}");
        }
    }
    ensure!(merged > 0, "no merged session fits the budget at all");
    let x = exhaustive_schedule(&soc, &c).map_err(|e| e.to_string())?;
    let serial = schedule_serial(&soc, &c).map_err(|e| e.to_string())?;
    ensure!(
        x.sessions.iter().all(|s| s.assignments.len() == 1),
        "exhaustive merged entities"
    );
    ensure!(
        x.total_cycles == serial.total_cycles,
        "exhaustive {} serial {}",
        x.total_cycles,
        serial.total_cycles
    );
    // The same cores with room to spare do gain from merging.
    let roomy = Constraints { pin_budget: 80, ..c };
    let x2 = exhaustive_schedule(&soc, &roomy).map_err(|e| e.to_string())?;
    let s2 = schedule_serial(&soc, &roomy).map_err(|e| e.to_string())?;
    ensure!(x2.total_cycles < s2.total_cycles, "no gain at 80 pins");
    Ok(format!(
        "{} pins: serial {} beats {merged} merged session(s); at 80 pins merged {} < {}",
        c.pin_budget, serial.total_cycles, x2.total_cycles, s2.total_cycles
    ))
}

fn io_accounting() -> Outcome {
    let (soc, c) = dsc_cores();
    let entities = build_entities(&soc, &c).map_err(|e| e.to_string())?;
    ensure!(
        entities.iter().all(|e| e.kind != EntityKind::Bist),
        "bist entity present"
    );
    let b = count_control_pins(&entities, &SharingPolicy::none());
    let got = (b.total(), b.clock, b.reset, b.test_enable, b.scan_enable);
    ensure!(got == (19, 6, 4, 7, 2), "{got:?}");
    let shared = count_control_pins(&entities, &SharingPolicy::default());
    Ok(format!(
        "19 = 6 clock / 4 reset / 7 TE / 2 SE; shared SE gives {}",
        shared.total()
    ))
}

/// Optimal makespan of `items` on `bins` machines by branch and bound.
fn optimal_makespan(items: &[u32], bins: usize) -> u32 {
    let mut sorted = items.to_vec();
    sorted.sort_unstable_by(|a, b| b.cmp(a));
    fn rec(items: &[u32], k: usize, load: &mut Vec<u32>, best: &mut u32) {
        if k == items.len() {
            *best = (*best).min(*load.iter().max().unwrap());
            return;
        }
        for b in 0..load.len() {
            if load[..b].contains(&load[b]) || load[b] + items[k] >= *best {
                continue;
            }
            load[b] += items[k];
            rec(items, k + 1, load, best);
            load[b] -= items[k];
        }
    }
    let mut best = items.iter().sum::<u32>() + 1;
    rec(&sorted, 0, &mut vec![0; bins], &mut best);
    best
}

fn lpt_makespan(core: &CoreTestInfo, w: u32) -> Result<u32, String> {
    let cfg = design_wrapper(core, w, &WrapperOptions::without_wbr()).map_err(|e| e.to_string())?;
    Ok(cfg.chains.iter().map(|c| c.internal_len()).max().unwrap_or(0))
}

fn chained_core(name: &str, chains: &[u32], pi: u32, po: u32) -> CoreTestInfo {
    let mut c = CoreTestInfo::empty(name);
    c.pi = pi;
    c.po = po;
    c.clock_domains = vec!["clk".into()];
    c.control_pins = vec![
        ControlPin::new("clk", ControlKind::Clock),
        ControlPin::new("se", ControlKind::ScanEnable),
        ControlPin::new("te", ControlKind::TestEnable),
    ];
    c.scan_chains = chains
        .iter()
        .enumerate()
        .map(|(k, &length)| ScanChain {
            name: format!("c{k}"),
            length,
            clock_domain: "clk".into(),
            scan_in: format!("si{k}"),
            scan_out: ScanOut::Dedicated(format!("so{k}")),
        })
        .collect();
    c
}

fn wrapper_quality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 1.0f64;
    for i in 0..200 {
        let n = rng.gen_range(1..=8);
        let chains: Vec<u32> = (0..n).map(|_| rng.gen_range(1..=500)).collect();
        let w = rng.gen_range(1..=n) as u32;
        let core = chained_core(&format!("r{i}"), &chains, 0, 0);
        let lpt = lpt_makespan(&core, w)?;
        let opt = optimal_makespan(&chains, w as usize);
        // LPT <= (4/3 - 1/(3w)) OPT, kept in integers.
        ensure!(
            lpt >= opt && 3 * w as u64 * lpt as u64 <= (4 * w as u64 - 1) * opt as u64,
            "instance {i}: {chains:?} w={w} lpt {lpt} opt {opt}"
        );
        worst = worst.max(lpt as f64 / opt as f64);
    }
    let (soc, _) = dsc_cores();
    let mut checked = 0;
    for core in soc.cores.iter().filter(|c| !c.scan_chains.is_empty()) {
        let lens: Vec<u32> = core.scan_chains.iter().map(|c| c.length).collect();
        for w in 1..=lens.len() as u32 {
            let (lpt, opt) = (lpt_makespan(core, w)?, optimal_makespan(&lens, w as usize));
            ensure!(lpt == opt, "{} w={w}: lpt {lpt} opt {opt}", core.name);
            checked += 1;
        }
    }
    Ok(format!(
        "200 random instances, worst ratio {worst:.4}; DSC optimal at {checked} widths"
    ))
}

/// Shift-register model of the wrapper chains, one token per cell. Cells
/// run input cells, internal flops, output cells from scan-in to scan-out.
/// Counts the cycles to load, capture and unload `patterns` patterns.
fn shift_simulation(cfg: &WrapperConfig, patterns: u64) -> u64 {
    #[derive(Clone, Copy, PartialEq)]
    enum Tok {
        Empty,
        Stim(u64),
        Resp,
    }
    // (input cells, input + internal cells, all cells)
    let layout: Vec<(usize, usize, usize)> = cfg
        .chains
        .iter()
        .map(|c| {
            let ins = c.inputs.len();
            let load = ins + c.internal_len() as usize;
            (ins, load, load + c.outputs.len())
        })
        .collect();
    let mut cells: Vec<Vec<Tok>> = layout.iter().map(|&(_, _, n)| vec![Tok::Empty; n]).collect();
    let (mut next, mut cycles) = (0u64, 0u64);
    loop {
        let unloading = cells.iter().flatten().any(|&t| t == Tok::Resp);
        if next == patterns && !unloading {
            return cycles;
        }
        let loaded = cells
            .iter()
            .zip(&layout)
            .all(|(c, &(_, load, _))| c[..load].iter().all(|&t| t == Tok::Stim(next)));
        cycles += 1;
        if next < patterns && loaded && !unloading {
            for (c, &(ins, _, _)) in cells.iter_mut().zip(&layout) {
                for (k, t) in c.iter_mut().enumerate() {
                    *t = if k < ins { Tok::Empty } else { Tok::Resp };
                }
            }
            next += 1;
        } else {
            for c in &mut cells {
                if c.is_empty() {
                    continue;
                }
                c.rotate_right(1);
                c[0] = if next < patterns { Tok::Stim(next) } else { Tok::Empty };
            }
        }
    }
}

fn time_model() -> Outcome {
    let lengths = [1u32, 3, 7, 16];
    let mut multisets: Vec<Vec<u32>> = Vec::new();
    for a in 0..lengths.len() {
        multisets.push(vec![lengths[a]]);
        for b in a..lengths.len() {
            multisets.push(vec![lengths[a], lengths[b]]);
            for c in b..lengths.len() {
                multisets.push(vec![lengths[a], lengths[b], lengths[c]]);
            }
        }
    }
    let mut cases = 0;
    for chains in &multisets {
        for (pi, po) in [(0, 0), (2, 0), (0, 3), (4, 2)] {
            let base = chained_core("s", chains, pi, po);
            for opts in [WrapperOptions::default(), WrapperOptions::without_wbr()] {
                for w in 1..=4u32 {
                    let cfg = design_wrapper(&base, w, &opts).map_err(|e| e.to_string())?;
                    for p in [1u64, 2, 8] {
                        let mut core = base.clone();
                        core.pattern_sets = vec![PatternSet {
                            kind: PatternKind::Scan,
                            count: p,
                            capture: CaptureMode::Normal,
                            vectors: None,
                        }];
                        let t = scan_test_time(&core, &cfg).map_err(|e| e.to_string())?.cycles;
                        let sim = shift_simulation(&cfg, p);
                        ensure!(t == sim, "{chains:?} pi={pi} po={po} w={w} p={p}: model {t} sim {sim}");
                        cases += 1;
                    }
                }
            }
        }
    }
    // Emitted rows per DSC entity, each entity alone in its session.
    let (soc, c) = dsc_cores();
    let s = schedule_serial(&soc, &c).map_err(|e| e.to_string())?;
    for sess in &s.sessions {
        let rows = count_rows(&s, sess.index, &soc.cores, &c.wrapper)?;
        ensure!(rows == sess.session_time, "session {} rows {rows}", sess.index);
        for a in &sess.assignments {
            let e = &s.entities[a.entity];
            let core = soc.cores.iter().find(|k| k.name == e.core).unwrap();
            let model = match (e.kind, a.option.access) {
                (EntityKind::Scan, _) => {
                    let cfg = design_wrapper(core, a.option.width, &c.wrapper).map_err(|e| e.to_string())?;
                    scan_test_time(core, &cfg).map_err(|e| e.to_string())?.cycles
                }
                (EntityKind::Functional, Access::Direct) => functional_test_time(core).cycles,
                _ => a.cycles,
            };
            ensure!(rows == model, "{}: emitted {rows}, model {model}", e.name);
        }
    }
    let h = schedule_sessions(&soc, &c).map_err(|e| e.to_string())?;
    for sess in &h.sessions {
        let rows = count_rows(&h, sess.index, &soc.cores, &c.wrapper)?;
        ensure!(rows == sess.session_time, "merged session {} rows {rows}", sess.index);
    }
    Ok(format!("{cases} small-core cases; {} DSC entities", s.entities.len()))
}

fn count_rows(s: &TestSchedule, idx: usize, cores: &[CoreTestInfo], opts: &WrapperOptions) -> Result<u64, String> {
    let mut n = 0u64;
    for r in session_stream(s, idx, cores, opts, 0).map_err(|e| e.to_string())? {
        r.map_err(|e| e.to_string())?;
        n += 1;
    }
    Ok(n)
}

fn random_core(rng: &mut ChaCha8Rng, i: usize) -> CoreTestInfo {
    let n = rng.gen_range(0..=3);
    let chains: Vec<u32> = (0..n).map(|_| rng.gen_range(1..=8)).collect();
    let mut c = chained_core(&format!("r{i}"), &chains, rng.gen_range(0..=4), rng.gen_range(1..=4));
    if rng.gen_bool(0.3) {
        c.softness = Softness::Soft;
    }
    let kind = if chains.is_empty() {
        PatternKind::Functional
    } else {
        PatternKind::Scan
    };
    let count = rng.gen_range(1..=4usize);
    let capture = if kind == PatternKind::Scan && rng.gen_bool(0.5) {
        CaptureMode::PulseClock
    } else {
        CaptureMode::Normal
    };
    let vectors = golden_patterns(&c, kind, count, rng.gen(), true);
    c.pattern_sets = vec![PatternSet {
        kind,
        count: count as u64,
        capture,
        vectors: Some(vectors),
    }];
    c
}

/// Writes the session through the vector file format, reads it back and
/// replays it on the wrapper model; returns (compares, mismatches).
fn replay(core: &CoreTestInfo) -> Result<(u64, usize), String> {
    let soc = SocDescription::new("t", vec![core.clone()]);
    let c = Constraints::default();
    let s = schedule_sessions(&soc, &c).map_err(|e| e.to_string())?;
    let (mut compared, mut bad) = (0, 0);
    for sess in &s.sessions {
        let stream = session_stream(&s, sess.index, &soc.cores, &c.wrapper, 0).map_err(|e| e.to_string())?;
        let header = stream.header().to_vec();
        let mut buf = Vec::new();
        write_vectors(&mut buf, &header, stream).map_err(|e| e.to_string())?;
        let file = read_vectors(std::str::from_utf8(&buf).unwrap()).map_err(|e| e.to_string())?;
        let mut sim = SessionSim::new(&s, sess.index, &soc.cores, &c.wrapper, &header).map_err(|e| e.to_string())?;
        for (cycle, symbols) in file.rows.into_iter().enumerate() {
            sim.apply(&CyclePattern {
                cycle: cycle as u64,
                symbols,
            });
        }
        compared += sim.compared;
        bad += sim.mismatches.len();
    }
    Ok((compared, bad))
}

fn flip(b: &mut Bits, k: usize) {
    b.0[k] = if b.0[k] == Logic::One { Logic::Zero } else { Logic::One };
}

fn round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut compares, mut mutations) = (0u64, 0usize);
    for i in 0..100 {
        let core = random_core(&mut rng, i);
        let (compared, bad) = replay(&core)?;
        ensure!(bad == 0, "core {i}: {bad} mismatches on good vectors");
        compares += compared;
        let vectors = core.pattern_sets[0].vectors.as_ref().unwrap();
        let bits: usize = vectors
            .iter()
            .map(|p| p.unload.iter().map(Bits::len).sum::<usize>() + p.po.len())
            .sum();
        for k in 0..bits {
            let mut m = core.clone();
            let mut left = k;
            'find: for p in m.pattern_sets[0].vectors.as_mut().unwrap() {
                for b in p.unload.iter_mut().chain(std::iter::once(&mut p.po)) {
                    if left < b.len() {
                        flip(b, left);
                        break 'find;
                    }
                    left -= b.len();
                }
            }
            let (_, bad) = replay(&m)?;
            ensure!(bad > 0, "core {i}: response bit {k} flip undetected");
            mutations += 1;
        }
    }
    Ok(format!(
        "100 cores, {compares} compares clean, {mutations}/{mutations} mutations caught"
    ))
}

fn insertion() -> Outcome {
    let m = load_manifest(&fixtures().join("dsc/dsc.soc")).map_err(|e| e.to_string())?;
    let soc = &m.soc;
    let text = fs::read_to_string(m.netlist.as_ref().unwrap()).map_err(|e| e.to_string())?;
    let before = parse_netlist(&text).map_err(|e| e.to_string())?;
    ensure!(validate_netlist(&before).is_empty(), "input netlist invalid");
    let bist = generate_bist(&soc.memories, &march_c_minus(), GroupingPolicy::PerShape).map_err(|e| e.to_string())?;
    let mut c = Constraints::for_soc(soc);
    c.bist = Some(bist.entity_spec(1.0));
    let s = schedule_sessions(soc, &c).map_err(|e| e.to_string())?;
    let fabric = generate_fabric(&soc.cores, &s, &c.wrapper, Some(bist.block())).map_err(|e| e.to_string())?;
    let after = insert_dft(&before, &soc.cores, &fabric).map_err(|e| e.to_string())?;
    let problems = validate_netlist(&after);
    ensure!(problems.is_empty(), "{:?}", &problems[..problems.len().min(3)]);
    check_transparent(&before, &after, &soc.cores).map_err(|e| format!("{e:#}"))?;
    Ok(format!(
        "{} modules after insertion, structurally clean, transparent",
        after.modules.len()
    ))
}

fn area() -> Outcome {
    let (soc, c) = dsc_cores();
    let s = schedule_sessions(&soc, &c).map_err(|e| e.to_string())?;
    let fabric = generate_fabric(&soc.cores, &s, &c.wrapper, None).map_err(|e| e.to_string())?;
    let cells: u64 = soc.cores.iter().map(|k| (k.pi + k.po) as u64).sum();
    let hand = 26 * cells + 371 + 132;
    let chip = load_manifest(&fixtures().join("dsc/dsc.soc")).unwrap().soc;
    let gates = chip.chip_gates.ok_or("manifest has no chip_gates")?;
    let r = area_report(&fabric, gates).map_err(|e| e.to_string())?;
    ensure!(r.wbr_cells == cells, "wbr cells {} vs {cells}", r.wbr_cells);
    ensure!(
        r.total == hand && r.wbr_area == 26 * cells,
        "total {} vs {hand}",
        r.total
    );
    ensure!(r.controller_area == 371 && r.tam_mux_area == 132, "constants changed");
    ensure!(r.overhead_fraction == hand as f64 / gates as f64, "fraction formula");
    let pct = 100.0 * r.overhead_fraction;
    ensure!((pct - 0.3).abs() <= 0.05, "{pct:.4}%");
    Ok(format!("{cells} WBR cells, {hand} gates, {pct:.4}% of {gates}"))
}

fn bist_coverage() -> Outcome {
    let mut mems = Vec::new();
    for words in [4u32, 8, 16] {
        for width in [1u32, 4] {
            mems.push(MemoryConfig::new(format!("m{words}x{width}"), words, width));
        }
    }
    let algos: [(MarchAlgorithm, &[FaultClass]); 2] = [
        (mats_plus(), &[FaultClass::Saf]),
        (march_c_minus(), &[FaultClass::Saf, FaultClass::Tf, FaultClass::CfId]),
    ];
    let mut faults = 0;
    for (m, classes) in &algos {
        for mem in &mems {
            let r = fault_coverage(m, mem, classes).map_err(|e| e.to_string())?;
            for cls in &r.classes {
                ensure!(
                    cls.complete() && cls.total > 0,
                    "{} on {}: {:?} {}/{}",
                    m.name,
                    mem.name,
                    cls.class,
                    cls.detected,
                    cls.total
                );
                faults += cls.total;
            }
        }
        for grouping in [
            GroupingPolicy::PerShape,
            GroupingPolicy::PerDepth,
            GroupingPolicy::PerMemory,
        ] {
            let f = generate_bist(&mems, m, grouping).map_err(|e| e.to_string())?;
            verify_fabric(&f, &mems, m).map_err(|e| format!("{} {grouping:?}: {e}", m.name))?;
        }
    }
    Ok(format!("{faults} faults detected, 6 fabrics verified"))
}

fn hash_tree(dir: &Path) -> Result<Vec<(PathBuf, [u8; 32])>, String> {
    let mut out = Vec::new();
    for rel in list_tree(dir).map_err(|e| e.to_string())? {
        let mut f = fs::File::open(dir.join(&rel)).map_err(|e| e.to_string())?;
        let mut h = Sha256::new();
        let mut buf = vec![0u8; 1 << 20];
        loop {
            let n = f.read(&mut buf).map_err(|e| e.to_string())?;
            if n == 0 {
                break;
            }
            h.update(&buf[..n]);
        }
        out.push((rel, h.finalize().into()));
    }
    Ok(out)
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let manifest = fixtures().join("dsc/dsc.soc");
    let mut trees = Vec::new();
    for run in ["a", "b"] {
        let out = tmp.path().join(run);
        let st = Proc::new(env!("CARGO_BIN_EXE_stk"))
            .arg("all")
            .arg("--manifest")
            .arg(&manifest)
            .arg("--out")
            .arg(&out)
            .env_remove("STK_SEED")
            .output()
            .map_err(|e| e.to_string())?;
        ensure!(
            st.status.success(),
            "stk all failed: {}",
            String::from_utf8_lossy(&st.stderr)
        );
        trees.push(hash_tree(&out)?);
    }
    ensure!(trees[0].len() == trees[1].len(), "different file sets");
    for (a, b) in trees[0].iter().zip(&trees[1]) {
        ensure!(a == b, "{} differs", a.0.display());
    }
    Ok(format!("{} files byte-identical", trees[0].len()))
}

struct Criterion {
    id: u32,
    title: &'static str,
    budget: Option<Duration>,
    run: fn() -> Outcome,
}

fn main() -> ExitCode {
    let secs = |s| Some(Duration::from_secs(s));
    let criteria = [
        Criterion {
            id: 1,
            title: "DSC core fixtures carry the reference test data",
            budget: secs(1),
            run: core_data,
        },
        Criterion {
            id: 2,
            title: "DSC: 3 sessions beat serial",
            budget: secs(5),
            run: dsc_sessions,
        },
        Criterion {
            id: 3,
            title: "serial beats every merged session under pin pressure",
            budget: secs(10),
            run: counterexample,
        },
        Criterion {
            id: 4,
            title: "control IO accounting without sharing",
            budget: None,
            run: io_accounting,
        },
        Criterion {
            id: 5,
            title: "LPT wrapper chains within bound",
            budget: secs(30),
            run: wrapper_quality,
        },
        Criterion {
            id: 6,
            title: "time model matches shift simulation and emitted cycles",
            budget: None,
            run: time_model,
        },
        Criterion {
            id: 7,
            title: "vector round trip and mutation detection",
            budget: secs(60),
            run: round_trip,
        },
        Criterion {
            id: 8,
            title: "DSC insertion valid and transparent",
            budget: None,
            run: insertion,
        },
        Criterion {
            id: 9,
            title: "area model and overhead",
            budget: None,
            run: area,
        },
        Criterion {
            id: 10,
            title: "March coverage and fabric verification",
            budget: secs(60),
            run: bist_coverage,
        },
        Criterion {
            id: 11,
            title: "two full runs are byte-identical",
            budget: None,
            run: determinism,
        },
    ];
    let only: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for c in criteria.iter().filter(|c| only.is_empty() || only.contains(&c.id)) {
        let t = Instant::now();
        let result = panic::catch_unwind(AssertUnwindSafe(c.run)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let took = t.elapsed();
        let result = match (result, c.budget) {
            (Ok(_), Some(b)) if took > b => Err(format!("took longer than {} s", b.as_secs())),
            (r, _) => r,
        };
        let (tag, detail) = match result {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("{tag} {:>2} {}  ({:.2} s)  {detail}", c.id, c.title, took.as_secs_f64());
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
