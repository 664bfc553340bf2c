// SPDX-License-Identifier: Apache-2.0

//! The end-to-end flow: parse, validate, design wrappers, schedule, insert,
//! translate patterns, build memory BIST, report area, summarize.
//!
//! Artifacts land in the output directory in stage order. When a stage
//! fails, everything already written stays and a `FAILED` file names the
//! stage and the error.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write as _};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context as _};
use stk_core::dft::{
    area_report, generate_fabric, insert_dft, is_scan_port, synthetic_soc_netlist, AreaReport, CORE_INSTANCE,
};
use stk_core::march::{
    fault_coverage, generate_bist, march_c_minus, verify_fabric, BistFabric, CoverageReport, FaultClass,
    GroupingPolicy, MarchAlgorithm, MarchError,
};
use stk_core::model::{validate_core, DEFAULT_TEST_POWER};
use stk_core::netlist::{functional_connectivity, validate_netlist, Netlist};
use stk_core::pattern::{session_stream, DEFAULT_SEED};
use stk_core::schedule::{
    build_entities, exhaustive_schedule, io_accounting, schedule_serial, schedule_sessions, Access, Constraints,
    EntityKind, TestSchedule,
};
use stk_core::wrapper::{design_wrapper, pareto_tam_widths, WrapperConfig, WrapperOptions};
use stk_core::{CoreTestInfo, SocDescription};

use crate::format::manifest::{load_manifest, Manifest};
use crate::format::march_file::{load_march, serialize_march};
use crate::format::netlist_text::{parse_netlist, write_netlist};
use crate::format::vectors::{write_preamble, write_vectors};
use crate::report::{self, group, WrapperTable};

/// Subcommands; each runs the stages it needs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Parse,
    Schedule,
    Insert,
    Translate,
    Bist,
    All,
}

/// How sessions are formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MergingPolicy {
    #[default]
    Heuristic,
    Exhaustive,
    Serial,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowConfig {
    pub manifest: PathBuf,
    pub out: PathBuf,
    pub command: Command,
    /// Overrides the manifest's pin budget.
    pub pins: Option<u32>,
    /// Overrides the manifest's power cap.
    pub power: Option<f64>,
    pub wbr_in_chains: bool,
    pub share_se: bool,
    pub merging: MergingPolicy,
    pub seed: u64,
    /// Built-in name or March file; March C- when absent.
    pub march: Option<String>,
    pub grouping: GroupingPolicy,
}

impl FlowConfig {
    pub fn new(manifest: impl Into<PathBuf>, out: impl Into<PathBuf>, command: Command) -> Self {
        FlowConfig {
            manifest: manifest.into(),
            out: out.into(),
            command,
            pins: None,
            power: None,
            wbr_in_chains: true,
            share_se: true,
            merging: MergingPolicy::Heuristic,
            seed: DEFAULT_SEED,
            march: None,
            grouping: GroupingPolicy::PerShape,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Parse,
    Validate,
    Wrappers,
    Schedule,
    Insert,
    Translate,
    Bist,
    Area,
    Summary,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Parse => "parse",
            Stage::Validate => "validate",
            Stage::Wrappers => "wrappers",
            Stage::Schedule => "schedule",
            Stage::Insert => "insert",
            Stage::Translate => "translate",
            Stage::Bist => "bist",
            Stage::Area => "area",
            Stage::Summary => "summary",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, thiserror::Error)]
#[error("stage {stage}: {source:#}")]
pub struct FlowError {
    pub stage: Stage,
    pub source: anyhow::Error,
}

pub const FAILED_MARKER: &str = "FAILED";

/// What a successful run produced.
#[derive(Debug, Clone, Default)]
pub struct FlowOutcome {
    /// Written files, relative to the output directory, in write order.
    pub files: Vec<String>,
    pub warnings: Vec<String>,
    pub schedule: Option<TestSchedule>,
    pub serial: Option<TestSchedule>,
    pub coverage: Vec<CoverageReport>,
    pub area: Option<AreaReport>,
    /// Rows written per session vector file.
    pub vector_rows: Vec<u64>,
}

/// Runs `cfg.command`. On failure a `FAILED` marker is left in `cfg.out`.
pub fn run_flow(cfg: &FlowConfig) -> Result<FlowOutcome, FlowError> {
    let mut run = Run {
        cfg,
        out: FlowOutcome::default(),
    };
    let marker = cfg.out.join(FAILED_MARKER);
    let result = fs::create_dir_all(&cfg.out)
        .with_context(|| format!("cannot create {}", cfg.out.display()))
        .and_then(|_| match fs::remove_file(&marker) {
            Err(e) if e.kind() != std::io::ErrorKind::NotFound => Err(e.into()),
            _ => Ok(()),
        })
        .map_err(|source| FlowError {
            stage: Stage::Parse,
            source,
        })
        .and_then(|_| run.stages());
    match result {
        Ok(()) => Ok(run.out),
        Err(e) => {
            let _ = fs::write(&marker, format!("stage {}\n{:#}\n", e.stage, e.source));
            Err(e)
        }
    }
}

struct Run<'a> {
    cfg: &'a FlowConfig,
    out: FlowOutcome,
}

trait Tag<T> {
    fn at(self, stage: Stage) -> Result<T, FlowError>;
}

impl<T, E: Into<anyhow::Error>> Tag<T> for Result<T, E> {
    fn at(self, stage: Stage) -> Result<T, FlowError> {
        self.map_err(|e| FlowError {
            stage,
            source: e.into(),
        })
    }
}

/// Fault models whose coverage the flow reports.
pub const COVERAGE_MODELS: [FaultClass; 3] = [FaultClass::Saf, FaultClass::Tf, FaultClass::CfId];

impl Run<'_> {
    fn write(&mut self, rel: &str, body: &str) -> anyhow::Result<()> {
        let p = self.cfg.out.join(rel);
        if let Some(d) = p.parent() {
            fs::create_dir_all(d)?;
        }
        fs::write(&p, body).with_context(|| format!("cannot write {}", p.display()))?;
        self.out.files.push(rel.to_string());
        Ok(())
    }

    fn stages(&mut self) -> Result<(), FlowError> {
        let cmd = self.cfg.command;
        let manifest = load_manifest(&self.cfg.manifest).at(Stage::Parse)?;
        self.out.warnings = manifest.warnings.clone();
        let soc = &manifest.soc;
        self.validate(&manifest).at(Stage::Validate)?;
        let nothing = soc.cores.is_empty() && soc.memories.is_empty();
        if cmd == Command::Parse || nothing {
            return self.summary(&manifest).at(Stage::Summary);
        }

        let c = self.constraints(soc);
        let wants_bist = !soc.memories.is_empty() && cmd != Command::Parse;
        let bist = if wants_bist {
            Some(self.build_bist(soc).at(Stage::Bist)?)
        } else {
            None
        };

        if cmd != Command::Bist {
            let mut c = c.clone();
            c.bist = bist.as_ref().map(|(f, _)| f.entity_spec(DEFAULT_TEST_POWER));
            let sched = self.schedule(soc, &c)?;
            if matches!(cmd, Command::Insert | Command::All) {
                self.insert(&manifest, &sched, &c.wrapper, bist.as_ref().map(|(f, _)| f))
                    .at(Stage::Insert)?;
            }
            if matches!(cmd, Command::Translate | Command::All) {
                self.translate(soc, &sched, &c.wrapper).at(Stage::Translate)?;
            }
            self.out.schedule = Some(sched);
        }
        if let Some((fabric, m)) = &bist {
            if matches!(cmd, Command::Bist | Command::All) {
                self.bist(soc, fabric, m).at(Stage::Bist)?;
            }
        }
        if cmd == Command::All {
            self.area(soc).at(Stage::Area)?;
        }
        self.summary(&manifest).at(Stage::Summary)
    }

    fn constraints(&self, soc: &SocDescription) -> Constraints {
        let mut c = Constraints::for_soc(soc);
        if let Some(p) = self.cfg.pins {
            c.pin_budget = p;
        }
        if let Some(p) = self.cfg.power {
            c.power_cap = Some(p);
        }
        c.sharing.share_se = self.cfg.share_se;
        c.wrapper.include_wbr_in_chains = self.cfg.wbr_in_chains;
        c
    }

    fn validate(&mut self, m: &Manifest) -> anyhow::Result<()> {
        let reports: Vec<_> = m.soc.cores.iter().map(validate_core).collect();
        self.write(
            "validation.txt",
            &report::validation_text(&reports, &m.warnings, &m.soc.notes),
        )?;
        self.write(
            "validation.jsonl",
            &report::validation_records(&reports, &m.warnings, &m.soc.notes),
        )?;
        let bad: Vec<&str> = reports
            .iter()
            .filter(|r| !r.is_valid())
            .map(|r| r.core.as_str())
            .collect();
        if !bad.is_empty() {
            bail!("invalid cores: {}", bad.join(", "));
        }
        Ok(())
    }

    fn build_bist(&mut self, soc: &SocDescription) -> anyhow::Result<(BistFabric, MarchAlgorithm)> {
        let m = match &self.cfg.march {
            Some(spec) => load_march(spec)?,
            None => march_c_minus(),
        };
        let fabric = generate_bist(&soc.memories, &m, self.cfg.grouping)?;
        Ok((fabric, m))
    }

    fn schedule(&mut self, soc: &SocDescription, c: &Constraints) -> Result<TestSchedule, FlowError> {
        let planned = match self.cfg.merging {
            MergingPolicy::Heuristic => schedule_sessions(soc, c),
            MergingPolicy::Exhaustive => exhaustive_schedule(soc, c),
            MergingPolicy::Serial => schedule_serial(soc, c),
        };
        let serial = schedule_serial(soc, c);
        let chosen = planned
            .as_ref()
            .ok()
            .map(|s| chosen_wrappers(soc, s, &c.wrapper))
            .unwrap_or_default();
        self.wrappers(soc, c, &chosen).at(Stage::Wrappers)?;
        let sched = planned.at(Stage::Schedule)?;
        let serial = serial.at(Stage::Schedule)?;

        let mut text = report::schedule_text(&sched, None);
        if let Ok(mut entities) = build_entities(soc, c) {
            entities.retain(|e| e.kind != EntityKind::Bist);
            let mut none = c.sharing;
            none.share_se = false;
            none.share_te = false;
            for (label, sharing) in [("configured sharing", c.sharing), ("no sharing", none)] {
                if let Ok(io) = io_accounting(&entities, &sharing, u32::MAX, c.controller_pins) {
                    let k = &io.control;
                    text.push_str(&format!(
                        "all cores at once, {label}: {} control IOs (clock {}, reset {}, test enable {}, scan enable {})\n",
                        k.total(),
                        k.clock,
                        k.reset,
                        k.test_enable,
                        k.scan_enable
                    ));
                }
            }
        }
        text.push('\n');
        text.push_str(&report::gantt(&sched, 64));
        text.push('\n');
        let cmp = report::report_compare(&sched, &serial).at(Stage::Schedule)?;
        text.push_str(&cmp.text);
        self.write("schedule.txt", &text).at(Stage::Schedule)?;
        let mut recs = report::schedule_records(&sched);
        recs.push_str(&report::schedule_records(&serial));
        self.write("schedule.jsonl", &recs).at(Stage::Schedule)?;
        self.out.serial = Some(serial);
        Ok(sched)
    }

    fn wrappers(
        &mut self,
        soc: &SocDescription,
        c: &Constraints,
        chosen: &BTreeMap<String, WrapperConfig>,
    ) -> anyhow::Result<()> {
        let w_max = (c.pin_budget.saturating_sub(c.controller_pins) / 2).clamp(1, 64);
        let pareto: Vec<_> = soc
            .cores
            .iter()
            .map(|core| {
                if core.scan_patterns() == 0 || core.scan_chains.is_empty() {
                    Vec::new()
                } else {
                    pareto_tam_widths(core, w_max, &c.wrapper)
                }
            })
            .collect();
        let tables: Vec<WrapperTable<'_>> = soc
            .cores
            .iter()
            .zip(&pareto)
            .map(|(core, p)| WrapperTable {
                core: &core.name,
                pareto: p,
                chosen: chosen.get(&core.name),
            })
            .collect();
        self.write("wrappers.txt", &report::wrapper_text(&tables))?;
        self.write("wrappers.jsonl", &report::wrapper_records(&tables))
    }

    fn insert(
        &mut self,
        m: &Manifest,
        sched: &TestSchedule,
        opts: &WrapperOptions,
        bist: Option<&BistFabric>,
    ) -> anyhow::Result<()> {
        let soc = &m.soc;
        let before = match &m.netlist {
            Some(p) => {
                let text = fs::read_to_string(p).with_context(|| format!("cannot read netlist {}", p.display()))?;
                parse_netlist(&text).with_context(|| format!("netlist {}", p.display()))?
            }
            None => synthetic_soc_netlist(&soc.name, &soc.cores, &soc.memories),
        };
        let pre = validate_netlist(&before);
        if !pre.is_empty() {
            bail!("input netlist fails structural checks: {:?}", &pre[..pre.len().min(3)]);
        }
        let fabric = generate_fabric(&soc.cores, sched, opts, bist.map(BistFabric::block))?;
        let after = insert_dft(&before, &soc.cores, &fabric)?;
        let post = validate_netlist(&after);
        if !post.is_empty() {
            bail!(
                "inserted netlist fails structural checks: {:?}",
                &post[..post.len().min(3)]
            );
        }
        check_transparent(&before, &after, &soc.cores)?;
        self.write("netlist/inserted.net", &write_netlist(&after))?;
        Ok(())
    }

    fn translate(&mut self, soc: &SocDescription, sched: &TestSchedule, opts: &WrapperOptions) -> anyhow::Result<()> {
        let dir = self.cfg.out.join("vectors");
        fs::create_dir_all(&dir)?;
        let mut f = BufWriter::new(File::create(dir.join("preamble.vec"))?);
        write_preamble(&mut f, sched.sessions.len())?;
        f.flush()?;
        self.out.files.push("vectors/preamble.vec".into());
        for sess in &sched.sessions {
            let stream = session_stream(sched, sess.index, &soc.cores, opts, self.cfg.seed)?;
            let pins = stream.header().to_vec();
            let rel = format!("vectors/session{}.vec", sess.index);
            let mut f = BufWriter::new(File::create(self.cfg.out.join(&rel))?);
            let rows = write_vectors(&mut f, &pins, stream)?;
            f.flush()?;
            self.out.files.push(rel);
            if rows != sess.session_time {
                bail!(
                    "session {}: {} vector rows for a {}-cycle session",
                    sess.index,
                    rows,
                    sess.session_time
                );
            }
            self.out.vector_rows.push(rows);
        }
        Ok(())
    }

    fn bist(&mut self, soc: &SocDescription, fabric: &BistFabric, m: &MarchAlgorithm) -> anyhow::Result<()> {
        self.write("bist/algorithm.march", &serialize_march(m))?;
        self.write("bist/mbist.net", &write_netlist(&fabric.netlist()))?;
        let mut by_shape: BTreeMap<(u32, u32), Result<CoverageReport, MarchError>> = BTreeMap::new();
        let mut reports = Vec::new();
        let mut skipped = Vec::new();
        for mem in &soc.memories {
            let r = by_shape
                .entry(mem.shape())
                .or_insert_with(|| fault_coverage(m, mem, &COVERAGE_MODELS));
            match r {
                Ok(r) => {
                    let mut r = r.clone();
                    r.memory = mem.name.clone();
                    reports.push(r);
                }
                Err(MarchError::TooManyFaults { count, limit }) => skipped.push(format!(
                    "{}: {count} faults exceed the enumeration limit {limit}",
                    mem.name
                )),
                Err(e) => return Err(anyhow!(e.clone())),
            }
        }
        let verify = verify_fabric(fabric, &soc.memories, m)?;
        let mut text = report::coverage_text(&reports, Some(&verify));
        for s in &skipped {
            text.push_str(&format!("not enumerated {s}\n"));
        }
        self.write("bist/coverage.txt", &text)?;
        self.write("bist/coverage.jsonl", &report::coverage_records(&reports))?;
        self.out.coverage = reports;
        Ok(())
    }

    fn area(&mut self, soc: &SocDescription) -> anyhow::Result<()> {
        let Some(gates) = soc.chip_gates else {
            self.out
                .warnings
                .push("no chip_gates in the manifest; area report skipped".into());
            return Ok(());
        };
        let Some(sched) = &self.out.schedule else {
            return Ok(());
        };
        let c = self.constraints(soc);
        let fabric = generate_fabric(&soc.cores, sched, &c.wrapper, None)?;
        let a = area_report(&fabric, gates)?;
        self.write("area.txt", &report::area_text(&a))?;
        self.out.area = Some(a);
        Ok(())
    }

    fn summary(&mut self, m: &Manifest) -> anyhow::Result<()> {
        let soc = &m.soc;
        let mut s = format!(
            "soc {}: {} cores, {} memories, pin budget {}\n",
            soc.name,
            soc.cores.len(),
            soc.memories.len(),
            self.cfg.pins.unwrap_or(soc.pin_budget)
        );
        if let Some(sched) = &self.out.schedule {
            s.push_str(&format!(
                "schedule: {} sessions, {} cycles\n",
                sched.sessions.len(),
                group(sched.total_cycles)
            ));
        }
        if let Some(serial) = &self.out.serial {
            s.push_str(&format!("serial: {} cycles\n", group(serial.total_cycles)));
        }
        if !self.out.vector_rows.is_empty() {
            let total: u64 = self.out.vector_rows.iter().sum();
            s.push_str(&format!(
                "vectors: {} session files, {} cycles\n",
                self.out.vector_rows.len(),
                group(total)
            ));
        }
        if !self.out.coverage.is_empty() {
            let full = self.out.coverage.iter().all(|r| r.classes.iter().all(|c| c.complete()));
            s.push_str(&format!(
                "bist coverage: {} memories, {}\n",
                self.out.coverage.len(),
                if full {
                    "100% on every model"
                } else {
                    "incomplete, see bist/coverage.txt"
                }
            ));
        }
        if let Some(a) = &self.out.area {
            s.push_str(&format!(
                "area: {} NAND2, {:.4}% of {} gates\n",
                group(a.total),
                100.0 * a.overhead_fraction,
                group(a.chip_gates)
            ));
        }
        for w in &self.out.warnings {
            s.push_str(&format!("warning: {w}\n"));
        }
        s.push_str("files:\n");
        for f in &self.out.files {
            s.push_str(&format!("  {f}\n"));
        }
        self.write("summary.txt", &s)
    }
}

/// The wrapper each scheduled core gets, designed as the fabric generator
/// does.
fn chosen_wrappers(soc: &SocDescription, s: &TestSchedule, opts: &WrapperOptions) -> BTreeMap<String, WrapperConfig> {
    let mut out = BTreeMap::new();
    for sess in &s.sessions {
        for a in &sess.assignments {
            let e = &s.entities[a.entity];
            if a.option.access != Access::Wrapper {
                continue;
            }
            let Some(core) = soc.core(&e.core) else { continue };
            let o = WrapperOptions {
                include_wbr_in_chains: opts.include_wbr_in_chains || core.scan_chains.is_empty(),
                ..*opts
            };
            if let Ok(cfg) = design_wrapper(core, a.option.width, &o) {
                out.insert(core.name.clone(), cfg);
            }
        }
    }
    out
}

/// Functional connectivity with test logic transparent must equal that of
/// the original netlist.
pub fn check_transparent(before: &Netlist, after: &Netlist, cores: &[CoreTestInfo]) -> anyhow::Result<()> {
    let skip = |m: &str, p: &str| cores.iter().any(|c| c.name == m && is_scan_port(c, p));
    let a = functional_connectivity(before, CORE_INSTANCE, skip)?;
    let b = functional_connectivity(after, CORE_INSTANCE, skip)?;
    if a != b {
        let lost = a.difference(&b).count();
        let gained = b.difference(&a).count();
        bail!("transparent-mode connectivity differs: {lost} groups lost, {gained} groups gained");
    }
    Ok(())
}

/// Relative paths of every regular file under `dir`, sorted.
pub fn list_tree(dir: &Path) -> std::io::Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for e in walkdir::WalkDir::new(dir).sort_by_file_name() {
        let e = e?;
        if e.file_type().is_file() {
            if let Ok(rel) = e.path().strip_prefix(dir) {
                out.push(rel.to_path_buf());
            }
        }
    }
    out.sort();
    Ok(out)
}
