// SPDX-License-Identifier: Apache-2.0

//! SOC manifests.
//!
//! ```text
//! soc dsc;
//! core usb.core;
//! core tv.core;
//! pin_budget 80;
//! power_cap none;
//! netlist dsc.net;
//! chip_gates 5880000;
//! memory lbuf0 words=16 width=8 ports=two;
//! ```
//!
//! Paths are relative to the manifest's directory. Core files are parsed
//! but not validated here; the flow's validation stage reports violations.

use std::path::{Path, PathBuf};

use stk_core::schedule::{feasibility_notes, Constraints};
use stk_core::{CoreTestInfo, MemoryConfig, MemoryPorts, SocDescription};

use super::core_file::parse_core_text;
use super::lex::{Cursor, SyntaxError};

const PUNCT: &[char] = &[';', '='];

#[derive(Debug, thiserror::Error)]
pub enum ManifestError {
    #[error("{path}: {source}")]
    Syntax { path: String, source: SyntaxError },
    #[error("{path}: cannot read: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: core file {core}: {source}")]
    CoreFile {
        path: String,
        core: String,
        source: SyntaxError,
    },
    #[error("{path}:{line}: missing core file {core}")]
    MissingCore { path: String, line: u32, core: String },
    #[error("{path}:{line}: duplicate core name {name}")]
    DuplicateCore { path: String, line: u32, name: String },
    #[error("{path}:{line}: duplicate memory name {name}")]
    DuplicateMemory { path: String, line: u32, name: String },
    #[error("{path}:{line}: negative pin budget {value}")]
    NegativeBudget { path: String, line: u32, value: i64 },
}

/// A loaded manifest: the SOC plus where its parts came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub soc: SocDescription,
    pub core_files: Vec<PathBuf>,
    /// Netlist path resolved against the manifest directory.
    pub netlist: Option<PathBuf>,
    pub warnings: Vec<String>,
}

/// Reads and parses the manifest at `path`, loading every core file.
pub fn load_manifest(path: &Path) -> Result<Manifest, ManifestError> {
    let shown = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|source| ManifestError::Io {
        path: shown.clone(),
        source,
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_manifest_with(&text, &shown, base, |p| std::fs::read_to_string(p).ok())
}

/// Parses manifest text; core paths are resolved against `base`.
pub fn parse_soc_manifest(text: &str, base: &Path) -> Result<Manifest, ManifestError> {
    parse_manifest_with(text, "<manifest>", base, |p| std::fs::read_to_string(p).ok())
}

/// Parser over an arbitrary core-file source: `read(path)` returns the
/// contents of a file under `base`, or `None` if it does not exist.
pub fn parse_manifest_with(
    text: &str,
    shown: &str,
    base: &Path,
    mut read: impl FnMut(&Path) -> Option<String>,
) -> Result<Manifest, ManifestError> {
    let syntax = |source| ManifestError::Syntax {
        path: shown.to_string(),
        source,
    };
    let mut c = Cursor::new(text, PUNCT);
    let mut soc = SocDescription::new("soc", Vec::new());
    let mut m = Manifest {
        soc: SocDescription::new("soc", Vec::new()),
        core_files: Vec::new(),
        netlist: None,
        warnings: Vec::new(),
    };
    let mut netlist_rel = None;
    let mut cores: Vec<CoreTestInfo> = Vec::new();
    while !c.at_end() {
        let kw = c.word("statement", PUNCT).map_err(syntax)?;
        match kw.text {
            "soc" => soc.name = c.word("SOC name", PUNCT).map_err(syntax)?.text.into(),
            "core" => {
                let rel = c.word("core file path", PUNCT).map_err(syntax)?;
                let p = base.join(rel.text);
                let body = read(&p).ok_or_else(|| ManifestError::MissingCore {
                    path: shown.to_string(),
                    line: rel.line,
                    core: rel.text.into(),
                })?;
                let core = parse_core_text(&body).map_err(|source| ManifestError::CoreFile {
                    path: shown.to_string(),
                    core: p.display().to_string(),
                    source,
                })?;
                if cores.iter().any(|x| x.name == core.name) {
                    return Err(ManifestError::DuplicateCore {
                        path: shown.to_string(),
                        line: rel.line,
                        name: core.name,
                    });
                }
                cores.push(core);
                m.core_files.push(p);
            }
            "pin_budget" => {
                let t = c.word("pin budget", PUNCT).map_err(syntax)?;
                let v: i64 = t
                    .text
                    .parse()
                    .map_err(|_| syntax(c.error_at(t, format!("expected pin budget, found `{}`", t.text))))?;
                if v < 0 {
                    return Err(ManifestError::NegativeBudget {
                        path: shown.to_string(),
                        line: t.line,
                        value: v,
                    });
                }
                soc.pin_budget =
                    u32::try_from(v).map_err(|_| syntax(c.error_at(t, format!("pin budget {v} out of range"))))?;
            }
            "power_cap" => {
                if c.eat("none") {
                    soc.power_cap = None;
                } else {
                    let t = c.word("power cap", PUNCT).map_err(syntax)?;
                    let v: f64 = t
                        .text
                        .parse()
                        .ok()
                        .filter(|v: &f64| v.is_finite() && *v >= 0.0)
                        .ok_or_else(|| {
                            syntax(c.error_at(t, format!("expected power cap or `none`, found `{}`", t.text)))
                        })?;
                    soc.power_cap = Some(v);
                }
            }
            "netlist" => {
                let t = c.word("netlist path", PUNCT).map_err(syntax)?;
                netlist_rel = Some(t.text.to_string());
            }
            "chip_gates" => soc.chip_gates = Some(c.number("gate count", PUNCT).map_err(syntax)?),
            "memory" => {
                let name = c.word("memory name", PUNCT).map_err(syntax)?;
                if soc.memories.iter().any(|x| x.name == name.text) {
                    return Err(ManifestError::DuplicateMemory {
                        path: shown.to_string(),
                        line: name.line,
                        name: name.text.into(),
                    });
                }
                let mut mem = MemoryConfig::new(name.text, 0, 0);
                let (mut words, mut width) = (None, None);
                while c.peek().is_some_and(|t| t != ";") {
                    let key = c.word("memory field", PUNCT).map_err(syntax)?;
                    c.expect("=").map_err(syntax)?;
                    match key.text {
                        "words" => words = Some(c.number::<u32>("word count", PUNCT).map_err(syntax)?),
                        "width" => width = Some(c.number::<u32>("word width", PUNCT).map_err(syntax)?),
                        "ports" => {
                            let v = c.word("port kind", PUNCT).map_err(syntax)?;
                            mem.ports = match v.text {
                                "single" => MemoryPorts::SinglePort,
                                "two" => MemoryPorts::TwoPort,
                                _ => {
                                    return Err(syntax(
                                        c.error_at(v, format!("expected `single` or `two`, found `{}`", v.text)),
                                    ))
                                }
                            };
                        }
                        k => return Err(syntax(c.error_at(key, format!("unknown memory field `{k}`")))),
                    }
                }
                let missing = |f: &str| syntax(c.error(format!("memory {}: missing `{f}`", name.text)));
                mem.words = words.ok_or_else(|| missing("words"))?;
                mem.width = width.ok_or_else(|| missing("width"))?;
                soc.memories.push(mem);
            }
            other => return Err(syntax(c.error_at(kw, format!("unknown statement `{other}`")))),
        }
        c.expect(";").map_err(syntax)?;
    }
    if cores.is_empty() {
        m.warnings.push("manifest lists no cores".into());
    }
    soc.cores = cores;
    m.netlist = netlist_rel.as_ref().map(|rel| base.join(rel));
    soc.netlist_path = netlist_rel;
    soc.notes = feasibility_notes(&soc, &Constraints::for_soc(&soc));
    m.soc = soc;
    Ok(m)
}
