// SPDX-License-Identifier: Apache-2.0

//! Core test files.
//!
//! ```text
//! # comments run to the end of the line
//! core tv {
//!   ti 6; to 1; pi 25; po 40;
//!   clockdomains clk;
//!   control clk clock;
//!   control se scan_enable;
//!   chain c0 len=577 clk=clk in=si0 out=so0;
//!   chain c1 len=576 clk=clk in=si1 out=shared:po7;
//!   patterns scan count=229;
//!   patterns func count=202673;
//!   power 1;
//!   hard;
//!   vectors scan {
//!     pattern load=0110,1X01 unload=1001,0110;
//!   }
//! }
//! ```
//!
//! `control <pin> <kind> [shared|private]` declares a control pin; kinds are
//! `clock`, `reset`, `scan_enable` (`se`) and `test_enable` (`te`). Scan and
//! test enables default to shared, clocks and resets to private. Each vector
//! `pattern` carries `load`/`unload` strings (one per chain, comma separated)
//! and optional `pi`/`po` strings over `0 1 X`. Missing `ti`/`to` default to
//! the declared control pins plus scan inputs and the dedicated scan outputs.

use std::fmt::Write as _;

use stk_core::model::{validate_core, Violation};
use stk_core::{
    Bits, CaptureMode, ControlKind, ControlPin, CoreTestInfo, Pattern, PatternKind, PatternSet, ScanChain, ScanOut,
    Softness,
};

use super::lex::{Cursor, SyntaxError, Token};

const PUNCT: &[char] = &['{', '}', ';', ',', '='];

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CoreFileError {
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error("core {core}: {}", list(violations))]
    Semantic { core: String, violations: Vec<Violation> },
}

fn list(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

/// Parses one core and rejects it if [`validate_core`] finds violations.
pub fn parse_core_test_info(text: &str) -> Result<CoreTestInfo, CoreFileError> {
    let core = parse_core_text(text)?;
    let report = validate_core(&core);
    if !report.is_valid() {
        return Err(CoreFileError::Semantic {
            core: core.name,
            violations: report.violations,
        });
    }
    Ok(core)
}

/// Parses one core without semantic validation.
pub fn parse_core_text(text: &str) -> Result<CoreTestInfo, SyntaxError> {
    let mut c = Cursor::new(text, PUNCT);
    c.expect("core")?;
    let name = c.word("core name", PUNCT)?.text;
    c.expect("{")?;
    let mut p = CoreParser {
        core: CoreTestInfo::empty(name),
        seen: Vec::new(),
        vectors: Vec::new(),
    };
    while !c.eat("}") {
        p.statement(&mut c)?;
    }
    if !c.at_end() {
        return Err(c.error("expected end of input after the core block"));
    }
    p.finish(&c)
}

struct CoreParser<'a> {
    core: CoreTestInfo,
    seen: Vec<&'static str>,
    vectors: Vec<(Token<'a>, PatternKind, Vec<Pattern>)>,
}

type Kv<'a> = (Token<'a>, Vec<Token<'a>>);

/// `key=value[,value...]` pairs up to the closing `;`.
fn key_values<'a>(c: &mut Cursor<'a>) -> Result<Vec<Kv<'a>>, SyntaxError> {
    let mut out = Vec::new();
    while !c.eat(";") {
        let key = c.word("key", PUNCT)?;
        c.expect("=")?;
        let mut vals = vec![c.word("value", PUNCT)?];
        while c.eat(",") {
            vals.push(c.word("value", PUNCT)?);
        }
        out.push((key, vals));
    }
    Ok(out)
}

fn single<'a>(c: &Cursor<'_>, kv: &Kv<'a>) -> Result<Token<'a>, SyntaxError> {
    match kv.1.as_slice() {
        [v] => Ok(*v),
        _ => Err(c.error_at(kv.0, format!("`{}` takes one value", kv.0.text))),
    }
}

fn num<T: std::str::FromStr>(c: &Cursor<'_>, t: Token<'_>, what: &str) -> Result<T, SyntaxError> {
    t.text
        .parse()
        .map_err(|_| c.error_at(t, format!("expected {what}, found `{}`", t.text)))
}

fn bits(c: &Cursor<'_>, t: Token<'_>) -> Result<Bits, SyntaxError> {
    Bits::parse(t.text).ok_or_else(|| c.error_at(t, format!("`{}` is not a string over 0, 1, X", t.text)))
}

fn pattern_kind(c: &Cursor<'_>, t: Token<'_>) -> Result<PatternKind, SyntaxError> {
    match t.text {
        "scan" => Ok(PatternKind::Scan),
        "func" | "functional" => Ok(PatternKind::Functional),
        _ => Err(c.error_at(t, format!("unknown pattern kind `{}`", t.text))),
    }
}

impl<'a> CoreParser<'a> {
    fn once(&mut self, c: &Cursor<'_>, t: Token<'_>, key: &'static str) -> Result<(), SyntaxError> {
        if self.seen.contains(&key) {
            return Err(c.error_at(t, format!("`{key}` given twice")));
        }
        self.seen.push(key);
        Ok(())
    }

    fn statement(&mut self, c: &mut Cursor<'a>) -> Result<(), SyntaxError> {
        let kw = c.word("statement", PUNCT)?;
        match kw.text {
            "ti" | "to" | "pi" | "po" => {
                let key: &'static str = match kw.text {
                    "ti" => "ti",
                    "to" => "to",
                    "pi" => "pi",
                    _ => "po",
                };
                self.once(c, kw, key)?;
                let n: u32 = c.number("pin count", PUNCT)?;
                c.expect(";")?;
                match key {
                    "ti" => self.core.ti = n,
                    "to" => self.core.to = n,
                    "pi" => self.core.pi = n,
                    _ => self.core.po = n,
                }
            }
            "clockdomains" => {
                self.once(c, kw, "clockdomains")?;
                if !c.eat(";") {
                    self.core.clock_domains.push(c.word("clock domain", PUNCT)?.text.into());
                    while c.eat(",") {
                        self.core.clock_domains.push(c.word("clock domain", PUNCT)?.text.into());
                    }
                    c.expect(";")?;
                }
            }
            "control" => {
                let name = c.word("pin name", PUNCT)?.text;
                let kt = c.word("control kind", PUNCT)?;
                let kind = ControlKind::from_keyword(kt.text)
                    .ok_or_else(|| c.error_at(kt, format!("unknown control kind `{}`", kt.text)))?;
                let mut pin = ControlPin::new(name, kind);
                if !c.eat(";") {
                    let s = c.word("`shared` or `private`", PUNCT)?;
                    pin.shareable = match s.text {
                        "shared" => true,
                        "private" => false,
                        _ => return Err(c.error_at(s, format!("expected `shared` or `private`, found `{}`", s.text))),
                    };
                    c.expect(";")?;
                }
                self.core.control_pins.push(pin);
            }
            "chain" => {
                let name = c.word("chain name", PUNCT)?.text;
                let (mut len, mut clk, mut si, mut so) = (None, None, None, None);
                for kv in key_values(c)? {
                    let v = single(c, &kv)?;
                    let slot = match kv.0.text {
                        "len" => {
                            len = Some(num::<u32>(c, v, "chain length")?);
                            continue;
                        }
                        "clk" => &mut clk,
                        "in" => &mut si,
                        "out" => &mut so,
                        k => return Err(c.error_at(kv.0, format!("unknown chain field `{k}`"))),
                    };
                    *slot = Some(v.text);
                }
                let missing = |f: &str| c.error(format!("chain {name}: missing `{f}`"));
                let so = so.ok_or_else(|| missing("out"))?;
                let scan_out = match so.strip_prefix("shared:") {
                    Some(p) => ScanOut::Shared(p.into()),
                    None => ScanOut::Dedicated(so.into()),
                };
                self.core.scan_chains.push(ScanChain {
                    name: name.into(),
                    length: len.ok_or_else(|| missing("len"))?,
                    clock_domain: clk.ok_or_else(|| missing("clk"))?.into(),
                    scan_in: si.ok_or_else(|| missing("in"))?.into(),
                    scan_out,
                });
            }
            "patterns" => {
                let kt = c.word("pattern kind", PUNCT)?;
                let kind = pattern_kind(c, kt)?;
                let mut set = PatternSet::counts_only(kind, 0);
                let mut count = None;
                for kv in key_values(c)? {
                    let v = single(c, &kv)?;
                    match kv.0.text {
                        "count" => count = Some(num::<u64>(c, v, "pattern count")?),
                        "capture" => {
                            set.capture = match v.text {
                                "normal" => CaptureMode::Normal,
                                "pulse_clock" => CaptureMode::PulseClock,
                                _ => return Err(c.error_at(v, format!("unknown capture mode `{}`", v.text))),
                            }
                        }
                        k => return Err(c.error_at(kv.0, format!("unknown patterns field `{k}`"))),
                    }
                }
                set.count = count.ok_or_else(|| c.error_at(kw, "patterns: missing `count`"))?;
                self.core.pattern_sets.push(set);
            }
            "power" => {
                self.once(c, kw, "power")?;
                self.core.test_power = c.number("power value", PUNCT)?;
                c.expect(";")?;
            }
            "soft" | "hard" => {
                self.once(c, kw, "softness")?;
                self.core.softness = if kw.text == "soft" {
                    Softness::Soft
                } else {
                    Softness::Hard
                };
                c.expect(";")?;
            }
            "vectors" => {
                let kt = c.word("pattern kind", PUNCT)?;
                let kind = pattern_kind(c, kt)?;
                c.expect("{")?;
                let mut pats = Vec::new();
                while !c.eat("}") {
                    c.expect("pattern")?;
                    let mut p = Pattern::default();
                    for kv in key_values(c)? {
                        match kv.0.text {
                            "load" => p.load = kv.1.iter().map(|&t| bits(c, t)).collect::<Result<_, _>>()?,
                            "unload" => p.unload = kv.1.iter().map(|&t| bits(c, t)).collect::<Result<_, _>>()?,
                            "pi" => p.pi = bits(c, single(c, &kv)?)?,
                            "po" => p.po = bits(c, single(c, &kv)?)?,
                            k => return Err(c.error_at(kv.0, format!("unknown pattern field `{k}`"))),
                        }
                    }
                    pats.push(p);
                }
                self.vectors.push((kw, kind, pats));
            }
            other => return Err(c.error_at(kw, format!("unknown statement `{other}`"))),
        }
        Ok(())
    }

    fn finish(mut self, c: &Cursor<'_>) -> Result<CoreTestInfo, SyntaxError> {
        for (t, kind, pats) in self.vectors {
            let set = self
                .core
                .pattern_sets
                .iter_mut()
                .find(|s| s.kind == kind)
                .ok_or_else(|| {
                    c.error_at(
                        t,
                        format!("vectors for {} patterns that were never declared", kind_word(kind)),
                    )
                })?;
            if set.vectors.is_some() {
                return Err(c.error_at(t, format!("second vectors block for {} patterns", kind_word(kind))));
            }
            set.vectors = Some(pats);
        }
        let core = &mut self.core;
        if !self.seen.contains(&"ti") {
            core.ti = (core.control_pins.len() + core.scan_chains.len()) as u32;
        }
        if !self.seen.contains(&"to") {
            core.to = core
                .scan_chains
                .iter()
                .filter(|ch| matches!(ch.scan_out, ScanOut::Dedicated(_)))
                .count() as u32;
        }
        Ok(self.core)
    }
}

fn kind_word(k: PatternKind) -> &'static str {
    match k {
        PatternKind::Scan => "scan",
        PatternKind::Functional => "func",
    }
}

/// Canonical text of `core`; [`parse_core_text`] reads it back unchanged.
pub fn serialize_core_test_info(core: &CoreTestInfo) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "core {} {{", core.name);
    let _ = writeln!(
        s,
        "  ti {};\n  to {};\n  pi {};\n  po {};",
        core.ti, core.to, core.pi, core.po
    );
    if !core.clock_domains.is_empty() {
        let _ = writeln!(s, "  clockdomains {};", core.clock_domains.join(", "));
    }
    for p in &core.control_pins {
        let _ = write!(s, "  control {} {}", p.name, p.kind.keyword());
        if p.shareable != p.kind.default_shareable() {
            s.push_str(if p.shareable { " shared" } else { " private" });
        }
        s.push_str(";\n");
    }
    for ch in &core.scan_chains {
        let out = match &ch.scan_out {
            ScanOut::Dedicated(p) => p.clone(),
            ScanOut::Shared(p) => format!("shared:{p}"),
        };
        let _ = writeln!(
            s,
            "  chain {} len={} clk={} in={} out={};",
            ch.name, ch.length, ch.clock_domain, ch.scan_in, out
        );
    }
    for set in &core.pattern_sets {
        let _ = write!(s, "  patterns {} count={}", kind_word(set.kind), set.count);
        if set.capture == CaptureMode::PulseClock {
            s.push_str(" capture=pulse_clock");
        }
        s.push_str(";\n");
    }
    let _ = writeln!(s, "  power {};", core.test_power);
    s.push_str(match core.softness {
        Softness::Hard => "  hard;\n",
        Softness::Soft => "  soft;\n",
    });
    let mut kinds_done = Vec::new();
    for set in &core.pattern_sets {
        let Some(vectors) = &set.vectors else { continue };
        if kinds_done.contains(&set.kind) {
            continue;
        }
        kinds_done.push(set.kind);
        let _ = writeln!(s, "  vectors {} {{", kind_word(set.kind));
        for p in vectors {
            s.push_str("    pattern");
            let join = |v: &[Bits]| v.iter().map(|b| b.to_string()).collect::<Vec<_>>().join(",");
            if !p.load.is_empty() {
                let _ = write!(s, " load={}", join(&p.load));
            }
            if !p.unload.is_empty() {
                let _ = write!(s, " unload={}", join(&p.unload));
            }
            if !p.pi.is_empty() {
                let _ = write!(s, " pi={}", p.pi);
            }
            if !p.po.is_empty() {
                let _ = write!(s, " po={}", p.po);
            }
            s.push_str(";\n");
        }
        s.push_str("  }\n");
    }
    s.push_str("}\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_core_is_minimal() {
        let c = parse_core_test_info("core e { patterns func count=0; }").unwrap();
        assert!(c.scan_chains.is_empty());
        assert_eq!(c.functional_patterns(), 0);
        assert_eq!((c.ti, c.to), (0, 0));
        assert_eq!(
            serialize_core_test_info(&CoreTestInfo::empty("e")),
            "core e {\n  ti 0;\n  to 0;\n  pi 0;\n  po 0;\n  power 1;\n  hard;\n}\n"
        );
    }

    #[test]
    fn syntax_errors_carry_positions() {
        let e = parse_core_text("core x {\n  ti 3;\n  chain c0 len=two clk=a in=s out=o;\n}").unwrap_err();
        assert_eq!((e.line, e.col), (3, 16), "{e}");
        let e = parse_core_text("core x {\n  ti 3;\n").unwrap_err();
        assert_eq!(e.line, 2);
        assert!(e.message.contains("end of input"));
        let e = parse_core_text("core x { ti 1; ti 2; }").unwrap_err();
        assert_eq!((e.line, e.col), (1, 16));
        let e = parse_core_text("core x { wobble; }").unwrap_err();
        assert!(e.to_string().starts_with("1:10: unknown statement"));
    }

    #[test]
    fn semantic_errors_name_the_violation() {
        let bad = [
            (
                "core x { clockdomains a; chain c len=0 clk=a in=i out=o; }",
                "chain length >= 1",
            ),
            (
                "core x { clockdomains a; chain c len=3 clk=b in=i out=o; }",
                "unknown clock domain b",
            ),
            ("core x { control se se; control se te; }", "pin se declared twice"),
        ];
        for (text, want) in bad {
            let e = parse_core_test_info(text).unwrap_err();
            assert!(matches!(e, CoreFileError::Semantic { .. }));
            assert!(e.to_string().contains(want), "{e}");
        }
    }

    #[test]
    fn vectors_attach_to_their_set() {
        let text = "core v {\n  pi 2; po 1;\n  clockdomains clk;\n  control clk clock;\n  control se se private;\n  \
                    chain c len=3 clk=clk in=si out=so;\n  patterns scan count=1 capture=pulse_clock;\n  \
                    patterns func count=2;\n  vectors func { pattern pi=01 po=1; pattern pi=1X po=0; }\n  \
                    vectors scan { pattern load=010 unload=1X1 pi=11; }\n}\n";
        let c = parse_core_text(text).unwrap();
        assert!(!c.control_pins[1].shareable);
        let scan = c.pattern_set(PatternKind::Scan).unwrap();
        assert_eq!(scan.capture, CaptureMode::PulseClock);
        assert_eq!(scan.vectors.as_ref().unwrap()[0].load[0].to_string(), "010");
        assert_eq!(
            c.pattern_set(PatternKind::Functional)
                .unwrap()
                .vectors
                .as_ref()
                .unwrap()
                .len(),
            2
        );
        assert_eq!(parse_core_text(&serialize_core_test_info(&c)).unwrap(), c);
        assert!(parse_core_text("core v { vectors scan { } }").is_err());
    }
}
