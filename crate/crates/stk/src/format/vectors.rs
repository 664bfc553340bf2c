// SPDX-License-Identifier: Apache-2.0

//! Tester vector files.
//!
//! Line 1 holds the space-separated chip pin names. Every later line is one
//! tester cycle: one symbol per pin in header order, no separators. Symbols
//! are `0`/`1` (drive), `H`/`L` (expect high/low), `X` (don't care) and `Z`
//! (not driven, not compared). Lines end with `\n`; there is no trailing
//! blank line.
//!
//! Session `s` is selected before its vectors are applied by the rows of the
//! preamble file: `test_mode` held at 0 while the session index is shifted
//! into `session_si`, most significant bit first, one row per register bit.

use std::io::{self, Write};

use stk_core::dft::session_bits;
use stk_core::pattern::{header_line, CyclePattern, PatternError, Symbol};
use stk_core::schedule::pin_name;

#[derive(Debug, thiserror::Error)]
pub enum VectorError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Pattern(#[from] PatternError),
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
}

/// Writes a header and every row of `rows`; returns the number of cycles.
pub fn write_vectors<W: Write>(
    out: &mut W,
    pins: &[u32],
    rows: impl IntoIterator<Item = Result<CyclePattern, PatternError>>,
) -> Result<u64, VectorError> {
    writeln!(out, "{}", header_line(pins))?;
    let mut n = 0u64;
    let mut line = String::with_capacity(pins.len() + 1);
    for r in rows {
        let r = r?;
        line.clear();
        line.extend(r.symbols.iter().map(|s| s.as_char()));
        line.push('\n');
        out.write_all(line.as_bytes())?;
        n += 1;
    }
    Ok(n)
}

/// Session-select rows for sessions `0..sessions`, in session order.
pub fn preamble_rows(sessions: usize) -> Vec<(usize, String)> {
    let k = session_bits(sessions);
    let mut out = Vec::with_capacity(sessions * k as usize);
    for s in 0..sessions {
        for bit in (0..k).rev() {
            let v = if (s >> bit) & 1 == 1 { '1' } else { '0' };
            out.push((s, format!("0{v}")));
        }
    }
    out
}

pub fn write_preamble<W: Write>(out: &mut W, sessions: usize) -> io::Result<u64> {
    writeln!(out, "{} {}", pin_name(0), pin_name(1))?;
    let rows = preamble_rows(sessions);
    for (_, r) in &rows {
        writeln!(out, "{r}")?;
    }
    Ok(rows.len() as u64)
}

/// A vector file read back for checking.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VectorFile {
    pub pins: Vec<String>,
    pub rows: Vec<Vec<Symbol>>,
}

pub fn read_vectors(text: &str) -> Result<VectorFile, VectorError> {
    let mut lines = text.lines();
    let pins: Vec<String> = lines
        .next()
        .ok_or(VectorError::Format {
            line: 1,
            message: "missing header".into(),
        })?
        .split_whitespace()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for (i, l) in lines.enumerate() {
        let row: Option<Vec<Symbol>> = l.chars().map(Symbol::from_char).collect();
        let row = row.ok_or_else(|| VectorError::Format {
            line: i + 2,
            message: format!("bad symbol in `{l}`"),
        })?;
        if row.len() != pins.len() {
            return Err(VectorError::Format {
                line: i + 2,
                message: format!("{} symbols for {} pins", row.len(), pins.len()),
            });
        }
        rows.push(row);
    }
    Ok(VectorFile { pins, rows })
}
