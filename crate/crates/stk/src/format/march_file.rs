// SPDX-License-Identifier: Apache-2.0

//! March algorithm files: one algorithm in the notation accepted by
//! [`parse_march`], optionally preceded by `Name:`, with `#` comments.
//! The names `mats+` and `march-c-` select the built-in algorithms.

use std::path::Path;

use stk_core::march::{march_c_minus, mats_plus, parse_march, MarchAlgorithm, MarchError};

#[derive(Debug, thiserror::Error)]
pub enum MarchFileError {
    #[error("{path}: cannot read: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Parse { path: String, source: MarchError },
}

pub fn builtin(name: &str) -> Option<MarchAlgorithm> {
    match name.to_ascii_lowercase().as_str() {
        "mats+" | "mats-plus" => Some(mats_plus()),
        "march-c-" | "march_c-" | "marchc-" | "march-c-minus" => Some(march_c_minus()),
        _ => None,
    }
}

/// Parses file contents, dropping comments first.
pub fn parse_march_file(text: &str) -> Result<MarchAlgorithm, MarchError> {
    let body: Vec<&str> = text.lines().map(|l| l.split('#').next().unwrap_or("")).collect();
    parse_march(body.join("\n").trim())
}

/// A built-in name or a path to a March file.
pub fn load_march(spec: &str) -> Result<MarchAlgorithm, MarchFileError> {
    if let Some(m) = builtin(spec) {
        return Ok(m);
    }
    let text = std::fs::read_to_string(Path::new(spec)).map_err(|source| MarchFileError::Io {
        path: spec.to_string(),
        source,
    })?;
    parse_march_file(&text).map_err(|source| MarchFileError::Parse {
        path: spec.to_string(),
        source,
    })
}

/// Canonical file text for `m`.
pub fn serialize_march(m: &MarchAlgorithm) -> String {
    format!("{m}\n")
}
