// SPDX-License-Identifier: Apache-2.0

//! Text formats: core test files, SOC manifests, netlists, March files and
//! tester vector files.

pub mod core_file;
mod lex;
pub mod manifest;
pub mod march_file;
pub mod netlist_text;
pub mod vectors;

pub use lex::SyntaxError;
