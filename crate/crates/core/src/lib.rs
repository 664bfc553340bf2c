// SPDX-License-Identifier: Apache-2.0

//! Allocation-only core of the SOC test integration kit.
//!
//! Everything in this crate is a pure function of in-memory values: the core
//! test model, wrapper design and test-time models, session scheduling, the
//! structural netlist model with DFT generation and insertion, pattern
//! translation down to cycle-based tester streams, and the March memory BIST
//! compiler with its fault simulator. Text formats, file IO and the command
//! line live in the `stk` crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod dft;
pub mod march;
pub mod model;
pub mod netlist;
pub mod pattern;
pub mod schedule;
pub mod sim;
pub mod wrapper;

#[cfg(test)]
mod testutil;

pub use model::{
    Bits, CaptureMode, ControlKind, ControlPin, CoreTestInfo, Logic, MemoryConfig, MemoryPorts, Pattern, PatternKind,
    PatternSet, ScanChain, ScanOut, SocDescription, Softness,
};
