// SPDX-License-Identifier: Apache-2.0

//! File formats, reports and the end-to-end flow of the SOC test integration
//! kit. The algorithms live in `stk-core`; this crate reads core test files
//! and SOC manifests, writes netlists, tester vectors and reports, and drives
//! the stages in order.

#![forbid(unsafe_code)]

pub mod flow;
pub mod format;
pub mod report;

pub use flow::{run_flow, Command, FlowConfig, FlowError, FlowOutcome, MergingPolicy, Stage};
pub use format::core_file::{parse_core_test_info, serialize_core_test_info};
pub use format::manifest::{load_manifest, parse_soc_manifest, Manifest};
