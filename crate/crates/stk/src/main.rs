// SPDX-License-Identifier: Apache-2.0

//! `stk <subcommand> --manifest <path> --out <dir> [options]`
//!
//! Every option can also be set through an `STK_*` environment variable
//! (`STK_MANIFEST`, `STK_OUT`, `STK_PINS`, `STK_POWER`, `STK_WBR_IN_CHAINS`,
//! `STK_SHARE_SE`, `STK_SEED`, `STK_MARCH`, `STK_MERGING`, `STK_GROUPING`);
//! a flag on the command line wins over the variable.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use stk::{run_flow, Command, FlowConfig, MergingPolicy};
use stk_core::march::GroupingPolicy;
use stk_core::pattern::DEFAULT_SEED;

#[derive(Parser)]
#[command(name = "stk", version, about = "SOC test integration flow")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Parse and validate the manifest and its core files.
    Parse(Opts),
    /// Design wrappers and schedule test sessions.
    Schedule(Opts),
    /// Schedule, then insert wrappers, controller and TAM into the netlist.
    Insert(Opts),
    /// Schedule, then write tester vector files per session.
    Translate(Opts),
    /// Generate and verify the memory BIST fabric and its fault coverage.
    Bist(Opts),
    /// Every stage in order.
    All(Opts),
}

#[derive(Clone, Copy, ValueEnum)]
enum Merging {
    Heuristic,
    Exhaustive,
    Serial,
}

#[derive(Clone, Copy, ValueEnum)]
enum Grouping {
    Shape,
    Depth,
    Memory,
}

#[derive(Args)]
struct Opts {
    #[arg(long, env = "STK_MANIFEST")]
    manifest: PathBuf,
    #[arg(long, env = "STK_OUT", default_value = "stk-out")]
    out: PathBuf,
    /// Chip pins available for test; overrides the manifest.
    #[arg(long, env = "STK_PINS")]
    pins: Option<u32>,
    /// Per-session power cap; overrides the manifest.
    #[arg(long, env = "STK_POWER")]
    power: Option<f64>,
    /// Place wrapper boundary cells in the scan path.
    #[arg(long, env = "STK_WBR_IN_CHAINS", default_value_t = true, action = clap::ArgAction::Set)]
    wbr_in_chains: bool,
    /// One scan-enable pin for all cores of a session.
    #[arg(long, env = "STK_SHARE_SE", default_value_t = true, action = clap::ArgAction::Set)]
    share_se: bool,
    /// Seed for synthetic pattern payloads.
    #[arg(long, env = "STK_SEED", default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// March file, or `mats+` / `march-c-`.
    #[arg(long, env = "STK_MARCH")]
    march: Option<String>,
    #[arg(long, env = "STK_MERGING", value_enum, default_value = "heuristic")]
    merging: Merging,
    /// How memories share BIST sequencers.
    #[arg(long, env = "STK_GROUPING", value_enum, default_value = "shape")]
    grouping: Grouping,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, o) = match cli.command {
        Sub::Parse(o) => (Command::Parse, o),
        Sub::Schedule(o) => (Command::Schedule, o),
        Sub::Insert(o) => (Command::Insert, o),
        Sub::Translate(o) => (Command::Translate, o),
        Sub::Bist(o) => (Command::Bist, o),
        Sub::All(o) => (Command::All, o),
    };
    let cfg = FlowConfig {
        manifest: o.manifest,
        out: o.out,
        command,
        pins: o.pins,
        power: o.power,
        wbr_in_chains: o.wbr_in_chains,
        share_se: o.share_se,
        merging: match o.merging {
            Merging::Heuristic => MergingPolicy::Heuristic,
            Merging::Exhaustive => MergingPolicy::Exhaustive,
            Merging::Serial => MergingPolicy::Serial,
        },
        seed: o.seed,
        march: o.march,
        grouping: match o.grouping {
            Grouping::Shape => GroupingPolicy::PerShape,
            Grouping::Depth => GroupingPolicy::PerDepth,
            Grouping::Memory => GroupingPolicy::PerMemory,
        },
    };
    match run_flow(&cfg) {
        Ok(out) => {
            for w in &out.warnings {
                eprintln!("warning: {w}");
            }
            match std::fs::read_to_string(cfg.out.join("summary.txt")) {
                Ok(s) => print!("{s}"),
                Err(_) => println!("done"),
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("stk: {e}");
            ExitCode::FAILURE
        }
    }
}
