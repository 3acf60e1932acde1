//! `tow`: solve, simulate and check the two-board Tug-of-War / random walk game.
//!
//! Every run writes its artifacts and a `manifest.json` into one output
//! directory. Exit status: 0 when every check passes, 1 when a check fails,
//! 2 on configuration or runtime errors.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Context;
use clap::{Parser, Subcommand};

use tow_core::game::GameMode;

use crate::commands::{Run, SimulateArgs};
use crate::config::{parse_point, ExperimentConfig, InitSeed, StrategySpec, Suite};
use crate::output::{Manifest, RunDir};

const DEFAULT_OUT: &str = "tow-out";

#[derive(Parser, Debug)]
#[command(name = "tow", version, about = "Two-board Tug-of-War / random walk games: DPP solver, simulator and checks")]
struct Cli {
    /// Experiment config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; must be absent or empty.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Master RNG seed, overriding the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve the DPP on the configured lattice.
    Solve {
        /// Starting iterate: constant -C, +C, or both (with the gap between them).
        #[arg(long, value_enum)]
        init: Option<InitSeed>,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        max_iter: Option<usize>,
        /// Also write the lattice nodes and payoffs.
        #[arg(long)]
        dump_lattice: bool,
    },
    /// Monte Carlo estimate of the game value.
    Simulate {
        /// Start point, comma separated.
        #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
        x0: Option<Vec<f64>>,
        /// Starting board, 1 or 2.
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
        board: Option<u8>,
        /// Player I: greedy_max, greedy_min, stationary_random or pull_to:<x,..>
        #[arg(long, allow_hyphen_values = true)]
        s1: Option<StrategySpec>,
        /// Player II, same forms as --s1.
        #[arg(long, allow_hyphen_values = true)]
        s2: Option<StrategySpec>,
        #[arg(long)]
        episodes: Option<usize>,
        /// full, tow-only or random-only
        #[arg(long)]
        mode: Option<GameMode>,
        /// Write every episode path to traces.csv.
        #[arg(long)]
        traces: bool,
    },
    /// Distances of the DPP solutions along the grid.epsilons ladder.
    Converge,
    /// Verification suites; defaults to verify.suites from the config.
    Verify {
        #[arg(long, value_enum)]
        suite: Vec<Suite>,
    },
    /// Solve the n-board system from the [n_system] block.
    NSystem {
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        max_iter: Option<usize>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Solve { .. } => "solve",
            Command::Simulate { .. } => "simulate",
            Command::Converge => "converge",
            Command::Verify { .. } => "verify",
            Command::NSystem { .. } => "n-system",
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = match cli.threads {
        Some(n) => {
            if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                eprintln!("error: --threads: {e}");
                return ExitCode::from(2);
            }
            n
        }
        None => rayon::current_num_threads(),
    };
    let start = Instant::now();
    let loaded = cli.config.as_deref().context("--config <file> is required").and_then(ExperimentConfig::load);
    let out_dir = cli
        .out
        .clone()
        .or_else(|| loaded.as_ref().ok().and_then(|c| c.output.dir.clone()))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    let mut dir = match RunDir::create(&out_dir) {
        Ok(d) => d,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };

    let mut manifest = Manifest {
        tool: "tow",
        version: env!("CARGO_PKG_VERSION"),
        core_version: tow_core::VERSION,
        command: cli.command.name().to_string(),
        schema_version: config::SCHEMA_VERSION,
        config_hash: String::new(),
        seeds: Default::default(),
        threads,
        wall_time_s: 0.0,
        checks: Vec::new(),
        outputs: Vec::new(),
        error: None,
        passed: false,
    };
    let result = loaded.and_then(|cfg| {
        manifest.config_hash = cfg.hash();
        let mut run = Run { cfg: &cfg, dir: &mut dir, seed: cli.seed, seeds: Vec::new(), checks: Vec::new() };
        let r = dispatch(&mut run, cli.command);
        manifest.seeds = run.seeds.into_iter().collect();
        manifest.checks = run.checks;
        r
    });
    if let Err(e) = &result {
        manifest.error = Some(format!("{e:#}"));
    }
    manifest.passed = result.is_ok() && manifest.checks.iter().all(|c| c.passed);
    manifest.outputs = dir.written().to_vec();
    manifest.wall_time_s = start.elapsed().as_secs_f64();

    for c in &manifest.checks {
        println!("{} {} ({:.3e} vs {:.3e})", if c.passed { "PASS" } else { "FAIL" }, c.name, c.value, c.tolerance);
    }
    if let Err(e) = dir.write_json("manifest.json", &manifest) {
        eprintln!("error: {e:#}");
        return ExitCode::from(2);
    }
    println!("wrote {} ({} files)", out_dir.display(), dir.written().len());
    match result {
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Ok(()) if manifest.passed => ExitCode::SUCCESS,
        Ok(()) => ExitCode::from(1),
    }
}

fn dispatch(run: &mut Run<'_>, command: Command) -> anyhow::Result<()> {
    match command {
        Command::Solve { init, tol, max_iter, dump_lattice } => commands::solve(run, init, tol, max_iter, dump_lattice),
        Command::Simulate { x0, board, s1, s2, episodes, mode, traces } => {
            commands::simulate(run, SimulateArgs { x0, board, s1, s2, episodes, mode, traces })
        }
        Command::Converge => commands::converge(run),
        Command::Verify { suite } => commands::verify(run, &suite),
        Command::NSystem { tol, max_iter } => commands::n_system(run, tol, max_iter),
    }
}
