// Copyright (c) The AMP Simulator Authors
// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;
use std::process::ExitCode;

use amp_cli::{cmd_check, cmd_run, cmd_sweep, resolve_out, Exit, Format};
use clap::{Parser, Subcommand};

/// Deterministic simulator and trace checker for attested multi-proposer consensus.
#[derive(Parser)]
#[command(name = "ampsim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one seeded simulation and write its trace, metrics and block logs.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the seed in the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory [default: $AMPSIM_OUT_DIR or ./ampsim-out].
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Evaluate every property over a recorded trace.
    Check {
        trace: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Run and check every config matching the globs over a seed range.
    Sweep {
        /// Config path or glob; may be repeated.
        #[arg(long, required = true)]
        config: Vec<String>,
        /// `a..b`, `a..=b`, or a single seed.
        #[arg(long, default_value = "1..=10")]
        seeds: String,
        /// Worker threads; 0 uses every core.
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        /// Output directory [default: $AMPSIM_OUT_DIR or ./ampsim-out].
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            config,
            seed,
            out,
            format,
        } => cmd_run(&config, seed, &resolve_out(out), format),
        Command::Check { trace, format } => cmd_check(&trace, format),
        Command::Sweep {
            config,
            seeds,
            jobs,
            out,
            format,
        } => cmd_sweep(&config, &seeds, jobs, &resolve_out(out), format),
    };
    let exit = match result {
        Ok(outcome) => {
            print!("{}", outcome.stdout);
            outcome.exit
        }
        Err(failure) => {
            eprintln!("ampsim: {}", failure.message);
            failure.exit
        }
    };
    if exit == Exit::Incomplete {
        eprintln!("ampsim: trace incomplete");
    }
    ExitCode::from(exit as u8)
}
