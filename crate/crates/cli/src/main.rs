use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use indiff_cli::{run, Command, Format, Invocation};

/// Indifference prices, spreads and jump sensitivities of European options.
#[derive(Debug, Parser)]
#[command(name = "indiff", version)]
struct Args {
    /// Falls back to `run.command` in the config.
    #[arg(value_enum)]
    command: Option<Command>,

    /// TOML run configuration; omitted sections use the reference case.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,

    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,

    #[arg(long, value_enum)]
    format: Option<Format>,

    /// Sweep one input: spot, alpha, strike or maturity.
    #[arg(long, value_name = "KEY=a:b:n")]
    sweep: Option<String>,

    /// Monte Carlo seed for selftest.
    #[arg(long)]
    seed: Option<u64>,

    #[arg(long)]
    threads: Option<usize>,

    /// Override a config field, e.g. `--set model.sigma=0.3`. Repeatable.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    set: Vec<String>,
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let inv = Invocation {
        command: args.command,
        config: args.config,
        out: args.out,
        format: args.format,
        sweep: args.sweep,
        seed: args.seed,
        threads: args.threads,
        set: args.set,
    };
    match run(&inv) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("indiff: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
