//! Command-line front end: reads a run configuration, dispatches to the
//! pricing engine and writes CSV or JSON tables.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::io::Write;
use std::path::PathBuf;

pub use commands::{cmd_price, cmd_selftest, cmd_sensitivity, cmd_spread};
pub use config::{Command, Format, RunConfig};
pub use error::CliError;
pub use output::{format_number, Cell, Table};

/// Everything the command line can say, already parsed.
#[derive(Debug, Clone, Default)]
pub struct Invocation {
    pub command: Option<Command>,
    pub config: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub sweep: Option<String>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub set: Vec<String>,
}

/// Runs one command and writes its table. Selftest failures still write
/// the table before returning an error.
pub fn run(inv: &Invocation) -> Result<(), CliError> {
    let cfg = RunConfig::load(inv.config.as_deref(), &inv.set)?;
    let command = inv
        .command
        .or(cfg.run.command)
        .ok_or_else(|| CliError::Usage("no command given (price, spread, sensitivity or selftest)".into()))?;
    let sweep = inv.sweep.as_deref().map(config::parse_sweep).transpose()?;

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = inv.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be >= 1".into()));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| CliError::Io(e.to_string()))?;

    let (table, failures) = pool.install(|| -> Result<(Table, usize), CliError> {
        Ok(match command {
            Command::Price => (cmd_price(&cfg, sweep.as_ref())?, 0),
            Command::Spread => (cmd_spread(&cfg, sweep.as_ref())?, 0),
            Command::Sensitivity => (cmd_sensitivity(&cfg, sweep.as_ref())?, 0),
            Command::Selftest => cmd_selftest(&cfg, inv.seed)?,
        })
    })?;

    let format = inv.format.or(cfg.run.format).unwrap_or_default();
    match inv.out.as_ref().or(cfg.run.out.as_ref()) {
        Some(path) => {
            let file = std::fs::File::create(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            let mut w = std::io::BufWriter::new(file);
            table.write(format, &mut w).and_then(|_| w.flush())
        }
        None => table.write(format, std::io::stdout().lock()),
    }
    .map_err(|e| CliError::Io(e.to_string()))?;

    if failures > 0 {
        return Err(CliError::SelftestFailed(failures));
    }
    Ok(())
}
