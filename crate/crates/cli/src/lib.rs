//! The `spiro` command line.
//!
//! Every command writes only inside `--out` and prints a JSON summary on
//! stdout. Exit codes are listed in [`exit`].

mod args;
pub mod battery;
mod config;
pub mod exit;
mod forced;
mod positions;
mod synth;
mod tidal;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Parser;
use serde::Serialize;

pub use args::{Cli, Command, Common};

/// Parse `argv` (program name first), run the command and return the exit
/// code. Errors are reported on stderr.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let argv = match config::merge(argv) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e:#}");
            return exit::exit_code(&e);
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { exit::USAGE } else { exit::SUCCESS };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(&cli) {
        Ok(()) => exit::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            exit::exit_code(&e)
        }
    }
}

fn dispatch(cli: &Cli) -> Result<()> {
    let c = &cli.common;
    match &cli.command {
        Command::Forced { cmd } => forced::run(c, cmd),
        Command::Tidal { cmd } => tidal::run(c, cmd),
        Command::Battery(a) => {
            let model = battery::BatteryModel {
                idle_ma: a.idle_ma,
                sampling_ma: a.sampling_ma,
                classify_ma: a.classify_ma,
                sampling_s: a.sampling_s,
                classify_s: a.classify_s,
                per_minute: a.per_minute,
                active_hours_per_day: a.active_hours,
                capacity_mah: a.capacity_mah,
                idle_drain: a.idle_drain,
            };
            let report = model.estimate()?;
            print_json(&report)
        }
        Command::Positions(a) => positions::run(c, a),
        Command::Synth { cmd } => synth::run(c, cmd),
    }
}

pub(crate) fn out_dir(c: &Common) -> Result<&Path> {
    fs::create_dir_all(&c.out).with_context(|| format!("creating {}", c.out.display()))?;
    Ok(&c.out)
}

pub(crate) fn require<'a>(p: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
    p.as_deref()
        .ok_or_else(|| spiro_core::Error::InvalidInput(format!("--{flag} is required")).into())
}

pub(crate) fn print_json<T: Serialize + ?Sized>(v: &T) -> Result<()> {
    print!("{}", spiro_core::io::to_json(v)?);
    Ok(())
}
