//! Command-line front end for `sps-core`.
//!
//! Every command reads its parameters from built-in defaults, an optional
//! `--config` file and `--key value` flags (in increasing precedence), writes
//! its artifacts under `--out`, and echoes the resolved settings to
//! `config.txt` there.

pub mod commands;
pub mod config;

use std::ffi::OsString;
use std::io::Write;

use clap::{Arg, ArgAction, Command};

use crate::commands::{CommandSpec, Failure, COMMANDS};
use crate::config::{ConfigFile, Settings};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_UNCONVERGED: i32 = 2;

pub fn cli() -> Command {
    let mut cmd = Command::new("sps")
        .about("Normalized standing waves and dynamics of the Schrödinger-Poisson-Slater equation")
        .version(env!("CARGO_PKG_VERSION"))
        .subcommand_required(true)
        .arg_required_else_help(true)
        .after_help("Exit codes: 0 success, 1 invalid input, 2 completed with non-convergence or failed checks.");
    for spec in COMMANDS {
        cmd = cmd.subcommand(subcommand(spec));
    }
    cmd
}

fn subcommand(spec: &CommandSpec) -> Command {
    let mut sub = Command::new(spec.name).about(spec.about).arg(
        Arg::new("config")
            .long("config")
            .value_name("FILE")
            .help("Read `key = value` settings from FILE; flags override it"),
    );
    for key in (spec.keys)() {
        sub = sub.arg(
            Arg::new(key.name)
                .long(key.name)
                .value_name("VALUE")
                .allow_hyphen_values(true)
                .action(ArgAction::Set)
                .help(format!("{} [default: {}]", key.help, if key.default.is_empty() { "none" } else { key.default })),
        );
    }
    sub
}

/// Parses `args` (program name first), runs the command and returns the exit
/// code. Reports go to `stdout`, diagnostics to `stderr`.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = match cli().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK { stdout.write_all(text.as_bytes()) } else { stderr.write_all(text.as_bytes()) };
            return code;
        }
    };
    let (name, sub) = matches.subcommand().expect("subcommand is required");
    let spec = COMMANDS.iter().find(|c| c.name == name).expect("registered command");
    let keys = (spec.keys)();
    let file = match sub.get_one::<String>("config").map(|p| ConfigFile::load(p)) {
        Some(Ok(f)) => Some(f),
        Some(Err(e)) => {
            let _ = writeln!(stderr, "error: {e}");
            return EXIT_INVALID;
        }
        None => None,
    };
    let overrides: Vec<(String, String)> = keys
        .iter()
        .filter_map(|k| sub.get_one::<String>(k.name).map(|v| (k.name.to_string(), v.clone())))
        .collect();
    let settings = match Settings::resolve(name, &keys, file.as_ref(), &overrides) {
        Ok(s) => s,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return EXIT_INVALID;
        }
    };
    match (spec.run)(&settings, stdout) {
        Ok(code) => code,
        Err(Failure::Invalid(msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            EXIT_INVALID
        }
        Err(Failure::Unconverged(msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            EXIT_UNCONVERGED
        }
    }
}
