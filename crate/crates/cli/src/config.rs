//! `--config` files: `key = value` lines spliced in ahead of the user's flags,
//! so that flags given on the command line win.

use std::ffi::OsString;
use std::fs;

use clap::error::ErrorKind;
use clap::{CommandFactory, Parser};

use crate::args::{Cli, Command};

fn subcommand_name(c: &Command) -> &'static str {
    match c {
        Command::Discover(_) => "discover",
        Command::Teach(_) => "teach",
        Command::Synthesize(_) => "synthesize",
        Command::Eval(_) => "eval",
        Command::Grid(_) => "grid",
        Command::Bench(_) => "bench",
        Command::GenToy(_) => "gen-toy",
    }
}

/// Turns config text into flags. `true`/`false` toggle switches.
pub fn config_flags(text: &str) -> Result<Vec<OsString>, String> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("line {}: expected `key = value`", n + 1))?;
        let key = key.trim().replace('_', "-");
        let value = value.trim().trim_matches('"');
        if key.is_empty() || key == "config" {
            return Err(format!("line {}: invalid key {key:?}", n + 1));
        }
        match value {
            "true" => out.push(format!("--{key}").into()),
            "false" => {}
            v => {
                out.push(format!("--{key}").into());
                out.push(v.into());
            }
        }
    }
    Ok(out)
}

/// Returns `argv` with the config file's flags inserted right after the
/// subcommand name; `argv` is returned unchanged when no config is given.
pub fn expand(argv: Vec<OsString>) -> Result<Vec<OsString>, clap::Error> {
    let cli = Cli::try_parse_from(&argv)?;
    let Some(path) = &cli.config else {
        return Ok(argv);
    };
    let text = fs::read_to_string(path).map_err(|e| {
        Cli::command().error(ErrorKind::Io, format!("cannot read config {}: {e}", path.display()))
    })?;
    let flags = config_flags(&text).map_err(|e| {
        Cli::command().error(ErrorKind::InvalidValue, format!("config {}: {e}", path.display()))
    })?;
    let name = subcommand_name(&cli.command);
    let at = argv
        .iter()
        .skip(1)
        .position(|a| a == name)
        .map(|i| i + 2)
        .unwrap_or(argv.len());
    let mut out = argv[..at].to_vec();
    out.extend(flags);
    out.extend_from_slice(&argv[at..]);
    Ok(out)
}
