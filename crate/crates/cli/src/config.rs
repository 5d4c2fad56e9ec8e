//! Config-file support: TOML values are turned into flags placed right
//! after the subcommand name, so explicit flags (which come later) win.

use std::ffi::OsString;
use std::path::Path;

use anyhow::{bail, Context, Result};
use clap::CommandFactory;

use crate::Cli;

/// Finds `--config FILE` (or `--config=FILE`) anywhere in `args`.
fn config_path(args: &[OsString]) -> Option<OsString> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().cloned();
        }
        if let Some(rest) = s.strip_prefix("--config=") {
            return Some(rest.into());
        }
    }
    None
}

fn value_to_flag(key: &str, v: &toml::Value) -> Result<Vec<String>> {
    let flag = format!("--{key}");
    Ok(match v {
        toml::Value::Boolean(true) => vec![flag],
        toml::Value::Boolean(false) => vec![],
        toml::Value::String(s) => vec![flag, s.clone()],
        toml::Value::Integer(i) => vec![flag, i.to_string()],
        toml::Value::Float(f) => vec![flag, f.to_string()],
        toml::Value::Array(items) => {
            let parts: Vec<String> = items
                .iter()
                .map(|x| match x {
                    toml::Value::String(s) => Ok(s.clone()),
                    toml::Value::Integer(i) => Ok(i.to_string()),
                    toml::Value::Float(f) => Ok(f.to_string()),
                    other => bail!("config key {key}: unsupported list element {other}"),
                })
                .collect::<Result<_>>()?;
            vec![flag, parts.join(",")]
        }
        other => bail!("config key {key}: unsupported value {other}"),
    })
}

/// Expands `args` with values from the config file, if one is named.
///
/// Top-level keys apply to every subcommand that has a flag of that name;
/// keys in a `[subcommand]` table must all be valid flags for it.
pub fn expand_args(args: Vec<OsString>) -> Result<Vec<OsString>> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let Some(pos) = args.iter().skip(1).position(|a| !a.to_string_lossy().starts_with('-')).map(|p| p + 1) else {
        return Ok(args);
    };
    // skip the value of a leading --config
    let pos = if args[pos] == path && pos >= 2 && args[pos - 1] == "--config" {
        match args.iter().skip(pos + 1).position(|a| !a.to_string_lossy().starts_with('-')) {
            Some(p) => pos + 1 + p,
            None => return Ok(args),
        }
    } else {
        pos
    };
    let name = args[pos].to_string_lossy().into_owned();
    let cmd = Cli::command();
    let Some(sub) = cmd.find_subcommand(&name) else {
        return Ok(args);
    };
    let known: Vec<String> = sub.get_arguments().filter_map(|a| a.get_long().map(str::to_owned)).collect();
    let table = load(Path::new(&path))?;

    let mut extra = Vec::new();
    for (key, value) in &table {
        if let toml::Value::Table(section) = value {
            if *key != name {
                continue;
            }
            for (k, v) in section {
                if !known.iter().any(|x| x == k) {
                    bail!("config section [{name}]: `{k}` is not an option of {name}");
                }
                extra.extend(value_to_flag(k, v)?);
            }
        } else if known.iter().any(|x| x == key) {
            extra.extend(value_to_flag(key, value)?);
        }
    }
    let mut out = args[..=pos].to_vec();
    out.extend(extra.into_iter().map(OsString::from));
    out.extend_from_slice(&args[pos + 1..]);
    Ok(out)
}

fn load(path: &Path) -> Result<toml::Table> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config file {}", path.display()))?;
    text.parse::<toml::Table>().with_context(|| format!("parsing config file {}", path.display()))
}
