//! `--config` files: one `key = value` per line, keys being long flag names.
//! Blank lines and lines starting with `#` are skipped. The entries are
//! spliced in ahead of the command-line arguments so the latter win.

use std::path::Path;

use anyhow::{bail, Context, Result};
use clap::{ArgAction, Command};

pub fn merge_config(raw: &[String], cli: &Command) -> Result<Vec<String>> {
    let Some(sub) = raw.get(1).and_then(|name| cli.find_subcommand(name)) else {
        return Ok(raw.to_vec());
    };
    let Some(path) = config_path(&raw[2..]) else {
        return Ok(raw.to_vec());
    };
    let text = std::fs::read_to_string(&path)
        .with_context(|| format!("cannot read config file {}", path.display()))?;

    let mut merged = raw[..2].to_vec();
    for (line_no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!("{}:{}: expected `key = value`", path.display(), line_no + 1);
        };
        let key = key.trim().trim_start_matches("--");
        let value = value.trim().trim_matches('"');
        if key == "config" {
            bail!(
                "{}:{}: config files cannot nest",
                path.display(),
                line_no + 1
            );
        }
        let Some(arg) = sub.get_arguments().find(|a| a.get_long() == Some(key)) else {
            // Keys for other subcommands are allowed so one file can serve all.
            if cli
                .get_subcommands()
                .any(|s| s.get_arguments().any(|a| a.get_long() == Some(key)))
            {
                continue;
            }
            bail!("{}:{}: unknown key `{key}`", path.display(), line_no + 1);
        };
        match arg.get_action() {
            ArgAction::SetTrue => {
                if parse_bool(value)
                    .with_context(|| format!("{}:{}", path.display(), line_no + 1))?
                {
                    merged.push(format!("--{key}"));
                }
            }
            ArgAction::Count => {
                let n: usize = value.parse().with_context(|| {
                    format!("{}:{}: expected a count", path.display(), line_no + 1)
                })?;
                merged.extend(std::iter::repeat_n(format!("--{key}"), n));
            }
            _ => merged.push(format!("--{key}={value}")),
        }
    }
    merged.extend_from_slice(&raw[2..]);
    Ok(merged)
}

fn config_path(args: &[String]) -> Option<std::path::PathBuf> {
    let mut iter = args.iter();
    while let Some(arg) = iter.next() {
        if arg == "--config" {
            return iter.next().map(|p| Path::new(p).to_path_buf());
        }
        if let Some(p) = arg.strip_prefix("--config=") {
            return Some(Path::new(p).to_path_buf());
        }
    }
    None
}

fn parse_bool(value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        other => bail!("expected a boolean, found `{other}`"),
    }
}
