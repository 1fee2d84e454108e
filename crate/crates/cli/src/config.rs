//! Flat `key = value` config files.
//!
//! Keys are long flag names without the leading dashes. Values are split on
//! whitespace, so `levels = 1.5 2 2.5` behaves like `--levels 1.5 2 2.5`.
//! `true` and `false` toggle boolean flags.

use std::fs;
use std::path::Path;

pub fn parse(text: &str) -> Result<Vec<(String, String)>, String> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| format!("line {}: expected `key = value`", i + 1))?;
        let key = key.trim();
        if key.is_empty() || key.contains(char::is_whitespace) {
            return Err(format!("line {}: bad key `{key}`", i + 1));
        }
        out.push((key.replace('_', "-"), value.trim().to_string()));
    }
    Ok(out)
}

/// Turns config entries into command-line tokens.
pub fn to_args(entries: &[(String, String)]) -> Vec<String> {
    let mut args = Vec::new();
    for (key, value) in entries {
        match value.as_str() {
            "true" => args.push(format!("--{key}")),
            "false" => {}
            _ => {
                args.push(format!("--{key}"));
                args.extend(value.split_whitespace().map(str::to_string));
            }
        }
    }
    args
}

/// Finds `--config PATH` or `--config=PATH` in the raw arguments.
pub fn config_path(args: &[String]) -> Option<String> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            return it.next().cloned();
        }
        if let Some(p) = a.strip_prefix("--config=") {
            return Some(p.to_string());
        }
    }
    None
}

pub const COMMANDS: &[&str] = &["table", "oracle", "simulate", "selftest"];

/// Splices file arguments right after the subcommand name, skipping keys
/// that are also given on the command line.
pub fn merge_args(args: Vec<String>, file: &Path) -> Result<Vec<String>, String> {
    let text = fs::read_to_string(file).map_err(|e| format!("cannot read config {}: {e}", file.display()))?;
    let given: Vec<String> = args
        .iter()
        .filter_map(|a| a.strip_prefix("--"))
        .map(|a| a.split('=').next().unwrap_or(a).to_string())
        .collect();
    let entries: Vec<(String, String)> = parse(&text)?.into_iter().filter(|(k, _)| !given.contains(k)).collect();
    let extra = to_args(&entries);
    let Some(pos) = args.iter().skip(1).position(|a| COMMANDS.contains(&a.as_str())) else {
        return Ok(args);
    };
    let pos = pos + 2;
    let mut out = args[..pos].to_vec();
    out.extend(extra);
    out.extend_from_slice(&args[pos..]);
    Ok(out)
}
