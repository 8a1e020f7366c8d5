//! Flat `key = value` config files.
//!
//! Entries become `--key=value` arguments inserted right after the
//! subcommand, so anything given on the command line overrides them. Blank
//! lines and lines starting with `#` are ignored. `true` turns into a bare
//! flag and `false` drops the entry. A `command` key names the subcommand
//! when none is given on the command line.

use std::ffi::OsString;
use std::path::Path;

use crate::error::{CliError, Result};

pub fn parse_config(text: &str) -> Result<Vec<(String, String)>> {
    let mut entries = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(CliError::Usage(format!("config line {}: expected `key = value`, got {line:?}", idx + 1)));
        };
        let key = key.trim();
        if key.is_empty() || key.starts_with('-') || key.contains(char::is_whitespace) {
            return Err(CliError::Usage(format!("config line {}: bad key {key:?}", idx + 1)));
        }
        entries.push((key.replace('_', "-"), value.trim().to_string()));
    }
    Ok(entries)
}

/// Removes `--config FILE` (or `--config=FILE`) from `args`.
fn take_config_path(args: &mut Vec<OsString>) -> Result<Option<OsString>> {
    let Some(pos) = args.iter().position(|a| {
        let s = a.to_string_lossy();
        s == "--config" || s.starts_with("--config=")
    }) else {
        return Ok(None);
    };
    let flag = args.remove(pos);
    if let Some(v) = flag.to_string_lossy().strip_prefix("--config=") {
        return Ok(Some(v.into()));
    }
    if pos >= args.len() {
        return Err(CliError::Usage("--config needs a file argument".into()));
    }
    Ok(Some(args.remove(pos)))
}

/// Expands `--config FILE` into ordinary arguments. `args[0]` is the program
/// name.
pub fn expand_args(mut args: Vec<OsString>) -> Result<Vec<OsString>> {
    let Some(path) = take_config_path(&mut args)? else {
        return Ok(args);
    };
    let text = std::fs::read_to_string(Path::new(&path)).map_err(|e| CliError::io(&path, e))?;
    let mut entries = parse_config(&text)?;
    let command = entries.iter().position(|(k, _)| k == "command").map(|i| entries.remove(i).1);

    let has_command = args.get(1).is_some_and(|a| !a.to_string_lossy().starts_with('-'));
    if !has_command {
        let command = command.ok_or_else(|| CliError::Usage("no subcommand given".into()))?;
        args.insert(1.min(args.len()), command.into());
    }
    let injected = entries.into_iter().filter_map(|(k, v)| match v.as_str() {
        "true" => Some(OsString::from(format!("--{k}"))),
        "false" => None,
        _ => Some(OsString::from(format!("--{k}={v}"))),
    });
    let at = 2.min(args.len());
    args.splice(at..at, injected);
    Ok(args)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strings(v: &[&str]) -> Vec<OsString> {
        v.iter().map(OsString::from).collect()
    }

    #[test]
    fn parses_comments_and_normalizes_keys() {
        let e = parse_config("# hi\n\nmodel = example2\nmax_iters=30\n").unwrap();
        assert_eq!(e, vec![("model".into(), "example2".into()), ("max-iters".into(), "30".into())]);
        assert!(parse_config("oops\n").unwrap_err().to_string().contains("line 1"));
    }

    #[test]
    fn injects_after_subcommand() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.cfg");
        std::fs::write(&cfg, "steps = 10\nnewton_fallback = true\nquiet = false\n").unwrap();
        let args = strings(&["ompath", "mpp", "--config", cfg.to_str().unwrap(), "--steps", "20"]);
        let out = expand_args(args).unwrap();
        assert_eq!(out, strings(&["ompath", "mpp", "--steps=10", "--newton-fallback", "--steps", "20"]));
    }

    #[test]
    fn command_key_supplies_missing_subcommand() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.cfg");
        std::fs::write(&cfg, "command = simulate\nseed = 3\n").unwrap();
        let out = expand_args(strings(&["ompath", &format!("--config={}", cfg.display())])).unwrap();
        assert_eq!(out, strings(&["ompath", "simulate", "--seed=3"]));
    }
}
