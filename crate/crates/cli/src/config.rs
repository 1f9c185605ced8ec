//! Default flag values from a TOML file.
//!
//! Top-level scalar keys become global flags; a table named after the
//! subcommand (`[mixup]`, `[eval.map]`, ...) supplies that command's flags.
//! The values are spliced in ahead of the user's own flags, which therefore
//! win.

use std::ffi::OsString;
use std::path::PathBuf;

pub const CONFIG_ENV: &str = "FREEBIES_CONFIG";

const GLOBAL_VALUE_FLAGS: [&str; 2] = ["--config", "--threads"];
const NESTED: [&str; 2] = ["eval", "elephant"];

fn config_path(argv: &[OsString]) -> Option<PathBuf> {
    let mut it = argv.iter().skip(1);
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().map(PathBuf::from);
        }
        if let Some(v) = s.strip_prefix("--config=") {
            return Some(PathBuf::from(v));
        }
    }
    std::env::var_os(CONFIG_ENV).map(PathBuf::from)
}

/// Positions just past the subcommand path, e.g. `["eval", "map"]`.
fn command_path(argv: &[OsString]) -> (Vec<String>, usize) {
    let mut path = Vec::new();
    let mut i = 1;
    while i < argv.len() {
        let s = argv[i].to_string_lossy();
        if GLOBAL_VALUE_FLAGS.contains(&s.as_ref()) {
            i += 2;
            continue;
        }
        if s.starts_with('-') {
            i += 1;
            continue;
        }
        path.push(s.into_owned());
        i += 1;
        if path.len() == 2 || !NESTED.contains(&path[0].as_str()) {
            break;
        }
    }
    (path, i)
}

fn flags_from(table: &toml::Table) -> Result<Vec<OsString>, String> {
    let mut out = Vec::new();
    for (key, value) in table {
        let flag = format!("--{}", key.replace('_', "-"));
        let rendered = match value {
            toml::Value::Table(_) => continue,
            toml::Value::Boolean(true) => {
                out.push(flag.into());
                continue;
            }
            toml::Value::Boolean(false) => continue,
            toml::Value::String(s) => s.clone(),
            toml::Value::Integer(n) => n.to_string(),
            toml::Value::Float(x) => x.to_string(),
            toml::Value::Array(items) => items
                .iter()
                .map(|v| match v {
                    toml::Value::String(s) => Ok(s.clone()),
                    toml::Value::Integer(n) => Ok(n.to_string()),
                    toml::Value::Float(x) => Ok(x.to_string()),
                    _ => Err(format!("config key {key:?}: unsupported list element")),
                })
                .collect::<Result<Vec<_>, _>>()?
                .join(","),
            toml::Value::Datetime(_) => return Err(format!("config key {key:?}: dates are not flag values")),
        };
        out.push(flag.into());
        out.push(rendered.into());
    }
    Ok(out)
}

/// Returns `argv` with config-file defaults spliced in.
pub fn expand_argv(argv: Vec<OsString>) -> Result<Vec<OsString>, String> {
    let Some(path) = config_path(&argv) else {
        return Ok(argv);
    };
    let text = std::fs::read_to_string(&path)
        .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
    let doc: toml::Table = text
        .parse()
        .map_err(|e| format!("config {}: {e}", path.display()))?;

    let (cmd, split) = command_path(&argv);
    let mut table = Some(&doc);
    for name in &cmd {
        table = table.and_then(|t| t.get(name)).and_then(toml::Value::as_table);
    }
    let command_flags = match table {
        Some(t) if !cmd.is_empty() => flags_from(t)?,
        _ => Vec::new(),
    };
    let global_flags = flags_from(&doc)?;

    let mut out = Vec::with_capacity(argv.len() + global_flags.len() + command_flags.len());
    out.push(argv[0].clone());
    out.extend(global_flags);
    out.extend(argv[1..split].iter().cloned());
    out.extend(command_flags);
    out.extend(argv[split..].iter().cloned());
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn os(v: &[&str]) -> Vec<OsString> {
        v.iter().map(OsString::from).collect()
    }

    #[test]
    fn finds_nested_command() {
        let (path, split) = command_path(&os(&["x", "--threads", "2", "eval", "map", "--gt", "g"]));
        assert_eq!(path, vec!["eval", "map"]);
        assert_eq!(split, 5);
        let (path, split) = command_path(&os(&["x", "schedule", "--mode", "cosine"]));
        assert_eq!(path, vec!["schedule"]);
        assert_eq!(split, 2);
    }

    #[test]
    fn splices_defaults_before_user_flags() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("c.toml");
        std::fs::write(&cfg, "threads = 3\n[schedule]\nbase_lr = 0.5\nmilestones = [10, 20]\n[eval.map]\niou = 0.7\n").unwrap();
        let c = cfg.to_str().unwrap();
        let out = expand_argv(os(&["x", "--config", c, "schedule", "--base-lr", "0.1"])).unwrap();
        assert_eq!(
            out,
            os(&["x", "--threads", "3", "--config", c, "schedule", "--base-lr", "0.5", "--milestones", "10,20", "--base-lr", "0.1"])
        );
        let out = expand_argv(os(&["x", "--config", c, "eval", "map"])).unwrap();
        assert_eq!(out, os(&["x", "--threads", "3", "--config", c, "eval", "map", "--iou", "0.7"]));
    }
}
