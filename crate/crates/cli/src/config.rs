//! `--config` files: TOML whose keys mirror the long flags. Top-level keys
//! are global flags; a table named after the subcommand (nested for
//! `classify-qa train` and friends) holds that subcommand's flags. Flags on
//! the command line win over file values.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use hearingkit_core::{Error, Result};
use toml::{Table, Value};

/// Path given with `--config`, if any. Looks only at the raw arguments so
/// the file can be merged before clap sees them.
pub fn config_path(args: &[OsString]) -> Option<PathBuf> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        let a = a.to_string_lossy();
        if a == "--" {
            break;
        }
        if a == "--config" {
            return it.next().map(PathBuf::from);
        }
        if let Some(v) = a.strip_prefix("--config=") {
            return Some(PathBuf::from(v));
        }
    }
    None
}

/// Leading non-flag words: the subcommand path, e.g. `["classify-qa", "train"]`.
fn subcommand_path(args: &[OsString]) -> Vec<String> {
    let mut out = Vec::new();
    let mut skip_value = false;
    for a in args.iter().skip(1) {
        let a = a.to_string_lossy();
        if skip_value {
            skip_value = false;
            continue;
        }
        if a.starts_with('-') {
            // Global flags taking a value.
            skip_value = !a.contains('=') && matches!(a.as_ref(), "--seed" | "--config" | "--jobs");
            continue;
        }
        out.push(a.into_owned());
        if out.len() == 2 {
            break;
        }
    }
    out
}

fn has_flag(args: &[OsString], flag: &str) -> bool {
    let eq = format!("{flag}=");
    args.iter()
        .map(|a| a.to_string_lossy())
        .any(|a| a == flag || a.starts_with(&eq))
}

fn push_value(out: &mut Vec<OsString>, flag: &str, v: &Value, origin: &Path) -> Result<()> {
    match v {
        Value::Boolean(true) => out.push(flag.into()),
        Value::Boolean(false) => {}
        Value::String(s) => {
            out.push(flag.into());
            out.push(s.into());
        }
        Value::Integer(i) => {
            out.push(flag.into());
            out.push(i.to_string().into());
        }
        Value::Float(f) => {
            out.push(flag.into());
            out.push(f.to_string().into());
        }
        Value::Array(items) => {
            for item in items {
                push_value(out, flag, item, origin)?;
            }
        }
        other => {
            return Err(Error::Config(format!(
                "{}: unsupported value for `{flag}`: {other}",
                origin.display()
            )))
        }
    }
    Ok(())
}

fn append_table(out: &mut Vec<OsString>, args: &[OsString], table: &Table, nested: &[&str], origin: &Path) -> Result<()> {
    for (key, v) in table {
        if nested.contains(&key.as_str()) || matches!(v, Value::Table(_)) {
            continue;
        }
        let flag = format!("--{}", key.replace('_', "-"));
        if has_flag(args, &flag) {
            continue;
        }
        push_value(out, &flag, v, origin)?;
    }
    Ok(())
}

/// Arguments with config-file values appended for every flag the command
/// line leaves unset.
pub fn merge_config(args: Vec<OsString>) -> Result<Vec<OsString>> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let text = fs::read_to_string(&path).map_err(|e| Error::Io {
        path: path.clone(),
        source: e,
    })?;
    let table: Table = text
        .parse()
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let sub = subcommand_path(&args);
    let mut extra = Vec::new();
    let mut global = table.clone();
    global.remove("config");
    append_table(&mut extra, &args, &global, &[], &path)?;
    let mut scope = &table;
    for name in &sub {
        match scope.get(name) {
            Some(Value::Table(t)) => {
                append_table(&mut extra, &args, t, &[], &path)?;
                scope = t;
            }
            _ => break,
        }
    }
    let mut merged = args;
    // Keep anything after `--` last.
    let tail = merged
        .iter()
        .position(|a| a == "--")
        .map(|i| merged.split_off(i))
        .unwrap_or_default();
    merged.extend(extra);
    merged.extend(tail);
    Ok(merged)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn os(v: &[&str]) -> Vec<OsString> {
        v.iter().map(OsString::from).collect()
    }

    #[test]
    fn finds_subcommand_path() {
        let a = os(&["hk", "--seed", "3", "classify-qa", "train", "--epochs", "5"]);
        assert_eq!(subcommand_path(&a), vec!["classify-qa", "train"]);
    }

    #[test]
    fn flags_override_file_values() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("c.toml");
        fs::write(
            &cfg,
            "seed = 9\n[pair]\ncorpus = \"a\"\nout = \"b\"\n[classify-qa.train]\nepochs = 7\nama = [\"x.csv\", \"y.csv\"]\n",
        )
        .unwrap();
        let c = cfg.to_string_lossy().to_string();
        let merged = merge_config(os(&["hk", "--config", &c, "pair", "--out", "z"])).unwrap();
        let s: Vec<String> = merged.iter().map(|a| a.to_string_lossy().into_owned()).collect();
        assert!(s.ends_with(&["--seed".into(), "9".into(), "--corpus".into(), "a".into()]));
        assert_eq!(s.iter().filter(|a| *a == "--out").count(), 1);

        let merged = merge_config(os(&["hk", "--config", &c, "classify-qa", "train"])).unwrap();
        let s: Vec<String> = merged.iter().map(|a| a.to_string_lossy().into_owned()).collect();
        assert_eq!(s.iter().filter(|a| *a == "--ama").count(), 2);
        assert!(s.contains(&"7".to_string()));
    }
}
