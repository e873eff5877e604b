//! `--config` files: `name = value` per line, `#` starts a comment. Flags
//! given on the command line win over the file.

use std::ffi::OsString;
use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};

fn config_path(argv: &[OsString]) -> Option<PathBuf> {
    let mut it = argv.iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().map(PathBuf::from);
        }
        if let Some(p) = s.strip_prefix("--config=") {
            return Some(PathBuf::from(p));
        }
    }
    None
}

fn has_flag(argv: &[OsString], name: &str) -> bool {
    let long = format!("--{name}");
    let eq = format!("--{name}=");
    argv.iter().any(|a| {
        let s = a.to_string_lossy();
        s == long || s.starts_with(&eq)
    })
}

/// Parse `name = value` pairs.
pub fn parse(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            bail!("config line {}: expected name = value", i + 1);
        };
        let k = k.trim().trim_start_matches("--").replace('_', "-");
        let v = v.trim().trim_matches('"').to_string();
        if k.is_empty() || k == "config" {
            bail!("config line {}: invalid name", i + 1);
        }
        out.push((k, v));
    }
    Ok(out)
}

/// Append flags from the config file that the command line leaves unset.
/// `true`/`false` values toggle switches.
pub fn merge(argv: Vec<OsString>) -> Result<Vec<OsString>> {
    let Some(path) = config_path(&argv) else {
        return Ok(argv);
    };
    let text = fs::read_to_string(&path).with_context(|| format!("reading config {}", path.display()))?;
    let mut out = argv.clone();
    for (k, v) in parse(&text)? {
        if has_flag(&argv, &k) {
            continue;
        }
        match v.as_str() {
            "true" => out.push(format!("--{k}").into()),
            "false" => {}
            _ => {
                out.push(format!("--{k}").into());
                out.push(v.into());
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn os(v: &[&str]) -> Vec<OsString> {
        v.iter().map(OsString::from).collect()
    }

    #[test]
    fn parses_pairs_and_comments() {
        let p = parse("seed = 7\n# note\nout=\"res\" # trailing\nglobal_sfs = true\n").unwrap();
        assert_eq!(
            p,
            vec![
                ("seed".into(), "7".into()),
                ("out".into(), "res".into()),
                ("global-sfs".into(), "true".into())
            ]
        );
        assert!(parse("nonsense").is_err());
    }

    #[test]
    fn command_line_wins() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("c.conf");
        fs::write(&cfg, "seed = 7\nformat = csv\nglobal-sfs = true\n").unwrap();
        let argv = os(&[
            "spiro",
            "forced",
            "eval",
            "--seed",
            "3",
            "--config",
            cfg.to_str().unwrap(),
        ]);
        let merged = merge(argv).unwrap();
        let s: Vec<String> = merged.iter().map(|a| a.to_string_lossy().into_owned()).collect();
        assert_eq!(s[s.len() - 3..], ["--format", "csv", "--global-sfs"]);
        assert_eq!(s.iter().filter(|a| *a == "--seed").count(), 1);
    }
}
