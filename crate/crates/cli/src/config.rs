//! Parameter resolution: command-line flag, then `key=value` config file,
//! then built-in default. Every resolved value is echoed into the manifest.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use serde::Serialize;
use serde_json::Value;

pub const SEED_ENV: &str = "DKGLAB_SEED";

#[derive(Debug, Default)]
pub struct Resolver {
    file: BTreeMap<String, String>,
    used: BTreeSet<String>,
    pub echo: BTreeMap<String, Value>,
}

/// Parses `key = value` lines; `#` starts a comment, blank lines are skipped.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("config line {}: expected key=value, got `{raw}`", i + 1))?;
        let key = key.trim();
        if key.is_empty() {
            bail!("config line {}: empty key", i + 1);
        }
        if out
            .insert(key.to_string(), value.trim().to_string())
            .is_some()
        {
            bail!("config line {}: duplicate key `{key}`", i + 1);
        }
    }
    Ok(out)
}

impl Resolver {
    pub fn new(config: Option<&Path>) -> Result<Self> {
        let file = match config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading config {}", path.display()))?;
                parse_config(&text).with_context(|| format!("in {}", path.display()))?
            }
            None => BTreeMap::new(),
        };
        Ok(Self {
            file,
            ..Self::default()
        })
    }

    fn from_file<T: FromStr>(&mut self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        let Some(raw) = self.file.get(key) else {
            return Ok(None);
        };
        self.used.insert(key.to_string());
        raw.parse()
            .map(Some)
            .map_err(|e| anyhow!("config key `{key}`: cannot parse `{raw}`: {e}"))
    }

    pub fn get<T>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T>
    where
        T: FromStr + Serialize,
        T::Err: std::fmt::Display,
    {
        let file = self.from_file(key)?;
        let value = flag.or(file).unwrap_or(default);
        self.echo
            .insert(key.to_string(), serde_json::to_value(&value)?);
        Ok(value)
    }

    /// Like [`Resolver::get`] without a default.
    pub fn get_opt<T>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>>
    where
        T: FromStr + Serialize,
        T::Err: std::fmt::Display,
    {
        let file = self.from_file(key)?;
        let value = flag.or(file);
        if let Some(v) = &value {
            self.echo.insert(key.to_string(), serde_json::to_value(v)?);
        }
        Ok(value)
    }

    /// Flag, then config, then the `DKGLAB_SEED` environment variable, then 0.
    pub fn seed(&mut self, flag: Option<u64>) -> Result<u64> {
        let env = match std::env::var(SEED_ENV) {
            Ok(raw) => Some(
                raw.trim()
                    .parse::<u64>()
                    .map_err(|e| anyhow!("{SEED_ENV}=`{raw}`: {e}"))?,
            ),
            Err(_) => None,
        };
        let file = self.from_file("seed")?;
        let seed = flag.or(file).or(env).unwrap_or(0);
        self.echo.insert("seed".into(), seed.into());
        Ok(seed)
    }

    /// Rejects config keys that no parameter consumed.
    pub fn finish(&self) -> Result<()> {
        let unknown: Vec<&String> = self
            .file
            .keys()
            .filter(|k| !self.used.contains(*k))
            .collect();
        if !unknown.is_empty() {
            bail!("unknown config keys: {unknown:?}");
        }
        Ok(())
    }
}

/// Comma-separated list, e.g. `64,128,256`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct List(pub Vec<usize>);

impl FromStr for List {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.split(',')
            .map(|t| t.trim().parse::<usize>().map_err(|e| format!("`{t}`: {e}")))
            .collect::<Result<Vec<_>, _>>()
            .map(List)
    }
}

impl std::fmt::Display for List {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.0.iter().map(usize::to_string).collect();
        f.write_str(&parts.join(","))
    }
}

/// Text choices echoed verbatim.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct Word(pub String);

impl FromStr for Word {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(Word(s.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_rejects_garbage() {
        let map = parse_config("# header\nN = 64\n\ndt=0.01 # trailing\n").unwrap();
        assert_eq!(map["N"], "64");
        assert_eq!(map["dt"], "0.01");
        assert!(parse_config("N 64").is_err());
        assert!(parse_config("=3").is_err());
        assert!(parse_config("a=1\na=2").is_err());
    }

    #[test]
    fn flags_win_over_file_and_unknown_keys_fail() {
        let mut r = Resolver {
            file: parse_config("N=64\ndt=0.5\nbogus=1").unwrap(),
            ..Resolver::default()
        };
        assert_eq!(r.get("N", Some(128usize), 32).unwrap(), 128);
        assert_eq!(r.get("dt", None, 1.0f64).unwrap(), 0.5);
        assert_eq!(r.get("T", None, 2.0f64).unwrap(), 2.0);
        assert!(r.finish().is_err());
        assert_eq!(r.echo["N"], 128);
    }

    #[test]
    fn bad_values_are_reported() {
        let mut r = Resolver {
            file: parse_config("N=many").unwrap(),
            ..Resolver::default()
        };
        assert!(r.get("N", None, 1usize).is_err());
    }

    #[test]
    fn lists() {
        assert_eq!("64, 128".parse::<List>().unwrap(), List(vec![64, 128]));
        assert!("64,x".parse::<List>().is_err());
        assert_eq!(List(vec![1, 2]).to_string(), "1,2");
    }
}
