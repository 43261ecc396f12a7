//! Key-value config files and flag/config/default resolution.
//!
//! A config file holds one `key = value` per line; `#` starts a comment and
//! blank lines are ignored. Keys are the long flag names without the leading
//! dashes (`dim`, `n-samples`, `t-max`, ..). Flags given on the command line
//! override the file.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Display;
use std::str::FromStr;

use serde::Serialize;
use serde_json::Value;

use crate::CliError;

pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut out = BTreeMap::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Validation(format!("config line {}: expected key = value", no + 1)))?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return Err(CliError::Validation(format!("config line {}: empty key", no + 1)));
        }
        if out.insert(k.to_string(), v.to_string()).is_some() {
            return Err(CliError::Validation(format!("config key {k} given twice")));
        }
    }
    Ok(out)
}

/// Resolves every parameter once and records the resolved value.
pub struct Resolver {
    file: BTreeMap<String, String>,
    used: BTreeSet<String>,
    resolved: BTreeMap<String, Value>,
}

impl Resolver {
    pub fn new(file: BTreeMap<String, String>) -> Self {
        Resolver { file, used: BTreeSet::new(), resolved: BTreeMap::new() }
    }

    fn lookup<T>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>, CliError>
    where
        T: FromStr,
        T::Err: Display,
    {
        self.used.insert(key.to_string());
        if flag.is_some() {
            return Ok(flag);
        }
        match self.file.get(key) {
            None => Ok(None),
            Some(s) => s
                .parse::<T>()
                .map(Some)
                .map_err(|e| CliError::Validation(format!("config key {key}: {e}"))),
        }
    }

    fn record<T: Serialize>(&mut self, key: &str, v: &T) -> Result<(), CliError> {
        let j = serde_json::to_value(v).map_err(|e| CliError::Validation(e.to_string()))?;
        self.resolved.insert(key.to_string(), j);
        Ok(())
    }

    pub fn get<T>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T, CliError>
    where
        T: FromStr + Serialize,
        T::Err: Display,
    {
        let v = self.lookup(key, flag)?.unwrap_or(default);
        self.record(key, &v)?;
        Ok(v)
    }

    pub fn require<T>(&mut self, key: &str, flag: Option<T>) -> Result<T, CliError>
    where
        T: FromStr + Serialize,
        T::Err: Display,
    {
        let v = self
            .lookup(key, flag)?
            .ok_or_else(|| CliError::Validation(format!("missing required parameter --{key}")))?;
        self.record(key, &v)?;
        Ok(v)
    }

    pub fn optional<T>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>, CliError>
    where
        T: FromStr + Serialize,
        T::Err: Display,
    {
        let v = self.lookup(key, flag)?;
        if let Some(x) = &v {
            self.record(key, x)?;
        }
        Ok(v)
    }

    /// Boolean switch: present flag, or `true`/`false` in the file.
    pub fn switch(&mut self, key: &str, flag: bool) -> Result<bool, CliError> {
        let v = self.lookup(key, flag.then_some(true))?.unwrap_or(false);
        self.record(key, &v)?;
        Ok(v)
    }

    /// Comma-separated list.
    pub fn list<T>(&mut self, key: &str, flag: Option<String>, default: &str) -> Result<Vec<T>, CliError>
    where
        T: FromStr + Serialize,
        T::Err: Display,
    {
        let raw: String = self.lookup(key, flag)?.unwrap_or_else(|| default.to_string());
        let v = parse_list(key, &raw)?;
        self.record(key, &v)?;
        Ok(v)
    }

    pub fn finish(self) -> Result<BTreeMap<String, Value>, CliError> {
        let unknown: Vec<&String> = self.file.keys().filter(|k| !self.used.contains(*k)).collect();
        if let Some(k) = unknown.first() {
            return Err(CliError::Validation(format!("config key {k} is not a parameter of this command")));
        }
        Ok(self.resolved)
    }
}

pub fn parse_list<T>(key: &str, raw: &str) -> Result<Vec<T>, CliError>
where
    T: FromStr,
    T::Err: Display,
{
    raw.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(|e| CliError::Validation(format!("--{key}: {s}: {e}"))))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let file = parse_config("# run\ndim = 4\nk=2 # order\n\n").unwrap();
        let mut r = Resolver::new(file);
        assert_eq!(r.get::<usize>("dim", Some(8), 1).unwrap(), 8);
        assert_eq!(r.get::<usize>("k", None, 1).unwrap(), 2);
        assert_eq!(r.get::<u64>("seed", None, 7).unwrap(), 7);
        let done = r.finish().unwrap();
        assert_eq!(done["dim"], Value::from(8));
    }

    #[test]
    fn rejects_bad_lines_and_unknown_keys() {
        assert!(parse_config("dim 4").is_err());
        assert!(parse_config("a = 1\na = 2").is_err());
        let r = Resolver::new(parse_config("bogus = 1").unwrap());
        assert!(r.finish().is_err());
    }
}
