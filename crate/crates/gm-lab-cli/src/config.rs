//! Flat `key = value` experiment configs with dotted section prefixes
//! (`model.p = 2`). Trivially parseable, diffable, and echoed verbatim into
//! the run manifest.
//!
//! Keys are pulled through a [`Ctx`] that records every key it resolves
//! (with its default when absent); after an experiment has declared its
//! keys, anything left over in the file is rejected with its line number.

use std::cell::RefCell;
use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub key: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(
                f,
                "config error at line {line}, key `{}`: {}",
                self.key, self.message
            ),
            None => write!(f, "config error, key `{}`: {}", self.key, self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

/// Parsed config file: ordered `(key, value, line)` entries.
#[derive(Debug, Clone)]
pub struct RawConfig {
    entries: Vec<(String, String, usize)>,
}

impl RawConfig {
    /// Parses `key = value` lines; `#` starts a comment, blank lines are
    /// skipped, duplicate keys are rejected.
    pub fn parse(text: &str) -> Result<RawConfig, ConfigError> {
        let mut entries: Vec<(String, String, usize)> = Vec::new();
        for (idx, raw_line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = match raw_line.find('#') {
                Some(pos) => &raw_line[..pos],
                None => raw_line,
            };
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let Some(eq) = line.find('=') else {
                return Err(ConfigError {
                    line: Some(line_no),
                    key: line.to_string(),
                    message: "expected `key = value`".to_string(),
                });
            };
            let key = line[..eq].trim().to_string();
            let value = line[eq + 1..].trim().to_string();
            if key.is_empty() {
                return Err(ConfigError {
                    line: Some(line_no),
                    key: String::new(),
                    message: "empty key".to_string(),
                });
            }
            if entries.iter().any(|(k, _, _)| *k == key) {
                return Err(ConfigError {
                    line: Some(line_no),
                    key,
                    message: "duplicate key".to_string(),
                });
            }
            entries.push((key, value, line_no));
        }
        Ok(RawConfig { entries })
    }

    fn lookup(&self, key: &str) -> Option<(&str, usize)> {
        self.entries
            .iter()
            .find(|(k, _, _)| k == key)
            .map(|(_, v, l)| (v.as_str(), *l))
    }
}

/// Key-resolution context: tracks which keys were consumed and what each
/// resolved to (value from the file or the default), for the manifest.
pub struct Ctx<'a> {
    raw: &'a RawConfig,
    used: RefCell<HashSet<String>>,
    resolved: RefCell<BTreeMap<String, String>>,
}

impl<'a> Ctx<'a> {
    pub fn new(raw: &'a RawConfig) -> Self {
        Ctx {
            raw,
            used: RefCell::new(HashSet::new()),
            resolved: RefCell::new(BTreeMap::new()),
        }
    }

    fn note(&self, key: &str, shown: String) {
        self.used.borrow_mut().insert(key.to_string());
        self.resolved.borrow_mut().insert(key.to_string(), shown);
    }

    /// Overrides a key programmatically (CLI flags take precedence over the
    /// file); the manifest echoes the effective value.
    pub fn override_value(&self, key: &str, value: String) {
        self.note(key, value);
    }

    fn parse_with<T: FromStr>(&self, key: &str, value: &str, line: usize) -> Result<T, ConfigError>
    where
        T::Err: fmt::Display,
    {
        value.parse::<T>().map_err(|e| ConfigError {
            line: Some(line),
            key: key.to_string(),
            message: format!("cannot parse `{value}`: {e}"),
        })
    }

    pub fn get_or<T: FromStr + ToString>(&self, key: &str, default: T) -> Result<T, ConfigError>
    where
        T::Err: fmt::Display,
    {
        if let Some(over) = self.resolved.borrow().get(key).cloned() {
            let parsed = over.parse::<T>().map_err(|e| ConfigError {
                line: None,
                key: key.to_string(),
                message: format!("cannot parse override `{over}`: {e}"),
            })?;
            self.used.borrow_mut().insert(key.to_string());
            return Ok(parsed);
        }
        match self.raw.lookup(key) {
            Some((value, line)) => {
                let parsed = self.parse_with(key, value, line)?;
                self.note(key, value.to_string());
                Ok(parsed)
            }
            None => {
                self.note(key, default.to_string());
                Ok(default)
            }
        }
    }

    pub fn require<T: FromStr>(&self, key: &str) -> Result<T, ConfigError>
    where
        T::Err: fmt::Display,
    {
        if let Some(over) = self.resolved.borrow().get(key).cloned() {
            let parsed = over.parse::<T>().map_err(|e| ConfigError {
                line: None,
                key: key.to_string(),
                message: format!("cannot parse override `{over}`: {e}"),
            })?;
            self.used.borrow_mut().insert(key.to_string());
            return Ok(parsed);
        }
        match self.raw.lookup(key) {
            Some((value, line)) => {
                let parsed = self.parse_with(key, value, line)?;
                self.note(key, value.to_string());
                Ok(parsed)
            }
            None => Err(ConfigError {
                line: None,
                key: key.to_string(),
                message: "required key is missing".to_string(),
            }),
        }
    }

    /// Comma-separated list of `T`.
    pub fn list_or<T: FromStr>(&self, key: &str, default: &str) -> Result<Vec<T>, ConfigError>
    where
        T::Err: fmt::Display,
    {
        let (text, line) = match self.raw.lookup(key) {
            Some((value, line)) => {
                self.note(key, value.to_string());
                (value.to_string(), Some(line))
            }
            None => {
                self.note(key, default.to_string());
                (default.to_string(), None)
            }
        };
        text.split(',')
            .map(|part| {
                part.trim().parse::<T>().map_err(|e| ConfigError {
                    line,
                    key: key.to_string(),
                    message: format!("cannot parse list entry `{}`: {e}", part.trim()),
                })
            })
            .collect()
    }

    /// Rejects keys present in the file but never consumed.
    pub fn reject_unknown(&self) -> Result<(), ConfigError> {
        let used = self.used.borrow();
        for (key, _, line) in &self.raw.entries {
            if !used.contains(key) {
                return Err(ConfigError {
                    line: Some(*line),
                    key: key.clone(),
                    message: "unknown key for this experiment".to_string(),
                });
            }
        }
        Ok(())
    }

    /// Fully resolved `key = value` map (file values plus applied defaults).
    pub fn resolved(&self) -> BTreeMap<String, String> {
        self.resolved.borrow().clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_key_values_with_comments() {
        let raw = RawConfig::parse("# run\nmodel.p = 2.0\n\nexperiment=simulate # inline\n").unwrap();
        assert_eq!(raw.entries.len(), 2);
        assert_eq!(raw.lookup("model.p"), Some(("2.0", 2)));
        assert_eq!(raw.lookup("experiment"), Some(("simulate", 4)));
    }

    #[test]
    fn rejects_malformed_and_duplicate_lines() {
        assert!(RawConfig::parse("novalue\n").is_err());
        let err = RawConfig::parse("a = 1\na = 2\n").unwrap_err();
        assert_eq!(err.line, Some(2));
        assert_eq!(err.key, "a");
    }

    #[test]
    fn unknown_keys_are_rejected_with_location() {
        let raw = RawConfig::parse("experiment = simulate\nbogus.key = 3\n").unwrap();
        let ctx = Ctx::new(&raw);
        let _: String = ctx.require("experiment").unwrap();
        let err = ctx.reject_unknown().unwrap_err();
        assert_eq!(err.key, "bogus.key");
        assert_eq!(err.line, Some(2));
    }

    #[test]
    fn defaults_are_echoed_into_the_resolved_map() {
        let raw = RawConfig::parse("experiment = simulate\n").unwrap();
        let ctx = Ctx::new(&raw);
        let _: String = ctx.require("experiment").unwrap();
        let p: f64 = ctx.get_or("model.p", 2.0).unwrap();
        assert_eq!(p, 2.0);
        let resolved = ctx.resolved();
        assert_eq!(resolved.get("model.p").unwrap(), "2");
        assert!(ctx.reject_unknown().is_ok());
    }

    #[test]
    fn overrides_take_precedence() {
        let raw = RawConfig::parse("seeds.master = 5\n").unwrap();
        let ctx = Ctx::new(&raw);
        ctx.override_value("seeds.master", "9".to_string());
        let seed: u64 = ctx.get_or("seeds.master", 0).unwrap();
        assert_eq!(seed, 9);
    }
}
