//! Flat `key = value` configuration with typed, recorded lookups.

use std::collections::BTreeMap;
use std::fmt;

use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConfigError {
    Syntax { line: usize, msg: String },
    Duplicate { line: usize, key: String },
    Invalid { key: String, value: String, expected: String },
    Unknown(Vec<String>),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Syntax { line, msg } => write!(f, "line {line}: {msg}"),
            ConfigError::Duplicate { line, key } => write!(f, "line {line}: duplicate key `{key}`"),
            ConfigError::Invalid { key, value, expected } => write!(f, "`{key}` = `{value}`: expected {expected}"),
            ConfigError::Unknown(keys) => write!(f, "unknown keys: {}", keys.join(", ")),
        }
    }
}

impl std::error::Error for ConfigError {}

fn valid_key(k: &str) -> bool {
    !k.is_empty() && k.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_' || b == b'.' || b == b'-')
}

/// Parses `key = value` lines; `#` starts a comment, blank lines are skipped.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>, ConfigError> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let (k, v) = body.split_once('=').ok_or_else(|| ConfigError::Syntax { line, msg: "expected `key = value`".into() })?;
        let (k, v) = (k.trim(), v.trim());
        if !valid_key(k) {
            return Err(ConfigError::Syntax { line, msg: format!("bad key `{k}`") });
        }
        if v.is_empty() {
            return Err(ConfigError::Syntax { line, msg: format!("empty value for `{k}`") });
        }
        if out.insert(k.to_string(), v.to_string()).is_some() {
            return Err(ConfigError::Duplicate { line, key: k.to_string() });
        }
    }
    Ok(out)
}

/// Writes entries back in the format `parse_config` reads.
pub fn render_config(map: &BTreeMap<String, String>) -> String {
    map.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
}

/// Shortest round-trip decimal, switching to exponent form far from unity.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else if x == 0.0 || (1e-5..1e16).contains(&x.abs()) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

/// Raw entries plus the normalized values actually consumed by a command.
#[derive(Debug, Clone, Default)]
pub struct Params {
    raw: BTreeMap<String, String>,
    used: BTreeMap<String, String>,
}

impl Params {
    pub fn new(raw: BTreeMap<String, String>) -> Self {
        Params { raw, used: BTreeMap::new() }
    }

    pub fn set(&mut self, key: &str, value: String) {
        self.raw.insert(key.to_string(), value);
    }

    fn lookup<T>(&mut self, key: &str, default: Option<T>, expected: &str, parse: impl Fn(&str) -> Option<T>, show: impl Fn(&T) -> String) -> Result<T, ConfigError> {
        let v = match self.raw.get(key) {
            Some(s) => parse(s).ok_or_else(|| ConfigError::Invalid { key: key.into(), value: s.clone(), expected: expected.into() })?,
            None => default.ok_or_else(|| ConfigError::Invalid { key: key.into(), value: String::new(), expected: format!("{expected} (required)") })?,
        };
        self.used.insert(key.to_string(), show(&v));
        Ok(v)
    }

    pub fn f64(&mut self, key: &str, default: Option<f64>) -> Result<f64, ConfigError> {
        self.lookup(key, default, "a finite number", |s| s.parse::<f64>().ok().filter(|x| x.is_finite()), |x| fmt_f64(*x))
    }

    pub fn int(&mut self, key: &str, default: Option<i64>) -> Result<i64, ConfigError> {
        self.lookup(key, default, "an integer", |s| s.parse().ok(), |x| x.to_string())
    }

    pub fn count(&mut self, key: &str, default: Option<usize>) -> Result<usize, ConfigError> {
        self.lookup(key, default, "a positive integer", |s| s.parse().ok().filter(|n| *n > 0), |x| x.to_string())
    }

    pub fn choice(&mut self, key: &str, default: Option<&str>, options: &[&str]) -> Result<String, ConfigError> {
        let expected = format!("one of {}", options.join("|"));
        let v = self.lookup(key, default.map(String::from), &expected, |s| options.iter().find(|o| o.eq_ignore_ascii_case(s)).map(|o| o.to_string()), |x| x.clone())?;
        Ok(v)
    }

    pub fn f64_list(&mut self, key: &str, default: Option<Vec<f64>>) -> Result<Vec<f64>, ConfigError> {
        self.lookup(
            key,
            default,
            "a comma-separated list of numbers",
            |s| {
                let v: Option<Vec<f64>> = s.split(',').map(|t| t.trim().parse::<f64>().ok().filter(|x| x.is_finite())).collect();
                v.filter(|v| !v.is_empty())
            },
            |v| v.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(","),
        )
    }

    pub fn choice_list(&mut self, key: &str, default: &str, options: &[&str]) -> Result<Vec<String>, ConfigError> {
        let expected = format!("a comma-separated subset of {}", options.join("|"));
        self.lookup(
            key,
            Some(default.split(',').map(String::from).collect()),
            &expected,
            |s| {
                let v: Option<Vec<String>> = s.split(',').map(|t| options.iter().find(|o| o.eq_ignore_ascii_case(t.trim())).map(|o| o.to_string())).collect();
                v.filter(|v| !v.is_empty())
            },
            |v| v.join(","),
        )
    }

    /// Fails on keys that were supplied but never consumed.
    pub fn finish(&self) -> Result<(), ConfigError> {
        let unknown: Vec<String> = self.raw.keys().filter(|k| !self.used.contains_key(*k)).cloned().collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Unknown(unknown))
        }
    }

    pub fn used(&self) -> &BTreeMap<String, String> {
        &self.used
    }

    /// SHA-256 over the command name and the normalized values in key order.
    pub fn hash(&self, command: &str) -> String {
        let mut h = Sha256::new();
        h.update(command.as_bytes());
        h.update(b"\n");
        h.update(render_config(&self.used).as_bytes());
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}
