//! Flat `key = value` configuration files.
//!
//! One setting per line; `#` starts a comment line, blank lines are
//! ignored, and whitespace around keys and values is trimmed. Keys are the
//! long flag names of the subcommand (`theta`, `init`, `p-in`, ...).

use std::collections::BTreeMap;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConfigError {
    #[error("config line {line}: expected key = value")]
    MissingEquals { line: usize },
    #[error("config line {line}: empty key")]
    EmptyKey { line: usize },
    #[error("config line {line}: {key:?} is set twice")]
    DuplicateKey { line: usize, key: String },
    #[error("config key {key:?}: cannot parse {value:?}")]
    BadValue { key: String, value: String },
    #[error("unknown config key {0:?}")]
    UnknownKey(String),
}

pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>, ConfigError> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let row = raw.trim();
        if row.is_empty() || row.starts_with('#') {
            continue;
        }
        let (key, value) = row
            .split_once('=')
            .ok_or(ConfigError::MissingEquals { line })?;
        let key = key.trim();
        if key.is_empty() {
            return Err(ConfigError::EmptyKey { line });
        }
        if map
            .insert(key.to_owned(), value.trim().to_owned())
            .is_some()
        {
            return Err(ConfigError::DuplicateKey {
                line,
                key: key.to_owned(),
            });
        }
    }
    Ok(map)
}

/// Config values underneath command-line flags. Every key looked up is
/// remembered so leftovers can be reported as unknown.
#[derive(Debug, Default)]
pub struct Layered {
    values: BTreeMap<String, String>,
    consulted: Vec<String>,
}

impl Layered {
    pub fn new(values: BTreeMap<String, String>) -> Self {
        Self {
            values,
            consulted: Vec::new(),
        }
    }

    /// The flag value when given, otherwise the parsed config value.
    pub fn get<T: FromStr>(
        &mut self,
        key: &str,
        flag: Option<T>,
    ) -> Result<Option<T>, ConfigError> {
        self.consulted.push(key.to_owned());
        if flag.is_some() {
            return Ok(flag);
        }
        match self.values.get(key) {
            None => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|_| ConfigError::BadValue {
                key: key.to_owned(),
                value: v.clone(),
            }),
        }
    }

    pub fn switch(&mut self, key: &str, flag: bool) -> Result<bool, ConfigError> {
        Ok(self.get(key, flag.then_some(true))?.unwrap_or(false))
    }

    /// Fails on the first config key no lookup asked for.
    pub fn finish(self) -> Result<(), ConfigError> {
        match self.values.keys().find(|k| !self.consulted.contains(k)) {
            Some(k) => Err(ConfigError::UnknownKey(k.clone())),
            None => Ok(()),
        }
    }
}
