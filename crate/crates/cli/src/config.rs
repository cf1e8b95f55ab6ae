//! Option resolution: CLI flag > MICSEL_* environment variable > config
//! file > built-in default. Every failure names the offending key.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use micsel::error::{Error, Result};

/// Flat key-value config file (JSON object). Keys match the long CLI flag
/// names with dashes, e.g. {"bpc": 0.1, "scheme": "partial-mic"}.
pub struct Resolver {
    file: BTreeMap<String, serde_json::Value>,
}

impl Resolver {
    pub fn from_file(path: Option<&Path>) -> Result<Self> {
        let file = match path {
            None => BTreeMap::new(),
            Some(p) => {
                let raw = std::fs::read_to_string(p).map_err(|source| Error::Io {
                    path: p.to_path_buf(),
                    source,
                })?;
                serde_json::from_str(&raw)
                    .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
            }
        };
        Ok(Self { file })
    }

    /// Reject config files with keys nothing consumes.
    pub fn check_known_keys(&self, known: &[&str]) -> Result<()> {
        for key in self.file.keys() {
            if !known.contains(&key.as_str()) {
                return Err(Error::Config(format!("unknown config key {key:?}")));
            }
        }
        Ok(())
    }

    fn env_key(key: &str) -> String {
        format!("MICSEL_{}", key.replace('-', "_").to_uppercase())
    }

    /// Resolve one option. `cli` wins, then the environment, then the file.
    pub fn get<T>(&self, cli: Option<T>, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        if cli.is_some() {
            return Ok(cli);
        }
        let env_key = Self::env_key(key);
        if let Ok(raw) = std::env::var(&env_key) {
            return raw
                .parse::<T>()
                .map(Some)
                .map_err(|e| Error::Config(format!("{env_key}={raw:?}: {e}")));
        }
        match self.file.get(key) {
            None => Ok(None),
            Some(value) => {
                let raw = match value {
                    serde_json::Value::String(s) => s.clone(),
                    other => other.to_string(),
                };
                raw.parse::<T>()
                    .map(Some)
                    .map_err(|e| Error::Config(format!("config key {key:?} = {raw:?}: {e}")))
            }
        }
    }

    /// Resolve with a default.
    pub fn get_or<T>(&self, cli: Option<T>, key: &str, default: T) -> Result<T>
    where
        T: FromStr,
        T::Err: Display,
    {
        Ok(self.get(cli, key)?.unwrap_or(default))
    }

    /// Boolean flags: a bare CLI flag is `true`; env/file accept
    /// true/false/1/0.
    pub fn get_flag(&self, cli: bool, key: &str) -> Result<bool> {
        if cli {
            return Ok(true);
        }
        let parse = |raw: &str, whence: String| match raw {
            "true" | "1" | "yes" => Ok(true),
            "false" | "0" | "no" => Ok(false),
            other => Err(Error::Config(format!("{whence}: expected a boolean, got {other:?}"))),
        };
        let env_key = Self::env_key(key);
        if let Ok(raw) = std::env::var(&env_key) {
            return parse(&raw, env_key);
        }
        match self.file.get(key) {
            None => Ok(false),
            Some(serde_json::Value::Bool(b)) => Ok(*b),
            Some(other) => parse(&other.to_string(), format!("config key {key:?}")),
        }
    }
}
