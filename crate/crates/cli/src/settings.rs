//! Flag / config-file / environment layering for `simulate` and `pipeline`.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use alignpot::io::parse_key_values;

use crate::CliError;

pub const SEED_ENV: &str = "ALIGNPOT_SEED";

/// Values from a flat `key = value` file. Keys use underscores.
#[derive(Debug, Default)]
pub struct FileSettings {
    values: BTreeMap<String, String>,
}

impl FileSettings {
    pub fn load(path: Option<&Path>, allowed: &[&str]) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let values = parse_key_values(&text)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        if let Some(bad) = values.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(CliError::Usage(format!(
                "{}: unknown key {bad:?} (known: {})",
                path.display(),
                allowed.join(", ")
            )));
        }
        Ok(FileSettings { values })
    }

    fn parse<T>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T: FromStr,
        T::Err: Display,
    {
        self.values
            .get(key)
            .map(|raw| {
                raw.parse::<T>().map_err(|e| {
                    CliError::Usage(format!("config key {key}: cannot parse {raw:?}: {e}"))
                })
            })
            .transpose()
    }

    /// Flag value if given, else the config value, else `default`.
    pub fn pick<T>(&self, key: &str, flag: Option<T>, default: T) -> Result<T, CliError>
    where
        T: FromStr,
        T::Err: Display,
    {
        Ok(match flag {
            Some(v) => v,
            None => self.parse(key)?.unwrap_or(default),
        })
    }

    pub fn pick_opt<T>(&self, key: &str, flag: Option<T>) -> Result<Option<T>, CliError>
    where
        T: FromStr,
        T::Err: Display,
    {
        match flag {
            Some(v) => Ok(Some(v)),
            None => self.parse(key),
        }
    }

    /// `--seed`, then the config file, then `$ALIGNPOT_SEED`, then 0.
    pub fn seed(&self, flag: Option<u64>) -> Result<u64, CliError> {
        if let Some(s) = self.pick_opt("seed", flag)? {
            return Ok(s);
        }
        env_seed()
    }
}

pub fn env_seed() -> Result<u64, CliError> {
    match std::env::var(SEED_ENV) {
        Ok(raw) => raw
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("{SEED_ENV}={raw:?} is not an unsigned integer"))),
        Err(_) => Ok(0),
    }
}
