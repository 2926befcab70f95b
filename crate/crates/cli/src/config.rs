//! Flat `key = value` configuration files. Keys mirror long flag names.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::CliError;

#[derive(Debug, Default, Clone, PartialEq)]
pub struct ConfigFile {
    entries: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut entries = BTreeMap::new();
        for (k, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Usage(format!("config line {}: expected key = value", k + 1))
            })?;
            let key = key.trim().trim_start_matches("--").to_string();
            if entries
                .insert(key.clone(), value.trim().to_string())
                .is_some()
            {
                return Err(CliError::Usage(format!("config key {key:?} given twice")));
            }
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Fills `slot` from `key` unless a flag already set it. The key is
    /// consumed either way.
    pub fn fill<T: FromStr>(&mut self, slot: &mut Option<T>, key: &str) -> Result<(), CliError> {
        let Some(value) = self.entries.remove(key) else {
            return Ok(());
        };
        if slot.is_none() {
            let parsed = value.parse().map_err(|_| {
                CliError::Usage(format!("config key {key}: invalid value {value:?}"))
            })?;
            *slot = Some(parsed);
        }
        Ok(())
    }

    pub fn fill_flag(&mut self, flag: &mut bool, key: &str) -> Result<(), CliError> {
        let mut v = None;
        self.fill(&mut v, key)?;
        *flag |= v.unwrap_or(false);
        Ok(())
    }

    /// Fails on any key no fill consumed.
    pub fn finish(self) -> Result<(), CliError> {
        match self.entries.keys().next() {
            Some(key) => Err(CliError::Usage(format!(
                "UnknownFlag: config key {key:?} is not accepted here"
            ))),
            None => Ok(()),
        }
    }
}
