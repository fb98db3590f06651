//! Flat `key = value` configuration files.
//!
//! One parameter per line; `#` starts a comment; blank lines are ignored.
//! Later assignments of the same key override earlier ones.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FlatConfig {
    entries: BTreeMap<String, (usize, String)>,
}

impl FlatConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(line_no, format!("expected `key = value`, got `{line}`")))?;
            let key = key.trim();
            if key.is_empty() {
                return Err(Error::parse(line_no, "empty key"));
            }
            entries.insert(key.to_string(), (line_no, value.trim().to_string()));
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::parse(&text)
    }

    pub fn get_str(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(_, v)| v.as_str())
    }

    pub fn get<T>(&self, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        match self.entries.get(key) {
            None => Ok(None),
            Some((line, v)) => v
                .parse::<T>()
                .map(Some)
                .map_err(|e| Error::parse(*line, format!("{key}: {e}"))),
        }
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn set(&mut self, key: &str, value: impl Display) {
        self.entries.insert(key.to_string(), (0, value.to_string()));
    }

    /// Fails on the first key not accepted by `known`.
    pub fn reject_unknown(&self, known: impl Fn(&str) -> bool) -> Result<()> {
        for (k, (line, _)) in &self.entries {
            if !known(k) {
                return Err(Error::parse(*line, format!("unknown key `{k}`")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_blank_lines() {
        let cfg = FlatConfig::parse("# header\n\nnoise_sigma = 0.02  # per sample\nwindow_m=5\n").unwrap();
        assert_eq!(cfg.get::<f64>("noise_sigma").unwrap(), Some(0.02));
        assert_eq!(cfg.get::<usize>("window_m").unwrap(), Some(5));
        assert_eq!(cfg.get::<usize>("missing").unwrap(), None);
    }

    #[test]
    fn reports_line_of_bad_value() {
        let cfg = FlatConfig::parse("a = 1\nb = x\n").unwrap();
        match cfg.get::<f64>("b") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_line_without_equals() {
        assert!(FlatConfig::parse("just text\n").is_err());
    }
}
