//! Flat `key = value` configuration with flag and environment overrides.
//!
//! Precedence: command-line flag, then `TMS_<KEY>` environment variable,
//! then the config file, then the built-in default.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Origin {
    File(usize),
    Override,
}

#[derive(Clone, Debug, Default)]
pub struct Settings {
    values: BTreeMap<String, (String, Origin)>,
}

impl Settings {
    /// Reads `path` (if any), accepting only keys in `allowed`.
    pub fn load(path: Option<&Path>, allowed: &[&str]) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text, allowed)
    }

    pub fn parse(text: &str, allowed: &[&str]) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                CliError::Config(format!("config line {line_no}: expected `key = value`, got `{line}`"))
            })?;
            let (k, v) = (k.trim(), v.trim());
            if !allowed.contains(&k) {
                return Err(CliError::Config(format!(
                    "config line {line_no}: unknown key `{k}` (allowed: {})",
                    allowed.join(", ")
                )));
            }
            if values
                .insert(k.to_string(), (v.to_string(), Origin::File(line_no)))
                .is_some()
            {
                return Err(CliError::Config(format!("config line {line_no}: duplicate key `{k}`")));
            }
        }
        Ok(Self { values })
    }

    /// Flag or environment value; wins over the file.
    pub fn set(&mut self, key: &str, value: Option<&String>) {
        if let Some(v) = value {
            self.values.insert(key.to_string(), (v.clone(), Origin::Override));
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(|(v, _)| v.as_str())
    }

    pub fn invalid(&self, key: &str, msg: impl std::fmt::Display) -> CliError {
        let at = match self.values.get(key).map(|(_, o)| *o) {
            Some(Origin::File(l)) => format!(" (config line {l})"),
            _ => String::new(),
        };
        CliError::Config(format!("field `{key}`{at}: {msg}"))
    }

    /// Parsed value of `key`, or `default` when absent.
    pub fn value<T: FromStr>(&self, key: &str, default: T) -> Result<T, CliError>
    where
        T::Err: std::fmt::Display,
    {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|e| self.invalid(key, format!("cannot parse `{v}`: {e}"))),
        }
    }

    pub fn optional<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|e| self.invalid(key, format!("cannot parse `{v}`: {e}"))),
        }
    }

    pub fn required(&self, key: &str) -> Result<&str, CliError> {
        self.get(key).ok_or_else(|| self.invalid(key, "is required"))
    }

    pub fn positive(&self, key: &str, default: f64) -> Result<f64, CliError> {
        let v: f64 = self.value(key, default)?;
        if !(v > 0.0 && v.is_finite()) {
            return Err(self.invalid(key, format!("must be positive, got {v}")));
        }
        Ok(v)
    }

    /// Comma-separated list of reals.
    pub fn list(&self, key: &str, default: &[f64]) -> Result<Vec<f64>, CliError> {
        match self.get(key) {
            None => Ok(default.to_vec()),
            Some(v) if v.trim().is_empty() => Ok(Vec::new()),
            Some(v) => v
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|e| self.invalid(key, format!("cannot parse `{}`: {e}", s.trim())))
                })
                .collect(),
        }
    }

    pub fn check(&self, key: &str, ok: bool, msg: impl std::fmt::Display) -> Result<(), CliError> {
        if ok {
            Ok(())
        } else {
            Err(self.invalid(key, msg))
        }
    }

    /// Effective configuration, echoed into the envelope.
    pub fn echo(&self) -> BTreeMap<String, String> {
        self.values.iter().map(|(k, (v, _))| (k.clone(), v.clone())).collect()
    }

    pub fn from_echo(map: &BTreeMap<String, String>) -> Self {
        Self {
            values: map
                .iter()
                .map(|(k, v)| (k.clone(), (v.clone(), Origin::Override)))
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_overrides() {
        let mut s = Settings::parse("# comment\nsurface = torus\n\nn = 16  # side\n", &["surface", "n", "p"]).unwrap();
        assert_eq!(s.get("surface"), Some("torus"));
        assert_eq!(s.value::<usize>("n", 0).unwrap(), 16);
        s.set("n", Some(&"32".to_string()));
        assert_eq!(s.value::<usize>("n", 0).unwrap(), 32);
        assert_eq!(s.value::<f64>("p", 2.0).unwrap(), 2.0);
    }

    #[test]
    fn errors_name_line_and_field() {
        let e = Settings::parse("n = 4\nbogus = 1\n", &["n"]).unwrap_err();
        assert!(e.to_string().contains("config line 2"), "{e}");
        let e = Settings::parse("n 4\n", &["n"]).unwrap_err();
        assert!(e.to_string().contains("config line 1"));
        let s = Settings::parse("\np = abc\n", &["p"]).unwrap();
        let e = s.value::<f64>("p", 2.0).unwrap_err();
        assert!(e.to_string().contains("field `p` (config line 2)"), "{e}");
        assert!(Settings::parse("n = 1\nn = 2\n", &["n"]).is_err());
    }

    #[test]
    fn lists() {
        let s = Settings::parse("eps = 1, 0.5,0.25\nempty =\n", &["eps", "empty"]).unwrap();
        assert_eq!(s.list("eps", &[]).unwrap(), vec![1.0, 0.5, 0.25]);
        assert!(s.list("empty", &[1.0]).unwrap().is_empty());
        assert_eq!(s.list("other", &[3.0]).unwrap(), vec![3.0]);
    }
}
