//! Run configuration: `key=value` files overridden by command-line flags.
//!
//! Every key read while running a command is recorded with its final value
//! (defaults included) so that `run.json` can reproduce the run. A `run.json`
//! is itself accepted as a configuration file.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use endorse_core::{Error, Result};

#[derive(Debug, Default)]
pub struct Settings {
    values: BTreeMap<String, String>,
    resolved: RefCell<BTreeMap<String, String>>,
}

fn normalize(key: &str) -> String {
    key.trim().replace('_', "-")
}

impl Settings {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        if text.trim_start().starts_with('{') {
            return Self::from_run_json(&text);
        }
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Format {
                line: i as u64 + 1,
                message: format!("expected key=value, got '{line}'"),
            })?;
            values.insert(normalize(k), v.trim().to_string());
        }
        Ok(Self { values, ..Self::default() })
    }

    fn from_run_json(text: &str) -> Result<Self> {
        let v: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid run.json: {e}")))?;
        let config = v
            .get("config")
            .and_then(|c| c.as_object())
            .ok_or_else(|| Error::Config("run.json has no 'config' object".into()))?;
        let values = config
            .iter()
            .map(|(k, v)| (normalize(k), v.as_str().map_or_else(|| v.to_string(), String::from)))
            .collect();
        Ok(Self { values, ..Self::default() })
    }

    /// Flags take precedence over file values.
    pub fn set(&mut self, key: &str, value: impl Display) {
        self.values.insert(normalize(key), value.to_string());
    }

    pub fn set_opt<T: Display>(&mut self, key: &str, value: &Option<T>) {
        if let Some(v) = value {
            self.set(key, v);
        }
    }

    fn parse<T: FromStr>(&self, key: &str, raw: &str) -> Result<T>
    where
        T::Err: Display,
    {
        raw.parse::<T>()
            .map_err(|e| Error::Config(format!("invalid value '{raw}' for '{key}': {e}")))
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: Display,
    {
        match self.values.get(key) {
            Some(raw) => {
                let v = self.parse(key, raw)?;
                self.resolved.borrow_mut().insert(key.to_string(), raw.clone());
                Ok(Some(v))
            }
            None => Ok(None),
        }
    }

    pub fn require<T: FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: Display,
    {
        self.get(key)?
            .ok_or_else(|| Error::Config(format!("missing required key '{key}'")))
    }

    pub fn or<T: FromStr + Display>(&self, key: &str, default: T) -> Result<T>
    where
        T::Err: Display,
    {
        match self.get(key)? {
            Some(v) => Ok(v),
            None => {
                self.resolved.borrow_mut().insert(key.to_string(), default.to_string());
                Ok(default)
            }
        }
    }

    /// Every key read so far with its effective value.
    pub fn resolved(&self) -> BTreeMap<String, String> {
        self.resolved.borrow().clone()
    }
}

/// `START:STOP:NUM`, endpoints included; one point gives `[START]`.
pub fn parse_grid(key: &str, spec: &str) -> Result<Vec<f64>> {
    let bad = |why: &str| Error::Config(format!("invalid grid '{spec}' for '{key}': {why}"));
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(bad("expected START:STOP:NUM"));
    }
    let start: f64 = parts[0].trim().parse().map_err(|_| bad("bad START"))?;
    let stop: f64 = parts[1].trim().parse().map_err(|_| bad("bad STOP"))?;
    let num: usize = parts[2].trim().parse().map_err(|_| bad("bad NUM"))?;
    if num == 0 || !start.is_finite() || !stop.is_finite() {
        return Err(bad("NUM must be positive and endpoints finite"));
    }
    if num == 1 {
        return Ok(vec![start]);
    }
    Ok((0..num)
        .map(|i| start + (stop - start) * i as f64 / (num - 1) as f64)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_and_defaults_are_recorded() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        std::fs::write(&path, "# comment\nn = 8\nbeta_1=2.5\nlambda=0.9\n").unwrap();
        let mut s = Settings::from_file(&path).unwrap();
        s.set("lambda", 0.5);
        assert_eq!(s.require::<usize>("n").unwrap(), 8);
        assert_eq!(s.require::<f64>("beta-1").unwrap(), 2.5);
        assert_eq!(s.require::<f64>("lambda").unwrap(), 0.5);
        assert_eq!(s.or("m", 3u32).unwrap(), 3);
        let r = s.resolved();
        assert_eq!(r["m"], "3");
        assert_eq!(r["lambda"], "0.5");
        assert!(!r.contains_key("beta-2"));
    }

    #[test]
    fn missing_and_invalid_keys() {
        let s = Settings::default();
        let err = s.require::<f64>("beta1").unwrap_err().to_string();
        assert!(err.contains("'beta1'"));
        let mut s = Settings::default();
        s.set("n", "eight");
        assert!(s.require::<usize>("n").unwrap_err().to_string().contains("'n'"));
    }

    #[test]
    fn run_json_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.json");
        std::fs::write(&path, r#"{"command":"simulate","config":{"n":"8","seed":"3"}}"#).unwrap();
        let s = Settings::from_file(&path).unwrap();
        assert_eq!(s.require::<u64>("seed").unwrap(), 3);
    }

    #[test]
    fn grids() {
        assert_eq!(parse_grid("g", "0:1:3").unwrap(), vec![0.0, 0.5, 1.0]);
        assert_eq!(parse_grid("g", "2:9:1").unwrap(), vec![2.0]);
        assert!(parse_grid("g", "0:1").is_err());
        assert!(parse_grid("g", "0:1:0").is_err());
    }
}
