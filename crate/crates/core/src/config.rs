//! `key = value` configuration files.
//!
//! One entry per line, `#` starts a comment, blank lines are ignored.
//! Values are parsed on demand by [`Config::take`]; anything not consumed by
//! the time [`Config::finish`] runs is reported as an unknown key.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::fiber::FiberSpec;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Config {
    entries: BTreeMap<String, (String, usize)>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Config(format!("line {line_no}: expected `key = value`")));
            };
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() || key.contains(char::is_whitespace) {
                return Err(Error::Config(format!("line {line_no}: bad key `{key}`")));
            }
            if let Some((_, first)) = entries.insert(key.to_string(), (value.to_string(), line_no)) {
                return Err(Error::Config(format!("line {line_no}: `{key}` already set on line {first}")));
            }
        }
        Ok(Config { entries })
    }

    /// Reads and parses `path`; I/O failures keep their I/O error kind.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Removes and parses `key`.
    pub fn take<T: FromStr>(&mut self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.entries.remove(key) {
            None => Ok(None),
            Some((value, line)) => value
                .parse()
                .map(Some)
                .map_err(|e| Error::Config(format!("line {line}: `{key} = {value}`: {e}"))),
        }
    }

    pub fn take_or<T: FromStr>(&mut self, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.take(key)?.unwrap_or(default))
    }

    /// Fiber from `{prefix}fiber` (`mmf10` or `mmf55`, default `default`)
    /// with optional overrides `{prefix}core_radius`, `na`, `wavelength`,
    /// `grid_size` and `window_side`.
    pub fn take_fiber(&mut self, prefix: &str, default: &str, default_grid: usize) -> Result<FiberSpec> {
        let key = |k: &str| format!("{prefix}{k}");
        let preset: String = self.take_or(&key("fiber"), default.to_string())?;
        let grid: usize = self.take_or(&key("grid_size"), default_grid)?;
        let mut spec = fiber_preset(&preset, grid)?;
        let mut overridden = false;
        if let Some(a) = self.take::<f64>(&key("core_radius"))? {
            spec.core_radius = a;
            spec.window_side = 6.0 * a;
            overridden = true;
        }
        if let Some(na) = self.take(&key("na"))? {
            spec.na = na;
            overridden = true;
        }
        if let Some(lambda) = self.take(&key("wavelength"))? {
            spec.wavelength = lambda;
            overridden = true;
        }
        if let Some(side) = self.take(&key("window_side"))? {
            spec.window_side = side;
            overridden = true;
        }
        if overridden {
            spec.validate()?;
        }
        Ok(spec)
    }

    /// Fails if any key was never consumed.
    pub fn finish(self) -> Result<()> {
        if self.entries.is_empty() {
            return Ok(());
        }
        let keys: Vec<String> = self.entries.iter().map(|(k, (_, line))| format!("`{k}` (line {line})")).collect();
        Err(Error::Config(format!("unknown keys: {}", keys.join(", "))))
    }
}

pub fn fiber_preset(name: &str, grid_size: usize) -> Result<FiberSpec> {
    match name {
        "mmf10" => FiberSpec::mmf10(grid_size),
        "mmf55" => FiberSpec::mmf55(grid_size),
        other => Err(Error::Config(format!("unknown fiber preset `{other}` (expected mmf10 or mmf55)"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_consumes() {
        let mut c = Config::parse("# comment\n\nseed = 7  # trailing\nfiber=mmf55\ngrid_size = 32\nna = 0.12\n").unwrap();
        assert_eq!(c.take::<u64>("seed").unwrap(), Some(7));
        assert_eq!(c.take::<u64>("seed").unwrap(), None);
        let spec = c.take_fiber("", "mmf10", 64).unwrap();
        assert_eq!(spec.grid_size, 32);
        assert_eq!(spec.core_radius, 12.5e-6);
        assert_eq!(spec.na, 0.12);
        c.finish().unwrap();
    }

    #[test]
    fn reports_problems() {
        assert!(matches!(Config::parse("novalue\n"), Err(Error::Config(_))));
        assert!(matches!(Config::parse("a = 1\na = 2\n"), Err(Error::Config(_))));
        let mut c = Config::parse("trials = many\nstray = 1\n").unwrap();
        assert!(c.take::<u64>("trials").is_err());
        let err = c.finish().unwrap_err().to_string();
        assert!(err.contains("stray"), "{err}");
        let mut bad = Config::parse("fiber = mmf99").unwrap();
        assert!(bad.take_fiber("", "mmf10", 64).is_err());
        let mut tiny = Config::parse("na = 1.5").unwrap();
        assert!(tiny.take_fiber("", "mmf10", 64).is_err());
    }
}
