//! Sectioned `key = value` configuration text.
//!
//! ```text
//! # comment
//! [section]
//! key = value
//! ```
//! Every key must be consumed by the caller; leftovers are reported by
//! [`ConfigDoc::finish`].

use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{AaiError, Result};

#[derive(Debug, Clone)]
struct Entry {
    section: String,
    key: String,
    value: String,
    line: usize,
    used: bool,
}

#[derive(Debug, Clone)]
pub struct ConfigDoc {
    origin: String,
    entries: Vec<Entry>,
}

impl ConfigDoc {
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut section = String::new();
        let mut entries: Vec<Entry> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let s = raw.split('#').next().unwrap_or("").trim();
            if s.is_empty() {
                continue;
            }
            if let Some(rest) = s.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| AaiError::config(format!("{origin}:{line}: unterminated section header")))?;
                section = name.trim().to_string();
                continue;
            }
            let (k, v) = s
                .split_once('=')
                .ok_or_else(|| AaiError::config(format!("{origin}:{line}: expected key = value")))?;
            let key = k.trim().to_string();
            if section.is_empty() {
                return Err(AaiError::config(format!("{origin}:{line}: key '{key}' outside any section")));
            }
            if entries.iter().any(|e| e.section == section && e.key == key) {
                return Err(AaiError::config(format!("{origin}:{line}: duplicate key [{section}] {key}")));
            }
            entries.push(Entry {
                section: section.clone(),
                key,
                value: v.trim().to_string(),
                line,
                used: false,
            });
        }
        Ok(ConfigDoc {
            origin: origin.to_string(),
            entries,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            AaiError::config(format!("cannot read configuration {}: {e}", path.display()))
        })?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn origin(&self) -> &str {
        &self.origin
    }

    /// Raw string value; marks the key as consumed.
    pub fn raw(&mut self, section: &str, key: &str) -> Option<(String, usize)> {
        let e = self
            .entries
            .iter_mut()
            .find(|e| e.section == section && e.key == key)?;
        e.used = true;
        Some((e.value.clone(), e.line))
    }

    pub fn get<T: FromStr>(&mut self, section: &str, key: &str) -> Result<Option<T>> {
        match self.raw(section, key) {
            None => Ok(None),
            Some((v, line)) => v.parse::<T>().map(Some).map_err(|_| {
                AaiError::config(format!(
                    "{}:{line}: cannot parse [{section}] {key} = '{v}'",
                    self.origin
                ))
            }),
        }
    }

    pub fn get_or<T: FromStr>(&mut self, section: &str, key: &str, default: T) -> Result<T> {
        Ok(self.get(section, key)?.unwrap_or(default))
    }

    pub fn require<T: FromStr>(&mut self, section: &str, key: &str) -> Result<T> {
        self.get(section, key)?
            .ok_or_else(|| AaiError::config(format!("{}: missing [{section}] {key}", self.origin)))
    }

    /// Comma-separated list.
    pub fn list<T: FromStr>(&mut self, section: &str, key: &str) -> Result<Option<Vec<T>>> {
        match self.raw(section, key) {
            None => Ok(None),
            Some((v, line)) => v
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| {
                    s.parse::<T>().map_err(|_| {
                        AaiError::config(format!(
                            "{}:{line}: cannot parse item '{s}' of [{section}] {key}",
                            self.origin
                        ))
                    })
                })
                .collect::<Result<Vec<T>>>()
                .map(Some),
        }
    }

    /// Path value, resolved relative to the configuration file's directory.
    pub fn path(&mut self, section: &str, key: &str) -> Result<Option<PathBuf>> {
        let Some((v, _)) = self.raw(section, key) else {
            return Ok(None);
        };
        let p = PathBuf::from(v);
        if p.is_absolute() {
            return Ok(Some(p));
        }
        let base = Path::new(&self.origin).parent().unwrap_or(Path::new(""));
        Ok(Some(base.join(p)))
    }

    /// Errors on the first key nobody asked for.
    pub fn finish(self) -> Result<()> {
        match self.entries.iter().find(|e| !e.used) {
            None => Ok(()),
            Some(e) => Err(AaiError::config(format!(
                "{}:{}: unknown key [{}] {}",
                self.origin, e.line, e.section, e.key
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_tracks_usage() {
        let mut d = ConfigDoc::parse("# c\n[a]\nx = 3 # trailing\ny = 1.5, 2\n[b]\nz = hi\n", "t.conf").unwrap();
        assert_eq!(d.require::<usize>("a", "x").unwrap(), 3);
        assert_eq!(d.list::<f64>("a", "y").unwrap().unwrap(), vec![1.5, 2.0]);
        assert!(d.clone().finish().unwrap_err().to_string().contains("[b] z"));
        assert_eq!(d.get::<String>("b", "z").unwrap().unwrap(), "hi");
        d.finish().unwrap();
    }

    #[test]
    fn rejects_malformed() {
        assert!(ConfigDoc::parse("x = 1\n", "t").is_err());
        assert!(ConfigDoc::parse("[a]\nnot a pair\n", "t").is_err());
        assert!(ConfigDoc::parse("[a]\nx=1\nx=2\n", "t").is_err());
        let mut d = ConfigDoc::parse("[a]\nx = q\n", "t").unwrap();
        assert!(d.get::<usize>("a", "x").is_err());
    }

    #[test]
    fn relative_paths_follow_config_dir() {
        let mut d = ConfigDoc::parse("[a]\np = data/m.tsv\nq = /abs\n", "/etc/exp/run.conf").unwrap();
        assert_eq!(d.path("a", "p").unwrap().unwrap(), PathBuf::from("/etc/exp/data/m.tsv"));
        assert_eq!(d.path("a", "q").unwrap().unwrap(), PathBuf::from("/abs"));
    }
}
