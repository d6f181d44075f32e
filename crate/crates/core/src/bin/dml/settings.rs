use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{Context, Result};
use dml_core::config::KeyValues;
use dml_core::Error;

/// Keys written into every manifest that a config file may carry back in.
const MANIFEST_KEYS: [&str; 2] = ["command", "code_version"];

/// Run settings: a config file overlaid with command-line flags, plus a log
/// of every value the run resolved, defaults included.
pub struct Settings {
    given: KeyValues,
    resolved: KeyValues,
    notes: Vec<String>,
}

impl Settings {
    pub fn new(config: Option<&Path>, flags: &KeyValues, allowed: &[&str]) -> Result<Self> {
        let mut given = match config {
            Some(path) => {
                require_file(path, "config file")?;
                KeyValues::load(path)?
            }
            None => KeyValues::new(),
        };
        given.merge(flags);
        for key in given.keys() {
            if !allowed.contains(&key) && !MANIFEST_KEYS.contains(&key) {
                return Err(Error::validation(format!("unknown setting `{key}`")).into());
            }
        }
        Ok(Self {
            given,
            resolved: KeyValues::new(),
            notes: Vec::new(),
        })
    }

    pub fn is_given(&self, key: &str) -> bool {
        self.given.get(key).is_some()
    }

    pub fn value<T: FromStr + Display>(&mut self, key: &str, default: T) -> Result<T> {
        let v = self.optional(key)?.unwrap_or(default);
        self.resolved.set(key, &v);
        Ok(v)
    }

    pub fn optional<T: FromStr + Display>(&mut self, key: &str) -> Result<Option<T>> {
        let Some(raw) = self.given.get(key) else {
            return Ok(None);
        };
        let v: T = raw
            .parse()
            .map_err(|_| Error::validation(format!("setting `{key}`: cannot parse `{raw}`")))?;
        self.resolved.set(key, &v);
        Ok(Some(v))
    }

    /// Comma-separated list.
    pub fn list<T: FromStr + Display + Clone>(&mut self, key: &str, default: &[T]) -> Result<Vec<T>> {
        let items = match self.given.get(key) {
            None => default.to_vec(),
            Some(raw) => raw
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| {
                    s.parse()
                        .map_err(|_| Error::validation(format!("setting `{key}`: cannot parse `{s}`")))
                })
                .collect::<std::result::Result<_, _>>()?,
        };
        if items.is_empty() {
            return Err(Error::validation(format!("setting `{key}` is empty")).into());
        }
        let text: Vec<String> = items.iter().map(ToString::to_string).collect();
        self.resolved.set(key, text.join(","));
        Ok(items)
    }

    pub fn path(&mut self, key: &str, default: impl Into<PathBuf>) -> Result<PathBuf> {
        let p: PathBuf = self.given.get(key).map(PathBuf::from).unwrap_or_else(|| default.into());
        self.resolved.set(key, p.display());
        Ok(p)
    }

    /// Free-form line recorded as a comment in the manifest.
    pub fn note(&mut self, line: impl Into<String>) {
        self.notes.push(line.into());
    }

    /// `key = value` text that reproduces the run when passed to `--config`.
    pub fn manifest(&self, command: &str) -> String {
        let mut m = KeyValues::new();
        m.set("command", command);
        m.set("code_version", env!("CARGO_PKG_VERSION"));
        m.merge(&self.resolved);
        let mut text = m.to_text();
        for n in &self.notes {
            text.push_str("# ");
            text.push_str(n);
            text.push('\n');
        }
        text
    }
}

pub fn require_file(path: &Path, what: &str) -> Result<()> {
    if !path.is_file() {
        return Err(Error::validation(format!("{what} {} does not exist", path.display())).into());
    }
    Ok(())
}

pub fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    Ok(())
}

/// Write through a temporary file so readers never see a partial artifact.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path.file_name().context("artifact path has no file name")?;
    let tmp = path.with_file_name(format!(".{}.tmp", name.to_string_lossy()));
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))?;
    Ok(())
}
