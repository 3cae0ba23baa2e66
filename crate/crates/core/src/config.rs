//! Run configuration: `key = value` lines, overridable per flag.
//!
//! ```text
//! # autoencoder run
//! seed = 7
//! d = 16
//! hidden = 64
//! lr = 0.005
//! epochs = 60
//! input = data/train.txt
//! model = runs/ae
//! ```

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};

/// Environment variable consulted when no seed is configured.
pub const SEED_ENV: &str = "ATPL_SEED";

/// Every key a config file may set.
pub const KNOWN_KEYS: &[&str] = &[
    "seed",
    // model dimensions
    "d",
    "hidden",
    "context",
    "embed",
    "inner",
    "max_len",
    "max_height",
    "feature_dim",
    // optimizer
    "lr",
    "epochs",
    "batch_size",
    "clip_norm",
    // corpus generation
    "train_size",
    "test_size",
    // paths
    "input",
    "test_input",
    "units",
    "test_units",
    "treebank",
    "tagged",
    "test_tagged",
    "captions",
    "candidates",
    "embeddings",
    "encodings",
    "autoencoder",
    "model",
    "out",
    "report",
    "confusion",
    // labels
    "split",
];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                column: i + 1,
                message: format!("expected `key = value`, got `{line}`"),
            })?;
            let key = key.trim();
            if !KNOWN_KEYS.contains(&key) {
                return Err(Error::Parse {
                    column: i + 1,
                    message: format!("unknown config key `{key}`"),
                });
            }
            cfg.values.insert(key.to_string(), value.trim().to_string());
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Overrides `key` when `value` is present.
    pub fn set<T: Display>(&mut self, key: &str, value: Option<T>) {
        debug_assert!(KNOWN_KEYS.contains(&key), "unregistered key {key}");
        if let Some(v) = value {
            self.values.insert(key.to_string(), v.to_string());
        }
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.values.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::Config(format!("`{key}`: cannot parse `{v}`"))),
        }
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.get(key)?.unwrap_or(default))
    }

    pub fn require<T: FromStr>(&self, key: &str) -> Result<T> {
        self.get(key)?
            .ok_or_else(|| Error::Config(format!("missing required setting `{key}` (flag --{})", flag(key))))
    }

    pub fn path(&self, key: &str) -> Option<PathBuf> {
        self.values.get(key).map(PathBuf::from)
    }

    /// Configured seed, else `ATPL_SEED`, else an error.
    pub fn seed(&self) -> Result<u64> {
        if let Some(s) = self.get::<u64>("seed")? {
            return Ok(s);
        }
        match std::env::var(SEED_ENV) {
            Ok(v) => v
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("{SEED_ENV}: cannot parse `{v}` as a seed"))),
            Err(_) => Err(Error::Config(format!(
                "a seed is required: pass --seed, set `seed` in the config, or set {SEED_ENV}"
            ))),
        }
    }

    /// An existing input file.
    pub fn input_file(&self, key: &str) -> Result<PathBuf> {
        let p: PathBuf = self.require(key)?;
        check_file(&p, key)?;
        Ok(p)
    }

    pub fn optional_input_file(&self, key: &str) -> Result<Option<PathBuf>> {
        match self.path(key) {
            Some(p) => check_file(&p, key).map(|_| Some(p)),
            None => Ok(None),
        }
    }

    /// An existing model directory.
    pub fn input_dir(&self, key: &str) -> Result<PathBuf> {
        let p: PathBuf = self.require(key)?;
        if !p.is_dir() {
            return Err(Error::Config(format!("`{key}`: {} is not a directory", p.display())));
        }
        Ok(p)
    }

    /// An output directory, created if needed.
    pub fn output_dir(&self, key: &str) -> Result<PathBuf> {
        let p: PathBuf = self.require(key)?;
        std::fs::create_dir_all(&p)
            .map_err(|e| Error::Config(format!("`{key}`: cannot create {}: {e}", p.display())))?;
        Ok(p)
    }

    /// An output file whose parent directory must exist.
    pub fn output_file(&self, key: &str) -> Result<Option<PathBuf>> {
        let Some(p) = self.path(key) else {
            return Ok(None);
        };
        match p.parent() {
            Some(dir) if !dir.as_os_str().is_empty() && !dir.is_dir() => Err(Error::Config(format!(
                "`{key}`: directory {} does not exist",
                dir.display()
            ))),
            _ => Ok(Some(p)),
        }
    }
}

fn flag(key: &str) -> String {
    key.replace('_', "-")
}

fn check_file(p: &Path, key: &str) -> Result<()> {
    if p.is_file() {
        Ok(())
    } else {
        Err(Error::Config(format!("`{key}`: no such file {}", p.display())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_overrides() {
        let mut c = RunConfig::parse("# run\nseed = 7\nlr=0.01\n\nd = 16\n").unwrap();
        assert_eq!(c.seed().unwrap(), 7);
        assert_eq!(c.get::<f64>("lr").unwrap(), Some(0.01));
        c.set("d", Some(32));
        c.set::<usize>("hidden", None);
        assert_eq!(c.require::<usize>("d").unwrap(), 32);
        assert_eq!(c.get_or("hidden", 64usize).unwrap(), 64);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_lines() {
        assert!(matches!(RunConfig::parse("colour = red"), Err(Error::Parse { column: 1, .. })));
        assert!(matches!(RunConfig::parse("seed = 1\nnonsense"), Err(Error::Parse { column: 2, .. })));
    }

    #[test]
    fn typed_errors() {
        let c = RunConfig::parse("epochs = many").unwrap();
        assert!(c.get::<usize>("epochs").is_err());
        assert!(c.require::<usize>("d").unwrap_err().to_string().contains("--d"));
    }

    #[test]
    fn path_checks() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = RunConfig::default();
        c.set("input", Some(dir.path().join("missing.txt").display()));
        assert!(c.input_file("input").is_err());
        std::fs::write(dir.path().join("a.txt"), "x").unwrap();
        c.set("input", Some(dir.path().join("a.txt").display()));
        assert!(c.input_file("input").is_ok());
        c.set("out", Some(dir.path().join("new/deeper").display()));
        assert!(c.output_dir("out").unwrap().is_dir());
        c.set("report", Some(dir.path().join("nope/r.csv").display()));
        assert!(c.output_file("report").is_err());
    }
}
