//! Layered settings: command-line flags, then `SPACE_*` environment
//! variables (both handled by clap), then an optional TOML file.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Deserialize;

/// Keys accepted in the config file. All are optional.
#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub phenomenon: Option<String>,
    pub mode: Option<String>,
    pub hierarchy: Option<PathBuf>,
    pub stations: Option<PathBuf>,
    pub rules: Option<PathBuf>,
    pub jobs: Option<usize>,
    pub seed: Option<u64>,
    pub endpoint: Option<String>,
    pub rate: Option<f64>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: FileConfig =
            toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        // Relative paths in the file are relative to the file.
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.hierarchy, &mut cfg.stations, &mut cfg.rules].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }
}

/// First present value of flag/env, then file, then default.
pub fn layer<T>(cli: Option<T>, file: Option<T>, default: T) -> T {
    cli.or(file).unwrap_or(default)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence() {
        assert_eq!(layer(Some(1), Some(2), 3), 1);
        assert_eq!(layer(None, Some(2), 3), 2);
        assert_eq!(layer(None, None, 3), 3);
    }

    #[test]
    fn file_paths_resolve_against_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("space.toml");
        std::fs::write(&path, "jobs = 4\nhierarchy = \"h.txt\"\n").unwrap();
        let cfg = FileConfig::load(Some(&path)).unwrap();
        assert_eq!(cfg.jobs, Some(4));
        assert_eq!(cfg.hierarchy, Some(dir.path().join("h.txt")));
        std::fs::write(&path, "bogus = 1\n").unwrap();
        assert!(FileConfig::load(Some(&path)).is_err());
    }
}
