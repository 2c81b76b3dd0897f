use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{fail, io_at, CliResult, Failure};

/// Settings readable from `--config`. Keys mirror the long flag names;
/// relative paths resolve against the config file's directory.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct Config {
    pub jobs: Option<usize>,
    pub table: Option<PathBuf>,
    pub latin_threshold: Option<f64>,
    pub extra_hyphens: Option<Vec<char>>,
    pub normalize: Option<bool>,
    pub iou: Option<f64>,
    pub lexicon: Option<PathBuf>,
    pub date: Option<String>,
}

impl Config {
    pub fn load(path: &Path) -> CliResult<Config> {
        let text = std::fs::read_to_string(path).map_err(io_at(path))?;
        let mut cfg: Config = toml::from_str(&text).map_err(|e| {
            fail(
                Failure::Parse,
                anyhow::Error::new(e).context(path.display().to_string()),
            )
        })?;
        let base = path.parent().unwrap_or_else(|| Path::new(""));
        for p in [&mut cfg.table, &mut cfg.lexicon].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }
}
