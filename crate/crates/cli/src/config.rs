//! Run configuration: a JSON file whose keys the command-line flags override.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use spnn::{ExperimentConfig, ModelKind, QuantileLevels};

use crate::Cli;

/// On-disk schema. Every key is optional; the experiment settings sit at the
/// top level next to `model`, `out` and `data`.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    #[serde(flatten)]
    pub experiment: ExperimentConfig,
    pub model: Option<String>,
    pub out: Option<PathBuf>,
    pub data: Vec<PathBuf>,
    /// Set when the level grid came from the file or `--levels`.
    #[serde(skip)]
    pub levels_explicit: bool,
}

impl RunConfig {
    pub fn resolve(cli: &Cli) -> Result<Self> {
        let mut cfg = match &cli.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
                let value: serde_json::Value =
                    serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
                let explicit = value.get("levels").is_some();
                let mut cfg: RunConfig =
                    serde_json::from_value(value).with_context(|| format!("parsing config {}", path.display()))?;
                cfg.levels_explicit = explicit;
                cfg
            }
            None => RunConfig::default(),
        };
        if let Some(seed) = cli.seed {
            cfg.experiment.seed = seed;
        }
        if let Some(out) = &cli.out {
            cfg.out = Some(out.clone());
        }
        if let Some(model) = &cli.model {
            cfg.model = Some(model.clone());
        }
        if let Some(levels) = &cli.levels {
            cfg.experiment.levels = levels.parse::<QuantileLevels>().context("parsing --levels")?;
            cfg.levels_explicit = true;
        }
        cfg.experiment.smoothing.validate()?;
        cfg.experiment.train.validate()?;
        Ok(cfg)
    }

    pub fn model_kind(&self) -> Result<ModelKind> {
        Ok(self.model.as_deref().unwrap_or("spnn1").parse()?)
    }

    pub fn out_dir(&self) -> Result<PathBuf> {
        let dir = self.out.clone().unwrap_or_else(|| PathBuf::from("."));
        std::fs::create_dir_all(&dir).with_context(|| format!("creating output directory {}", dir.display()))?;
        Ok(dir)
    }

    /// Data paths from the flags, falling back to the config file.
    pub fn data_paths(&self, flags: &[PathBuf]) -> Result<Vec<PathBuf>> {
        let paths = if flags.is_empty() { self.data.clone() } else { flags.to_vec() };
        if paths.is_empty() {
            bail!("no data files given (use --data or the config key \"data\")");
        }
        for p in &paths {
            if !Path::new(p).is_file() {
                bail!("data file {} does not exist", p.display());
            }
        }
        Ok(paths)
    }
}

/// Zone name of a data file: its stem.
pub fn zone_name(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "zone".into())
}
