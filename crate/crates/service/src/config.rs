use std::path::{Path, PathBuf};

use anyhow::Context;
use noisecache::{Dataset, DomainSchema, Engine, EngineConfig, Strictness};
use serde::Deserialize;

/// Service configuration file: engine settings plus where the data lives.
/// Relative paths are resolved against the directory of the config file.
#[derive(Debug, Clone, Deserialize)]
pub struct ServiceConfig {
    #[serde(flatten)]
    pub engine: EngineConfig,
    pub dataset_path: PathBuf,
    pub schema_path: PathBuf,
    /// Drop malformed CSV rows instead of refusing the file.
    #[serde(default)]
    pub lenient: bool,
}

impl ServiceConfig {
    pub fn load(path: impl AsRef<Path>) -> anyhow::Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg: Self = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.dataset_path = base.join(&cfg.dataset_path);
        cfg.schema_path = base.join(&cfg.schema_path);
        Ok(cfg)
    }

    pub fn build_engine(&self) -> anyhow::Result<Engine> {
        let schema = DomainSchema::load(&self.schema_path)
            .with_context(|| format!("loading schema {}", self.schema_path.display()))?;
        let mode = if self.lenient { Strictness::Lenient } else { Strictness::Strict };
        let data = Dataset::ingest_csv(&self.dataset_path, schema, mode)
            .with_context(|| format!("loading dataset {}", self.dataset_path.display()))?;
        if data.dropped() > 0 {
            tracing::warn!(dropped = data.dropped(), "skipped malformed dataset rows");
        }
        Ok(Engine::new(self.engine.clone(), data.into())?)
    }
}
