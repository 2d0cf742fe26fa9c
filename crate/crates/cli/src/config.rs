use std::path::Path;

use fabscan_core::cascade::PipelineConfig;
use fabscan_core::eval::BenchSpec;
use fabscan_core::synthgen::{CorpusSpec, FabricSpec};
use serde::{Deserialize, Serialize};

/// Everything a run can tune. Missing tables and keys take their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub pipeline: PipelineConfig,
    pub fabric: FabricSpec,
    pub corpus: CorpusSpec,
    pub bench: BenchSpec,
    /// Defect-free images rendered for training by `generate`.
    pub train_count: usize,
    /// Seeds swept by `bench-boi`.
    pub bench_seeds: usize,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            pipeline: PipelineConfig::default(),
            fabric: FabricSpec::default(),
            corpus: CorpusSpec::default(),
            bench: BenchSpec::default(),
            train_count: 20,
            bench_seeds: 10,
        }
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        toml::from_str(&text).map_err(|e| format!("invalid config {}: {e}", path.display()))
    }
}
