//! Run configuration: one JSON document resolving every knob of a run.
//! Front ends overlay CLI flags on a loaded file and snapshot the resolved
//! result next to the outputs, so any run can be replayed bit-identically.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cubemap::SphereConfig;
use crate::error::{Error, Result};
use crate::multipass::MultiPassConfig;
use crate::perceptual::{ExtractorConfig, LossWeights};
use crate::solver::SolverConfig;
use crate::video::{InitStrategy, LongTermConfig};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct RunConfig {
    pub weights: LossWeights,
    pub solver: SolverConfig,
    pub longterm: LongTermConfig,
    pub init: InitStrategy,
    pub seed: u64,
    pub extractor: ExtractorConfig,
    pub multipass: MultiPassConfig,
    pub sphere: SphereConfig,
    /// Data-parallel worker count; `None` uses all cores. Results do not
    /// depend on it.
    pub workers: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            weights: LossWeights::default(),
            solver: SolverConfig::default(),
            longterm: LongTermConfig::default(),
            init: InitStrategy::PreviousWarped,
            seed: 0,
            extractor: ExtractorConfig::default(),
            multipass: MultiPassConfig::default(),
            sphere: SphereConfig::default(),
            workers: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Config(e.to_string()))?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn validate(&self) -> Result<()> {
        self.weights.validate()?;
        self.solver.validate()?;
        self.longterm.validate()?;
        self.multipass.validate()?;
        Ok(())
    }
}
