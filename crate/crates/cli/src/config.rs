use std::path::{Path, PathBuf};

use egokit_core::metrics::MetricParams;
use egokit_core::retarget::RetargetParams;
use egokit_core::stabilizer::StabilizerParams;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Every tunable of the pipeline; the JSON config file mirrors this struct.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub stabilizer: StabilizerParams,
    pub retarget: RetargetParams,
    pub metrics: MetricParams,
    /// Frame rate used when keypoints carry no timestamps.
    pub fps: f64,
    pub output_dir: PathBuf,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            stabilizer: StabilizerParams::default(),
            retarget: RetargetParams::default(),
            metrics: MetricParams::default(),
            fps: 30.0,
            output_dir: PathBuf::from("out"),
            seed: 0x5EED,
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::InvalidInput(format!("config {}: {e}", path.display())))?;
        let cfg: Self = serde_json::from_str(&text).map_err(|e| CliError::InvalidInput(format!("config {}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Applies the command-line seed and output overrides; the single seed
    /// feeds every randomized component.
    pub fn with_overrides(mut self, seed: Option<u64>, out: Option<PathBuf>) -> Self {
        if let Some(s) = seed {
            self.seed = s;
        }
        if let Some(o) = out {
            self.output_dir = o;
        }
        self.stabilizer.ransac.seed = self.seed;
        self.metrics.ransac.seed = self.seed;
        self
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| CliError::InvalidInput(m);
        if !(self.fps > 0.0) {
            return Err(bad(format!("fps must be positive, got {}", self.fps)));
        }
        if !(self.stabilizer.sigma > 0.0) || !(self.metrics.sigma > 0.0) {
            return Err(bad("smoothing sigmas must be positive".into()));
        }
        if let Some(a) = self.stabilizer.aspect {
            if !(a > 0.0) {
                return Err(bad(format!("aspect must be positive, got {a}")));
            }
        }
        self.stabilizer.ransac.validate().map_err(|e| bad(e.to_string()))?;
        self.metrics.ransac.validate().map_err(|e| bad(e.to_string()))?;
        self.retarget.ik.validate().map_err(|e| bad(e.to_string()))?;
        if self.retarget.gripper.window.is_multiple_of(2) {
            return Err(bad("gripper window must be odd".into()));
        }
        if !(1..=5).contains(&self.retarget.averaged_mcps) {
            return Err(bad("averaged_mcps must be in 1..=5".into()));
        }
        Ok(())
    }
}
