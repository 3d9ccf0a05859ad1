use std::path::{Path, PathBuf};

use egokit_core::geometry::{rigid_fit, Vec3};
use serde::Deserialize;
use serde_json::json;

use crate::config::PipelineConfig;
use crate::error::CliError;
use crate::output::AtomicDir;

/// Corresponding points in the human and robot frames.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointPairs {
    pub human: Vec<[f64; 3]>,
    pub robot: Vec<[f64; 3]>,
}

pub fn run(pairs: &Path, name: Option<&str>, cfg: &PipelineConfig) -> Result<PathBuf, CliError> {
    let text = std::fs::read_to_string(pairs).map_err(|e| CliError::InvalidInput(format!("{}: {e}", pairs.display())))?;
    let p: PointPairs = serde_json::from_str(&text).map_err(|e| CliError::InvalidInput(format!("{}: {e}", pairs.display())))?;
    let src: Vec<Vec3> = p.human.iter().map(|v| Vec3::from(*v)).collect();
    let dst: Vec<Vec3> = p.robot.iter().map(|v| Vec3::from(*v)).collect();
    let pose = rigid_fit(&src, &dst).map_err(|e| CliError::InvalidInput(e.to_string()))?;
    let residuals: Vec<f64> = src.iter().zip(&dst).map(|(s, d)| (pose.transform_point(s) - d).norm()).collect();
    let rms = (residuals.iter().map(|r| r * r).sum::<f64>() / residuals.len() as f64).sqrt();

    let out = AtomicDir::create(&cfg.output_dir.join(name.unwrap_or("calibration")))?;
    out.write("calibration.json", serde_json::to_string_pretty(&pose).expect("pose serializes") + "\n")?;
    let meta = json!({
        "pairs": residuals.len(),
        "rms_residual": rms,
        "max_residual": residuals.iter().copied().fold(0.0, f64::max),
        "maps": "human frame to robot base frame",
    });
    out.write("metadata.json", serde_json::to_string_pretty(&meta).expect("metadata serializes") + "\n")?;
    out.commit()
}
