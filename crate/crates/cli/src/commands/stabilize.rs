use std::path::{Path, PathBuf};

use egokit_core::stabilizer::{stabilize_episode, StabilizedEpisode, StabilizerError};
use rayon::prelude::*;
use serde_json::json;

use crate::config::PipelineConfig;
use crate::error::CliError;
use crate::manifest::{list_frames, load_frames, EpisodeManifest};
use crate::output::AtomicDir;

pub const MASK_DILATION_KERNEL: usize = 5;
pub const MASK_DILATION_ITERATIONS: usize = 3;

fn stabilizer_error(e: StabilizerError) -> CliError {
    match e {
        StabilizerError::StabilizationFailed { frame, source } => {
            CliError::Stabilization { frame: Some(frame), message: format!("frame {frame}: {source}") }
        }
        StabilizerError::InvalidInput(m) => CliError::InvalidInput(m),
        other => CliError::Stabilization { frame: None, message: other.to_string() },
    }
}

/// Stabilizes one episode into `<output_dir>/<episode_id>`.
pub fn stabilize_one(manifest: &EpisodeManifest, cfg: &PipelineConfig) -> Result<PathBuf, CliError> {
    let files = list_frames(&manifest.frames_dir)?;
    let frames = load_frames(&files)?;
    let result = stabilize_episode(&frames, &cfg.stabilizer).map_err(stabilizer_error)?;
    write_episode(manifest, &files, &result, cfg)
}

fn write_episode(manifest: &EpisodeManifest, files: &[PathBuf], ep: &StabilizedEpisode, cfg: &PipelineConfig) -> Result<PathBuf, CliError> {
    let out = AtomicDir::create(&cfg.output_dir.join(&manifest.episode_id))?;
    let frames_dir = out.subdir("frames")?;
    let masks_dir = out.subdir("masks")?;
    ep.frames.par_iter().zip(&ep.masks).enumerate().try_for_each(|(i, (f, m))| -> Result<(), CliError> {
        let name = format!("{i:06}.pgm");
        f.write_pgm(&frames_dir.join(&name)).map_err(|e| CliError::Io(e.to_string()))?;
        m.dilate_invalid(MASK_DILATION_KERNEL, MASK_DILATION_ITERATIONS)
            .to_frame()
            .write_pgm(&masks_dir.join(&name))
            .map_err(|e| CliError::Io(e.to_string()))
    })?;
    out.write("path.txt", ep.path.to_lines())?;
    let source: Vec<String> = files.iter().map(|p| file_name(p)).collect();
    let (w, h) = (ep.frames[0].width(), ep.frames[0].height());
    let meta = json!({
        "episode_id": manifest.episode_id,
        "instruction": manifest.instruction,
        "fps": manifest.fps,
        "frames": ep.frames.len(),
        "width": w,
        "height": h,
        "source_frames": source,
        "rect": ep.rect,
        "inliers": ep.inliers,
        "mask_dilation": {"kernel": MASK_DILATION_KERNEL, "iterations": MASK_DILATION_ITERATIONS},
        "masks": "validity before hole filling; 255 = observed, 0 = filled",
        "path_file": "raw, smoothed, compensation homographies; one row-major line each, frames in order",
        "seed": cfg.seed,
        "config": cfg,
    });
    out.write("metadata.json", serde_json::to_string_pretty(&meta).expect("metadata serializes") + "\n")?;
    out.commit()
}

fn file_name(p: &Path) -> String {
    p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Validates every manifest before writing anything, then stabilizes the
/// episodes in parallel. Failures are reported per episode in input order.
pub fn run(manifests: &[PathBuf], cfg: &PipelineConfig) -> Vec<(String, Result<PathBuf, CliError>)> {
    let loaded: Vec<Result<EpisodeManifest, CliError>> = manifests.iter().map(|p| EpisodeManifest::load(p)).collect();
    if let Some(i) = loaded.iter().position(Result::is_err) {
        let err = loaded.into_iter().nth(i).expect("index in range").expect_err("checked");
        return vec![(manifests[i].display().to_string(), Err(err))];
    }
    let loaded: Vec<EpisodeManifest> = loaded.into_iter().map(|m| m.expect("checked")).collect();
    let mut ids: Vec<&str> = loaded.iter().map(|m| m.episode_id.as_str()).collect();
    ids.sort_unstable();
    if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
        return vec![(w[0].to_string(), Err(CliError::InvalidInput(format!("duplicate episode_id {:?}", w[0]))))];
    }
    loaded.par_iter().map(|m| (m.episode_id.clone(), stabilize_one(m, cfg))).collect()
}
