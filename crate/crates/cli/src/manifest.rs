use std::path::{Path, PathBuf};

use egokit_core::vision::Frame;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

const FRAME_EXTENSIONS: [&str; 4] = ["pgm", "png", "ppm", "pnm"];

/// One demonstration on disk. Relative paths resolve against the manifest's
/// own directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpisodeManifest {
    pub episode_id: String,
    pub frames_dir: PathBuf,
    #[serde(default)]
    pub keypoints_path: Option<PathBuf>,
    #[serde(default = "default_fps")]
    pub fps: f64,
    #[serde(default)]
    pub instruction: Option<String>,
}

fn default_fps() -> f64 {
    30.0
}

impl EpisodeManifest {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::InvalidInput(format!("manifest {}: {e}", path.display())))?;
        let mut m: Self = serde_json::from_str(&text).map_err(|e| CliError::InvalidInput(format!("manifest {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        m.frames_dir = base.join(&m.frames_dir);
        m.keypoints_path = m.keypoints_path.map(|k| base.join(k));
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let id_ok = !self.episode_id.is_empty()
            && !self.episode_id.starts_with('.')
            && self.episode_id.chars().all(|c| c.is_ascii_alphanumeric() || "_-.".contains(c));
        if !id_ok {
            return Err(CliError::InvalidInput(format!("episode_id {:?} must be non-empty [A-Za-z0-9_.-]", self.episode_id)));
        }
        if !(self.fps > 0.0) {
            return Err(CliError::InvalidInput(format!("fps must be positive, got {}", self.fps)));
        }
        list_frames(&self.frames_dir)?;
        Ok(())
    }
}

/// Image files of `dir` in lexicographic order. Names must be zero-padded
/// numbers of equal width.
pub fn list_frames(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let entries = std::fs::read_dir(dir).map_err(|e| CliError::InvalidInput(format!("frames_dir {}: {e}", dir.display())))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| CliError::InvalidInput(e.to_string()))?.path();
        let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
        if path.is_file() && ext.is_some_and(|e| FRAME_EXTENSIONS.contains(&e.as_str())) {
            files.push(path);
        }
    }
    if files.is_empty() {
        return Err(CliError::InvalidInput(format!("frames_dir {} holds no frames", dir.display())));
    }
    files.sort();
    let stem = |p: &PathBuf| p.file_stem().and_then(|s| s.to_str()).unwrap_or("").to_string();
    let width = stem(&files[0]).len();
    for f in &files {
        let s = stem(f);
        if s.is_empty() || s.len() != width || !s.bytes().all(|b| b.is_ascii_digit()) {
            return Err(CliError::InvalidInput(format!("frame name {} is not a zero-padded number of width {width}", f.display())));
        }
    }
    Ok(files)
}

/// Decodes frames in parallel and checks that they share dimensions.
pub fn load_frames(paths: &[PathBuf]) -> Result<Vec<Frame>, CliError> {
    let frames = paths
        .par_iter()
        .map(|p| Frame::load(p).map_err(|e| CliError::InvalidInput(format!("{}: {e}", p.display()))))
        .collect::<Result<Vec<_>, _>>()?;
    if let Some(first) = frames.first() {
        if let Some(i) = frames.iter().position(|f| !f.same_dims(first)) {
            return Err(CliError::InvalidInput(format!(
                "{} is {}x{}, expected {}x{}",
                paths[i].display(),
                frames[i].width(),
                frames[i].height(),
                first.width(),
                first.height()
            )));
        }
    }
    Ok(frames)
}
