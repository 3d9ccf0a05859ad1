use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use egokit_core::metrics::{
    delta_report, episode_metrics, summarize_category, AggregateMode, CategorySummary, EpisodeMetrics, EpisodeSummary,
};
use egokit_core::vision::ValidityMask;
use serde::Serialize;
use serde_json::json;

use crate::config::PipelineConfig;
use crate::error::CliError;
use crate::manifest::{list_frames, load_frames};
use crate::output::{fmt_sig, AtomicDir};

pub const DEFAULT_CATEGORY: &str = "default";

/// An episode directory found under a metrics root.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct EpisodeEntry {
    pub category: String,
    pub episode: String,
    pub frames_dir: PathBuf,
    pub masks_dir: Option<PathBuf>,
}

fn visible_dirs(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let mut out = Vec::new();
    for e in std::fs::read_dir(dir).map_err(|e| CliError::InvalidInput(format!("{}: {e}", dir.display())))? {
        let p = e?.path();
        let hidden = p.file_name().is_some_and(|n| n.to_string_lossy().starts_with('.'));
        if p.is_dir() && !hidden {
            out.push(p);
        }
    }
    out.sort();
    Ok(out)
}

fn as_episode(dir: &Path, category: &str) -> Result<Option<EpisodeEntry>, CliError> {
    let name = dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let frames = dir.join("frames");
    let frames_dir = if frames.is_dir() {
        frames
    } else if list_frames(dir).is_ok_and(|f| !f.is_empty()) {
        dir.to_path_buf()
    } else {
        return Ok(None);
    };
    let masks = dir.join("masks");
    Ok(Some(EpisodeEntry { category: category.to_string(), episode: name, frames_dir, masks_dir: masks.is_dir().then_some(masks) }))
}

/// Finds `<root>/<category>/<episode>` directories, or `<root>/<episode>`
/// ones which land in the default category.
pub fn discover(root: &Path) -> Result<Vec<EpisodeEntry>, CliError> {
    if !root.is_dir() {
        return Err(CliError::InvalidInput(format!("{} is not a directory", root.display())));
    }
    let mut found = Vec::new();
    for d in visible_dirs(root)? {
        if let Some(ep) = as_episode(&d, DEFAULT_CATEGORY)? {
            found.push(ep);
            continue;
        }
        let cat = d.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        for e in visible_dirs(&d)? {
            if let Some(ep) = as_episode(&e, &cat)? {
                found.push(ep);
            }
        }
    }
    if found.is_empty() {
        return Err(CliError::InvalidInput(format!("no episodes under {}", root.display())));
    }
    found.sort();
    Ok(found)
}

pub fn measure(ep: &EpisodeEntry, cfg: &PipelineConfig) -> Result<EpisodeMetrics, CliError> {
    let files = list_frames(&ep.frames_dir)?;
    let frames = load_frames(&files)?;
    let masks = match &ep.masks_dir {
        None => None,
        Some(d) => {
            let m = load_frames(&list_frames(d)?)?;
            if m.len() != frames.len() {
                return Err(CliError::InvalidInput(format!("{}: {} masks for {} frames", ep.episode, m.len(), frames.len())));
            }
            Some(m.iter().map(ValidityMask::from_frame).collect::<Vec<_>>())
        }
    };
    episode_metrics(&frames, masks.as_deref(), &cfg.metrics)
        .map_err(|e| CliError::InvalidInput(format!("{}/{}: {e}", ep.category, ep.episode)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeltaCell {
    pub before: f64,
    pub after: f64,
    /// `None` when the baseline is zero.
    pub delta_pct: Option<f64>,
    pub display: String,
}

pub fn delta_cell(before: f64, after: f64) -> DeltaCell {
    let delta_pct = delta_report(before, after).ok().map(|d| d.delta_pct);
    let pct = delta_pct.map_or_else(|| "n/a".to_string(), |p| format!("{p:+.1}%"));
    DeltaCell { before, after, delta_pct, display: format!("{:.4} -> {:.4} ({pct})", before, after) }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CategoryReport {
    pub videos: usize,
    pub frames: usize,
    pub stability: DeltaCell,
    pub jitter_rms: DeltaCell,
    pub h_rmse: DeltaCell,
    pub occ_mse: DeltaCell,
}

fn category_report(b: &CategorySummary, a: &CategorySummary) -> CategoryReport {
    CategoryReport {
        videos: b.videos,
        frames: b.frames,
        stability: delta_cell(b.stability, a.stability),
        jitter_rms: delta_cell(b.jitter_rms, a.jitter_rms),
        h_rmse: delta_cell(b.h_rmse, a.h_rmse),
        occ_mse: delta_cell(b.occ_mse, a.occ_mse),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpisodeReport {
    pub category: String,
    pub episode: String,
    pub before: EpisodeSummary,
    pub after: EpisodeSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub categories: BTreeMap<String, CategoryReport>,
    pub per_video_equal: BTreeMap<String, CategoryReport>,
    pub all: CategoryReport,
    pub all_per_video_equal: CategoryReport,
    pub episodes: Vec<EpisodeReport>,
}

fn keys(eps: &[EpisodeEntry]) -> Vec<(String, String)> {
    eps.iter().map(|e| (e.category.clone(), e.episode.clone())).collect()
}

fn summary_error(cat: &str, e: impl std::fmt::Display) -> CliError {
    CliError::InvalidInput(format!("category {cat}: {e}"))
}

pub fn build_report(entries: &[EpisodeEntry], before: &[EpisodeMetrics], after: &[EpisodeMetrics]) -> Result<MetricsReport, CliError> {
    let mut by_cat: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, e) in entries.iter().enumerate() {
        by_cat.entry(&e.category).or_default().push(i);
    }
    let pick = |src: &[EpisodeMetrics], idx: &[usize]| idx.iter().map(|&i| src[i].clone()).collect::<Vec<_>>();
    let pair = |idx: &[usize], mode, cat: &str| -> Result<CategoryReport, CliError> {
        let b = summarize_category(&pick(before, idx), mode).map_err(|e| summary_error(cat, e))?;
        let a = summarize_category(&pick(after, idx), mode).map_err(|e| summary_error(cat, e))?;
        Ok(category_report(&b, &a))
    };
    let mut categories = BTreeMap::new();
    let mut per_video_equal = BTreeMap::new();
    for (cat, idx) in &by_cat {
        categories.insert(cat.to_string(), pair(idx, AggregateMode::FrameWeighted, cat)?);
        per_video_equal.insert(cat.to_string(), pair(idx, AggregateMode::PerVideoEqual, cat)?);
    }
    let every: Vec<usize> = (0..entries.len()).collect();
    Ok(MetricsReport {
        categories,
        per_video_equal,
        all: pair(&every, AggregateMode::FrameWeighted, "all")?,
        all_per_video_equal: pair(&every, AggregateMode::PerVideoEqual, "all")?,
        episodes: entries
            .iter()
            .enumerate()
            .map(|(i, e)| EpisodeReport {
                category: e.category.clone(),
                episode: e.episode.clone(),
                before: before[i].summary(),
                after: after[i].summary(),
            })
            .collect(),
    })
}

pub fn render_table(r: &MetricsReport) -> String {
    let mut s = format!(
        "{:<16} {:>6} {:>7}  {:<34} {:<34} {:<34} {:<34}\n",
        "category", "videos", "frames", "stability", "jitter_rms", "h_rmse", "occ_mse"
    );
    let mut row = |name: &str, c: &CategoryReport| {
        s.push_str(&format!(
            "{:<16} {:>6} {:>7}  {:<34} {:<34} {:<34} {:<34}\n",
            name, c.videos, c.frames, c.stability.display, c.jitter_rms.display, c.h_rmse.display, c.occ_mse.display
        ));
    };
    for (name, c) in &r.categories {
        row(name, c);
    }
    row("all", &r.all);
    s
}

pub struct MetricsInputs<'a> {
    pub before: &'a Path,
    pub after: &'a Path,
    pub name: Option<&'a str>,
}

pub fn run(inputs: &MetricsInputs, cfg: &PipelineConfig) -> Result<(PathBuf, MetricsReport), CliError> {
    let before_eps = discover(inputs.before)?;
    let after_eps = discover(inputs.after)?;
    if keys(&before_eps) != keys(&after_eps) {
        return Err(CliError::InvalidInput("before and after roots hold different episode sets".into()));
    }
    use rayon::prelude::*;
    let measured: Vec<(EpisodeMetrics, EpisodeMetrics)> = before_eps
        .par_iter()
        .zip(&after_eps)
        .map(|(b, a)| {
            let (mb, ma) = rayon::join(|| measure(b, cfg), || measure(a, cfg));
            let (mb, ma) = (mb?, ma?);
            if mb.phi_deg.len() != ma.phi_deg.len() {
                return Err(CliError::InvalidInput(format!(
                    "{}/{}: {} frames before, {} after",
                    b.category,
                    b.episode,
                    mb.phi_deg.len() + 1,
                    ma.phi_deg.len() + 1
                )));
            }
            Ok((mb, ma))
        })
        .collect::<Result<_, _>>()?;
    let (before, after): (Vec<_>, Vec<_>) = measured.into_iter().unzip();
    let report = build_report(&before_eps, &before, &after)?;

    let out = AtomicDir::create(&cfg.output_dir.join(inputs.name.unwrap_or("metrics")))?;
    let doc = json!({
        "report": report,
        "metadata": {
            "stability": "mean of the per-step view angle atan2(b, a) in degrees from an affine fit on RANSAC inliers",
            "jitter": format!("residual of the view angle after Gaussian low-pass, sigma = {} frames", fmt_sig(cfg.metrics.sigma, 6)),
            "percentile": "inclusive linear interpolation",
            "std_denominator": "n - 1",
            "reference": "adjacent frame",
            "h_rmse_units": if cfg.metrics.normalized_h_rmse { "fraction of image diagonal" } else { "pixels" },
            "delta_pct": "100 (after - before) / before, one decimal; null when before is zero",
            "frames_per_video": "steps + 1",
            "seed": cfg.seed,
            "config": cfg,
        },
    });
    out.write("report.json", serde_json::to_string_pretty(&doc).expect("report serializes") + "\n")?;
    out.write("table.txt", render_table(&report))?;
    Ok((out.commit()?, report))
}
