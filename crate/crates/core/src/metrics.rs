//! Stability and geometry metrics for frame sequences.
//!
//! Per adjacent pair of frames a homography is estimated from matched corners;
//! its inliers give an affine step (view angle), the reprojection RMSE and an
//! occlusion-aware photometric error. Sequences are summarized per video and
//! aggregated per category.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::filter::gaussian_smooth;
use crate::geometry::{Homography, Vec2};
use crate::stabilizer::{estimate_step, pair_seed, RansacParams, StabilizerError};
use crate::vision::{warp_frame, CorrespondenceSet, Frame, ValidityMask, VisionParams};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("degenerate configuration for an affine fit")]
    DegenerateConfiguration,
    #[error("empty correspondence set")]
    EmptySet,
    #[error("evaluation mask has no valid pixels")]
    EmptyMask,
    #[error("empty input")]
    EmptyInput,
    #[error("baseline is zero")]
    ZeroBaseline,
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("pair {frame}: {source}")]
    Pair {
        frame: usize,
        #[source]
        source: StabilizerError,
    },
}

/// `[a b tx; c d ty]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineStep {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub tx: f64,
    pub ty: f64,
}

impl AffineStep {
    pub fn identity() -> Self {
        Self { a: 1.0, b: 0.0, c: 0.0, d: 1.0, tx: 0.0, ty: 0.0 }
    }

    pub fn apply(&self, p: Vec2) -> Vec2 {
        Vec2::new(self.a * p.x + self.b * p.y + self.tx, self.c * p.x + self.d * p.y + self.ty)
    }

    /// `atan2(b, a)` in degrees.
    pub fn angle_deg(&self) -> f64 {
        self.b.atan2(self.a).to_degrees()
    }
}

/// Ordinary least squares over the six affine parameters.
pub fn estimate_affine(c: &CorrespondenceSet) -> Result<AffineStep, MetricsError> {
    if c.len() < 3 {
        return Err(MetricsError::DegenerateConfiguration);
    }
    let n = c.len() as f64;
    let mean = c.pairs.iter().fold(Vec2::zeros(), |acc, (x, _)| acc + x) / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (x, _) in &c.pairs {
        let d = x - mean;
        sxx += d.x * d.x;
        sxy += d.x * d.y;
        syy += d.y * d.y;
    }
    let scatter = nalgebra::Matrix2::new(sxx, sxy, sxy, syy);
    let eig = scatter.symmetric_eigen().eigenvalues;
    let (lo, hi) = (eig.min(), eig.max());
    if !(hi > 0.0) || lo <= 1e-12 * hi {
        return Err(MetricsError::DegenerateConfiguration);
    }

    let mut ata = nalgebra::Matrix3::<f64>::zeros();
    let mut atx = nalgebra::Vector3::<f64>::zeros();
    let mut aty = nalgebra::Vector3::<f64>::zeros();
    for (x, y) in &c.pairs {
        let d = x - mean;
        let row = nalgebra::Vector3::new(d.x, d.y, 1.0);
        ata += row * row.transpose();
        atx += row * y.x;
        aty += row * y.y;
    }
    let chol = ata.cholesky().ok_or(MetricsError::DegenerateConfiguration)?;
    let (px, py) = (chol.solve(&atx), chol.solve(&aty));
    let (a, b, c_, d) = (px[0], px[1], py[0], py[1]);
    if (a * d - b * c_).abs() <= 1e-12 {
        return Err(MetricsError::DegenerateConfiguration);
    }
    Ok(AffineStep { a, b, c: c_, d, tx: px[2] - a * mean.x - b * mean.y, ty: py[2] - c_ * mean.x - d * mean.y })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VcStats {
    pub mean: f64,
    pub p95: f64,
    pub std: f64,
    /// False when fewer than two steps leave the deviation undefined.
    pub std_defined: bool,
}

/// Inclusive linear-interpolation percentile, `p` in `[0, 100]`.
pub fn percentile(xs: &[f64], p: f64) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    let mut s = xs.to_vec();
    s.sort_by(f64::total_cmp);
    let rank = p / 100.0 * (s.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    Some(s[lo] + (rank - lo as f64) * (s[hi] - s[lo]))
}

/// Mean, 95th percentile and deviation (denominator `n - 1`) of step angles.
pub fn vc_stats(phi: &[f64]) -> VcStats {
    if phi.is_empty() {
        return VcStats { mean: 0.0, p95: 0.0, std: 0.0, std_defined: false };
    }
    let n = phi.len() as f64;
    let mean = phi.iter().sum::<f64>() / n;
    let p95 = percentile(phi, 95.0).unwrap_or(0.0);
    if phi.len() < 2 {
        return VcStats { mean, p95, std: 0.0, std_defined: false };
    }
    let var = phi.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (n - 1.0);
    VcStats { mean, p95, std: var.sqrt(), std_defined: true }
}

pub fn view_consistency(steps: &[AffineStep]) -> VcStats {
    vc_stats(&steps.iter().map(AffineStep::angle_deg).collect::<Vec<_>>())
}

/// `phi - S(phi)` with the shared truncated Gaussian low-pass.
pub fn jitter_residuals(phi: &[f64], sigma: f64) -> Result<Vec<f64>, MetricsError> {
    if !(sigma > 0.0) {
        return Err(MetricsError::InvalidParams(format!("sigma must be positive, got {sigma}")));
    }
    Ok(phi.iter().zip(gaussian_smooth(phi, sigma)).map(|(p, s)| p - s).collect())
}

pub fn jitter_rms(phi: &[f64], sigma: f64) -> Result<f64, MetricsError> {
    if phi.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let r = jitter_residuals(phi, sigma)?;
    Ok((r.iter().map(|v| v * v).sum::<f64>() / r.len() as f64).sqrt())
}

/// Reprojection RMSE of `h` over `c`, divided by the image diagonal when
/// `normalized`.
pub fn h_rmse(h: &Homography, c: &CorrespondenceSet, width: usize, height: usize, normalized: bool) -> Result<f64, MetricsError> {
    if c.is_empty() {
        return Err(MetricsError::EmptySet);
    }
    let mut sum = 0.0;
    for (x, y) in &c.pairs {
        let e = match h.apply(*x) {
            Ok(p) => (p - y).norm_squared(),
            Err(_) => f64::INFINITY,
        };
        sum += e;
    }
    let rmse = (sum / c.len() as f64).sqrt();
    Ok(if normalized { rmse / ((width * width + height * height) as f64).sqrt() } else { rmse })
}

/// Mean squared gray-level difference over the valid pixels of `omega`.
pub fn occ_mse(frame_t: &Frame, warped_ref: &Frame, omega: &ValidityMask) -> Result<f64, MetricsError> {
    if !frame_t.same_dims(warped_ref) || !omega.matches(frame_t) {
        return Err(MetricsError::DimensionMismatch("frames and mask must share dimensions".into()));
    }
    let (mut sum, mut n) = (0.0, 0usize);
    for ((a, b), &v) in frame_t.data().iter().zip(warped_ref.data()).zip(omega.bits()) {
        if v {
            let d = *a as f64 - *b as f64;
            sum += d * d;
            n += 1;
        }
    }
    if n == 0 {
        return Err(MetricsError::EmptyMask);
    }
    Ok(sum / n as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggregateMode {
    FrameWeighted,
    PerVideoEqual,
}

pub fn aggregate(per_video: &[Vec<f64>], mode: AggregateMode) -> Result<f64, MetricsError> {
    if per_video.is_empty() || per_video.iter().any(Vec::is_empty) {
        return Err(MetricsError::EmptyInput);
    }
    Ok(match mode {
        AggregateMode::FrameWeighted => {
            let total: f64 = per_video.iter().flatten().sum();
            total / per_video.iter().map(Vec::len).sum::<usize>() as f64
        }
        AggregateMode::PerVideoEqual => {
            per_video.iter().map(|v| v.iter().sum::<f64>() / v.len() as f64).sum::<f64>() / per_video.len() as f64
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Delta {
    pub before: f64,
    pub after: f64,
    /// `100 (after - before) / before`, one decimal.
    pub delta_pct: f64,
}

pub fn delta_report(before: f64, after: f64) -> Result<Delta, MetricsError> {
    if before == 0.0 {
        return Err(MetricsError::ZeroBaseline);
    }
    let pct = 100.0 * (after - before) / before;
    let rounded = (pct * 10.0).round() / 10.0;
    Ok(Delta { before, after, delta_pct: if rounded == 0.0 { 0.0 } else { rounded } })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricParams {
    /// Low-pass width (frames) for the jitter residual.
    pub sigma: f64,
    /// Report H-RMSE divided by the image diagonal.
    pub normalized_h_rmse: bool,
    pub ransac: RansacParams,
    pub vision: VisionParams,
}

impl Default for MetricParams {
    fn default() -> Self {
        Self { sigma: 3.0, normalized_h_rmse: true, ransac: RansacParams::default(), vision: VisionParams::default() }
    }
}

/// Per-step metric sequences of one video; entry `t - 1` is the pair `t-1 -> t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub phi_deg: Vec<f64>,
    pub jitter_residual: Vec<f64>,
    pub h_rmse: Vec<f64>,
    pub occ_mse: Vec<f64>,
    pub inliers: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub steps: usize,
    pub vc: VcStats,
    pub jitter_rms: f64,
    pub mean_h_rmse: f64,
    pub mean_occ_mse: f64,
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

impl EpisodeMetrics {
    pub fn summary(&self) -> EpisodeSummary {
        EpisodeSummary {
            steps: self.phi_deg.len(),
            vc: vc_stats(&self.phi_deg),
            jitter_rms: mean(&self.jitter_residual.iter().map(|r| r * r).collect::<Vec<_>>()).sqrt(),
            mean_h_rmse: mean(&self.h_rmse),
            mean_occ_mse: mean(&self.occ_mse),
        }
    }
}

struct PairMetrics {
    phi: f64,
    h_rmse: f64,
    occ: f64,
    inliers: usize,
}

fn pair_metrics(
    prev: &Frame,
    cur: &Frame,
    masks: Option<(&ValidityMask, &ValidityMask)>,
    params: &MetricParams,
    seed: u64,
) -> Result<PairMetrics, StabilizerError> {
    let ransac = RansacParams { seed, ..params.ransac };
    let (h, c, inl) = estimate_step(prev, cur, &params.vision, &ransac)?;
    let inliers = c.subset(&inl);
    let phi = match estimate_affine(&inliers) {
        Ok(a) => a.angle_deg(),
        Err(_) => return Err(StabilizerError::NoConsensus(inliers.len())),
    };
    let rmse = h_rmse(&h, &inliers, cur.width(), cur.height(), params.normalized_h_rmse).map_err(|_| StabilizerError::NoConsensus(0))?;

    let (warped, mut omega) = warp_frame(prev, &h)?;
    if let Some((m_prev, m_cur)) = masks {
        let (moved, moved_valid) = warp_frame(&m_prev.to_frame(), &h)?;
        for y in 0..cur.height() {
            for x in 0..cur.width() {
                let ok = omega.get(x, y) && moved_valid.get(x, y) && moved.get(x, y) >= 128 && m_cur.get(x, y);
                omega.set(x, y, ok);
            }
        }
    }
    let occ = occ_mse(cur, &warped, &omega).unwrap_or(0.0);
    Ok(PairMetrics { phi, h_rmse: rmse, occ, inliers: inl.len() })
}

/// Computes every per-step metric of a frame sequence. `masks`, when given,
/// restrict the photometric error to pixels valid in both frames.
pub fn episode_metrics(frames: &[Frame], masks: Option<&[ValidityMask]>, params: &MetricParams) -> Result<EpisodeMetrics, MetricsError> {
    if frames.len() < 2 {
        return Err(MetricsError::EmptyInput);
    }
    if frames.iter().any(|f| !f.same_dims(&frames[0])) {
        return Err(MetricsError::DimensionMismatch("frames differ in dimensions".into()));
    }
    if let Some(m) = masks {
        if m.len() != frames.len() || m.iter().zip(frames).any(|(m, f)| !m.matches(f)) {
            return Err(MetricsError::DimensionMismatch("one mask per frame with matching dimensions".into()));
        }
    }
    if !(params.sigma > 0.0) {
        return Err(MetricsError::InvalidParams(format!("sigma must be positive, got {}", params.sigma)));
    }
    let pairs = (1..frames.len())
        .into_par_iter()
        .map(|t| {
            let m = masks.map(|m| (&m[t - 1], &m[t]));
            pair_metrics(&frames[t - 1], &frames[t], m, params, pair_seed(params.ransac.seed, t))
                .map_err(|source| MetricsError::Pair { frame: t, source })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let phi_deg: Vec<f64> = pairs.iter().map(|p| p.phi).collect();
    Ok(EpisodeMetrics {
        jitter_residual: jitter_residuals(&phi_deg, params.sigma)?,
        phi_deg,
        h_rmse: pairs.iter().map(|p| p.h_rmse).collect(),
        occ_mse: pairs.iter().map(|p| p.occ).collect(),
        inliers: pairs.iter().map(|p| p.inliers).collect(),
    })
}

/// Frame-weighted and per-video-equal aggregates of one category.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CategorySummary {
    pub videos: usize,
    pub frames: usize,
    pub stability: f64,
    pub jitter_rms: f64,
    pub h_rmse: f64,
    pub occ_mse: f64,
}

/// Aggregates per-video sequences. Jitter RMS aggregates squared residuals
/// and takes the root afterwards.
pub fn summarize_category(videos: &[EpisodeMetrics], mode: AggregateMode) -> Result<CategorySummary, MetricsError> {
    let pick = |f: &dyn Fn(&EpisodeMetrics) -> Vec<f64>| videos.iter().map(f).collect::<Vec<_>>();
    let squares = pick(&|e| e.jitter_residual.iter().map(|r| r * r).collect());
    Ok(CategorySummary {
        videos: videos.len(),
        frames: videos.iter().map(|e| e.phi_deg.len() + 1).sum(),
        stability: aggregate(&pick(&|e| e.phi_deg.clone()), mode)?,
        jitter_rms: aggregate(&squares, mode)?.sqrt(),
        h_rmse: aggregate(&pick(&|e| e.h_rmse.clone()), mode)?,
        occ_mse: aggregate(&pick(&|e| e.occ_mse.clone()), mode)?,
    })
}
