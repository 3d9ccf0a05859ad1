//! Egocentric video stabilization.
//!
//! Adjacent frames are matched, a homography per step is fitted with RANSAC,
//! steps are accumulated into a camera path, the path is low-passed in a
//! similarity parameterization, and each frame is warped by the compensation
//! `W_t = smoothed_t * raw_t^-1`. Holes left by the warp are filled from
//! temporal neighbours (then by diffusion) before cropping to the region all
//! warped frames share.

use nalgebra::{DMatrix, Matrix3};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::filter::gaussian_smooth;
use crate::geometry::{homography_apply, GeometryError, Homography, Mat3, Vec2};
use crate::vision::{
    crop_resize, crop_resize_mask, detect_corners, match_correspondences, warp_frame, CorrespondenceSet, Frame, Rect, ValidityMask,
    VisionError, VisionParams,
};

#[derive(Debug, Error)]
pub enum StabilizerError {
    #[error("need at least 4 correspondences, got {0}")]
    TooFewCorrespondences(usize),
    #[error("no consensus: best inlier set has {0} pairs")]
    NoConsensus(usize),
    #[error("path step {0} is singular")]
    SingularStep(usize),
    #[error("warped frames share no visible region")]
    EmptyIntersection,
    #[error("stabilization failed at frame {frame}: {source}")]
    StabilizationFailed {
        frame: usize,
        #[source]
        source: Box<StabilizerError>,
    },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Vision(#[from] VisionError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RansacParams {
    pub threshold: f64,
    pub confidence: f64,
    pub max_iters: usize,
    pub seed: u64,
}

impl Default for RansacParams {
    fn default() -> Self {
        Self { threshold: 2.0, confidence: 0.995, max_iters: 2000, seed: 0x5EED }
    }
}

impl RansacParams {
    pub fn validate(&self) -> Result<(), StabilizerError> {
        if !(self.threshold > 0.0) || !(self.confidence > 0.0 && self.confidence < 1.0) || self.max_iters < 1 {
            return Err(StabilizerError::InvalidInput(format!("bad RANSAC parameters {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StabilizerParams {
    /// Path low-pass width in frames.
    pub sigma: f64,
    /// Output crop aspect (width / height); the input aspect when absent.
    pub aspect: Option<f64>,
    /// Farthest temporal neighbour consulted when filling holes.
    pub fill_reach: usize,
    pub ransac: RansacParams,
    pub vision: VisionParams,
}

impl Default for StabilizerParams {
    fn default() -> Self {
        Self { sigma: 7.0, aspect: None, fill_reach: 15, ransac: RansacParams::default(), vision: VisionParams::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CameraPath {
    pub raw: Vec<Homography>,
    pub smoothed: Vec<Homography>,
    pub comp: Vec<Homography>,
}

impl CameraPath {
    /// Smooths `raw` and re-anchors the result so that `smoothed[0]` is the
    /// identity (a fixed change of canonical view for every frame).
    pub fn from_raw(raw: Vec<Homography>, sigma: f64, center: Vec2) -> Result<Self, StabilizerError> {
        let mut smoothed = smooth_path(&raw, sigma, center);
        if let Some(first) = smoothed.first().copied() {
            if first != Homography::identity() {
                let anchor = first.inverse()?;
                for s in smoothed.iter_mut() {
                    *s = Homography::new(anchor.matrix() * s.matrix())?;
                }
                smoothed[0] = Homography::identity();
            }
        }
        let comp = compensation(&raw, &smoothed)?;
        Ok(Self { raw, smoothed, comp })
    }

    /// `raw`, then `smoothed`, then `comp`, one homography per line.
    pub fn to_lines(&self) -> String {
        let mut out = String::new();
        for h in self.raw.iter().chain(&self.smoothed).chain(&self.comp) {
            out.push_str(&h.to_line());
            out.push('\n');
        }
        out
    }

    pub fn from_lines(text: &str) -> Result<Self, StabilizerError> {
        let all = crate::geometry::parse_homography_lines(text)?;
        if all.len() % 3 != 0 || all.is_empty() {
            return Err(StabilizerError::InvalidInput(format!("path file holds {} homographies", all.len())));
        }
        let n = all.len() / 3;
        Ok(Self { raw: all[..n].to_vec(), smoothed: all[n..2 * n].to_vec(), comp: all[2 * n..].to_vec() })
    }
}

/// Hartley normalization: centroid to the origin, mean distance sqrt(2).
fn normalizing_transform(pts: &[Vec2]) -> Mat3 {
    let n = pts.len() as f64;
    let c = pts.iter().sum::<Vec2>() / n;
    let mean_dist = pts.iter().map(|p| (p - c).norm()).sum::<f64>() / n;
    let s = if mean_dist > 1e-12 { std::f64::consts::SQRT_2 / mean_dist } else { 1.0 };
    Mat3::new(s, 0.0, -s * c.x, 0.0, s, -s * c.y, 0.0, 0.0, 1.0)
}

/// Normalized direct linear transform over all given pairs.
pub fn fit_homography_dlt(pairs: &[(Vec2, Vec2)]) -> Option<Homography> {
    if pairs.len() < 4 {
        return None;
    }
    let src: Vec<Vec2> = pairs.iter().map(|p| p.0).collect();
    let dst: Vec<Vec2> = pairs.iter().map(|p| p.1).collect();
    let ts = normalizing_transform(&src);
    let td = normalizing_transform(&dst);
    let norm = |t: &Mat3, p: &Vec2| Vec2::new(t[(0, 0)] * p.x + t[(0, 2)], t[(1, 1)] * p.y + t[(1, 2)]);

    let rows = (2 * pairs.len()).max(9);
    let mut a = DMatrix::<f64>::zeros(rows, 9);
    for (i, (s, d)) in src.iter().zip(&dst).enumerate() {
        let (x, y) = (norm(&ts, s).x, norm(&ts, s).y);
        let (u, v) = (norm(&td, d).x, norm(&td, d).y);
        let r = 2 * i;
        a.row_mut(r).copy_from_slice(&[-x, -y, -1.0, 0.0, 0.0, 0.0, u * x, u * y, u]);
        a.row_mut(r + 1).copy_from_slice(&[0.0, 0.0, 0.0, -x, -y, -1.0, v * x, v * y, v]);
    }
    let svd = a.svd(false, true);
    let v_t = svd.v_t?;
    let k = (0..svd.singular_values.len()).min_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]))?;
    let h = v_t.row(k);
    let hn = Matrix3::new(h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], h[8]);
    let m = td.try_inverse()? * hn * ts;
    Homography::new(m).ok()
}

fn reprojection_error(h: &Homography, pair: &(Vec2, Vec2)) -> f64 {
    homography_apply(h, pair.0).map_or(f64::INFINITY, |p| (p - pair.1).norm())
}

fn inliers_of(h: &Homography, c: &CorrespondenceSet, threshold: f64) -> (Vec<usize>, f64) {
    let mut idx = Vec::new();
    let mut cost = 0.0;
    for (i, pair) in c.pairs.iter().enumerate() {
        let e = reprojection_error(h, pair);
        if e < threshold {
            idx.push(i);
            cost += e * e;
        }
    }
    (idx, cost)
}

fn triangle_area2(a: &Vec2, b: &Vec2, c: &Vec2) -> f64 {
    ((b - a).perp(&(c - a))).abs()
}

fn sample_is_degenerate(pts: [&Vec2; 4]) -> bool {
    const MIN_AREA2: f64 = 1e-6;
    for skip in 0..4 {
        let tri: Vec<&Vec2> = (0..4).filter(|&i| i != skip).map(|i| pts[i]).collect();
        if triangle_area2(tri[0], tri[1], tri[2]) < MIN_AREA2 {
            return true;
        }
    }
    false
}

/// RANSAC over 4-point normalized-DLT hypotheses, refit on all inliers.
pub fn estimate_homography_ransac(c: &CorrespondenceSet, p: &RansacParams) -> Result<(Homography, Vec<usize>), StabilizerError> {
    p.validate()?;
    let n = c.len();
    if n < 4 {
        return Err(StabilizerError::TooFewCorrespondences(n));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let mut best: Option<(Homography, Vec<usize>, f64)> = None;
    let mut needed = p.max_iters;
    let mut iter = 0;
    while iter < needed.min(p.max_iters) {
        iter += 1;
        let idx = sample(&mut rng, n, 4);
        let quad = [idx.index(0), idx.index(1), idx.index(2), idx.index(3)];
        let src = quad.map(|i| &c.pairs[i].0);
        let dst = quad.map(|i| &c.pairs[i].1);
        if sample_is_degenerate(src) || sample_is_degenerate(dst) {
            continue;
        }
        let pairs: Vec<(Vec2, Vec2)> = quad.iter().map(|&i| c.pairs[i]).collect();
        let Some(h) = fit_homography_dlt(&pairs) else { continue };
        let (inl, cost) = inliers_of(&h, c, p.threshold);
        let improves = match &best {
            None => true,
            Some((_, b, bc)) => inl.len() > b.len() || (inl.len() == b.len() && cost < *bc),
        };
        if improves {
            let ratio = inl.len() as f64 / n as f64;
            let miss = 1.0 - ratio.powi(4);
            needed = if miss <= f64::EPSILON {
                0
            } else {
                let k = (1.0 - p.confidence).ln() / miss.ln();
                if k.is_finite() {
                    k.ceil().max(1.0) as usize
                } else {
                    p.max_iters
                }
            };
            best = Some((h, inl, cost));
        }
    }

    let (h, inl, _) = best.ok_or(StabilizerError::NoConsensus(0))?;
    if inl.len() < 4 {
        return Err(StabilizerError::NoConsensus(inl.len()));
    }
    let inlier_pairs: Vec<(Vec2, Vec2)> = inl.iter().map(|&i| c.pairs[i]).collect();
    if let Some(refit) = fit_homography_dlt(&inlier_pairs) {
        let (refit_inl, _) = inliers_of(&refit, c, p.threshold);
        if refit_inl.len() >= 4 {
            return Ok((refit, refit_inl));
        }
    }
    Ok((h, inl))
}

/// `raw[0] = I`, `raw[t] = step[t-1] * raw[t-1]`, where `step[t-1]` maps frame
/// `t-1` to frame `t`.
pub fn accumulate_path(per_step: &[Homography]) -> Result<Vec<Homography>, StabilizerError> {
    let mut raw = Vec::with_capacity(per_step.len() + 1);
    raw.push(Homography::identity());
    for (t, step) in per_step.iter().enumerate() {
        let prev = raw[t];
        let next = Homography::new(step.matrix() * prev.matrix()).map_err(|_| StabilizerError::SingularStep(t + 1))?;
        raw.push(next);
    }
    Ok(raw)
}

/// Similarity parameters of a homography about `center`, plus the residual
/// `P` with `C^-1 H C = S P`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimilarityParts {
    pub tx: f64,
    pub ty: f64,
    pub angle: f64,
    pub log_scale: f64,
    pub residual: Mat3,
}

fn centering(center: Vec2) -> (Mat3, Mat3) {
    let c = Mat3::new(1.0, 0.0, center.x, 0.0, 1.0, center.y, 0.0, 0.0, 1.0);
    let c_inv = Mat3::new(1.0, 0.0, -center.x, 0.0, 1.0, -center.y, 0.0, 0.0, 1.0);
    (c, c_inv)
}

fn similarity_matrix(tx: f64, ty: f64, angle: f64, log_scale: f64) -> Mat3 {
    let s = log_scale.exp();
    let (sin, cos) = angle.sin_cos();
    Mat3::new(s * cos, -s * sin, tx, s * sin, s * cos, ty, 0.0, 0.0, 1.0)
}

pub fn decompose_similarity(h: &Homography, center: Vec2) -> SimilarityParts {
    let (c, c_inv) = centering(center);
    let m = c_inv * h.matrix() * c;
    let m = m / m[(2, 2)];
    let a = 0.5 * (m[(0, 0)] + m[(1, 1)]);
    let b = 0.5 * (m[(1, 0)] - m[(0, 1)]);
    let angle = b.atan2(a);
    let log_scale = a.hypot(b).ln();
    let (tx, ty) = (m[(0, 2)], m[(1, 2)]);
    let s = similarity_matrix(tx, ty, angle, log_scale);
    let residual = s.try_inverse().unwrap_or_else(Mat3::identity) * m;
    SimilarityParts { tx, ty, angle, log_scale, residual }
}

pub fn compose_similarity(parts: &SimilarityParts, center: Vec2) -> Homography {
    let (c, c_inv) = centering(center);
    let s = similarity_matrix(parts.tx, parts.ty, parts.angle, parts.log_scale);
    let m = c * s * parts.residual * c_inv;
    Homography::new(m).unwrap_or_else(|_| Homography::identity())
}

/// Low-passes `(tx, ty, angle, log-scale)` of each path entry (decomposed
/// about `center`) with the truncated Gaussian; projective residuals are kept.
pub fn smooth_path(raw: &[Homography], sigma: f64, center: Vec2) -> Vec<Homography> {
    if raw.len() <= 1 {
        return raw.to_vec();
    }
    let parts: Vec<SimilarityParts> = raw.iter().map(|h| decompose_similarity(h, center)).collect();
    let mut angles: Vec<f64> = parts.iter().map(|p| p.angle).collect();
    for t in 1..angles.len() {
        let mut d = angles[t] - angles[t - 1];
        while d > std::f64::consts::PI {
            d -= 2.0 * std::f64::consts::PI;
        }
        while d < -std::f64::consts::PI {
            d += 2.0 * std::f64::consts::PI;
        }
        angles[t] = angles[t - 1] + d;
    }
    let tx = gaussian_smooth(&parts.iter().map(|p| p.tx).collect::<Vec<_>>(), sigma);
    let ty = gaussian_smooth(&parts.iter().map(|p| p.ty).collect::<Vec<_>>(), sigma);
    let angle = gaussian_smooth(&angles, sigma);
    let scale = gaussian_smooth(&parts.iter().map(|p| p.log_scale).collect::<Vec<_>>(), sigma);
    parts
        .iter()
        .enumerate()
        .map(|(t, p)| {
            let unchanged = tx[t] == p.tx && ty[t] == p.ty && angle[t] == angles[t] && scale[t] == p.log_scale;
            if unchanged {
                return raw[t];
            }
            let smoothed = SimilarityParts { tx: tx[t], ty: ty[t], angle: angle[t], log_scale: scale[t], residual: p.residual };
            compose_similarity(&smoothed, center)
        })
        .collect()
}

/// `W_t = smoothed_t * raw_t^-1`.
pub fn compensation(raw: &[Homography], smoothed: &[Homography]) -> Result<Vec<Homography>, StabilizerError> {
    if raw.len() != smoothed.len() {
        return Err(StabilizerError::InvalidInput(format!("path lengths differ: {} vs {}", raw.len(), smoothed.len())));
    }
    raw.iter()
        .zip(smoothed)
        .enumerate()
        .map(|(t, (r, s))| {
            let inv = r.inverse().map_err(|_| StabilizerError::SingularStep(t))?;
            Homography::new(s.matrix() * inv.matrix()).map_err(|_| StabilizerError::SingularStep(t))
        })
        .collect()
}

fn signed_area(poly: &[Vec2]) -> f64 {
    let n = poly.len();
    (0..n).map(|i| poly[i].perp(&poly[(i + 1) % n])).sum::<f64>() * 0.5
}

fn ensure_ccw(mut poly: Vec<Vec2>) -> Vec<Vec2> {
    if signed_area(&poly) < 0.0 {
        poly.reverse();
    }
    poly
}

/// Sutherland-Hodgman clip of `subject` by the convex, counter-clockwise `clip`.
fn clip_polygon(subject: &[Vec2], clip: &[Vec2]) -> Vec<Vec2> {
    let mut out = subject.to_vec();
    let m = clip.len();
    for i in 0..m {
        if out.is_empty() {
            break;
        }
        let (a, b) = (clip[i], clip[(i + 1) % m]);
        let edge = b - a;
        let side = |p: &Vec2| edge.perp(&(p - a));
        let input = std::mem::take(&mut out);
        let k = input.len();
        for j in 0..k {
            let cur = input[j];
            let prev = input[(j + k - 1) % k];
            let (sc, sp) = (side(&cur), side(&prev));
            if sc >= 0.0 {
                if sp < 0.0 {
                    out.push(prev + (cur - prev) * (sp / (sp - sc)));
                }
                out.push(cur);
            } else if sp >= 0.0 {
                out.push(prev + (cur - prev) * (sp / (sp - sc)));
            }
        }
    }
    out
}

fn polygon_centroid(poly: &[Vec2]) -> Vec2 {
    let a = signed_area(poly);
    let n = poly.len();
    let mut c = Vec2::zeros();
    for i in 0..n {
        let (p, q) = (poly[i], poly[(i + 1) % n]);
        c += (p + q) * p.perp(&q);
    }
    c / (6.0 * a)
}

fn contains(poly: &[Vec2], p: &Vec2) -> bool {
    const SLACK: f64 = 1e-9;
    let n = poly.len();
    (0..n).all(|i| {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        let edge = b - a;
        edge.perp(&(p - a)) >= -SLACK * edge.norm()
    })
}

/// Largest rectangle of the given aspect, centered on the centroid of the
/// region every warped frame covers.
pub fn common_visible_rect(warps: &[Homography], width: usize, height: usize, aspect: f64) -> Result<Rect, StabilizerError> {
    if warps.is_empty() {
        return Err(StabilizerError::InvalidInput("no warps".into()));
    }
    let frame = Rect::full(width, height).corners();
    let mut region: Option<Vec<Vec2>> = None;
    for w in warps {
        let quad =
            frame.iter().map(|p| homography_apply(w, *p)).collect::<Result<Vec<_>, _>>().map_err(|_| StabilizerError::EmptyIntersection)?;
        let quad = ensure_ccw(quad);
        region = Some(match region {
            None => quad,
            Some(r) => clip_polygon(&r, &quad),
        });
    }
    let region = region.unwrap_or_default();
    if region.len() < 3 || signed_area(&region).abs() < 1e-6 {
        return Err(StabilizerError::EmptyIntersection);
    }
    let center = polygon_centroid(&region);
    let rect_at = |k: f64| {
        let (w, h) = (k * aspect, k);
        Rect { x0: center.x - 0.5 * w, y0: center.y - 0.5 * h, w, h }
    };
    let fits = |k: f64| rect_at(k).corners().iter().all(|p| contains(&region, p));

    let k_max = (height as f64).min(width as f64 / aspect);
    if fits(k_max) {
        let rect = rect_at(k_max);
        let full = Rect::full(width, height);
        let snap = rect.corners().iter().zip(full.corners()).all(|(a, b)| (a - b).norm() < 1e-9);
        return Ok(if snap { full } else { rect });
    }
    let (mut lo, mut hi) = (0.0, k_max);
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if fits(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if lo <= 0.0 {
        return Err(StabilizerError::EmptyIntersection);
    }
    Ok(rect_at(lo))
}

/// Bilinear sample where every pixel with nonzero weight is valid.
fn sample_valid(f: &Frame, m: &ValidityMask, sx: f64, sy: f64) -> Option<f64> {
    let (w, h) = (f.width(), f.height());
    if !(sx > -1e-9 && sy > -1e-9 && sx < (w - 1) as f64 + 1e-9 && sy < (h - 1) as f64 + 1e-9) {
        return None;
    }
    let sx = sx.clamp(0.0, (w - 1) as f64);
    let sy = sy.clamp(0.0, (h - 1) as f64);
    let x0 = (sx.floor() as usize).min(w - 2);
    let y0 = (sy.floor() as usize).min(h - 2);
    let (fx, fy) = (sx - x0 as f64, sy - y0 as f64);
    let taps = [(x0, y0, (1.0 - fx) * (1.0 - fy)), (x0 + 1, y0, fx * (1.0 - fy)), (x0, y0 + 1, (1.0 - fx) * fy), (x0 + 1, y0 + 1, fx * fy)];
    let mut acc = 0.0;
    for (x, y, wt) in taps {
        if wt > 0.0 {
            if !m.get(x, y) {
                return None;
            }
            acc += wt * f.get(x, y) as f64;
        }
    }
    Some(acc)
}

/// Fills invalid pixels from temporal neighbours, then by masked diffusion.
///
/// `paths[t]` maps a common reference frame into frame `t`, so a point `x` of
/// frame `t` lands at `paths[n] * paths[t]^-1 * x` in frame `n`.
pub fn fill_holes(frames: &[Frame], masks: &[ValidityMask], paths: &[Homography], max_reach: usize) -> Result<Vec<Frame>, StabilizerError> {
    if frames.len() != masks.len() || frames.len() != paths.len() {
        return Err(StabilizerError::InvalidInput("frames, masks and path differ in length".into()));
    }
    if let Some(f0) = frames.first() {
        if frames.iter().any(|f| !f.same_dims(f0)) || masks.iter().zip(frames).any(|(m, f)| !m.matches(f)) {
            return Err(StabilizerError::InvalidInput("frame or mask dimensions differ".into()));
        }
    }
    let n = frames.len();
    let inverses =
        paths.iter().enumerate().map(|(t, p)| p.inverse().map_err(|_| StabilizerError::SingularStep(t))).collect::<Result<Vec<_>, _>>()?;

    (0..n)
        .into_par_iter()
        .map(|t| {
            let (f, m) = (&frames[t], &masks[t]);
            if m.is_all_valid() {
                return Ok(f.clone());
            }
            let (w, h) = (f.width(), f.height());
            let mut values: Vec<f64> = f.data().iter().map(|&v| v as f64).collect();
            let mut filled: Vec<bool> = m.bits().to_vec();

            let mut donors = Vec::new();
            for d in 1..=max_reach {
                if t >= d {
                    donors.push(t - d);
                }
                if t + d < n {
                    donors.push(t + d);
                }
            }
            let relative: Vec<(usize, Homography)> = donors.iter().map(|&d| (d, paths[d] * inverses[t])).collect();

            for y in 0..h {
                for x in 0..w {
                    if filled[y * w + x] {
                        continue;
                    }
                    let p = Vec2::new(x as f64 + 0.5, y as f64 + 0.5);
                    for (d, rel) in &relative {
                        let Ok(q) = homography_apply(rel, p) else { continue };
                        if let Some(v) = sample_valid(&frames[*d], &masks[*d], q.x - 0.5, q.y - 0.5) {
                            values[y * w + x] = v;
                            filled[y * w + x] = true;
                            break;
                        }
                    }
                }
            }

            diffuse(&mut values, &mut filled, w, h);
            let data = values.iter().map(|v| v.round().clamp(0.0, 255.0) as u8).collect();
            Ok(Frame::new(w, h, data)?)
        })
        .collect()
}

/// Onion-peel 3x3 masked mean, at most 500 sweeps.
fn diffuse(values: &mut [f64], filled: &mut [bool], w: usize, h: usize) {
    if !filled.iter().any(|&b| b) {
        return;
    }
    for _ in 0..500 {
        if filled.iter().all(|&b| b) {
            break;
        }
        let mut updates = Vec::new();
        for y in 0..h {
            for x in 0..w {
                if filled[y * w + x] {
                    continue;
                }
                let (mut sum, mut count) = (0.0, 0usize);
                for ny in y.saturating_sub(1)..=(y + 1).min(h - 1) {
                    for nx in x.saturating_sub(1)..=(x + 1).min(w - 1) {
                        if filled[ny * w + nx] {
                            sum += values[ny * w + nx];
                            count += 1;
                        }
                    }
                }
                if count > 0 {
                    updates.push((y * w + x, sum / count as f64));
                }
            }
        }
        for (i, v) in updates {
            values[i] = v;
            filled[i] = true;
        }
    }
}

/// Output of [`stabilize_episode`].
#[derive(Debug, Clone)]
pub struct StabilizedEpisode {
    pub frames: Vec<Frame>,
    /// Validity before hole filling, cropped like the frames.
    pub masks: Vec<ValidityMask>,
    pub path: CameraPath,
    pub rect: Rect,
    /// Per-step inlier counts (`inliers[t-1]` for the pair `t-1 -> t`).
    pub inliers: Vec<usize>,
}

/// Per-pair RANSAC seed derived from the episode seed.
pub fn pair_seed(seed: u64, t: usize) -> u64 {
    seed ^ (t as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Homography mapping frame `a` onto frame `b` from matched corners.
pub fn estimate_step(
    a: &Frame,
    b: &Frame,
    vision: &VisionParams,
    ransac: &RansacParams,
) -> Result<(Homography, CorrespondenceSet, Vec<usize>), StabilizerError> {
    let corners = detect_corners(a, vision.max_corners, vision.min_distance, vision.quality);
    let c = match_correspondences(a, b, &corners, vision.patch, vision.search_radius);
    let (h, inl) = estimate_homography_ransac(&c, ransac)?;
    Ok((h, c, inl))
}

pub fn stabilize_episode(frames: &[Frame], params: &StabilizerParams) -> Result<StabilizedEpisode, StabilizerError> {
    if frames.len() < 2 {
        return Err(StabilizerError::InvalidInput(format!("need at least 2 frames, got {}", frames.len())));
    }
    let (w, h) = (frames[0].width(), frames[0].height());
    if frames.iter().any(|f| !f.same_dims(&frames[0])) {
        return Err(StabilizerError::InvalidInput("frames differ in dimensions".into()));
    }
    if !(params.sigma > 0.0) {
        return Err(StabilizerError::InvalidInput(format!("sigma must be positive, got {}", params.sigma)));
    }
    params.ransac.validate()?;

    let steps = (1..frames.len())
        .into_par_iter()
        .map(|t| {
            let ransac = RansacParams { seed: pair_seed(params.ransac.seed, t), ..params.ransac };
            estimate_step(&frames[t - 1], &frames[t], &params.vision, &ransac)
                .map(|(h, _, inl)| (h, inl.len()))
                .map_err(|e| StabilizerError::StabilizationFailed { frame: t, source: Box::new(e) })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let (per_step, inliers): (Vec<Homography>, Vec<usize>) = steps.into_iter().unzip();

    let center = Vec2::new(w as f64 / 2.0, h as f64 / 2.0);
    let path = CameraPath::from_raw(accumulate_path(&per_step)?, params.sigma, center)?;

    let warped = frames.par_iter().zip(&path.comp).map(|(f, wt)| warp_frame(f, wt)).collect::<Result<Vec<_>, _>>()?;
    let (warped_frames, masks): (Vec<Frame>, Vec<ValidityMask>) = warped.into_iter().unzip();

    // Warped frame t relates to the reference through the smoothed path.
    let filled = fill_holes(&warped_frames, &masks, &path.smoothed, params.fill_reach)?;

    let aspect = params.aspect.unwrap_or(w as f64 / h as f64);
    let rect = common_visible_rect(&path.comp, w, h, aspect)?;
    let out_frames = filled.par_iter().map(|f| crop_resize(f, &rect, w, h)).collect();
    let out_masks = masks.iter().map(|m| crop_resize_mask(m, &rect, w, h)).collect();

    Ok(StabilizedEpisode { frames: out_frames, masks: out_masks, path, rect, inliers })
}
