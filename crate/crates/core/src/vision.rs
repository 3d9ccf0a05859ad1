//! Frame-level image primitives: corners, ZNCC matching, mask-aware warping.
//!
//! Pixel `(i, j)` covers the unit square `[i, i+1) x [j, j+1)`, so its center
//! sits at `(i + 0.5, j + 0.5)`. Every homography in this crate maps these
//! continuous coordinates.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{homography_apply, Homography, Vec2};

pub const MIN_FRAME_EXTENT: usize = 16;

#[derive(Debug, Error)]
pub enum VisionError {
    #[error("frame must be at least {MIN_FRAME_EXTENT}x{MIN_FRAME_EXTENT}, got {0}x{1}")]
    FrameTooSmall(usize, usize),
    #[error("buffer of {len} samples does not match {width}x{height}")]
    BufferSize { width: usize, height: usize, len: usize },
    #[error("dimension mismatch: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
    #[error("warp is singular")]
    SingularWarp,
    #[error("image i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("image decode: {0}")]
    Decode(#[from] image::ImageError),
    #[error("unsupported image {0}: expected 8-bit grayscale or RGB")]
    UnsupportedImage(String),
    #[error("bad correspondence line {line}: {reason}")]
    CorrespondenceParse { line: usize, reason: String },
}

/// Single-channel 8-bit image.
#[derive(Clone, PartialEq, Eq)]
pub struct Frame {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl std::fmt::Debug for Frame {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Frame({}x{})", self.width, self.height)
    }
}

impl Frame {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self, VisionError> {
        if width < MIN_FRAME_EXTENT || height < MIN_FRAME_EXTENT {
            return Err(VisionError::FrameTooSmall(width, height));
        }
        if data.len() != width * height {
            return Err(VisionError::BufferSize { width, height, len: data.len() });
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Result<Self, VisionError> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> u8) -> Result<Self, VisionError> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: u8) {
        self.data[y * self.width + x] = v;
    }

    pub fn same_dims(&self, other: &Frame) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// Bilinear sample at sample-index coordinates (pixel `i` at `i`), or
    /// `None` when outside `[0, w-1] x [0, h-1]` beyond a rounding slack.
    pub fn sample(&self, sx: f64, sy: f64) -> Option<f64> {
        const SLACK: f64 = 1e-6;
        let (wmax, hmax) = ((self.width - 1) as f64, (self.height - 1) as f64);
        if !(sx >= -SLACK && sx <= wmax + SLACK && sy >= -SLACK && sy <= hmax + SLACK) {
            return None;
        }
        Some(self.sample_clamped(sx, sy))
    }

    fn sample_clamped(&self, sx: f64, sy: f64) -> f64 {
        let sx = sx.clamp(0.0, (self.width - 1) as f64);
        let sy = sy.clamp(0.0, (self.height - 1) as f64);
        let x0 = (sx.floor() as usize).min(self.width - 2);
        let y0 = (sy.floor() as usize).min(self.height - 2);
        let (fx, fy) = (sx - x0 as f64, sy - y0 as f64);
        let p = |x: usize, y: usize| self.get(x, y) as f64;
        let top = p(x0, y0) * (1.0 - fx) + p(x0 + 1, y0) * fx;
        let bottom = p(x0, y0 + 1) * (1.0 - fx) + p(x0 + 1, y0 + 1) * fx;
        top * (1.0 - fy) + bottom * fy
    }

    pub fn load(path: &Path) -> Result<Self, VisionError> {
        let img = image::ImageReader::open(path)?.with_guessed_format()?.decode()?;
        let (w, h) = (img.width() as usize, img.height() as usize);
        let data = match img {
            image::DynamicImage::ImageLuma8(buf) => buf.into_raw(),
            image::DynamicImage::ImageRgb8(buf) => buf.pixels().map(|p| luma_bt601(p.0[0], p.0[1], p.0[2])).collect(),
            image::DynamicImage::ImageRgba8(buf) => buf.pixels().map(|p| luma_bt601(p.0[0], p.0[1], p.0[2])).collect(),
            _ => return Err(VisionError::UnsupportedImage(path.display().to_string())),
        };
        Frame::new(w, h, data)
    }

    /// Binary PGM (P5, maxval 255).
    pub fn write_pgm(&self, path: &Path) -> Result<(), VisionError> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        write!(f, "P5\n{} {}\n255\n", self.width, self.height)?;
        f.write_all(&self.data)?;
        f.flush()?;
        Ok(())
    }
}

/// ITU-R BT.601 luma, rounded to nearest.
pub fn luma_bt601(r: u8, g: u8, b: u8) -> u8 {
    (0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64).round().clamp(0.0, 255.0) as u8
}

/// Per-pixel validity (`true` = valid).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidityMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl ValidityMask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self, VisionError> {
        if bits.len() != width * height {
            return Err(VisionError::BufferSize { width, height, len: bits.len() });
        }
        Ok(Self { width, height, bits })
    }

    pub fn all_valid(width: usize, height: usize) -> Self {
        Self { width, height, bits: vec![true; width * height] }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.bits[y * self.width + x] = v;
    }

    pub fn count_valid(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_all_valid(&self) -> bool {
        self.bits.iter().all(|&b| b)
    }

    pub fn matches(&self, f: &Frame) -> bool {
        self.width == f.width && self.height == f.height
    }

    /// Grows the invalid region with a `kernel x kernel` square, `iterations` times.
    pub fn dilate_invalid(&self, kernel: usize, iterations: usize) -> Self {
        let r = (kernel / 2) as isize;
        let mut cur = self.clone();
        for _ in 0..iterations {
            let mut next = cur.clone();
            for y in 0..self.height {
                for x in 0..self.width {
                    if !cur.get(x, y) {
                        continue;
                    }
                    'scan: for dy in -r..=r {
                        for dx in -r..=r {
                            let (nx, ny) = (x as isize + dx, y as isize + dy);
                            if nx < 0 || ny < 0 || nx >= self.width as isize || ny >= self.height as isize {
                                continue;
                            }
                            if !cur.get(nx as usize, ny as usize) {
                                next.set(x, y, false);
                                break 'scan;
                            }
                        }
                    }
                }
            }
            cur = next;
        }
        cur
    }

    /// PGM with 255 = valid, 0 = invalid.
    pub fn to_frame(&self) -> Frame {
        Frame { width: self.width, height: self.height, data: self.bits.iter().map(|&b| if b { 255 } else { 0 }).collect() }
    }

    pub fn from_frame(f: &Frame) -> Self {
        Self { width: f.width, height: f.height, bits: f.data.iter().map(|&v| v >= 128).collect() }
    }
}

/// Axis-aligned rectangle in continuous pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub w: f64,
    pub h: f64,
}

impl Rect {
    pub fn full(width: usize, height: usize) -> Self {
        Self { x0: 0.0, y0: 0.0, w: width as f64, h: height as f64 }
    }

    pub fn corners(&self) -> [Vec2; 4] {
        [
            Vec2::new(self.x0, self.y0),
            Vec2::new(self.x0 + self.w, self.y0),
            Vec2::new(self.x0 + self.w, self.y0 + self.h),
            Vec2::new(self.x0, self.y0 + self.h),
        ]
    }
}

/// Point pairs `x -> x'` with optional per-pair confidences.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CorrespondenceSet {
    pub pairs: Vec<(Vec2, Vec2)>,
    pub weights: Option<Vec<f64>>,
}

impl CorrespondenceSet {
    pub fn new(pairs: Vec<(Vec2, Vec2)>) -> Self {
        Self { pairs, weights: None }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn subset(&self, idx: &[usize]) -> Self {
        Self {
            pairs: idx.iter().map(|&i| self.pairs[i]).collect(),
            weights: self.weights.as_ref().map(|w| idx.iter().map(|&i| w[i]).collect()),
        }
    }

    /// `x,y,x2,y2,weight` lines; weight is 1 when absent.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (i, (a, b)) in self.pairs.iter().enumerate() {
            let w = self.weights.as_ref().map_or(1.0, |w| w[i]);
            out.push_str(&format!("{},{},{},{},{}\n", a.x, a.y, b.x, b.y, w));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self, VisionError> {
        let mut pairs = Vec::new();
        let mut weights = Vec::new();
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let vals = line
                .split(',')
                .map(|t| t.trim().parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| VisionError::CorrespondenceParse { line: n + 1, reason: e.to_string() })?;
            if vals.len() != 5 {
                return Err(VisionError::CorrespondenceParse { line: n + 1, reason: format!("{} fields", vals.len()) });
            }
            pairs.push((Vec2::new(vals[0], vals[1]), Vec2::new(vals[2], vals[3])));
            weights.push(vals[4]);
        }
        Ok(Self { pairs, weights: Some(weights) })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VisionParams {
    pub max_corners: usize,
    pub min_distance: f64,
    pub quality: f64,
    pub patch: usize,
    pub search_radius: usize,
}

impl Default for VisionParams {
    fn default() -> Self {
        Self { max_corners: 200, min_distance: 8.0, quality: 0.01, patch: 11, search_radius: 24 }
    }
}

/// Shi-Tomasi corners: minimum eigenvalue of the 3x3-window gradient
/// covariance, 3x3 non-max suppression, greedy spacing by `min_distance`.
pub fn detect_corners(f: &Frame, max_corners: usize, min_distance: f64, quality: f64) -> Vec<Vec2> {
    let (w, h) = (f.width, f.height);
    let mut gx = vec![0.0f64; w * h];
    let mut gy = vec![0.0f64; w * h];
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            gx[y * w + x] = (f.get(x + 1, y) as f64 - f.get(x - 1, y) as f64) * 0.5;
            gy[y * w + x] = (f.get(x, y + 1) as f64 - f.get(x, y - 1) as f64) * 0.5;
        }
    }

    let mut score = vec![0.0f64; w * h];
    let mut best = 0.0f64;
    for y in 2..h - 2 {
        for x in 2..w - 2 {
            let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
            for yy in y - 1..=y + 1 {
                for xx in x - 1..=x + 1 {
                    let (ix, iy) = (gx[yy * w + xx], gy[yy * w + xx]);
                    a += ix * ix;
                    b += ix * iy;
                    c += iy * iy;
                }
            }
            let s = 0.5 * (a + c) - (0.25 * (a - c) * (a - c) + b * b).sqrt();
            score[y * w + x] = s;
            best = best.max(s);
        }
    }
    if best <= 1e-9 || max_corners == 0 {
        return Vec::new();
    }

    let floor = quality * best;
    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
    for y in 2..h - 2 {
        for x in 2..w - 2 {
            let s = score[y * w + x];
            if s < floor || s <= 0.0 {
                continue;
            }
            let is_max = (y - 1..=y + 1).all(|yy| (x - 1..=x + 1).all(|xx| score[yy * w + xx] <= s));
            if is_max {
                candidates.push((s, x, y));
            }
        }
    }
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.2.cmp(&b.2)).then(a.1.cmp(&b.1)));

    let min_d2 = min_distance * min_distance;
    let mut out: Vec<Vec2> = Vec::new();
    for (_, x, y) in candidates {
        let p = Vec2::new(x as f64 + 0.5, y as f64 + 0.5);
        if out.iter().all(|q| (q - p).norm_squared() >= min_d2) {
            out.push(p);
            if out.len() == max_corners {
                break;
            }
        }
    }
    out
}

/// Summed-area tables of samples and squared samples.
struct Integral {
    stride: usize,
    sum: Vec<i64>,
    sq: Vec<i64>,
}

impl Integral {
    fn new(f: &Frame) -> Self {
        let stride = f.width + 1;
        let mut sum = vec![0i64; stride * (f.height + 1)];
        let mut sq = vec![0i64; stride * (f.height + 1)];
        for y in 0..f.height {
            let (mut rs, mut rq) = (0i64, 0i64);
            for x in 0..f.width {
                let v = f.get(x, y) as i64;
                rs += v;
                rq += v * v;
                sum[(y + 1) * stride + x + 1] = sum[y * stride + x + 1] + rs;
                sq[(y + 1) * stride + x + 1] = sq[y * stride + x + 1] + rq;
            }
        }
        Self { stride, sum, sq }
    }

    /// Sums over the `size x size` block with top-left `(x, y)`.
    fn block(&self, x: usize, y: usize, size: usize) -> (i64, i64) {
        let s = self.stride;
        let (x1, y1) = (x + size, y + size);
        let sum = self.sum[y1 * s + x1] - self.sum[y * s + x1] - self.sum[y1 * s + x] + self.sum[y * s + x];
        let sq = self.sq[y1 * s + x1] - self.sq[y * s + x1] - self.sq[y1 * s + x] + self.sq[y * s + x];
        (sum, sq)
    }
}

/// ZNCC block matching of each corner of `a` into `b`.
///
/// Displacements are integral; pairs whose peak correlation is below 0.5 are
/// dropped and the peak is kept as the pair's weight.
pub fn match_correspondences(a: &Frame, b: &Frame, corners: &[Vec2], patch: usize, search_radius: usize) -> CorrespondenceSet {
    assert!(patch % 2 == 1 && patch >= 5, "patch must be odd and >= 5");
    let half = patch / 2;
    let n = (patch * patch) as i64;
    let integral = Integral::new(b);
    let r = search_radius as isize;

    let mut pairs = Vec::new();
    let mut weights = Vec::new();
    let mut template = vec![0i64; patch * patch];

    for c in corners {
        let (cx, cy) = (c.x.floor() as isize, c.y.floor() as isize);
        let (ax, ay) = (cx - half as isize, cy - half as isize);
        if ax < 0 || ay < 0 || ax as usize + patch > a.width || ay as usize + patch > a.height {
            continue;
        }
        let (ax, ay) = (ax as usize, ay as usize);
        let (mut sa, mut qa) = (0i64, 0i64);
        for j in 0..patch {
            for i in 0..patch {
                let v = a.get(ax + i, ay + j) as i64;
                template[j * patch + i] = v;
                sa += v;
                qa += v * v;
            }
        }
        let var_a = n * qa - sa * sa;
        if var_a == 0 {
            continue;
        }

        let mut best: Option<(f64, isize, isize)> = None;
        for dy in -r..=r {
            let by = ay as isize + dy;
            if by < 0 || by as usize + patch > b.height {
                continue;
            }
            for dx in -r..=r {
                let bx = ax as isize + dx;
                if bx < 0 || bx as usize + patch > b.width {
                    continue;
                }
                let (bx, by) = (bx as usize, by as usize);
                let (sb, qb) = integral.block(bx, by, patch);
                let var_b = n * qb - sb * sb;
                if var_b == 0 {
                    continue;
                }
                let mut cross = 0i64;
                for j in 0..patch {
                    let row = &b.data[(by + j) * b.width + bx..(by + j) * b.width + bx + patch];
                    let trow = &template[j * patch..(j + 1) * patch];
                    cross += row.iter().zip(trow).map(|(&p, &t)| p as i64 * t).sum::<i64>();
                }
                let num = n * cross - sa * sb;
                let zncc = if (num as i128) * (num as i128) == (var_a as i128) * (var_b as i128) {
                    num.signum() as f64
                } else {
                    (num as f64 / ((var_a as f64).sqrt() * (var_b as f64).sqrt())).clamp(-1.0, 1.0)
                };
                let better = match best {
                    None => true,
                    Some((s, bdx, bdy)) => zncc > s || (zncc == s && dx * dx + dy * dy < bdx * bdx + bdy * bdy),
                };
                if better {
                    best = Some((zncc, dx, dy));
                }
            }
        }
        if let Some((score, dx, dy)) = best {
            if score >= 0.5 {
                pairs.push((*c, Vec2::new(c.x + dx as f64, c.y + dy as f64)));
                weights.push(score);
            }
        }
    }
    CorrespondenceSet { pairs, weights: Some(weights) }
}

/// Inverse-mapped bilinear warp; destination pixels whose source falls
/// outside the frame are 0 and invalid.
pub fn warp_frame(f: &Frame, w: &Homography) -> Result<(Frame, ValidityMask), VisionError> {
    let inv = w.inverse().map_err(|_| VisionError::SingularWarp)?;
    let (width, height) = (f.width, f.height);
    let mut out = vec![0u8; width * height];
    let mut bits = vec![false; width * height];
    for y in 0..height {
        for x in 0..width {
            let dst = Vec2::new(x as f64 + 0.5, y as f64 + 0.5);
            let Ok(src) = homography_apply(&inv, dst) else { continue };
            if let Some(v) = f.sample(src.x - 0.5, src.y - 0.5) {
                out[y * width + x] = v.round().clamp(0.0, 255.0) as u8;
                bits[y * width + x] = true;
            }
        }
    }
    Ok((Frame { width, height, data: out }, ValidityMask { width, height, bits }))
}

/// Crops `rect` out of `f` and rescales it to `out_w x out_h` (bilinear).
pub fn crop_resize(f: &Frame, rect: &Rect, out_w: usize, out_h: usize) -> Frame {
    let (sx, sy) = (rect.w / out_w as f64, rect.h / out_h as f64);
    let mut data = Vec::with_capacity(out_w * out_h);
    for y in 0..out_h {
        let py = rect.y0 + (y as f64 + 0.5) * sy - 0.5;
        for x in 0..out_w {
            let px = rect.x0 + (x as f64 + 0.5) * sx - 0.5;
            data.push(f.sample_clamped(px, py).round().clamp(0.0, 255.0) as u8);
        }
    }
    Frame { width: out_w, height: out_h, data }
}

/// Nearest-neighbour counterpart of [`crop_resize`] for masks.
pub fn crop_resize_mask(m: &ValidityMask, rect: &Rect, out_w: usize, out_h: usize) -> ValidityMask {
    let (sx, sy) = (rect.w / out_w as f64, rect.h / out_h as f64);
    let mut bits = Vec::with_capacity(out_w * out_h);
    for y in 0..out_h {
        let py = (rect.y0 + (y as f64 + 0.5) * sy).floor().clamp(0.0, (m.height - 1) as f64) as usize;
        for x in 0..out_w {
            let px = (rect.x0 + (x as f64 + 0.5) * sx).floor().clamp(0.0, (m.width - 1) as f64) as usize;
            bits.push(m.get(px, py));
        }
    }
    ValidityMask { width: out_w, height: out_h, bits }
}
