//! Synthetic inputs shared by the integration and acceptance suites.
#![allow(dead_code)]

use std::path::{Path, PathBuf};

use egokit_core::geometry::{Homography, Pose, Vec2, Vec3};
use egokit_core::retarget::{HandKeypoints, Joint, KinematicChain};
use egokit_core::stabilizer::StabilizerParams;
use egokit_core::vision::{Frame, VisionParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Blocky random texture with a smooth brightness ramp.
pub struct Canvas {
    pub width: usize,
    pub height: usize,
    cell: usize,
    cols: usize,
    cells: Vec<f64>,
}

impl Canvas {
    pub fn new(width: usize, height: usize, cell: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cols = width / cell + 2;
        let rows = height / cell + 2;
        let cells = (0..cols * rows).map(|_| rng.random_range(20.0..235.0)).collect();
        Self { width, height, cell, cols, cells }
    }

    fn at(&self, x: f64, y: f64) -> f64 {
        let cx = (x.max(0.0) as usize / self.cell).min(self.cols - 1);
        let cy = (y.max(0.0) as usize / self.cell).min(self.cells.len() / self.cols - 1);
        self.cells[cy * self.cols + cx]
    }

    /// Renders the view through `h`, which maps canvas coordinates to
    /// frame coordinates; 2x2 supersampled.
    pub fn render(&self, h: &Homography, w: usize, ht: usize) -> Frame {
        let inv = h.inverse().expect("invertible view");
        Frame::from_fn(w, ht, |x, y| {
            let mut acc = 0.0;
            for (dx, dy) in [(0.25, 0.25), (0.75, 0.25), (0.25, 0.75), (0.75, 0.75)] {
                let p = inv.apply(Vec2::new(x as f64 + dx, y as f64 + dy)).expect("finite");
                acc += self.at(p.x, p.y);
            }
            (acc / 4.0).round() as u8
        })
        .expect("valid frame")
    }
}

pub const SEQ_W: usize = 160;
pub const SEQ_H: usize = 120;

/// `n` frames of a slow pan over a texture with i.i.d. per-frame jitter of
/// up to `shift` px and `angle_deg` degrees about the frame center.
pub fn jittered_sequence(n: usize, shift: f64, angle_deg: f64, seed: u64) -> Vec<Frame> {
    let canvas = Canvas::new(SEQ_W + 160, SEQ_H + 80, 6, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
    let center = Vec2::new(SEQ_W as f64 / 2.0, SEQ_H as f64 / 2.0);
    (0..n)
        .map(|t| {
            let pan = Homography::translation(-40.0 - 0.4 * t as f64, -40.0);
            let jitter = Homography::similarity(
                rng.random_range(-shift..=shift),
                rng.random_range(-shift..=shift),
                rng.random_range(-angle_deg..=angle_deg).to_radians(),
                0.0,
                center,
            );
            let view = Homography::new(jitter.matrix() * pan.matrix()).expect("view");
            canvas.render(&view, SEQ_W, SEQ_H)
        })
        .collect()
}

pub fn static_sequence(n: usize, seed: u64) -> Vec<Frame> {
    let canvas = Canvas::new(SEQ_W, SEQ_H, 6, seed);
    let f = canvas.render(&Homography::identity(), SEQ_W, SEQ_H);
    vec![f; n]
}

/// Stabilizer settings sized for the small synthetic frames.
pub fn seq_params() -> StabilizerParams {
    StabilizerParams {
        sigma: 7.0,
        vision: VisionParams { max_corners: 120, min_distance: 8.0, quality: 0.01, patch: 9, search_radius: 14 },
        ..Default::default()
    }
}

pub fn write_frames(dir: &Path, frames: &[Frame]) -> Vec<PathBuf> {
    std::fs::create_dir_all(dir).unwrap();
    frames
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let p = dir.join(format!("{i:06}.pgm"));
            f.write_pgm(&p).unwrap();
            p
        })
        .collect()
}

/// Six-joint arm with a spherical-ish wrist.
pub fn arm6() -> KinematicChain {
    let joint = |axis: [f64; 3], t: [f64; 3]| Joint { axis, origin: Pose::from_translation(Vec3::from(t)), lower: -2.8, upper: 2.8 };
    KinematicChain::new(
        vec![
            joint([0.0, 0.0, 1.0], [0.0, 0.0, 0.15]),
            joint([0.0, 1.0, 0.0], [0.0, 0.0, 0.1]),
            joint([0.0, 1.0, 0.0], [0.0, 0.0, 0.3]),
            joint([1.0, 0.0, 0.0], [0.25, 0.0, 0.0]),
            joint([0.0, 1.0, 0.0], [0.05, 0.0, 0.0]),
            joint([1.0, 0.0, 0.0], [0.05, 0.0, 0.0]),
        ],
        Pose::identity(),
        Pose::from_translation(Vec3::new(0.08, 0.0, 0.0)),
    )
    .unwrap()
}

/// Keypoints whose wrist pose (as recovered by the retargeter) equals
/// `pose`: wrist at the origin, knuckles along +x, thumb side -y.
pub fn hand_at(pose: &Pose, spread: f64) -> HandKeypoints {
    let local_mcp = [[0.08, -0.03, 0.0], [0.085, -0.01, 0.0], [0.08, 0.01, 0.0], [0.075, 0.03, 0.0], [0.04, -0.05, 0.0]];
    let tip = |m: [f64; 3]| [m[0] * (1.0 + spread), m[1] * (1.0 + spread), 0.0];
    let tf = |p: [f64; 3]| {
        let v = pose.transform_point(&Vec3::from(p));
        [v.x, v.y, v.z]
    };
    HandKeypoints {
        wrist: tf([0.0; 3]),
        mcp: local_mcp.map(tf),
        tips: local_mcp.map(|m| tf(tip(m))),
        body_origin: [0.0; 3],
        body_rot: [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
        timestamp: None,
    }
}
