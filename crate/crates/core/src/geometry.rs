//! Small-matrix geometry: projective maps, SO(3) exponential/log, rigid fits.

use std::fmt;
use std::ops::Mul;
use std::str::FromStr;

use nalgebra::{Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Vec2 = Vector2<f64>;
pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

const DET_EPS: f64 = 1e-12;
const ROTATION_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("projective point maps to infinity (|w| = {0:e})")]
    DegeneratePoint(f64),
    #[error("matrix is not a rotation (orthogonality error {orthogonality:e}, det {det})")]
    NotARotation { orthogonality: f64, det: f64 },
    #[error("homography is singular or cannot be normalized")]
    SingularHomography,
    #[error("point configuration is degenerate (collinear or coincident)")]
    DegenerateConfiguration,
    #[error("point lists differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("cannot parse homography: {0}")]
    Parse(String),
}

/// A 3x3 projective map between pixel coordinate frames.
///
/// Always stored normalized so that the bottom-right entry is exactly 1.
#[derive(Clone, Copy, PartialEq)]
pub struct Homography(Mat3);

impl Homography {
    pub fn new(m: Mat3) -> Result<Self, GeometryError> {
        let scale = m[(2, 2)];
        if !scale.is_finite() || scale.abs() < DET_EPS || m.iter().any(|v| !v.is_finite()) {
            return Err(GeometryError::SingularHomography);
        }
        let mut n = m / scale;
        n[(2, 2)] = 1.0;
        if n.determinant().abs() <= DET_EPS {
            return Err(GeometryError::SingularHomography);
        }
        Ok(Self(n))
    }

    pub fn identity() -> Self {
        Self(Mat3::identity())
    }

    pub fn translation(dx: f64, dy: f64) -> Self {
        Self(Mat3::new(1.0, 0.0, dx, 0.0, 1.0, dy, 0.0, 0.0, 1.0))
    }

    /// Rotation by `angle` radians (counter-clockwise in x-right/y-down pixel
    /// axes means clockwise on screen) about `center`.
    pub fn rotation_about(angle: f64, center: Vec2) -> Self {
        Self::similarity(0.0, 0.0, angle, 0.0, center)
    }

    /// `T(center + t) * R(angle) * exp(log_scale) * T(-center)`.
    pub fn similarity(tx: f64, ty: f64, angle: f64, log_scale: f64, center: Vec2) -> Self {
        let s = log_scale.exp();
        let (sin, cos) = angle.sin_cos();
        let (a, b) = (s * cos, -s * sin);
        let (c, d) = (s * sin, s * cos);
        let ox = center.x + tx - (a * center.x + b * center.y);
        let oy = center.y + ty - (c * center.x + d * center.y);
        Self(Mat3::new(a, b, ox, c, d, oy, 0.0, 0.0, 1.0))
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.0
    }

    pub fn inverse(&self) -> Result<Self, GeometryError> {
        let inv = self.0.try_inverse().ok_or(GeometryError::SingularHomography)?;
        Self::new(inv)
    }

    pub fn apply(&self, x: Vec2) -> Result<Vec2, GeometryError> {
        homography_apply(self, x)
    }

    /// Maximum absolute elementwise difference to `other`.
    pub fn max_abs_diff(&self, other: &Homography) -> f64 {
        (self.0 - other.0).amax()
    }

    pub fn to_line(&self) -> String {
        let m = &self.0;
        let vals = [m[(0, 0)], m[(0, 1)], m[(0, 2)], m[(1, 0)], m[(1, 1)], m[(1, 2)], m[(2, 0)], m[(2, 1)], m[(2, 2)]];
        vals.iter().map(|v| format!("{v}")).collect::<Vec<_>>().join(" ")
    }
}

impl fmt::Debug for Homography {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Homography[{}]", self.to_line())
    }
}

impl fmt::Display for Homography {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_line())
    }
}

impl FromStr for Homography {
    type Err = GeometryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let vals = s
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|e| GeometryError::Parse(format!("{t:?}: {e}"))))
            .collect::<Result<Vec<_>, _>>()?;
        if vals.len() != 9 {
            return Err(GeometryError::Parse(format!("expected 9 numbers, found {}", vals.len())));
        }
        Homography::new(Mat3::from_row_slice(&vals))
    }
}

impl Mul for Homography {
    type Output = Homography;

    /// Composition; the product of two invertible maps is invertible, so only
    /// the renormalization can fail, which happens when the product sends the
    /// origin to infinity.
    fn mul(self, rhs: Homography) -> Homography {
        let m = self.0 * rhs.0;
        Homography::new(m).unwrap_or(Homography(m))
    }
}

impl Mul for &Homography {
    type Output = Homography;

    fn mul(self, rhs: &Homography) -> Homography {
        *self * *rhs
    }
}

/// Maps a pixel point through `h` with the projective division.
pub fn homography_apply(h: &Homography, x: Vec2) -> Result<Vec2, GeometryError> {
    let p = h.0 * Vec3::new(x.x, x.y, 1.0);
    if p.z.abs() <= DET_EPS {
        return Err(GeometryError::DegeneratePoint(p.z));
    }
    Ok(Vec2::new(p.x / p.z, p.y / p.z))
}

pub fn parse_homography_lines(text: &str) -> Result<Vec<Homography>, GeometryError> {
    text.lines().filter(|l| !l.trim().is_empty()).map(str::parse).collect()
}

pub fn write_homography_lines(hs: &[Homography]) -> String {
    let mut out = String::new();
    for h in hs {
        out.push_str(&h.to_line());
        out.push('\n');
    }
    out
}

/// Rotation vector (axis times angle, radians).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotVec(pub Vec3);

impl RotVec {
    pub fn angle(&self) -> f64 {
        self.0.norm()
    }
}

pub fn skew(v: &Vec3) -> Mat3 {
    Mat3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

fn vee_antisym(r: &Mat3) -> Vec3 {
    Vec3::new(r[(2, 1)] - r[(1, 2)], r[(0, 2)] - r[(2, 0)], r[(1, 0)] - r[(0, 1)])
}

pub fn check_rotation(r: &Mat3) -> Result<(), GeometryError> {
    let orthogonality = (r.transpose() * r - Mat3::identity()).amax();
    let det = r.determinant();
    if !(orthogonality <= ROTATION_TOL) || !((det - 1.0).abs() <= ROTATION_TOL) {
        return Err(GeometryError::NotARotation { orthogonality, det });
    }
    Ok(())
}

/// Principal logarithm of a rotation; the angle of the result lies in [0, pi].
pub fn so3_log(r: &Mat3) -> Result<RotVec, GeometryError> {
    check_rotation(r)?;
    let w = vee_antisym(r);
    let sin = 0.5 * w.norm();
    let cos = 0.5 * (r.trace() - 1.0);
    let angle = sin.atan2(cos);

    if angle < 1e-4 {
        // theta / (2 sin theta) = 1/2 (1 + theta^2/6 + ...)
        return Ok(RotVec(w * (0.5 * (1.0 + angle * angle / 6.0))));
    }
    if angle > std::f64::consts::PI - 1e-3 {
        // Near a half turn the antisymmetric part vanishes; recover the axis
        // from the symmetric part, a a^T = (sym(R) - cos I) / (1 - cos).
        let sym = (r + r.transpose()) * 0.5;
        let outer = (sym - Mat3::identity() * cos) / (1.0 - cos);
        let k = (0..3).max_by(|&i, &j| outer[(i, i)].total_cmp(&outer[(j, j)])).unwrap_or(0);
        let mut axis = outer.column(k).into_owned() / outer[(k, k)].max(f64::MIN_POSITIVE).sqrt();
        axis /= axis.norm();
        if axis.dot(&w) < 0.0 {
            axis = -axis;
        }
        return Ok(RotVec(axis * angle));
    }
    Ok(RotVec(w * (angle / (2.0 * angle.sin()))))
}

/// Rodrigues' formula.
pub fn so3_exp(phi: &RotVec) -> Mat3 {
    let v = phi.0;
    let theta2 = v.norm_squared();
    let theta = theta2.sqrt();
    let k = skew(&v);
    let (a, b) = if theta < 1e-4 { (1.0 - theta2 / 6.0, 0.5 - theta2 / 24.0) } else { (theta.sin() / theta, (1.0 - theta.cos()) / theta2) };
    Mat3::identity() + k * a + k * k * b
}

pub fn rotation_about(axis: &Vec3, angle: f64) -> Mat3 {
    so3_exp(&RotVec(axis.normalize() * angle))
}

/// Rigid transform `x -> r x + t` (meters).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PoseRepr", into = "PoseRepr")]
pub struct Pose {
    pub r: Mat3,
    pub t: Vec3,
}

/// File form: row-major rotation and a translation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PoseRepr {
    pub r: [f64; 9],
    pub t: [f64; 3],
}

impl TryFrom<PoseRepr> for Pose {
    type Error = GeometryError;

    fn try_from(p: PoseRepr) -> Result<Self, Self::Error> {
        Pose::new(Mat3::from_row_slice(&p.r), Vec3::from_row_slice(&p.t))
    }
}

impl From<Pose> for PoseRepr {
    fn from(p: Pose) -> Self {
        let mut r = [0.0; 9];
        for i in 0..3 {
            for j in 0..3 {
                r[3 * i + j] = p.r[(i, j)];
            }
        }
        PoseRepr { r, t: [p.t.x, p.t.y, p.t.z] }
    }
}

impl Pose {
    pub fn new(r: Mat3, t: Vec3) -> Result<Self, GeometryError> {
        check_rotation(&r)?;
        Ok(Self { r, t })
    }

    pub fn identity() -> Self {
        Self { r: Mat3::identity(), t: Vec3::zeros() }
    }

    pub fn from_translation(t: Vec3) -> Self {
        Self { r: Mat3::identity(), t }
    }

    pub fn from_rotation(r: Mat3) -> Self {
        Self { r, t: Vec3::zeros() }
    }

    pub fn inverse(&self) -> Self {
        let rt = self.r.transpose();
        Self { r: rt, t: -(rt * self.t) }
    }

    pub fn transform_point(&self, p: &Vec3) -> Vec3 {
        self.r * p + self.t
    }

    pub fn compose(&self, other: &Pose) -> Pose {
        Pose { r: self.r * other.r, t: self.r * other.t + self.t }
    }
}

impl Mul for Pose {
    type Output = Pose;

    fn mul(self, rhs: Pose) -> Pose {
        self.compose(&rhs)
    }
}

/// Least-squares rigid transform (no scale) with `r src_i + t ~ dst_i`.
pub fn rigid_fit(src: &[Vec3], dst: &[Vec3]) -> Result<Pose, GeometryError> {
    if src.len() != dst.len() {
        return Err(GeometryError::LengthMismatch(src.len(), dst.len()));
    }
    if src.len() < 3 {
        return Err(GeometryError::DegenerateConfiguration);
    }
    let n = src.len() as f64;
    let cs = src.iter().sum::<Vec3>() / n;
    let cd = dst.iter().sum::<Vec3>() / n;

    let mut scatter = Mat3::zeros();
    let mut cross = Mat3::zeros();
    for (s, d) in src.iter().zip(dst) {
        let (s, d) = (s - cs, d - cd);
        scatter += s * s.transpose();
        cross += s * d.transpose();
    }
    let mut spread = scatter.symmetric_eigenvalues().as_slice().to_vec();
    spread.sort_by(|a, b| b.total_cmp(a));
    if spread[0] <= 1e-24 || spread[1] <= 1e-12 * spread[0] {
        return Err(GeometryError::DegenerateConfiguration);
    }

    let svd = cross.svd(true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(GeometryError::DegenerateConfiguration),
    };
    let v = v_t.transpose();
    let d = (v * u.transpose()).determinant().signum();
    let correction = Mat3::from_diagonal(&Vec3::new(1.0, 1.0, d));
    let r = v * correction * u.transpose();
    let t = cd - r * cs;
    Pose::new(r, t)
}
