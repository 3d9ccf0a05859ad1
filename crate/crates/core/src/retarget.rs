//! Hand keypoints to robot joint trajectories.
//!
//! Keypoints are expressed in the body frame, a wrist pose is built from the
//! palm landmarks and moved into the robot base frame with a fixed calibration;
//! joint angles then come from damped-least-squares IK that weights palm tilt
//! over tool roll, pulls toward the previous solution, and clips to joint
//! limits after every step.

use nalgebra::{DVector, Matrix6, Matrix6xX, Vector6};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use std::f64::consts::PI;

use crate::geometry::{check_rotation, rotation_about, skew, so3_log, GeometryError, Mat3, Pose, PoseRepr, RotVec, Vec3};

pub const MAX_JOINTS: usize = 12;
pub const ARM_DOF: usize = 6;

/// Finger order used by [`HandKeypoints::mcp`] and [`HandKeypoints::tips`].
pub const INDEX: usize = 0;
pub const MIDDLE: usize = 1;
pub const RING: usize = 2;
pub const PINKY: usize = 3;
pub const THUMB: usize = 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RetargetError {
    #[error("expected {expected} joint values, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("degenerate hand: {0}")]
    DegenerateHand(String),
    #[error("invalid kinematic chain: {0}")]
    InvalidChain(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Joint {
    pub axis: [f64; 3],
    /// Fixed transform from the parent frame to this joint.
    pub origin: Pose,
    pub lower: f64,
    pub upper: f64,
}

impl Joint {
    pub fn axis(&self) -> Vec3 {
        Vec3::from(self.axis)
    }
}

/// Serial chain of revolute joints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ChainRepr", into = "ChainRepr")]
pub struct KinematicChain {
    joints: Vec<Joint>,
    base: Pose,
    tool: Pose,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChainRepr {
    pub joints: Vec<Joint>,
    #[serde(default = "identity_repr")]
    pub base: PoseRepr,
    #[serde(default = "identity_repr")]
    pub tool: PoseRepr,
}

fn identity_repr() -> PoseRepr {
    Pose::identity().into()
}

impl TryFrom<ChainRepr> for KinematicChain {
    type Error = RetargetError;

    fn try_from(r: ChainRepr) -> Result<Self, Self::Error> {
        KinematicChain::new(r.joints, Pose::try_from(r.base)?, Pose::try_from(r.tool)?)
    }
}

impl From<KinematicChain> for ChainRepr {
    fn from(c: KinematicChain) -> Self {
        ChainRepr { joints: c.joints, base: c.base.into(), tool: c.tool.into() }
    }
}

impl KinematicChain {
    pub fn new(joints: Vec<Joint>, base: Pose, tool: Pose) -> Result<Self, RetargetError> {
        if joints.is_empty() || joints.len() > MAX_JOINTS {
            return Err(RetargetError::InvalidChain(format!("joint count {} outside 1..={MAX_JOINTS}", joints.len())));
        }
        for (i, j) in joints.iter().enumerate() {
            if !(j.lower < j.upper) {
                return Err(RetargetError::InvalidChain(format!("joint {i}: lower {} >= upper {}", j.lower, j.upper)));
            }
            if (j.axis().norm() - 1.0).abs() > 1e-9 {
                return Err(RetargetError::InvalidChain(format!("joint {i}: axis is not unit length")));
            }
        }
        Ok(Self { joints, base, tool })
    }

    pub fn joints(&self) -> &[Joint] {
        &self.joints
    }

    pub fn dof(&self) -> usize {
        self.joints.len()
    }

    pub fn base(&self) -> &Pose {
        &self.base
    }

    pub fn tool(&self) -> &Pose {
        &self.tool
    }

    pub fn lower(&self) -> DVector<f64> {
        DVector::from_iterator(self.dof(), self.joints.iter().map(|j| j.lower))
    }

    pub fn upper(&self) -> DVector<f64> {
        DVector::from_iterator(self.dof(), self.joints.iter().map(|j| j.upper))
    }

    pub fn clip(&self, q: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.dof(), q.iter().zip(&self.joints).map(|(v, j)| v.clamp(j.lower, j.upper)))
    }

    pub fn within_limits(&self, q: &DVector<f64>) -> bool {
        q.iter().zip(&self.joints).all(|(v, j)| *v >= j.lower && *v <= j.upper)
    }

    fn check_dim(&self, q: &DVector<f64>) -> Result<(), RetargetError> {
        if q.len() != self.dof() {
            return Err(RetargetError::DimensionMismatch { expected: self.dof(), got: q.len() });
        }
        Ok(())
    }

    /// World frame of each joint before its own rotation, and the tool pose.
    fn joint_frames(&self, q: &DVector<f64>) -> (Vec<Pose>, Pose) {
        let mut frames = Vec::with_capacity(self.dof());
        let mut cur = self.base;
        for (j, &angle) in self.joints.iter().zip(q.iter()) {
            cur = cur * j.origin;
            frames.push(cur);
            cur = cur * Pose::from_rotation(rotation_about(&j.axis(), angle));
        }
        (frames, cur * self.tool)
    }
}

pub fn forward_kinematics(chain: &KinematicChain, q: &DVector<f64>) -> Result<Pose, RetargetError> {
    chain.check_dim(q)?;
    Ok(chain.joint_frames(q).1)
}

/// Geometric Jacobian; rows 0..3 linear velocity, rows 3..6 angular velocity.
pub fn jacobian(chain: &KinematicChain, q: &DVector<f64>) -> Result<Matrix6xX<f64>, RetargetError> {
    chain.check_dim(q)?;
    let (frames, ee) = chain.joint_frames(q);
    let mut j = Matrix6xX::zeros(chain.dof());
    for (i, (frame, joint)) in frames.iter().zip(&chain.joints).enumerate() {
        let z = frame.r * joint.axis();
        let lin = z.cross(&(ee.t - frame.t));
        j.fixed_view_mut::<3, 1>(0, i).copy_from(&lin);
        j.fixed_view_mut::<3, 1>(3, i).copy_from(&z);
    }
    Ok(j)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IkParams {
    /// Tilt weights `(w_x, w_y, w_z)` in the tool frame; `w_z` weights roll.
    pub w_tilt: [f64; 3],
    pub lambda: f64,
    pub mu: f64,
    pub max_iters: usize,
    pub pos_tol: f64,
    pub rot_tol: f64,
}

impl Default for IkParams {
    fn default() -> Self {
        Self { w_tilt: [1.0, 1.0, 0.05], lambda: 0.01, mu: 0.05, max_iters: 100, pos_tol: 1e-4, rot_tol: 1e-3 }
    }
}

impl IkParams {
    pub fn validate(&self) -> Result<(), RetargetError> {
        let [wx, wy, wz] = self.w_tilt;
        if wx < 0.0 || wy < 0.0 || wz < 0.0 || wz > wx || wz > wy {
            return Err(RetargetError::InvalidParams(format!("tilt weights {:?} must satisfy 0 <= w_z <= w_x, w_y", self.w_tilt)));
        }
        if !(self.mu > 0.0) || !(self.lambda >= 0.0) {
            return Err(RetargetError::InvalidParams(format!("need mu > 0 and lambda >= 0 (mu {}, lambda {})", self.mu, self.lambda)));
        }
        Ok(())
    }
}

/// Rotation error `Log(r_target r_ee^T)` and its tilt-weighted norm, with the
/// weights applied along the end effector's own axes.
pub fn tilt_error(r_target: &Mat3, r_ee: &Mat3, w: &[f64; 3]) -> Result<(RotVec, f64), RetargetError> {
    check_rotation(r_target)?;
    check_rotation(r_ee)?;
    let phi = so3_log(&(r_target * r_ee.transpose()))?;
    let local = r_ee.transpose() * phi.0;
    let weighted = (w[0] * local.x * local.x + w[1] * local.y * local.y + w[2] * local.z * local.z).sqrt();
    Ok((phi, weighted))
}

/// Inverse left Jacobian of SO(3) at `phi`.
fn left_jacobian_inv(phi: &Vec3) -> Mat3 {
    let theta = phi.norm().min(PI - 1e-6);
    let k = skew(phi);
    let c = if theta < 1e-4 {
        1.0 / 12.0 + theta * theta / 720.0
    } else {
        1.0 / (theta * theta) - (1.0 + theta.cos()) / (2.0 * theta * theta.sin())
    };
    Mat3::identity() - k * 0.5 + k * k * c
}

/// Stacked weighted task error and its Jacobian (the negated derivative of
/// the error) at `q`.
fn stacked_task(
    chain: &KinematicChain,
    q: &DVector<f64>,
    target: &Pose,
    w: &[f64; 3],
) -> Result<(Vector6<f64>, Matrix6xX<f64>, f64, f64), RetargetError> {
    let ee = forward_kinematics(chain, q)?;
    let mut jac = jacobian(chain, q)?;
    let (phi, tilt) = tilt_error(&target.r, &ee.r, w)?;
    let sqrt_w = Mat3::from_diagonal(&Vec3::new(w[0].sqrt(), w[1].sqrt(), w[2].sqrt()));
    let to_tool = sqrt_w * ee.r.transpose();

    let pos = target.t - ee.t;
    let rot = to_tool * phi.0;
    let mut e = Vector6::zeros();
    e.fixed_rows_mut::<3>(0).copy_from(&pos);
    e.fixed_rows_mut::<3>(3).copy_from(&rot);

    let angular = to_tool * left_jacobian_inv(&phi.0) * jac.fixed_rows::<3>(3);
    jac.fixed_rows_mut::<3>(3).copy_from(&angular);
    Ok((e, jac, pos.norm(), tilt))
}

/// One damped-least-squares update followed by clipping to the joint limits:
/// `q' = clip(q + J^T (J J^T + mu^2 I)^-1 e - lambda (q - q_prev))`.
pub fn ik_step(
    chain: &KinematicChain,
    q: &DVector<f64>,
    target: &Pose,
    q_prev: &DVector<f64>,
    p: &IkParams,
) -> Result<DVector<f64>, RetargetError> {
    chain.check_dim(q)?;
    chain.check_dim(q_prev)?;
    let (e, jac, _, _) = stacked_task(chain, q, target, &p.w_tilt)?;
    let delta = dls_delta(&e, &jac, p.mu) - (q - q_prev) * p.lambda;
    Ok(chain.clip(&(q + delta)))
}

fn dls_delta(e: &Vector6<f64>, jac: &Matrix6xX<f64>, mu: f64) -> DVector<f64> {
    let a: Matrix6<f64> = jac * jac.transpose() + Matrix6::identity() * (mu * mu);
    let y = a.cholesky().map(|c| c.solve(e)).unwrap_or_else(|| a.lu().solve(e).unwrap_or_else(Vector6::zeros));
    let d = jac.transpose() * y;
    DVector::from_iterator(d.len(), d.iter().copied())
}

#[derive(Debug, Clone, PartialEq)]
pub struct IkSolution {
    pub q: DVector<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub pos_err: f64,
    pub tilt_err: f64,
}

fn merit(e: &Vector6<f64>, q: &DVector<f64>, q_prev: &DVector<f64>, lambda: f64) -> f64 {
    e.norm_squared() + lambda * (q - q_prev).norm_squared()
}

/// Retries the step with the damping raised fourfold until the merit stops
/// increasing; falls back to the undamped-retry step when none helps.
fn damped_trial(
    chain: &KinematicChain,
    q: &DVector<f64>,
    task: (&Vector6<f64>, &Matrix6xX<f64>),
    target: &Pose,
    q_prev: &DVector<f64>,
    p: &IkParams,
) -> Result<DVector<f64>, RetargetError> {
    let (e, jac) = task;
    let current = merit(e, q, q_prev, p.lambda);
    let pull = (q - q_prev) * p.lambda;
    let mut mu = p.mu;
    let mut first = None;
    for _ in 0..12 {
        let trial = chain.clip(&(q + dls_delta(e, jac, mu) - &pull));
        let (te, _, _, _) = stacked_task(chain, &trial, target, &p.w_tilt)?;
        if merit(&te, &trial, q_prev, p.lambda) <= current {
            return Ok(trial);
        }
        first.get_or_insert(trial);
        mu *= 4.0;
    }
    Ok(first.expect("at least one trial"))
}

/// Iterates [`ik_step`] from `q_prev` until both tolerances hold, the step
/// vanishes (infinity norm below 1e-10), or `max_iters` steps were taken.
/// A step that would increase the squared stacked error plus the smoothness
/// penalty is retried with stronger damping.
pub fn solve_ik(chain: &KinematicChain, target: &Pose, q_prev: &DVector<f64>, p: &IkParams) -> Result<IkSolution, RetargetError> {
    p.validate()?;
    chain.check_dim(q_prev)?;
    let mut q = chain.clip(q_prev);
    let mut iterations = 0;
    loop {
        let (e, jac, pos_err, tilt_err) = stacked_task(chain, &q, target, &p.w_tilt)?;
        if pos_err < p.pos_tol && tilt_err < p.rot_tol {
            return Ok(IkSolution { q, converged: true, iterations, pos_err, tilt_err });
        }
        if iterations == p.max_iters {
            return Ok(IkSolution { q, converged: false, iterations, pos_err, tilt_err });
        }
        let next = damped_trial(chain, &q, (&e, &jac), target, q_prev, p)?;
        let moved = (&next - &q).amax();
        q = next;
        iterations += 1;
        if moved < 1e-10 {
            let (_, _, pos_err, tilt_err) = stacked_task(chain, &q, target, &p.w_tilt)?;
            let converged = pos_err < p.pos_tol && tilt_err < p.rot_tol;
            return Ok(IkSolution { q, converged, iterations, pos_err, tilt_err });
        }
    }
}

/// Sequential solves, each warm-started from the previous solution.
///
/// The first target has no previous solution, so `q0` only seeds it and the
/// smoothness pull is off for that solve.
pub fn solve_trajectory(
    chain: &KinematicChain,
    targets: &[Pose],
    q0: &DVector<f64>,
    p: &IkParams,
) -> Result<Vec<IkSolution>, RetargetError> {
    let mut out: Vec<IkSolution> = Vec::with_capacity(targets.len());
    for (t, target) in targets.iter().enumerate() {
        let sol = match out.last() {
            Some(prev) => solve_ik(chain, target, &prev.q, p)?,
            None => solve_ik(chain, target, q0, &IkParams { lambda: 0.0, ..*p })?,
        };
        debug_assert!(chain.within_limits(&sol.q), "frame {t} left the joint box");
        out.push(sol);
    }
    Ok(out)
}

/// Largest per-joint change between consecutive solutions (0 for the first).
pub fn joint_steps(solutions: &[IkSolution]) -> Vec<f64> {
    let mut steps = vec![0.0; solutions.len()];
    for t in 1..solutions.len() {
        steps[t] = (&solutions[t].q - &solutions[t - 1].q).amax();
    }
    steps
}

/// 3D hand landmarks of one frame, in meters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HandKeypoints {
    pub wrist: [f64; 3],
    /// Metacarpophalangeal joints: index, middle, ring, pinky, thumb.
    pub mcp: [[f64; 3]; 5],
    /// Fingertips in the same finger order.
    pub tips: [[f64; 3]; 5],
    #[serde(default)]
    pub body_origin: [f64; 3],
    #[serde(default = "identity_rows")]
    pub body_rot: [f64; 9],
    #[serde(default)]
    pub timestamp: Option<f64>,
}

fn identity_rows() -> [f64; 9] {
    [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]
}

impl HandKeypoints {
    pub fn wrist(&self) -> Vec3 {
        Vec3::from(self.wrist)
    }

    pub fn mcp(&self, finger: usize) -> Vec3 {
        Vec3::from(self.mcp[finger])
    }

    pub fn tip(&self, finger: usize) -> Vec3 {
        Vec3::from(self.tips[finger])
    }

    pub fn body_rot(&self) -> Mat3 {
        Mat3::from_row_slice(&self.body_rot)
    }

    fn points(&self) -> impl Iterator<Item = &[f64; 3]> {
        std::iter::once(&self.wrist).chain(self.mcp.iter()).chain(self.tips.iter())
    }

    pub fn validate(&self) -> Result<(), RetargetError> {
        if self.points().chain(std::iter::once(&self.body_origin)).flatten().any(|v| !v.is_finite()) {
            return Err(RetargetError::DegenerateHand("non-finite coordinate".into()));
        }
        let w = self.wrist();
        for f in 0..5 {
            if (self.mcp(f) - w).norm() < 1e-3 {
                return Err(RetargetError::DegenerateHand(format!("mcp {f} within 1 mm of the wrist")));
            }
        }
        Ok(())
    }
}

/// `p_B = R_B^T (p - o_B)` for every landmark.
pub fn body_normalize(k: &HandKeypoints) -> Result<HandKeypoints, RetargetError> {
    let rb = k.body_rot();
    check_rotation(&rb)?;
    let ob = Vec3::from(k.body_origin);
    let map = |p: &[f64; 3]| -> [f64; 3] {
        let v = rb.transpose() * (Vec3::from(*p) - ob);
        [v.x, v.y, v.z]
    };
    Ok(HandKeypoints {
        wrist: map(&k.wrist),
        mcp: k.mcp.map(|p| map(&p)),
        tips: k.tips.map(|p| map(&p)),
        body_origin: [0.0; 3],
        body_rot: identity_rows(),
        timestamp: k.timestamp,
    })
}

/// Wrist frame: x toward the mean of the first `averaged_mcps` knuckles,
/// z along the palm normal `(index - wrist) x (pinky - wrist)`.
pub fn wrist_pose(k: &HandKeypoints, averaged_mcps: usize) -> Result<Pose, RetargetError> {
    if !(1..=5).contains(&averaged_mcps) {
        return Err(RetargetError::InvalidParams(format!("averaged_mcps {averaged_mcps} outside 1..=5")));
    }
    k.validate()?;
    let w = k.wrist();
    let mean = (0..averaged_mcps).map(|f| k.mcp(f)).sum::<Vec3>() / averaged_mcps as f64;
    let forward = mean - w;
    let normal = (k.mcp(INDEX) - w).cross(&(k.mcp(PINKY) - w));
    if normal.norm() < 1e-9 || forward.norm() < 1e-9 {
        return Err(RetargetError::DegenerateHand("palm landmarks are collinear".into()));
    }
    let x = forward.normalize();
    let z = normal - x * normal.dot(&x);
    if z.norm() < 1e-9 {
        return Err(RetargetError::DegenerateHand("palm normal parallel to the hand axis".into()));
    }
    let z = z.normalize();
    let y = z.cross(&x);
    let r = Mat3::from_columns(&[x, y, z]);
    Ok(Pose::new(r, w)?)
}

/// `p* = R_HR p + t_HR`, `R* = R_HR R`.
pub fn to_robot_frame(p: &Pose, cal: &Pose) -> Pose {
    Pose { r: cal.r * p.r, t: cal.r * p.t + cal.t }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GripperParams {
    pub threshold: f64,
    pub window: usize,
}

impl Default for GripperParams {
    fn default() -> Self {
        Self { threshold: 0.6, window: 5 }
    }
}

/// Thumb-index tip distance over palm length (middle knuckle to wrist).
pub fn hand_openness(k: &HandKeypoints) -> Result<f64, RetargetError> {
    let palm = (k.mcp(MIDDLE) - k.wrist()).norm();
    if !(palm >= 1e-3) {
        return Err(RetargetError::DegenerateHand(format!("palm length {palm} m below 1 mm")));
    }
    Ok((k.tip(THUMB) - k.tip(INDEX)).norm() / palm)
}

/// Thresholded openness (`>=` means open) smoothed by an edge-truncated
/// sliding median.
pub fn gripper_signal(seq: &[HandKeypoints], threshold: f64, window: usize) -> Result<Vec<f64>, RetargetError> {
    if window.is_multiple_of(2) {
        return Err(RetargetError::InvalidParams(format!("median window {window} must be odd")));
    }
    let raw = seq.iter().map(|k| hand_openness(k).map(|o| if o >= threshold { 1.0 } else { 0.0 })).collect::<Result<Vec<f64>, _>>()?;
    Ok(median_filter(&raw, window))
}

fn median_filter(xs: &[f64], window: usize) -> Vec<f64> {
    let half = window / 2;
    (0..xs.len())
        .map(|t| {
            let lo = t.saturating_sub(half);
            let hi = (t + half).min(xs.len() - 1);
            let mut w: Vec<f64> = xs[lo..=hi].to_vec();
            w.sort_by(f64::total_cmp);
            let m = w.len();
            if m % 2 == 1 {
                w[m / 2]
            } else {
                0.5 * (w[m / 2 - 1] + w[m / 2])
            }
        })
        .collect()
}

/// One arm's command: six joint angles and the gripper.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ArmAction {
    pub q: [f64; ARM_DOF],
    pub g: f64,
}

/// `[qL1..qL6, gL, qR1..qR6, gR]`.
pub fn assemble_action(left: &ArmAction, right: &ArmAction) -> [f64; 14] {
    let mut out = [0.0; 14];
    out[..6].copy_from_slice(&left.q);
    out[6] = left.g;
    out[7..13].copy_from_slice(&right.q);
    out[13] = right.g;
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetargetParams {
    pub ik: IkParams,
    pub gripper: GripperParams,
    pub averaged_mcps: usize,
}

impl Default for RetargetParams {
    fn default() -> Self {
        Self { ik: IkParams::default(), gripper: GripperParams::default(), averaged_mcps: 4 }
    }
}

/// Per-frame result of [`retarget_arm`].
#[derive(Debug, Clone, PartialEq)]
pub struct ArmTrack {
    pub actions: Vec<ArmAction>,
    pub solutions: Vec<IkSolution>,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("frame {frame}: {source}")]
pub struct FrameError {
    pub frame: usize,
    #[source]
    pub source: RetargetError,
}

/// Robot-frame end-effector targets for a keypoint stream.
pub fn hand_targets(seq: &[HandKeypoints], cal: &Pose, averaged_mcps: usize) -> Result<Vec<Pose>, FrameError> {
    seq.iter()
        .enumerate()
        .map(|(frame, k)| {
            body_normalize(k)
                .and_then(|b| wrist_pose(&b, averaged_mcps))
                .map(|p| to_robot_frame(&p, cal))
                .map_err(|source| FrameError { frame, source })
        })
        .collect()
}

/// Full per-arm pipeline from keypoints to joint and gripper commands.
pub fn retarget_arm(
    seq: &[HandKeypoints],
    chain: &KinematicChain,
    cal: &Pose,
    q0: &DVector<f64>,
    params: &RetargetParams,
) -> Result<ArmTrack, FrameError> {
    if chain.dof() != ARM_DOF {
        return Err(FrameError {
            frame: 0,
            source: RetargetError::InvalidChain(format!("arm chains need {ARM_DOF} joints, got {}", chain.dof())),
        });
    }
    let targets = hand_targets(seq, cal, params.averaged_mcps)?;
    let grip = gripper_signal(seq, params.gripper.threshold, params.gripper.window).map_err(|source| {
        let frame = seq.iter().position(|k| hand_openness(k).is_err()).unwrap_or(0);
        FrameError { frame, source }
    })?;
    let solutions = solve_trajectory(chain, &targets, q0, &params.ik).map_err(|source| FrameError { frame: 0, source })?;
    let actions = solutions
        .iter()
        .zip(&grip)
        .map(|(s, &g)| {
            let mut q = [0.0; ARM_DOF];
            q.copy_from_slice(s.q.as_slice());
            ArmAction { q, g }
        })
        .collect();
    Ok(ArmTrack { actions, solutions })
}

/// Builds a dense joint vector from a slice.
pub fn joints(values: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(values)
}
