use egokit_core::genmath::{
    cfm_interpolant, cfm_loss, cfm_target_velocity, concat_channels, ddpm_noise, split_channels, DiffusionSchedule, FlowSchedule, Tensor,
};
use egokit_core::geometry::{rotation_about, so3_exp, so3_log, Homography, Pose, RotVec, Vec2, Vec3};
use egokit_core::retarget::{forward_kinematics, jacobian, Joint, KinematicChain};
use nalgebra::DVector;
use std::sync::Arc;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    pub fn line(&self) -> String {
        format!("{} {}: {}", if self.passed { "PASS" } else { "FAIL" }, self.name, self.detail)
    }
}

fn check(name: &'static str, f: impl FnOnce() -> Result<String, String>) -> CheckResult {
    match f() {
        Ok(detail) => CheckResult { name, passed: true, detail },
        Err(detail) => CheckResult { name, passed: false, detail },
    }
}

fn within(what: &str, err: f64, tol: f64) -> Result<String, String> {
    if err <= tol {
        Ok(format!("{what} max error {err:.2e}"))
    } else {
        Err(format!("{what} max error {err:.2e} exceeds {tol:.0e}"))
    }
}

fn ramp(shape: Vec<usize>, scale: f64, offset: f64) -> Tensor {
    Tensor::from_fn(shape, |i| ((i as f64 + offset) * scale).sin()).expect("shape is valid")
}

/// Resolves a flow schedule, optionally replaced by a corrupted one.
fn schedule(name: &str, corrupt: Option<f64>) -> Result<FlowSchedule, String> {
    match corrupt {
        None => FlowSchedule::by_name(name).ok_or_else(|| format!("unknown schedule {name}")),
        Some(v) => {
            FlowSchedule::new(name, Arc::new(|t| t), Arc::new(move |t| (1.0 - t) + v * t), Arc::new(|_| 1.0), Arc::new(move |_| v - 1.0))
                .map_err(|e| e.to_string())
        }
    }
}

fn schedule_endpoints(name: &'static str, corrupt: Option<f64>) -> Result<String, String> {
    let s = schedule(name, corrupt)?;
    let err = [s.alpha(0.0), s.alpha(1.0) - 1.0, s.sigma(1.0)].iter().fold(0.0f64, |m, v| m.max(v.abs()));
    within("alpha(0) = 0, alpha(1) = 1, sigma(1) = 0", err, 1e-12)
}

fn schedule_velocity(name: &'static str, corrupt: Option<f64>) -> Result<String, String> {
    let s = schedule(name, corrupt)?;
    let a = ramp(vec![2, 3], 0.7, 0.0);
    let eps = ramp(vec![2, 3], 1.3, 5.0);
    let h = 1e-6;
    let mut err = 0.0f64;
    for k in 1..10 {
        let t = k as f64 / 10.0;
        let v = cfm_target_velocity(&a, &eps, t, &s).map_err(|e| e.to_string())?;
        let xp = cfm_interpolant(&a, &eps, t + h, &s).map_err(|e| e.to_string())?;
        let xm = cfm_interpolant(&a, &eps, t - h, &s).map_err(|e| e.to_string())?;
        for ((vi, p), m) in v.data().iter().zip(xp.data()).zip(xm.data()) {
            err = err.max((vi - (p - m) / (2.0 * h)).abs());
        }
    }
    within("target velocity vs central difference", err, 1e-6)
}

fn ddpm_identity() -> Result<String, String> {
    let sched = DiffusionSchedule::linear_betas(1000, 1e-4, 0.02).map_err(|e| e.to_string())?;
    let z = ramp(vec![4, 8], 0.3, 1.0);
    let eps = ramp(vec![4, 8], 0.9, 2.0);
    let mut err = 0.0f64;
    for &ab in [sched.alpha_bar()[0], sched.alpha_bar()[499], sched.alpha_bar()[999]].iter() {
        let x = ddpm_noise(&z, &eps, ab).map_err(|e| e.to_string())?;
        for ((xi, zi), ei) in x.data().iter().zip(z.data()).zip(eps.data()) {
            err = err.max((xi - (ab.sqrt() * zi + (1.0 - ab).sqrt() * ei)).abs());
        }
    }
    within("sqrt(ab) z + sqrt(1 - ab) eps", err, 1e-12)
}

fn concat_split() -> Result<String, String> {
    let parts: Vec<Tensor> = [16, 16, 16].iter().enumerate().map(|(i, &c)| ramp(vec![2, c, 3, 3], 0.1, 100.0 * i as f64)).collect();
    let joined = concat_channels(&parts, 1).map_err(|e| e.to_string())?;
    if joined.shape() != [2, 48, 3, 3] {
        return Err(format!("concatenated shape {:?}", joined.shape()));
    }
    let back = split_channels(&joined, 1, &[16, 16, 16]).map_err(|e| e.to_string())?;
    if back != parts {
        return Err("split does not invert concat".into());
    }
    Ok("3 x 16 channels -> 48 and back".into())
}

fn so3_round_trip() -> Result<String, String> {
    let mut err = 0.0f64;
    for k in 0..50 {
        let axis = Vec3::new((k as f64).sin(), (1.7 * k as f64).cos(), 0.3 + (0.4 * k as f64).sin()).normalize();
        let angle = 3.1 * k as f64 / 49.0;
        let phi = RotVec(axis * angle);
        let back = so3_log(&so3_exp(&phi)).map_err(|e| e.to_string())?;
        err = err.max((back.0 - phi.0).amax());
        let r = rotation_about(&axis, angle);
        err = err.max((so3_exp(&back) - r).amax());
    }
    within("log(exp(phi)) over angles in [0, 3.1]", err, 1e-9)
}

fn homography_inverse() -> Result<String, String> {
    let h = Homography::similarity(12.0, -5.0, 0.2, 0.05, Vec2::new(64.0, 48.0));
    let inv = h.inverse().map_err(|e| e.to_string())?;
    let mut err = 0.0f64;
    for i in 0..20 {
        let p = Vec2::new(7.0 * i as f64, 100.0 - 3.0 * i as f64);
        let q = inv.apply(h.apply(p).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        err = err.max((q - p).amax());
    }
    within("H^-1 H x = x", err, 1e-9)
}

fn jacobian_fd() -> Result<String, String> {
    let joint = |axis: [f64; 3], t: [f64; 3]| Joint { axis, origin: Pose::from_translation(Vec3::from(t)), lower: -3.0, upper: 3.0 };
    let chain = KinematicChain::new(
        vec![
            joint([0.0, 0.0, 1.0], [0.0, 0.0, 0.1]),
            joint([0.0, 1.0, 0.0], [0.0, 0.0, 0.2]),
            joint([0.0, 1.0, 0.0], [0.3, 0.0, 0.0]),
            joint([1.0, 0.0, 0.0], [0.25, 0.0, 0.0]),
        ],
        Pose::identity(),
        Pose::from_translation(Vec3::new(0.05, 0.0, 0.0)),
    )
    .map_err(|e| e.to_string())?;
    let q = DVector::from_vec(vec![0.3, -0.4, 0.8, 0.2]);
    let j = jacobian(&chain, &q).map_err(|e| e.to_string())?;
    let h = 1e-6;
    let mut err = 0.0f64;
    for i in 0..q.len() {
        let mut qp = q.clone();
        qp[i] += h;
        let mut qm = q.clone();
        qm[i] -= h;
        let p = forward_kinematics(&chain, &qp).map_err(|e| e.to_string())?;
        let m = forward_kinematics(&chain, &qm).map_err(|e| e.to_string())?;
        let dp = (p.t - m.t) / (2.0 * h);
        let dw = so3_log(&(p.r * m.r.transpose())).map_err(|e| e.to_string())?.0 / (2.0 * h);
        for k in 0..3 {
            err = err.max((j[(k, i)] - dp[k]).abs()).max((j[(k + 3, i)] - dw[k]).abs());
        }
    }
    within("geometric Jacobian vs finite difference", err, 1e-6)
}

fn tensor_text() -> Result<String, String> {
    let t = ramp(vec![2, 3, 4], 0.37, 0.5);
    let back: Tensor = t.to_string().parse().map_err(|e: egokit_core::genmath::GenMathError| e.to_string())?;
    if back != t {
        return Err("text round trip changed the tensor".into());
    }
    Ok("2x3x4 tensor survives text round trip".into())
}

fn loss_zero() -> Result<String, String> {
    let a = ramp(vec![8], 0.5, 0.0);
    let b = ramp(vec![8], 0.5, 0.1);
    let same = cfm_loss(&a, &a).map_err(|e| e.to_string())?;
    let diff = cfm_loss(&a, &b).map_err(|e| e.to_string())?;
    if same == 0.0 && diff > 0.0 {
        Ok(format!("loss(a, a) = 0, loss(a, b) = {diff:.3e}"))
    } else {
        Err(format!("loss(a, a) = {same:e}, loss(a, b) = {diff:e}"))
    }
}

/// Runs the built-in self checks. `corrupt` replaces the flow schedules
/// with an invalid one so the failure path can be exercised.
pub fn run(corrupt: Option<f64>) -> Vec<CheckResult> {
    vec![
        check("linear schedule endpoints", || schedule_endpoints("linear", corrupt)),
        check("trig schedule endpoints", || schedule_endpoints("trig", corrupt)),
        check("linear schedule velocity", || schedule_velocity("linear", corrupt)),
        check("trig schedule velocity", || schedule_velocity("trig", corrupt)),
        check("ddpm forward noising", ddpm_identity),
        check("channel concat and split", concat_split),
        check("so3 log/exp round trip", so3_round_trip),
        check("homography inverse", homography_inverse),
        check("kinematic jacobian", jacobian_fd),
        check("tensor text format", tensor_text),
        check("cfm loss zero iff equal", loss_zero),
    ]
}
