use std::path::{Path, PathBuf};

use egokit_core::geometry::Pose;
use egokit_core::retarget::{
    assemble_action, joint_steps, retarget_arm, ArmAction, ArmTrack, FrameError, HandKeypoints, KinematicChain, RetargetError, ARM_DOF,
};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::PipelineConfig;
use crate::error::CliError;
use crate::output::{fmt_sig, AtomicDir};

pub const CSV_DIGITS: usize = 9;

/// One line of the keypoint stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KeypointRecord {
    #[serde(default)]
    pub timestamp: Option<f64>,
    #[serde(default)]
    pub left: Option<HandKeypoints>,
    #[serde(default)]
    pub right: Option<HandKeypoints>,
}

/// Human-to-robot transform, shared or per arm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Calibration {
    PerArm { left: Pose, right: Pose },
    Shared(Pose),
}

impl Calibration {
    pub fn left(&self) -> &Pose {
        match self {
            Calibration::PerArm { left, .. } => left,
            Calibration::Shared(p) => p,
        }
    }

    pub fn right(&self) -> &Pose {
        match self {
            Calibration::PerArm { right, .. } => right,
            Calibration::Shared(p) => p,
        }
    }
}

fn read(path: &Path, what: &str) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::InvalidInput(format!("{what} {}: {e}", path.display())))
}

pub fn parse_keypoints(text: &str) -> Result<Vec<KeypointRecord>, CliError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| CliError::InvalidInput(format!("keypoints line {}: {e}", i + 1))))
        .collect()
}

pub fn load_chain(path: &Path) -> Result<KinematicChain, CliError> {
    let chain: KinematicChain =
        serde_json::from_str(&read(path, "chain")?).map_err(|e| CliError::InvalidInput(format!("chain {}: {e}", path.display())))?;
    if chain.dof() != ARM_DOF {
        return Err(CliError::InvalidInput(format!("chain has {} joints; arms need {ARM_DOF}", chain.dof())));
    }
    Ok(chain)
}

pub fn load_calibration(path: &Path) -> Result<Calibration, CliError> {
    serde_json::from_str(&read(path, "calibration")?).map_err(|e| CliError::InvalidInput(format!("calibration {}: {e}", path.display())))
}

fn arm_stream<'a>(
    records: &'a [KeypointRecord],
    side: &str,
    pick: fn(&KeypointRecord) -> &Option<HandKeypoints>,
) -> Result<Option<Vec<HandKeypoints>>, CliError> {
    let present = records.iter().filter(|r| pick(r).is_some()).count();
    match present {
        0 => Ok(None),
        n if n == records.len() => Ok(Some(records.iter().map(|r| pick(r).clone().expect("present")).collect())),
        _ => {
            let missing = records.iter().position(|r| pick(r).is_none()).unwrap_or(0);
            Err(CliError::InvalidInput(format!("{side} hand missing at frame {missing} but present elsewhere")))
        }
    }
}

fn frame_error(e: FrameError) -> CliError {
    match e.source {
        RetargetError::DegenerateHand(m) => CliError::DegenerateHand { frame: e.frame, message: m },
        other => CliError::InvalidInput(format!("frame {}: {other}", e.frame)),
    }
}

/// Per-frame timestamps: the record's own, else the hand's, else `i / fps`.
fn timestamps(records: &[KeypointRecord], fps: f64) -> Vec<f64> {
    records
        .iter()
        .enumerate()
        .map(|(i, r)| {
            r.timestamp
                .or_else(|| r.left.as_ref().and_then(|k| k.timestamp))
                .or_else(|| r.right.as_ref().and_then(|k| k.timestamp))
                .unwrap_or(i as f64 / fps)
        })
        .collect()
}

pub struct RetargetOutput {
    pub times: Vec<f64>,
    pub left: Option<ArmTrack>,
    pub right: Option<ArmTrack>,
}

impl RetargetOutput {
    pub fn rows(&self) -> Vec<[f64; 14]> {
        let zero = ArmAction::default();
        (0..self.times.len())
            .map(|t| {
                let l = self.left.as_ref().map_or(zero, |a| a.actions[t]);
                let r = self.right.as_ref().map_or(zero, |a| a.actions[t]);
                assemble_action(&l, &r)
            })
            .collect()
    }
}

pub fn solve(
    records: &[KeypointRecord],
    chain: &KinematicChain,
    cal: &Calibration,
    cfg: &PipelineConfig,
) -> Result<RetargetOutput, CliError> {
    if records.is_empty() {
        return Err(CliError::InvalidInput("keypoint stream is empty".into()));
    }
    let left = arm_stream(records, "left", |r| &r.left)?;
    let right = arm_stream(records, "right", |r| &r.right)?;
    if left.is_none() && right.is_none() {
        return Err(CliError::InvalidInput("no hand present in any frame".into()));
    }
    let q0 = chain.clip(&DVector::zeros(chain.dof()));
    let solve_arm = |seq: &Option<Vec<HandKeypoints>>, pose: &Pose| -> Result<Option<ArmTrack>, CliError> {
        seq.as_ref().map(|s| retarget_arm(s, chain, pose, &q0, &cfg.retarget).map_err(frame_error)).transpose()
    };
    let (l, r) = rayon::join(|| solve_arm(&left, cal.left()), || solve_arm(&right, cal.right()));
    let (l, r) = match (l, r) {
        (Err(a), Err(b)) => {
            // Report the earlier frame when both arms fail.
            let fa = a.frame().unwrap_or(usize::MAX);
            let fb = b.frame().unwrap_or(usize::MAX);
            return Err(if fb < fa { b } else { a });
        }
        (l, r) => (l?, r?),
    };
    Ok(RetargetOutput { times: timestamps(records, cfg.fps), left: l, right: r })
}

pub const TRAJECTORY_HEADER: &str = "t,qL1,qL2,qL3,qL4,qL5,qL6,gL,qR1,qR2,qR3,qR4,qR5,qR6,gR";

pub fn trajectory_csv(out: &RetargetOutput) -> String {
    let mut s = String::from(TRAJECTORY_HEADER);
    s.push('\n');
    for (t, row) in out.times.iter().zip(out.rows()) {
        s.push_str(&fmt_sig(*t, CSV_DIGITS));
        for v in row {
            s.push(',');
            s.push_str(&fmt_sig(v, CSV_DIGITS));
        }
        s.push('\n');
    }
    s
}

/// Parses a trajectory CSV back into `(t, row)` pairs.
pub fn parse_trajectory_csv(text: &str) -> Result<Vec<(f64, [f64; 14])>, CliError> {
    let mut lines = text.lines();
    if lines.next() != Some(TRAJECTORY_HEADER) {
        return Err(CliError::InvalidInput("unexpected trajectory header".into()));
    }
    lines
        .enumerate()
        .map(|(i, l)| {
            let vals = l
                .split(',')
                .map(|v| v.parse::<f64>().map_err(|e| CliError::InvalidInput(format!("row {}: {e}", i + 1))))
                .collect::<Result<Vec<_>, _>>()?;
            if vals.len() != 15 {
                return Err(CliError::InvalidInput(format!("row {} has {} columns", i + 1, vals.len())));
            }
            let mut row = [0.0; 14];
            row.copy_from_slice(&vals[1..]);
            Ok((vals[0], row))
        })
        .collect()
}

pub fn residuals_csv(out: &RetargetOutput) -> String {
    let mut s = String::from("frame,arm,pos_err,tilt_err,converged,iterations\n");
    for t in 0..out.times.len() {
        for (arm, track) in [("left", &out.left), ("right", &out.right)] {
            if let Some(tr) = track {
                let sol = &tr.solutions[t];
                s.push_str(&format!(
                    "{t},{arm},{},{},{},{}\n",
                    fmt_sig(sol.pos_err, CSV_DIGITS),
                    fmt_sig(sol.tilt_err, CSV_DIGITS),
                    sol.converged as u8,
                    sol.iterations
                ));
            }
        }
    }
    s
}

fn arm_summary(track: &Option<ArmTrack>) -> serde_json::Value {
    match track {
        None => json!({"present": false, "zero_filled": true}),
        Some(t) => {
            let steps = joint_steps(&t.solutions);
            json!({
                "present": true,
                "zero_filled": false,
                "converged_frames": t.solutions.iter().filter(|s| s.converged).count(),
                "max_pos_err": t.solutions.iter().map(|s| s.pos_err).fold(0.0, f64::max),
                "max_tilt_err": t.solutions.iter().map(|s| s.tilt_err).fold(0.0, f64::max),
                "max_joint_step": steps.into_iter().fold(0.0, f64::max),
            })
        }
    }
}

pub struct RetargetInputs<'a> {
    pub keypoints: &'a Path,
    pub chain: &'a Path,
    pub calibration: &'a Path,
    pub name: Option<&'a str>,
}

pub fn run(inputs: &RetargetInputs, cfg: &PipelineConfig) -> Result<PathBuf, CliError> {
    let records = parse_keypoints(&read(inputs.keypoints, "keypoints")?)?;
    let chain = load_chain(inputs.chain)?;
    let cal = load_calibration(inputs.calibration)?;
    let result = solve(&records, &chain, &cal, cfg)?;

    let name = match inputs.name {
        Some(n) => n.to_string(),
        None => inputs.keypoints.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "retarget".into()),
    };
    let out = AtomicDir::create(&cfg.output_dir.join(&name))?;
    out.write("trajectory.csv", trajectory_csv(&result))?;
    out.write("residuals.csv", residuals_csv(&result))?;
    let q0 = chain.clip(&DVector::zeros(chain.dof()));
    let meta = json!({
        "frames": records.len(),
        "left": arm_summary(&result.left),
        "right": arm_summary(&result.right),
        "q0": q0.as_slice(),
        "chain": chain,
        "calibration": cal,
        "csv_significant_digits": CSV_DIGITS,
        "timestamps": if records.iter().all(|r| r.timestamp.is_some()) { "from keypoints" } else { "frame index / fps where absent" },
        "config": cfg,
    });
    out.write("metadata.json", serde_json::to_string_pretty(&meta).expect("metadata serializes") + "\n")?;
    out.commit()
}
