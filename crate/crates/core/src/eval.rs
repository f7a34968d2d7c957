//! Report builders for the geometric evaluation metrics.

use crate::io::{
    self, CorrespondenceFile, InputDigest, IoError, MpjpeReport, SampsonPairReport, SampsonReport, SCHEMA_VERSION,
};
use crate::metrics::{fundamental_from_cameras, homogeneous, mpjpe_detailed, sampson_errors, MetricsError};
use crate::motion_fit::MotionSequence;
use crate::trajectory::{Trajectory, TrajectoryError};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
    #[error("pair {pair}: frame {frame} is outside the trajectory's {frames} frames")]
    FrameOutOfRange { pair: usize, frame: usize, frames: usize },
}

/// MPJPE without root alignment, with the root-aligned value alongside.
///
/// The root-aligned value is `None` when no frame has a valid root in both sequences.
pub fn mpjpe_report(
    predicted: &MotionSequence,
    reference: &MotionSequence,
    inputs: Vec<InputDigest>,
) -> Result<MpjpeReport, MetricsError> {
    let raw = mpjpe_detailed(predicted, reference, false)?;
    let aligned = match mpjpe_detailed(predicted, reference, true) {
        Ok(r) => Some(r),
        Err(MetricsError::NoValidJoints) => None,
        Err(e) => return Err(e),
    };
    Ok(MpjpeReport {
        version: SCHEMA_VERSION,
        metric: "mpjpe".into(),
        units: "meters".into(),
        value: raw.mean,
        root_aligned_value: aligned.as_ref().map(|a| a.mean),
        root_joint: predicted.skeleton.root,
        joints_compared: raw.joint_count,
        per_frame: raw.per_frame,
        per_frame_root_aligned: aligned.map(|a| a.per_frame).unwrap_or_default(),
        inputs,
    })
}

/// Sampson error of every correspondence against the fundamental matrix the
/// trajectory's cameras induce between the paired frames.
pub fn sampson_report(
    trajectory: &Trajectory,
    correspondences: &CorrespondenceFile,
    inputs: Vec<InputDigest>,
) -> Result<SampsonReport, EvalError> {
    let cams = trajectory.expand()?;
    let mut pairs = Vec::with_capacity(correspondences.pairs.len());
    let mut total = 0.0;
    let mut count = 0usize;
    for (i, pair) in correspondences.pairs.iter().enumerate() {
        let [a, b] = pair.frames;
        for frame in [a, b] {
            if frame >= cams.len() {
                return Err(EvalError::FrameOutOfRange {
                    pair: i,
                    frame,
                    frames: cams.len(),
                });
            }
        }
        let f = fundamental_from_cameras(&cams[a], &cams[b])?;
        let matches: Vec<_> = pair
            .matches
            .iter()
            .map(|m| (homogeneous(m[0], m[1]), homogeneous(m[2], m[3])))
            .collect();
        let errs = sampson_errors(&f, &matches)?;
        let sum: f64 = errs.iter().sum();
        total += sum;
        count += errs.len();
        pairs.push(SampsonPairReport {
            frames: pair.frames,
            matches: errs.len(),
            value: sum / errs.len() as f64,
        });
    }
    Ok(SampsonReport {
        version: SCHEMA_VERSION,
        metric: "sampson".into(),
        formula: "(x'^T F x)^2 / ((Fx)_1^2 + (Fx)_2^2 + (F^T x')_1^2 + (F^T x')_2^2), squared pixels".into(),
        value: total / count as f64,
        pairs,
        inputs,
    })
}

pub fn mpjpe_files(predicted: &Path, reference: &Path) -> Result<MpjpeReport, EvalError> {
    let a = io::read_motion(predicted)?;
    let b = io::read_motion(reference)?;
    let inputs = vec![InputDigest::of_file(predicted)?, InputDigest::of_file(reference)?];
    Ok(mpjpe_report(&a, &b, inputs)?)
}

pub fn sampson_files(trajectory: &Path, correspondences: &Path) -> Result<SampsonReport, EvalError> {
    let t = io::read_trajectory(trajectory)?;
    let c = io::read_correspondences(correspondences)?;
    let inputs = vec![InputDigest::of_file(trajectory)?, InputDigest::of_file(correspondences)?];
    sampson_report(&t, &c, inputs)
}
