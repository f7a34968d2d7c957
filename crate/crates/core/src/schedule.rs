//! Two-phase conditioning schedule: depth+pose for the first denoising steps,
//! pose only afterwards.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MANIFEST_VERSION: u32 = 1;

/// Step 0 is the highest-noise step and `t` grows towards the data end.
pub const TIME_CONVENTION: &str = "step0_highest_noise_t_increasing";

pub const POSE_DEPTH_DIR: &str = "pose_depth/";
pub const POSE_DIR: &str = "pose/";

/// Products within this relative distance of an integer are treated as that integer
/// before taking the ceiling, so `0.7 · 10` yields 7 rather than 8.
const CEIL_SNAP: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScheduleError {
    #[error("depth fraction must lie in [0, 1], got {0}")]
    InvalidFraction(f64),
    #[error("number of steps must be at least 1, got {0}")]
    InvalidSteps(i64),
    #[error("step {step} is outside 0..{num_steps}")]
    StepOutOfRange { step: usize, num_steps: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Condition {
    #[serde(rename = "pose+depth")]
    PoseDepth,
    #[serde(rename = "pose")]
    Pose,
}

impl Condition {
    pub fn label(self) -> &'static str {
        match self {
            Condition::PoseDepth => "pose+depth",
            Condition::Pose => "pose",
        }
    }

    pub fn frame_dir(self) -> &'static str {
        match self {
            Condition::PoseDepth => POSE_DEPTH_DIR,
            Condition::Pose => POSE_DIR,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleEntry {
    pub step: usize,
    pub t: f64,
    pub condition: Condition,
    pub frames: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleManifest {
    pub version: u32,
    pub num_steps: usize,
    pub depth_fraction: f64,
    /// `t` of the last depth step; `None` when there is no depth phase.
    pub t_stop: Option<f64>,
    pub time_convention: String,
    pub entries: Vec<ScheduleEntry>,
}

impl ScheduleManifest {
    pub fn depth_steps(&self) -> usize {
        self.entries
            .iter()
            .take_while(|e| e.condition == Condition::PoseDepth)
            .count()
    }
}

/// `ceil(f · n)`, snapping products that sit within rounding noise of an integer.
pub fn depth_step_count(num_steps: usize, depth_fraction: f64) -> usize {
    let x = depth_fraction * num_steps as f64;
    let nearest = x.round();
    let n = if (x - nearest).abs() <= CEIL_SNAP * x.max(1.0) {
        nearest
    } else {
        x.ceil()
    };
    (n as usize).min(num_steps)
}

/// Normalized time of step `k` out of `n`.
pub fn step_time(k: usize, n: usize) -> f64 {
    if n <= 1 {
        0.0
    } else {
        k as f64 / (n - 1) as f64
    }
}

pub fn build_schedule(
    num_steps: usize,
    depth_fraction: f64,
) -> Result<ScheduleManifest, ScheduleError> {
    if num_steps < 1 {
        return Err(ScheduleError::InvalidSteps(num_steps as i64));
    }
    if !(0.0..=1.0).contains(&depth_fraction) {
        return Err(ScheduleError::InvalidFraction(depth_fraction));
    }
    let n_depth = depth_step_count(num_steps, depth_fraction);
    let entries: Vec<ScheduleEntry> = (0..num_steps)
        .map(|k| {
            let condition = if k < n_depth {
                Condition::PoseDepth
            } else {
                Condition::Pose
            };
            ScheduleEntry {
                step: k,
                t: step_time(k, num_steps),
                condition,
                frames: condition.frame_dir().to_string(),
            }
        })
        .collect();
    let t_stop = n_depth.checked_sub(1).map(|k| step_time(k, num_steps));
    Ok(ScheduleManifest {
        version: MANIFEST_VERSION,
        num_steps,
        depth_fraction,
        t_stop,
        time_convention: TIME_CONVENTION.to_string(),
        entries,
    })
}

pub fn condition_at(manifest: &ScheduleManifest, step: usize) -> Result<Condition, ScheduleError> {
    manifest
        .entries
        .get(step)
        .map(|e| e.condition)
        .ok_or(ScheduleError::StepOutOfRange {
            step,
            num_steps: manifest.num_steps,
        })
}
