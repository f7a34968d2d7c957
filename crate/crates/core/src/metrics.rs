//! Geometric evaluation: joint position error and epipolar consistency.

use crate::geom::CameraFrame;
use crate::linalg::{skew, svd3};
use crate::motion_fit::MotionSequence;
use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

/// Camera pairs closer than this (meters) have no usable epipolar geometry.
pub const MIN_BASELINE: f64 = 1e-9;

/// Largest allowed ratio of smallest to largest singular value for a fundamental matrix.
pub const RANK_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("sequences differ in shape: {0}")]
    ShapeMismatch(String),
    #[error("no joint is valid in both sequences")]
    NoValidJoints,
    #[error("camera centers coincide (baseline {0:e} m); the fundamental matrix is undefined")]
    ZeroBaseline(f64),
    #[error("matrix is not a fundamental matrix: {0}")]
    NotFundamental(String),
    #[error("match {0} has a vanishing Sampson denominator")]
    DegenerateMatch(usize),
    #[error("no correspondences given")]
    NoMatches,
}

/// Per-frame and pooled joint position error.
#[derive(Debug, Clone, PartialEq)]
pub struct MpjpeResult {
    /// Mean over every joint valid in both sequences, pooled across frames.
    pub mean: f64,
    /// Per-frame mean; `None` when a frame has no usable joint.
    pub per_frame: Vec<Option<f64>>,
    pub joint_count: usize,
}

fn check_shapes(a: &MotionSequence, b: &MotionSequence) -> Result<(), MetricsError> {
    if a.frame_count() != b.frame_count() {
        return Err(MetricsError::ShapeMismatch(format!(
            "{} vs {} frames",
            a.frame_count(),
            b.frame_count()
        )));
    }
    if a.skeleton.joints != b.skeleton.joints {
        return Err(MetricsError::ShapeMismatch(format!(
            "skeletons differ ({} with {} joints vs {} with {} joints)",
            a.skeleton.name,
            a.joint_count(),
            b.skeleton.name,
            b.joint_count()
        )));
    }
    if let Some(t) = (0..a.frame_count())
        .find(|&t| a.frames[t].len() != a.joint_count() || b.frames[t].len() != b.joint_count())
    {
        return Err(MetricsError::ShapeMismatch(format!("frame {t} has the wrong joint count")));
    }
    Ok(())
}

/// Mean per-joint position error between two sequences, in their units.
///
/// With `align_root` each frame is compared in root-relative coordinates,
/// which is the same as translating `b` so its root lands on `a`'s. Joints
/// flagged invalid in either sequence are left out, and so are frames whose
/// root is invalid when aligning.
pub fn mpjpe_detailed(
    a: &MotionSequence,
    b: &MotionSequence,
    align_root: bool,
) -> Result<MpjpeResult, MetricsError> {
    check_shapes(a, b)?;
    let root = a.skeleton.root;
    let mut total = 0.0;
    let mut count = 0usize;
    let mut per_frame = Vec::with_capacity(a.frame_count());
    for t in 0..a.frame_count() {
        let root_ok = !align_root || (a.is_valid(t, root) && b.is_valid(t, root));
        let (ra, rb) = if align_root && root_ok {
            (a.frames[t][root].coords, b.frames[t][root].coords)
        } else {
            (Vector3::zeros(), Vector3::zeros())
        };
        let mut frame_sum = 0.0;
        let mut frame_count = 0usize;
        if root_ok {
            for j in 0..a.joint_count() {
                if !(a.is_valid(t, j) && b.is_valid(t, j)) {
                    continue;
                }
                let da = a.frames[t][j].coords - ra;
                let db = b.frames[t][j].coords - rb;
                frame_sum += (da - db).norm();
                frame_count += 1;
            }
        }
        total += frame_sum;
        count += frame_count;
        per_frame.push((frame_count > 0).then(|| frame_sum / frame_count as f64));
    }
    if count == 0 {
        return Err(MetricsError::NoValidJoints);
    }
    Ok(MpjpeResult {
        mean: total / count as f64,
        per_frame,
        joint_count: count,
    })
}

pub fn mpjpe(a: &MotionSequence, b: &MotionSequence, align_root: bool) -> Result<f64, MetricsError> {
    mpjpe_detailed(a, b, align_root).map(|r| r.mean)
}

/// A 3×3 matrix of rank two with unit Frobenius norm up to the caller's scaling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FundamentalMatrix {
    m: Matrix3<f64>,
}

impl FundamentalMatrix {
    pub fn new(m: Matrix3<f64>) -> Result<Self, MetricsError> {
        if !m.iter().all(|v| v.is_finite()) {
            return Err(MetricsError::NotFundamental("entries are not finite".into()));
        }
        let svd = svd3(&m);
        if svd.singular_values[0] == 0.0 {
            return Err(MetricsError::NotFundamental("zero matrix".into()));
        }
        let ratio = svd.condition_ratio();
        if ratio >= RANK_TOLERANCE {
            return Err(MetricsError::NotFundamental(format!(
                "smallest/largest singular value ratio {ratio:e} is not rank two"
            )));
        }
        Ok(Self { m })
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.m
    }

    pub fn scaled(&self, lambda: f64) -> Result<Self, MetricsError> {
        Self::new(self.m * lambda)
    }

    /// `x'ᵀ F x`.
    pub fn residual(&self, x: &Vector3<f64>, x_prime: &Vector3<f64>) -> f64 {
        x_prime.dot(&(self.m * x))
    }
}

/// `F` such that `x₂ᵀ F x₁ = 0` for pixels `x₁` in `cam1` and `x₂` in `cam2`
/// that see the same world point.
pub fn fundamental_from_cameras(
    cam1: &CameraFrame,
    cam2: &CameraFrame,
) -> Result<FundamentalMatrix, MetricsError> {
    let baseline = (cam2.extrinsics.center() - cam1.extrinsics.center()).norm();
    if !(baseline > MIN_BASELINE) {
        return Err(MetricsError::ZeroBaseline(baseline));
    }
    let r1 = cam1.extrinsics.rotation_matrix();
    let r2 = cam2.extrinsics.rotation_matrix();
    let r_rel = r2 * r1.transpose();
    let t_rel = cam2.extrinsics.translation - r_rel * cam1.extrinsics.translation;
    let e = skew(&t_rel) * r_rel;
    let f = cam2.intrinsics.inverse_matrix().transpose() * e * cam1.intrinsics.inverse_matrix();
    FundamentalMatrix::new(f / f.norm())
}

pub fn homogeneous(u: f64, v: f64) -> Vector3<f64> {
    Vector3::new(u, v, 1.0)
}

/// First-order Sampson distance of each correspondence `(x, x')`.
pub fn sampson_errors(
    f: &FundamentalMatrix,
    matches: &[(Vector3<f64>, Vector3<f64>)],
) -> Result<Vec<f64>, MetricsError> {
    if matches.is_empty() {
        return Err(MetricsError::NoMatches);
    }
    let m = f.matrix();
    matches
        .iter()
        .enumerate()
        .map(|(i, (x, xp))| {
            let fx = m * x;
            let ftxp = m.transpose() * xp;
            let num = xp.dot(&fx);
            let den = fx.x * fx.x + fx.y * fx.y + ftxp.x * ftxp.x + ftxp.y * ftxp.y;
            if !(den > 0.0) {
                return Err(MetricsError::DegenerateMatch(i));
            }
            Ok(num * num / den)
        })
        .collect()
}

/// Mean Sampson distance over `matches`.
pub fn sampson_error(
    f: &FundamentalMatrix,
    matches: &[(Vector3<f64>, Vector3<f64>)],
) -> Result<f64, MetricsError> {
    let errs = sampson_errors(f, matches)?;
    Ok(errs.iter().sum::<f64>() / errs.len() as f64)
}
