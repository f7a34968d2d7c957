//! Global similarity alignment of a recovered motion sequence to reference keypoints.

use crate::geom::Point3;
use crate::linalg::svd3;
use nalgebra::{Matrix3, Rotation3, UnitQuaternion, Vector3};
use thiserror::Error;

/// Source point sets whose second-largest scatter eigenvalue falls below this
/// fraction of the largest are treated as collinear.
pub const COLLINEARITY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("degenerate configuration: {0}")]
    DegenerateConfiguration(String),
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
}

/// Joint names and limb connectivity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Skeleton {
    pub name: String,
    pub joints: Vec<String>,
    pub limbs: Vec<(usize, usize)>,
    /// Joint used for root-aligned error metrics.
    pub root: usize,
}

pub const BODY18_JOINTS: [&str; 18] = [
    "nose",
    "neck",
    "r-shoulder",
    "r-elbow",
    "r-wrist",
    "l-shoulder",
    "l-elbow",
    "l-wrist",
    "r-hip",
    "r-knee",
    "r-ankle",
    "l-hip",
    "l-knee",
    "l-ankle",
    "r-eye",
    "l-eye",
    "r-ear",
    "l-ear",
];

pub const BODY18_LIMBS: [(usize, usize); 17] = [
    (1, 2),
    (1, 5),
    (2, 3),
    (3, 4),
    (5, 6),
    (6, 7),
    (1, 8),
    (8, 9),
    (9, 10),
    (1, 11),
    (11, 12),
    (12, 13),
    (1, 0),
    (0, 14),
    (14, 15),
    (0, 16),
    (16, 17),
];

impl Skeleton {
    pub fn body18() -> Self {
        Self {
            name: "body-18".into(),
            joints: BODY18_JOINTS.iter().map(|s| s.to_string()).collect(),
            limbs: BODY18_LIMBS.to_vec(),
            root: 1,
        }
    }

    pub fn joint_count(&self) -> usize {
        self.joints.len()
    }
}

/// T frames of J joints in world coordinates (meters).
#[derive(Debug, Clone, PartialEq)]
pub struct MotionSequence {
    pub skeleton: Skeleton,
    pub fps: f64,
    pub frames: Vec<Vec<Point3>>,
    /// Optional per-frame, per-joint validity. `None` means all valid.
    pub valid: Option<Vec<Vec<bool>>>,
}

impl MotionSequence {
    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }

    pub fn joint_count(&self) -> usize {
        self.skeleton.joint_count()
    }

    pub fn is_valid(&self, frame: usize, joint: usize) -> bool {
        self.valid.as_ref().is_none_or(|v| v[frame][joint])
    }

    pub fn frame_validity(&self, frame: usize) -> Vec<bool> {
        (0..self.joint_count())
            .map(|j| self.is_valid(frame, j))
            .collect()
    }
}

/// `p ↦ scale · R · p + translation`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimilarityTransform {
    pub scale: f64,
    pub rotation: UnitQuaternion<f64>,
    pub translation: Vector3<f64>,
}

impl Default for SimilarityTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl SimilarityTransform {
    pub fn identity() -> Self {
        Self {
            scale: 1.0,
            rotation: UnitQuaternion::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        self.rotation.to_rotation_matrix().into_inner()
    }

    pub fn apply(&self, p: &Point3) -> Point3 {
        Point3::from(self.scale * (self.rotation_matrix() * p.coords) + self.translation)
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &Self) -> Self {
        Self {
            scale: self.scale * other.scale,
            rotation: self.rotation * other.rotation,
            translation: self.scale * (self.rotation_matrix() * other.translation)
                + self.translation,
        }
    }
}

/// Least-squares similarity from `source` to `target` over the joints flagged in `valid`.
///
/// Closed form: centered cross-covariance, 3×3 SVD with reflection
/// correction so that `det(R) = +1`, scale from the ratio of the corrected
/// singular value sum to the source variance, translation from the centroids.
pub fn fit_similarity(
    source: &[Point3],
    target: &[Point3],
    valid: &[bool],
) -> Result<SimilarityTransform, FitError> {
    if source.len() != target.len() || source.len() != valid.len() {
        return Err(FitError::LengthMismatch(format!(
            "source {}, target {}, validity {}",
            source.len(),
            target.len(),
            valid.len()
        )));
    }
    let pairs: Vec<(Vector3<f64>, Vector3<f64>)> = source
        .iter()
        .zip(target)
        .zip(valid)
        .filter(|(_, ok)| **ok)
        .map(|((s, t), _)| (s.coords, t.coords))
        .collect();
    if pairs.len() < 3 {
        return Err(FitError::DegenerateConfiguration(format!(
            "need at least 3 valid correspondences, got {}",
            pairs.len()
        )));
    }
    let n = pairs.len() as f64;
    let mu_s = pairs.iter().map(|p| p.0).sum::<Vector3<f64>>() / n;
    let mu_t = pairs.iter().map(|p| p.1).sum::<Vector3<f64>>() / n;

    let mut cross = Matrix3::<f64>::zeros();
    let mut scatter = Matrix3::<f64>::zeros();
    let mut var_s = 0.0;
    for (s, t) in &pairs {
        let ds = s - mu_s;
        let dt = t - mu_t;
        cross += dt * ds.transpose();
        scatter += ds * ds.transpose();
        var_s += ds.norm_squared();
    }
    cross /= n;
    scatter /= n;
    var_s /= n;

    let spectrum = svd3(&scatter).singular_values;
    if !(spectrum[0] > 0.0) || spectrum[1] <= COLLINEARITY_TOLERANCE * spectrum[0] {
        return Err(FitError::DegenerateConfiguration(
            "source points are collinear or coincident".into(),
        ));
    }

    let svd = svd3(&cross);
    let sign = if (svd.u.determinant() * svd.v.determinant()) < 0.0 {
        -1.0
    } else {
        1.0
    };
    let correction = Vector3::new(1.0, 1.0, sign);
    let r = svd.u * Matrix3::from_diagonal(&correction) * svd.v.transpose();
    let scale = svd.singular_values.component_mul(&correction).sum() / var_s;
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(FitError::DegenerateConfiguration(format!(
            "estimated scale {scale} is not positive (target points coincide?)"
        )));
    }
    let rotation = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(r));
    let r = rotation.to_rotation_matrix().into_inner();
    let translation = mu_t - scale * (r * mu_s);
    Ok(SimilarityTransform {
        scale,
        rotation,
        translation,
    })
}

pub fn apply_similarity(seq: &MotionSequence, xf: &SimilarityTransform) -> MotionSequence {
    let r = xf.rotation_matrix();
    let frames = seq
        .frames
        .iter()
        .map(|frame| {
            frame
                .iter()
                .map(|p| Point3::from(xf.scale * (r * p.coords) + xf.translation))
                .collect()
        })
        .collect();
    MotionSequence {
        skeleton: seq.skeleton.clone(),
        fps: seq.fps,
        frames,
        valid: seq.valid.clone(),
    }
}

/// Fits frame 0 to `ref_keypoints` and applies the result to every frame.
///
/// A joint participates only when it is valid both in frame 0 and in `valid`.
pub fn fit_to_reference(
    seq: &MotionSequence,
    ref_keypoints: &[Point3],
    valid: &[bool],
) -> Result<(MotionSequence, SimilarityTransform), FitError> {
    let first = seq
        .frames
        .first()
        .ok_or_else(|| FitError::DegenerateConfiguration("motion has no frames".into()))?;
    if ref_keypoints.len() != first.len() {
        return Err(FitError::LengthMismatch(format!(
            "motion has {} joints, reference has {}",
            first.len(),
            ref_keypoints.len()
        )));
    }
    let joint_valid: Vec<bool> = valid
        .iter()
        .enumerate()
        .map(|(j, &ok)| ok && seq.is_valid(0, j))
        .collect();
    let xf = fit_similarity(first, ref_keypoints, &joint_valid)?;
    Ok((apply_similarity(seq, &xf), xf))
}
