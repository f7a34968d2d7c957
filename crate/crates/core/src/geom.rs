//! Pinhole camera model, rigid transforms and pose interpolation.
//!
//! Camera space follows the usual computer-vision convention: `+x` right,
//! `+y` down, `+z` forward. Extrinsics map world points into camera space,
//! `p_cam = R * p_world + t`. Pixel `(col, row)` covers the square
//! `[col, col + 1) × [row, row + 1)`, so its center sits at `(col + 0.5, row + 0.5)`.

use nalgebra::{Matrix3, Quaternion, Rotation3, Unit, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Point3 = nalgebra::Point3<f64>;

/// Camera-space depth below which a point counts as behind the camera.
pub const MIN_DEPTH: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeomError {
    #[error("point is behind the camera (camera-space z = {z})")]
    BehindCamera { z: f64 },
    #[error("depth must be positive, got {0}")]
    NonPositiveDepth(f64),
    #[error("invalid camera: {0}")]
    InvalidCamera(String),
}

/// Zero-skew pinhole intrinsics in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl Intrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64) -> Self {
        Self { fx, fy, cx, cy }
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(self.fx, 0.0, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0)
    }

    pub fn inverse_matrix(&self) -> Matrix3<f64> {
        Matrix3::new(
            1.0 / self.fx,
            0.0,
            -self.cx / self.fx,
            0.0,
            1.0 / self.fy,
            -self.cy / self.fy,
            0.0,
            0.0,
            1.0,
        )
    }

    /// Scales focal lengths only; the principal point stays put.
    pub fn zoomed(&self, factor: f64) -> Self {
        Self {
            fx: self.fx * factor,
            fy: self.fy * factor,
            ..*self
        }
    }

    pub fn lerp(&self, other: &Self, alpha: f64) -> Self {
        let mix = |a: f64, b: f64| a + (b - a) * alpha;
        Self {
            fx: mix(self.fx, other.fx),
            fy: mix(self.fy, other.fy),
            cx: mix(self.cx, other.cx),
            cy: mix(self.cy, other.cy),
        }
    }
}

/// World→camera rigid transform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extrinsics {
    pub rotation: UnitQuaternion<f64>,
    pub translation: Vector3<f64>,
}

impl Default for Extrinsics {
    fn default() -> Self {
        Self::identity()
    }
}

impl Extrinsics {
    pub fn identity() -> Self {
        Self {
            rotation: UnitQuaternion::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(rotation: UnitQuaternion<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    /// Builds world→camera extrinsics from a camera→world rotation and the camera center.
    pub fn from_camera_to_world(rotation_c2w: UnitQuaternion<f64>, center: Point3) -> Self {
        let rotation = rotation_c2w.inverse();
        let translation = -(rotation.to_rotation_matrix() * center.coords);
        Self {
            rotation,
            translation,
        }
    }

    /// A camera at `eye` whose optical axis points at `target`. `up` is the world
    /// direction that should appear upward in the image.
    pub fn look_at(eye: Point3, target: Point3, up: Vector3<f64>) -> Option<Self> {
        let forward = (target - eye).try_normalize(1e-12)?;
        let right = forward.cross(&(-up)).try_normalize(1e-12)?;
        let down = forward.cross(&right);
        // Rows of the world→camera matrix are the camera axes in world coordinates.
        let m = Matrix3::from_rows(&[right.transpose(), down.transpose(), forward.transpose()]);
        let rotation =
            UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(m));
        let translation = -(rotation.to_rotation_matrix() * eye.coords);
        Some(Self {
            rotation,
            translation,
        })
    }

    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        self.rotation.to_rotation_matrix().into_inner()
    }

    pub fn transform_point(&self, p: &Point3) -> Point3 {
        Point3::from(self.rotation_matrix() * p.coords + self.translation)
    }

    /// Camera center in world coordinates.
    pub fn center(&self) -> Point3 {
        Point3::from(-(self.rotation_matrix().transpose() * self.translation))
    }

    /// Camera→world transform expressed in the same struct.
    pub fn inverse(&self) -> Self {
        let rotation = self.rotation.inverse();
        let translation = -(rotation.to_rotation_matrix() * self.translation);
        Self {
            rotation,
            translation,
        }
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &Self) -> Self {
        Self {
            rotation: self.rotation * other.rotation,
            translation: self.rotation_matrix() * other.translation + self.translation,
        }
    }

    /// Camera +z axis (viewing direction) in world coordinates.
    pub fn forward(&self) -> Vector3<f64> {
        self.rotation_matrix().row(2).transpose()
    }

    /// Camera +x axis in world coordinates.
    pub fn right(&self) -> Vector3<f64> {
        self.rotation_matrix().row(0).transpose()
    }
}

/// Builds a unit quaternion from `[w, x, y, z]`, rejecting anything that is
/// not within `tolerance` of unit norm.
pub fn quaternion_from_wxyz(q: [f64; 4], tolerance: f64) -> Option<UnitQuaternion<f64>> {
    if q.iter().any(|c| !c.is_finite()) {
        return None;
    }
    let raw = Quaternion::new(q[0], q[1], q[2], q[3]);
    let deviation = (raw.norm() - 1.0).abs();
    if deviation > tolerance {
        return None;
    }
    // Leave already-unit input untouched so that write/read round trips are bit-exact.
    if deviation <= 1e-12 {
        return Some(Unit::new_unchecked(raw));
    }
    Some(Unit::new_normalize(raw))
}

pub fn quaternion_to_wxyz(q: &UnitQuaternion<f64>) -> [f64; 4] {
    [q.w, q.i, q.j, q.k]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraFrame {
    pub intrinsics: Intrinsics,
    pub extrinsics: Extrinsics,
    pub width: u32,
    pub height: u32,
}

/// Result of projecting a world point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub u: f64,
    pub v: f64,
    pub depth: f64,
}

impl CameraFrame {
    pub fn new(
        intrinsics: Intrinsics,
        extrinsics: Extrinsics,
        width: u32,
        height: u32,
    ) -> Result<Self, GeomError> {
        let cam = Self {
            intrinsics,
            extrinsics,
            width,
            height,
        };
        cam.validate()?;
        Ok(cam)
    }

    pub fn validate(&self) -> Result<(), GeomError> {
        let k = &self.intrinsics;
        if self.width == 0 || self.height == 0 {
            return Err(GeomError::InvalidCamera(format!(
                "image size must be at least 1×1, got {}×{}",
                self.width, self.height
            )));
        }
        if !(k.fx.is_finite() && k.fx > 0.0 && k.fy.is_finite() && k.fy > 0.0) {
            return Err(GeomError::InvalidCamera(format!(
                "focal lengths must be finite and positive, got fx={} fy={}",
                k.fx, k.fy
            )));
        }
        if !(k.cx.is_finite() && k.cy.is_finite()) {
            return Err(GeomError::InvalidCamera("principal point is not finite".into()));
        }
        let e = &self.extrinsics;
        if !(e.translation.iter().all(|c| c.is_finite())
            && e.rotation.coords.iter().all(|c| c.is_finite()))
        {
            return Err(GeomError::InvalidCamera("extrinsics are not finite".into()));
        }
        if (e.rotation.norm() - 1.0).abs() > 1e-9 {
            return Err(GeomError::InvalidCamera("rotation is not a unit quaternion".into()));
        }
        Ok(())
    }

    /// Principal points outside the image are legal (cropped virtual cameras)
    /// but usually a mistake, so they are reported rather than rejected.
    pub fn principal_point_warnings(&self) -> Vec<String> {
        let k = &self.intrinsics;
        let mut warnings = Vec::new();
        if !(0.0..self.width as f64).contains(&k.cx) {
            warnings.push(format!("cx = {} lies outside [0, {})", k.cx, self.width));
        }
        if !(0.0..self.height as f64).contains(&k.cy) {
            warnings.push(format!("cy = {} lies outside [0, {})", k.cy, self.height));
        }
        warnings
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    /// Projects a camera-space point. No depth check.
    #[inline]
    pub fn project_camera_space(&self, p: &Vector3<f64>) -> (f64, f64) {
        let k = &self.intrinsics;
        (k.fx * (p.x / p.z) + k.cx, k.fy * (p.y / p.z) + k.cy)
    }

    pub fn project(&self, p: &Point3) -> Result<Projection, GeomError> {
        let pc = self.extrinsics.transform_point(p);
        if pc.z <= MIN_DEPTH {
            return Err(GeomError::BehindCamera { z: pc.z });
        }
        let (u, v) = self.project_camera_space(&pc.coords);
        Ok(Projection { u, v, depth: pc.z })
    }

    /// Camera-space point on the ray through `(u, v)` at depth `depth`.
    pub fn unproject_camera_space(&self, u: f64, v: f64, depth: f64) -> Vector3<f64> {
        let k = &self.intrinsics;
        Vector3::new((u - k.cx) / k.fx * depth, (v - k.cy) / k.fy * depth, depth)
    }

    pub fn unproject(&self, u: f64, v: f64, depth: f64) -> Result<Point3, GeomError> {
        if !(depth > 0.0) || !depth.is_finite() {
            return Err(GeomError::NonPositiveDepth(depth));
        }
        let pc = self.unproject_camera_space(u, v, depth);
        let r = self.extrinsics.rotation_matrix();
        Ok(Point3::from(r.transpose() * (pc - self.extrinsics.translation)))
    }

    /// Lifts the center of pixel `(col, row)`.
    pub fn unproject_pixel(&self, col: u32, row: u32, depth: f64) -> Result<Point3, GeomError> {
        let (u, v) = pixel_center(col, row);
        self.unproject(u, v, depth)
    }

    /// Same camera rendered at `1/factor` resolution.
    pub fn downscaled(&self, factor: u32) -> Self {
        if factor <= 1 {
            return *self;
        }
        let f = factor as f64;
        let k = &self.intrinsics;
        Self {
            intrinsics: Intrinsics::new(k.fx / f, k.fy / f, k.cx / f, k.cy / f),
            extrinsics: self.extrinsics,
            width: self.width.div_ceil(factor),
            height: self.height.div_ceil(factor),
        }
    }
}

#[inline]
pub fn pixel_center(col: u32, row: u32) -> (f64, f64) {
    (col as f64 + 0.5, row as f64 + 0.5)
}

/// Interpolates between two camera poses.
///
/// Orientation follows the shortest great-circle arc; the camera center moves
/// on the straight segment between the two centers.
pub fn interpolate_pose(a: &Extrinsics, b: &Extrinsics, alpha: f64) -> Extrinsics {
    if alpha <= 0.0 {
        return *a;
    }
    if alpha >= 1.0 {
        return *b;
    }
    let rotation = slerp_shortest(&a.rotation, &b.rotation, alpha);
    let ca = a.center();
    let cb = b.center();
    let center = ca + (cb - ca) * alpha;
    let translation = -(rotation.to_rotation_matrix() * center.coords);
    Extrinsics {
        rotation,
        translation,
    }
}

fn slerp_shortest(
    a: &UnitQuaternion<f64>,
    b: &UnitQuaternion<f64>,
    alpha: f64,
) -> UnitQuaternion<f64> {
    // `try_slerp` already flips to the shorter arc; it gives up only when the
    // two orientations coincide, where normalized lerp is exact enough.
    a.try_slerp(b, alpha, 1e-12).unwrap_or_else(|| a.nlerp(b, alpha))
}

/// Rotation angle between two orientations in radians, in `[0, π]`.
pub fn rotation_angle_between(a: &UnitQuaternion<f64>, b: &UnitQuaternion<f64>) -> f64 {
    a.angle_to(b)
}
