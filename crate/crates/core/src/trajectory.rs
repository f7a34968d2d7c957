//! Camera trajectories: cinematic presets and keyframe interpolation.

use crate::geom::{interpolate_pose, CameraFrame, Extrinsics, GeomError, Point3};
use nalgebra::{UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrajectoryError {
    #[error("invalid trajectory: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Geom(#[from] GeomError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PresetKind {
    /// Rotation about a vertical axis through the anchor; magnitude in degrees.
    Orbit,
    /// Move along the initial view direction; magnitude in meters.
    Dolly,
    /// Move along the initial camera-right axis; magnitude in meters.
    Truck,
    /// Focal length multiplier reached at the last frame.
    Zoom,
}

impl PresetKind {
    /// Parameter value that produces no motion.
    pub fn null_magnitude(self) -> f64 {
        match self {
            PresetKind::Zoom => 1.0,
            _ => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PresetSpec {
    pub kind: PresetKind,
    pub magnitude: f64,
    /// Orbit pivot. Required for orbits, ignored otherwise.
    pub anchor: Option<Point3>,
    pub frames: usize,
    /// Orbit axis direction.
    pub up: Vector3<f64>,
}

impl PresetSpec {
    pub fn new(kind: PresetKind, magnitude: f64, frames: usize) -> Self {
        Self {
            kind,
            magnitude,
            anchor: None,
            frames,
            up: Vector3::y(),
        }
    }

    pub fn with_anchor(mut self, anchor: Point3) -> Self {
        self.anchor = Some(anchor);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Keyframe {
    pub frame: usize,
    pub camera: CameraFrame,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrajectorySpec {
    Preset(PresetSpec),
    Keyframes { frames: usize, keyframes: Vec<Keyframe> },
}

impl TrajectorySpec {
    pub fn frame_count(&self) -> usize {
        match self {
            TrajectorySpec::Preset(p) => p.frames,
            TrajectorySpec::Keyframes { frames, .. } => *frames,
        }
    }

    pub fn validate(&self) -> Result<(), TrajectoryError> {
        let invalid = |msg: String| Err(TrajectoryError::InvalidSpec(msg));
        match self {
            TrajectorySpec::Preset(p) => {
                if p.frames < 1 {
                    return invalid("a trajectory needs at least one frame".into());
                }
                if !p.magnitude.is_finite() {
                    return invalid(format!("magnitude {} is not finite", p.magnitude));
                }
                match p.kind {
                    PresetKind::Zoom if p.magnitude <= 0.0 => {
                        return invalid(format!(
                            "zoom multiplier must be positive, got {}",
                            p.magnitude
                        ));
                    }
                    PresetKind::Orbit => {
                        match p.anchor {
                            None => return invalid("orbit preset requires an anchor".into()),
                            Some(a) if !a.coords.iter().all(|c| c.is_finite()) => {
                                return invalid("orbit anchor is not finite".into())
                            }
                            _ => {}
                        }
                        if p.up.try_normalize(1e-12).is_none() || !p.up.iter().all(|c| c.is_finite()) {
                            return invalid("orbit axis must be a finite non-zero vector".into());
                        }
                    }
                    _ => {}
                }
                Ok(())
            }
            TrajectorySpec::Keyframes { frames, keyframes } => {
                if *frames < 1 {
                    return invalid("a trajectory needs at least one frame".into());
                }
                let Some(first) = keyframes.first() else {
                    return invalid("keyframe list is empty".into());
                };
                if first.frame != 0 {
                    return invalid(format!("first keyframe is at frame {}, must be 0", first.frame));
                }
                let last = keyframes.last().unwrap();
                if last.frame != frames - 1 {
                    return invalid(format!(
                        "last keyframe is at frame {}, must be {}",
                        last.frame,
                        frames - 1
                    ));
                }
                if let Some(w) = keyframes.windows(2).find(|w| w[1].frame <= w[0].frame) {
                    return invalid(format!(
                        "keyframe indices must increase strictly ({} then {})",
                        w[0].frame, w[1].frame
                    ));
                }
                for k in keyframes {
                    k.camera.validate()?;
                    if (k.camera.width, k.camera.height) != (first.camera.width, first.camera.height) {
                        return invalid(format!(
                            "keyframe at frame {} has image size {}×{}, expected {}×{}",
                            k.frame,
                            k.camera.width,
                            k.camera.height,
                            first.camera.width,
                            first.camera.height
                        ));
                    }
                }
                Ok(())
            }
        }
    }
}

/// A base camera together with the motion applied to it.
///
/// In keyframe mode the first keyframe is the base.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub base: CameraFrame,
    pub spec: TrajectorySpec,
}

impl Trajectory {
    pub fn frame_count(&self) -> usize {
        self.spec.frame_count()
    }

    pub fn expand(&self) -> Result<Vec<CameraFrame>, TrajectoryError> {
        expand(&self.spec, &self.base)
    }
}

fn progress(k: usize, frames: usize) -> f64 {
    if frames <= 1 {
        0.0
    } else {
        k as f64 / (frames - 1) as f64
    }
}

fn renormalized(q: UnitQuaternion<f64>) -> UnitQuaternion<f64> {
    UnitQuaternion::new_normalize(q.into_inner())
}

fn preset_frame(p: &PresetSpec, base: &CameraFrame, k: usize) -> CameraFrame {
    let s = progress(k, p.frames);
    let e0 = &base.extrinsics;
    match p.kind {
        PresetKind::Orbit => {
            let theta = (p.magnitude * s).to_radians();
            if theta == 0.0 {
                return *base;
            }
            let anchor = p.anchor.expect("validated").coords;
            let q = UnitQuaternion::from_axis_angle(
                &nalgebra::Unit::new_normalize(p.up),
                theta,
            );
            let rotation = renormalized(e0.rotation * q.inverse());
            let r0 = e0.rotation_matrix();
            let translation =
                e0.translation + r0 * anchor - rotation.to_rotation_matrix() * anchor;
            CameraFrame {
                extrinsics: Extrinsics::new(rotation, translation),
                ..*base
            }
        }
        PresetKind::Dolly | PresetKind::Truck => {
            let d = p.magnitude * s;
            if d == 0.0 {
                return *base;
            }
            let shift = if p.kind == PresetKind::Dolly {
                Vector3::new(0.0, 0.0, d)
            } else {
                Vector3::new(d, 0.0, 0.0)
            };
            CameraFrame {
                extrinsics: Extrinsics::new(e0.rotation, e0.translation - shift),
                ..*base
            }
        }
        PresetKind::Zoom => {
            let factor = 1.0 + (p.magnitude - 1.0) * s;
            if factor == 1.0 {
                return *base;
            }
            CameraFrame {
                intrinsics: base.intrinsics.zoomed(factor),
                ..*base
            }
        }
    }
}

/// Expands a trajectory specification into one camera per frame.
///
/// Frame 0 is always `base` itself for presets and the first keyframe in
/// keyframe mode; null motion returns exact copies.
pub fn expand(spec: &TrajectorySpec, base: &CameraFrame) -> Result<Vec<CameraFrame>, TrajectoryError> {
    spec.validate()?;
    match spec {
        TrajectorySpec::Preset(p) => {
            base.validate()?;
            Ok((0..p.frames).map(|k| preset_frame(p, base, k)).collect())
        }
        TrajectorySpec::Keyframes { frames, keyframes } => {
            let mut out = Vec::with_capacity(*frames);
            let mut seg = 0;
            for k in 0..*frames {
                while seg + 1 < keyframes.len() && keyframes[seg + 1].frame <= k {
                    seg += 1;
                }
                let a = &keyframes[seg];
                if a.frame == k || seg + 1 == keyframes.len() {
                    out.push(a.camera);
                    continue;
                }
                let b = &keyframes[seg + 1];
                let alpha = (k - a.frame) as f64 / (b.frame - a.frame) as f64;
                let e = interpolate_pose(&a.camera.extrinsics, &b.camera.extrinsics, alpha);
                out.push(CameraFrame {
                    intrinsics: a.camera.intrinsics.lerp(&b.camera.intrinsics, alpha),
                    extrinsics: Extrinsics::new(renormalized(e.rotation), e.translation),
                    width: a.camera.width,
                    height: a.camera.height,
                });
            }
            Ok(out)
        }
    }
}

/// The stock preset set: orbit left and right, dolly in, zoom in.
pub fn default_presets(frames: usize, anchor: Point3) -> Vec<(&'static str, PresetSpec)> {
    vec![
        ("orbit-left", PresetSpec::new(PresetKind::Orbit, 30.0, frames).with_anchor(anchor)),
        ("orbit-right", PresetSpec::new(PresetKind::Orbit, -30.0, frames).with_anchor(anchor)),
        ("dolly-in", PresetSpec::new(PresetKind::Dolly, 0.5, frames)),
        ("zoom-in", PresetSpec::new(PresetKind::Zoom, 1.5, frames)),
    ]
}
