//! Deterministic synthetic scenes and bundles used by tests, benchmarks and the golden fixture.

use crate::depthmesh::DepthRaster;
use crate::geom::{CameraFrame, Extrinsics, Intrinsics, Point3};
use crate::io::{self, BundleParams, ExtrinsicsConvention, IoError, ProjectBundle, ReferenceKeypoints};
use crate::motion_fit::{apply_similarity, MotionSequence, Skeleton, SimilarityTransform};
use crate::scene_transfer::CharacterMask;
use crate::trajectory::{PresetKind, PresetSpec, Trajectory, TrajectorySpec};
use nalgebra::{UnitQuaternion, Vector3};
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

/// Back wall depth of the room scene, meters.
pub const WALL_DEPTH: f64 = 4.0;
/// Floor height in camera-y (y points down), meters.
pub const FLOOR_Y: f64 = 1.0;
/// Depth of the character silhouette in the reference depth map.
pub const CHARACTER_DEPTH: f64 = 2.5;

/// Camera at the origin looking down +z with a 90° horizontal field of view.
pub fn fixture_camera(width: u32, height: u32) -> CameraFrame {
    let f = width as f64 / 2.0;
    CameraFrame::new(
        Intrinsics::new(f, f, width as f64 / 2.0, height as f64 / 2.0),
        Extrinsics::identity(),
        width,
        height,
    )
    .expect("fixture camera is valid")
}

/// Ray depth at which a pixel center meets the floor or the back wall, whichever is nearer.
fn room_depth_at(cam: &CameraFrame, col: u32, row: u32) -> f64 {
    let dir = cam.unproject_camera_space(col as f64 + 0.5, row as f64 + 0.5, 1.0);
    if dir.y > 0.0 {
        (FLOOR_Y / dir.y).min(WALL_DEPTH)
    } else {
        WALL_DEPTH
    }
}

/// Empty room: a fronto-parallel back wall above a floor.
pub fn room_depth(cam: &CameraFrame) -> DepthRaster {
    DepthRaster::from_fn(cam.width, cam.height, |c, r| room_depth_at(cam, c, r) as f32)
}

/// A fronto-parallel plane at `depth` filling the whole view.
pub fn plane_depth(cam: &CameraFrame, depth: f64) -> DepthRaster {
    DepthRaster::constant(cam.width, cam.height, depth as f32)
}

/// Upright rectangle in the middle of the frame, in fractions of the image size.
pub fn character_mask(cam: &CameraFrame) -> CharacterMask {
    let (w, h) = (cam.width as f64, cam.height as f64);
    CharacterMask::from_fn(cam.width, cam.height, |c, r| {
        let (x, y) = (c as f64 / w, r as f64 / h);
        (0.40..0.60).contains(&x) && (0.28..0.85).contains(&y)
    })
}

/// Background depth with the character pasted in at [`CHARACTER_DEPTH`].
pub fn reference_depth(background: &DepthRaster, mask: &CharacterMask) -> DepthRaster {
    DepthRaster::from_fn(background.width(), background.height(), |c, r| {
        if mask.contains(c, r) {
            CHARACTER_DEPTH as f32
        } else {
            background.get(c, r).unwrap_or(f32::NAN)
        }
    })
}

/// Standing body-18 pose, feet on the floor, facing the camera, centered at `(0, ·, CHARACTER_DEPTH)`.
fn rest_pose() -> [[f64; 3]; 18] {
    [
        [0.0, -0.60, -0.08],
        [0.0, -0.45, 0.0],
        [-0.18, -0.45, 0.0],
        [-0.22, -0.18, 0.0],
        [-0.24, 0.08, 0.0],
        [0.18, -0.45, 0.0],
        [0.22, -0.18, 0.0],
        [0.24, 0.08, 0.0],
        [-0.10, 0.10, 0.0],
        [-0.10, 0.55, 0.0],
        [-0.10, 0.98, 0.0],
        [0.10, 0.10, 0.0],
        [0.10, 0.55, 0.0],
        [0.10, 0.98, 0.0],
        [-0.03, -0.65, -0.07],
        [0.03, -0.65, -0.07],
        [-0.07, -0.63, 0.0],
        [0.07, -0.63, 0.0],
    ]
}

/// A body-18 walk cycle drifting sideways, one cycle over the sequence.
pub fn walking_motion(frames: usize) -> MotionSequence {
    let rest = rest_pose();
    let frames = (0..frames)
        .map(|k| {
            let phase = 2.0 * PI * k as f64 / frames.max(1) as f64;
            let swing = 0.15 * phase.sin();
            let drift = 0.03 * k as f64;
            rest.iter()
                .enumerate()
                .map(|(j, p)| {
                    let dz = match j {
                        9 => 0.5 * swing,
                        10 => swing,
                        12 => -0.5 * swing,
                        13 => -swing,
                        3 => -0.5 * swing,
                        4 => -swing,
                        6 => 0.5 * swing,
                        7 => swing,
                        _ => 0.0,
                    };
                    Point3::new(p[0] + drift, p[1], CHARACTER_DEPTH + p[2] + dz)
                })
                .collect()
        })
        .collect();
    MotionSequence {
        skeleton: Skeleton::body18(),
        fps: 24.0,
        frames,
        valid: None,
    }
}

/// The same pose in every frame.
pub fn static_motion(frames: usize) -> MotionSequence {
    let pose: Vec<Point3> = rest_pose()
        .iter()
        .map(|p| Point3::new(p[0], p[1], CHARACTER_DEPTH + p[2]))
        .collect();
    MotionSequence {
        skeleton: Skeleton::body18(),
        fps: 24.0,
        frames: vec![pose; frames],
        valid: None,
    }
}

/// The similarity separating the raw fixture motion from its reference keypoints.
pub fn fixture_similarity() -> SimilarityTransform {
    SimilarityTransform {
        scale: 1.1,
        rotation: UnitQuaternion::from_axis_angle(&Vector3::y_axis(), 0.2),
        translation: Vector3::new(0.05, -0.1, 0.2),
    }
}

/// World-space reference keypoints: frame 0 of `motion` moved by [`fixture_similarity`]
/// about the character center.
pub fn fixture_keypoints(motion: &MotionSequence) -> ReferenceKeypoints {
    let center = Vector3::new(0.0, 0.0, CHARACTER_DEPTH);
    let xf = fixture_similarity();
    let about = SimilarityTransform {
        scale: xf.scale,
        rotation: xf.rotation,
        translation: xf.translation + center - xf.rotation * center * xf.scale,
    };
    let moved = apply_similarity(motion, &about);
    ReferenceKeypoints::World(moved.frames[0].iter().copied().map(Some).collect())
}

/// Options for [`write_bundle`].
#[derive(Debug, Clone)]
pub struct BundleSpec {
    pub width: u32,
    pub height: u32,
    pub frames: usize,
    /// Fronto-parallel plane at this depth instead of the room.
    pub plane: Option<f64>,
    pub preset: PresetSpec,
    pub params: BundleParams,
    pub walking: bool,
    pub keypoints: bool,
}

impl BundleSpec {
    /// The 64×64, 8-frame room scene with a dolly-in preset.
    ///
    /// At this resolution neighboring floor rows differ in depth by more than
    /// the default culling ratio, so the fixture loosens it to keep the floor.
    pub fn golden() -> Self {
        Self {
            width: 64,
            height: 64,
            frames: 8,
            plane: None,
            preset: PresetSpec::new(PresetKind::Dolly, 1.0, 8),
            params: BundleParams {
                discontinuity_ratio: 0.15,
                joint_radius: 1,
                limb_thickness: 2,
                ..BundleParams::default()
            },
            walking: true,
            keypoints: true,
        }
    }

    /// Fronto-parallel plane with a static character and a dolly-in preset.
    pub fn plane(frames: usize) -> Self {
        Self {
            width: 64,
            height: 64,
            frames,
            plane: Some(3.0),
            preset: PresetSpec::new(PresetKind::Dolly, 1.5, frames),
            params: BundleParams {
                joint_radius: 1,
                limb_thickness: 2,
                ..BundleParams::default()
            },
            walking: false,
            keypoints: false,
        }
    }
}

/// Writes every input file plus `bundle.json` into `dir` and returns the bundle path.
/// Paths inside the bundle are relative, so the directory can be moved.
pub fn write_bundle(dir: &Path, spec: &BundleSpec) -> Result<PathBuf, IoError> {
    std::fs::create_dir_all(dir).map_err(|source| IoError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let cam = fixture_camera(spec.width, spec.height);
    let bg = match spec.plane {
        Some(z) => plane_depth(&cam, z),
        None => room_depth(&cam),
    };
    let mask = character_mask(&cam);
    let d_ref = reference_depth(&bg, &mask);
    let motion = if spec.walking {
        walking_motion(spec.frames)
    } else {
        static_motion(spec.frames)
    };
    let trajectory = Trajectory {
        base: cam,
        spec: TrajectorySpec::Preset(PresetSpec {
            frames: spec.frames,
            ..spec.preset
        }),
    };
    io::write_depth(&bg, &dir.join("background.pfm"))?;
    io::write_depth(&d_ref, &dir.join("reference.pfm"))?;
    io::write_bytes(&dir.join("mask.png"), &io::encode_mask(&mask))?;
    io::write_motion(&motion, &dir.join("motion.json"))?;
    io::write_trajectory(&trajectory, ExtrinsicsConvention::WorldToCamera, &dir.join("trajectory.json"))?;
    let keypoints = if spec.keypoints {
        io::write_bytes(
            &dir.join("keypoints.json"),
            io::encode_keypoints(&fixture_keypoints(&motion)).as_bytes(),
        )?;
        Some(PathBuf::from("keypoints.json"))
    } else {
        None
    };
    let bundle = ProjectBundle {
        version: Some(io::SCHEMA_VERSION),
        background_depth: Some(PathBuf::from("background.pfm")),
        reference_depth: PathBuf::from("reference.pfm"),
        mask: PathBuf::from("mask.png"),
        motion: PathBuf::from("motion.json"),
        trajectory: PathBuf::from("trajectory.json"),
        reference_keypoints: keypoints,
        output_dir: PathBuf::from("out"),
        params: spec.params.clone(),
    };
    let path = dir.join("bundle.json");
    io::write_bytes(&path, io::encode_bundle(&bundle).as_bytes())?;
    Ok(path)
}
