//! End-to-end compilation of a project bundle into condition frames and a schedule manifest.

use crate::depthmesh::{build_mesh, fill_holes, DepthRaster, SceneMesh};
use crate::geom::{CameraFrame, Point3};
use crate::io::{self, FrameRecord, IoError, ProjectBundle, ReferenceKeypoints};
use crate::motion_fit::{fit_to_reference, MotionSequence, SimilarityTransform};
use crate::raster::{DepthPolarity, RasterError, SequenceRenderer, SkeletonStyle};
use crate::scene_transfer::{transfer_with_params, weighted_centroids, CharacterPoints, TransferParams};
use crate::schedule::{build_schedule, ScheduleManifest, POSE_DEPTH_DIR, POSE_DIR};
use crate::trajectory::Trajectory;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};
use thiserror::Error;

pub const MANIFEST_FILE: &str = "manifest.json";

/// Directory holding the normalized mesh depth alone, kept for inspection and preview parity.
pub const DEPTH_DIR: &str = "depth/";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stage {
    Load,
    FillHoles,
    BuildMesh,
    WeightedCentroids,
    TransferCharacter,
    FitToReference,
    ExpandTrajectory,
    RenderSequence,
    BuildSchedule,
    WriteOutputs,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Load => "load",
            Stage::FillHoles => "fill_holes",
            Stage::BuildMesh => "build_mesh",
            Stage::WeightedCentroids => "weighted_centroids",
            Stage::TransferCharacter => "transfer_character",
            Stage::FitToReference => "fit_to_reference",
            Stage::ExpandTrajectory => "expand_trajectory",
            Stage::RenderSequence => "render_sequence",
            Stage::BuildSchedule => "build_schedule",
            Stage::WriteOutputs => "write_outputs",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error)]
#[error("stage {stage} failed: {source}")]
pub struct PipelineError {
    pub stage: Stage,
    #[source]
    pub source: Box<dyn std::error::Error + Send + Sync>,
}

impl PipelineError {
    fn new(stage: Stage, source: impl Into<Box<dyn std::error::Error + Send + Sync>>) -> Self {
        Self {
            stage,
            source: source.into(),
        }
    }

    /// True when the failure stems from the inputs rather than from writing results.
    pub fn is_input_error(&self) -> bool {
        self.stage != Stage::WriteOutputs
    }
}

fn in_stage<T, E>(stage: Stage, r: Result<T, E>) -> Result<T, PipelineError>
where
    E: Into<Box<dyn std::error::Error + Send + Sync>>,
{
    r.map_err(|e| PipelineError::new(stage, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Default)]
struct Timer {
    timings: Vec<StageTiming>,
}

impl Timer {
    fn run<T>(&mut self, stage: Stage, f: impl FnOnce() -> Result<T, PipelineError>) -> Result<T, PipelineError> {
        let start = Instant::now();
        let out = f();
        let elapsed: Duration = start.elapsed();
        log::info!("stage {stage}: {:.3} s", elapsed.as_secs_f64());
        self.timings.push(StageTiming {
            stage: stage.name().to_string(),
            seconds: elapsed.as_secs_f64(),
        });
        out
    }
}

/// Everything needed to render frames for any trajectory over the same scene.
#[derive(Debug, Clone)]
pub struct PreparedScene {
    /// Camera the depth maps, mask and reference keypoints were captured from.
    pub reference_camera: CameraFrame,
    pub mesh: SceneMesh,
    pub transfer: TransferParams,
    pub character: CharacterPoints,
    pub motion: MotionSequence,
    /// `None` when no reference keypoints were supplied and the motion was used as given.
    pub fit: Option<SimilarityTransform>,
    pub style: SkeletonStyle,
    pub polarity: DepthPolarity,
    pub trajectory: Trajectory,
}

impl PreparedScene {
    pub fn frame_count(&self) -> usize {
        self.motion.frame_count()
    }
}

/// Lifts reference keypoints to world space. Pixel keypoints take the aligned
/// character depth at their pixel; keypoints off the character become invalid.
pub fn lift_keypoints(
    keypoints: &ReferenceKeypoints,
    character: &CharacterPoints,
    cam: &CameraFrame,
) -> (Vec<Point3>, Vec<bool>) {
    match keypoints {
        ReferenceKeypoints::World(points) => (
            points.iter().map(|p| p.unwrap_or_else(Point3::origin)).collect(),
            points.iter().map(Option::is_some).collect(),
        ),
        ReferenceKeypoints::Pixel(points) => points
            .iter()
            .map(|p| {
                let lifted = p.and_then(|[u, v]| {
                    if !(u >= 0.0 && v >= 0.0 && u < cam.width as f64 && v < cam.height as f64) {
                        return None;
                    }
                    let z = character.depth_at(u.floor() as u32, v.floor() as u32)?;
                    cam.unproject(u, v, z).ok()
                });
                (lifted.unwrap_or_else(Point3::origin), lifted.is_some())
            })
            .unzip(),
    }
}

fn style_for(bundle: &ProjectBundle, motion: &MotionSequence) -> SkeletonStyle {
    let mut style = SkeletonStyle::for_skeleton(&motion.skeleton);
    style.joint_radius = bundle.params.joint_radius;
    style.limb_thickness = bundle.params.limb_thickness;
    style
}

/// Runs every stage up to and including trajectory expansion.
fn prepare_timed(bundle: &ProjectBundle, timer: &mut Timer) -> Result<(PreparedScene, Vec<CameraFrame>), PipelineError> {
    let p = &bundle.params;
    let (d_ref, d_bg_raw, mask, motion, trajectory, keypoints) = timer.run(Stage::Load, || {
        let l = Stage::Load;
        let mask = in_stage(l, io::read_mask(&bundle.mask))?;
        let d_ref = in_stage(l, io::read_depth(&bundle.reference_depth))?;
        let d_bg = in_stage(l, bundle.background_depth.as_deref().map(io::read_depth).transpose())?;
        let motion = in_stage(l, io::read_motion(&bundle.motion))?;
        let trajectory = in_stage(l, io::read_trajectory(&bundle.trajectory))?;
        let keypoints = in_stage(l, bundle.reference_keypoints.as_deref().map(io::read_keypoints).transpose())?;
        Ok((d_ref, d_bg, mask, motion, trajectory, keypoints))
    })?;
    let cam = trajectory.base;
    for warning in cam.principal_point_warnings() {
        log::warn!("{warning}");
    }

    let d_bg: DepthRaster = timer.run(Stage::FillHoles, || match d_bg_raw {
        // Without an inpainted background, the character region is filled from its surroundings.
        None => in_stage(Stage::FillHoles, fill_holes(&d_ref, mask.inside())),
        Some(bg) if p.fill_holes => {
            let holes: Vec<bool> = bg.valid_mask().iter().map(|v| !v).collect();
            in_stage(Stage::FillHoles, fill_holes(&bg, &holes))
        }
        Some(bg) => Ok(bg),
    })?;

    let mesh = timer.run(Stage::BuildMesh, || {
        in_stage(Stage::BuildMesh, build_mesh(&d_bg, &cam, p.discontinuity_ratio))
    })?;
    log::info!("mesh: {} vertices, {} triangles", mesh.vertices.len(), mesh.triangles.len());

    let transfer = timer.run(Stage::WeightedCentroids, || {
        in_stage(
            Stage::WeightedCentroids,
            weighted_centroids(&d_ref, &d_bg, &cam, &mask, p.decay_length),
        )
    })?;
    let character = timer.run(Stage::TransferCharacter, || {
        in_stage(Stage::TransferCharacter, transfer_with_params(&d_ref, &cam, &mask, transfer))
    })?;

    let (motion, fit) = timer.run(Stage::FitToReference, || match &keypoints {
        None => {
            log::info!("no reference keypoints; motion used as given");
            Ok((motion, None))
        }
        Some(kp) => {
            let (points, valid) = lift_keypoints(kp, &character, &cam);
            let (fitted, xf) = in_stage(Stage::FitToReference, fit_to_reference(&motion, &points, &valid))?;
            log::info!("similarity fit: scale {:.6}", xf.scale);
            Ok((fitted, Some(xf)))
        }
    })?;

    let cameras = timer.run(Stage::ExpandTrajectory, || {
        let cams = in_stage(Stage::ExpandTrajectory, trajectory.expand())?;
        if cams.len() != motion.frame_count() {
            return Err(PipelineError::new(
                Stage::ExpandTrajectory,
                RasterError::LengthMismatch(format!(
                    "trajectory has {} frames, motion has {}",
                    cams.len(),
                    motion.frame_count()
                )),
            ));
        }
        Ok(cams)
    })?;

    let style = style_for(bundle, &motion);
    Ok((
        PreparedScene {
            reference_camera: cam,
            mesh,
            transfer,
            character,
            motion,
            fit,
            style,
            polarity: p.polarity,
            trajectory,
        },
        cameras,
    ))
}

/// Loads the bundle and runs the scene stages, stopping before rendering.
pub fn prepare(bundle: &ProjectBundle) -> Result<PreparedScene, PipelineError> {
    prepare_timed(bundle, &mut Timer::default()).map(|(scene, _)| scene)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompileOutcome {
    pub output_dir: PathBuf,
    pub manifest: PathBuf,
    pub frame_dirs: Vec<PathBuf>,
    pub frames: usize,
    pub timings: Vec<StageTiming>,
}

fn clear_frame_dir(dir: &Path) -> Result<(), IoError> {
    let wrap = |source| IoError::Io {
        path: dir.to_path_buf(),
        source,
    };
    if !dir.exists() {
        return Ok(());
    }
    for entry in std::fs::read_dir(dir).map_err(wrap)? {
        let entry = entry.map_err(wrap)?;
        let name = entry.file_name();
        let name = name.to_string_lossy();
        let ours = name == io::FRAME_INDEX_FILE || (name.starts_with("frame_") && name.ends_with(".png"));
        if ours {
            std::fs::remove_file(entry.path()).map_err(wrap)?;
        }
    }
    Ok(())
}

fn ensure_dir(dir: &Path) -> Result<(), IoError> {
    std::fs::create_dir_all(dir).map_err(|source| IoError::Io {
        path: dir.to_path_buf(),
        source,
    })
}

/// Compiles the bundle into `bundle.output_dir`.
///
/// Output layout: `pose/` always, `pose_depth/` and `depth/` when the schedule
/// has a depth phase, each with numbered frames and `index.json`, then
/// `manifest.json`. Any existing manifest is removed first and the new one is
/// written last, so a failed run never leaves a manifest behind.
pub fn compile(bundle: &ProjectBundle) -> Result<CompileOutcome, PipelineError> {
    let out = bundle.output_dir.clone();
    let manifest_path = out.join(MANIFEST_FILE);
    if manifest_path.exists() {
        in_stage(Stage::WriteOutputs, std::fs::remove_file(&manifest_path))?;
    }
    let mut timer = Timer::default();
    let (scene, cameras) = prepare_timed(bundle, &mut timer)?;

    let renderer = timer.run(Stage::RenderSequence, || {
        in_stage(
            Stage::RenderSequence,
            SequenceRenderer::new(&scene.mesh, &scene.motion, &cameras, &scene.style, scene.polarity),
        )
    })?;
    let (lo, hi) = renderer.depth_range();
    log::info!("depth range over sequence: [{lo:.6}, {hi:.6}] m");

    let manifest: ScheduleManifest = timer.run(Stage::BuildSchedule, || {
        in_stage(
            Stage::BuildSchedule,
            build_schedule(bundle.params.num_steps, bundle.params.depth_fraction),
        )
    })?;
    let with_depth = manifest.depth_steps() > 0;

    let frame_dirs = timer.run(Stage::WriteOutputs, || {
        let pose_dir = out.join(POSE_DIR);
        let pd_dir = out.join(POSE_DEPTH_DIR);
        let depth_dir = out.join(DEPTH_DIR);
        for d in [&pose_dir, &pd_dir, &depth_dir] {
            in_stage(Stage::WriteOutputs, clear_frame_dir(d))?;
        }
        in_stage(Stage::WriteOutputs, ensure_dir(&pose_dir))?;
        if with_depth {
            in_stage(Stage::WriteOutputs, ensure_dir(&pd_dir))?;
            in_stage(Stage::WriteOutputs, ensure_dir(&depth_dir))?;
        }
        type Records = (FrameRecord, Option<(FrameRecord, FrameRecord)>);
        let records: Vec<Records> = in_stage(Stage::WriteOutputs, (0..renderer.len())
            .into_par_iter()
            .map(|i| -> Result<Records, IoError> {
                if with_depth {
                    let f = renderer.frame(i);
                    let pose = io::write_frame(&pose_dir, i, &io::encode_rgb_png(&f.pose))?;
                    let pd = io::write_frame(&pd_dir, i, &io::encode_rgb_png(&f.pose_depth))?;
                    let depth = io::write_frame(&depth_dir, i, &io::encode_gray_png(&f.depth))?;
                    Ok((pose, Some((pd, depth))))
                } else {
                    let pose = io::write_frame(&pose_dir, i, &io::encode_rgb_png(&renderer.pose(i)))?;
                    Ok((pose, None))
                }
            })
            .collect())?;
        let (width, height) = (scene.reference_camera.width, scene.reference_camera.height);
        let (size_w, size_h) = cameras.first().map_or((width, height), |c| (c.width, c.height));
        let mut pose = Vec::with_capacity(records.len());
        let mut pd = Vec::new();
        let mut depth = Vec::new();
        for (p, rest) in records {
            pose.push(p);
            if let Some((a, b)) = rest {
                pd.push(a);
                depth.push(b);
            }
        }
        in_stage(Stage::WriteOutputs, io::write_frame_index(&pose_dir, size_w, size_h, pose))?;
        let mut dirs = vec![pose_dir];
        if with_depth {
            in_stage(Stage::WriteOutputs, io::write_frame_index(&pd_dir, size_w, size_h, pd))?;
            in_stage(Stage::WriteOutputs, io::write_frame_index(&depth_dir, size_w, size_h, depth))?;
            dirs.push(pd_dir);
            dirs.push(depth_dir);
        }
        in_stage(Stage::WriteOutputs, io::write_manifest(&manifest, &manifest_path))?;
        Ok(dirs)
    })?;

    for d in &frame_dirs {
        log::info!("wrote {}", d.display());
    }
    log::info!("wrote {}", manifest_path.display());
    Ok(CompileOutcome {
        output_dir: out,
        manifest: manifest_path,
        frame_dirs,
        frames: cameras.len(),
        timings: timer.timings,
    })
}
