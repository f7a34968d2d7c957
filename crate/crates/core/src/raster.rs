//! Software rasterization of the two control signals.
//!
//! Mesh depth uses a z-buffered triangle fill with fixed-point vertex
//! positions (1/256 px) and integer edge functions, so coverage decisions are
//! exact and independent of evaluation order. Within a frame the image is cut
//! into horizontal bands that render in parallel; each band visits triangles
//! in mesh order, so the result does not depend on the thread count.

use crate::depthmesh::SceneMesh;
use crate::geom::CameraFrame;
use crate::motion_fit::{MotionSequence, Skeleton, BODY18_LIMBS};
use nalgebra::Vector3;
use rayon::prelude::*;
use thiserror::Error;

/// Camera-space near plane (meters). Geometry in front of it is clipped away.
pub const NEAR_PLANE: f64 = 1e-4;

/// Sub-pixel resolution of snapped vertex positions.
pub const SUBPIXEL_STEPS: i64 = 256;

/// Projected coordinates are clamped to this magnitude (pixels) before snapping.
const COORD_LIMIT: f64 = (1u64 << 31) as f64;

const BAND_ROWS: usize = 32;

pub const BODY18_PALETTE: [[u8; 3]; 17] = [
    [255, 0, 0],
    [255, 85, 0],
    [255, 170, 0],
    [255, 255, 0],
    [170, 255, 0],
    [85, 255, 0],
    [0, 255, 0],
    [0, 255, 85],
    [0, 255, 170],
    [0, 255, 255],
    [0, 170, 255],
    [0, 85, 255],
    [0, 0, 255],
    [85, 0, 255],
    [170, 0, 255],
    [255, 0, 255],
    [255, 0, 170],
];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RasterError {
    #[error("no pixel is covered by the mesh in any frame")]
    AllUncovered,
    #[error("frame dimensions differ: {0}")]
    DimensionMismatch(String),
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    #[error("invalid skeleton style: {0}")]
    InvalidStyle(String),
    #[error("mesh has no triangles")]
    EmptyMesh,
}

/// Depth render target. Uncovered pixels hold `+∞`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameBuffer {
    pub width: u32,
    pub height: u32,
    pub zbuffer: Vec<f64>,
}

impl FrameBuffer {
    pub fn new(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            zbuffer: vec![f64::INFINITY; width as usize * height as usize],
        }
    }

    pub fn depth(&self, col: u32, row: u32) -> Option<f64> {
        let d = self.zbuffer[row as usize * self.width as usize + col as usize];
        d.is_finite().then_some(d)
    }

    pub fn covered_count(&self) -> usize {
        self.zbuffer.iter().filter(|d| d.is_finite()).count()
    }

    /// `(min, max)` over covered pixels.
    pub fn extrema(&self) -> Option<(f64, f64)> {
        merge_extrema(self.zbuffer.iter().filter(|d| d.is_finite()).map(|&d| (d, d)))
    }
}

fn merge_extrema(it: impl Iterator<Item = (f64, f64)>) -> Option<(f64, f64)> {
    it.fold(None, |acc, (lo, hi)| match acc {
        None => Some((lo, hi)),
        Some((a, b)) => Some((a.min(lo), b.max(hi))),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GrayFrame {
    pub width: u32,
    pub height: u32,
    pub data: Vec<u8>,
}

impl GrayFrame {
    pub fn get(&self, col: u32, row: u32) -> u8 {
        self.data[row as usize * self.width as usize + col as usize]
    }

    pub fn to_rgb(&self) -> RgbFrame {
        RgbFrame {
            width: self.width,
            height: self.height,
            data: self.data.iter().flat_map(|&g| [g, g, g]).collect(),
        }
    }
}

/// Row-major interleaved RGB8.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RgbFrame {
    pub width: u32,
    pub height: u32,
    pub data: Vec<u8>,
}

impl RgbFrame {
    pub fn black(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            data: vec![0; width as usize * height as usize * 3],
        }
    }

    pub fn get(&self, col: u32, row: u32) -> [u8; 3] {
        let i = (row as usize * self.width as usize + col as usize) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    fn put(&mut self, col: usize, row: usize, color: [u8; 3]) {
        let i = (row * self.width as usize + col) * 3;
        self.data[i..i + 3].copy_from_slice(&color);
    }

    pub fn is_black(&self) -> bool {
        self.data.iter().all(|&b| b == 0)
    }
}

/// Which end of the depth range maps to white.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DepthPolarity {
    #[default]
    NearBright,
    FarBright,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkeletonStyle {
    pub limbs: Vec<(usize, usize)>,
    pub limb_colors: Vec<[u8; 3]>,
    /// Color of joint `j` is `joint_colors[j % len]`.
    pub joint_colors: Vec<[u8; 3]>,
    /// Radius of the filled joint discs; 0 disables joint drawing.
    pub joint_radius: u32,
    pub limb_thickness: u32,
}

impl Default for SkeletonStyle {
    fn default() -> Self {
        Self::body18()
    }
}

impl SkeletonStyle {
    pub fn body18() -> Self {
        Self {
            limbs: BODY18_LIMBS.to_vec(),
            limb_colors: BODY18_PALETTE.to_vec(),
            joint_colors: BODY18_PALETTE.to_vec(),
            joint_radius: 4,
            limb_thickness: 4,
        }
    }

    /// Palette-colored style for an arbitrary skeleton.
    pub fn for_skeleton(skeleton: &Skeleton) -> Self {
        Self {
            limbs: skeleton.limbs.clone(),
            limb_colors: (0..skeleton.limbs.len())
                .map(|i| BODY18_PALETTE[i % BODY18_PALETTE.len()])
                .collect(),
            ..Self::body18()
        }
    }

    pub fn validate(&self, joint_count: usize) -> Result<(), RasterError> {
        if self.limb_thickness < 1 {
            return Err(RasterError::InvalidStyle("limb thickness must be at least 1".into()));
        }
        if self.limb_colors.len() != self.limbs.len() {
            return Err(RasterError::InvalidStyle(format!(
                "{} limbs but {} limb colors",
                self.limbs.len(),
                self.limb_colors.len()
            )));
        }
        if self.joint_colors.is_empty() {
            return Err(RasterError::InvalidStyle("joint palette is empty".into()));
        }
        if let Some((i, &(a, b))) = self
            .limbs
            .iter()
            .enumerate()
            .find(|(_, &(a, b))| a >= joint_count || b >= joint_count)
        {
            return Err(RasterError::InvalidStyle(format!(
                "limb {i} = ({a}, {b}) references a joint outside 0..{joint_count}"
            )));
        }
        // Black marks "no pose" when the signals are composed.
        if self
            .limb_colors
            .iter()
            .chain(&self.joint_colors)
            .any(|c| *c == [0, 0, 0])
        {
            return Err(RasterError::InvalidStyle("colors must not be pure black".into()));
        }
        Ok(())
    }

    /// Style for a frame rendered at `1/factor` resolution.
    pub fn downscaled(&self, factor: u32) -> Self {
        let f = factor.max(1);
        Self {
            joint_radius: if self.joint_radius == 0 {
                0
            } else {
                (self.joint_radius / f).max(1)
            },
            limb_thickness: (self.limb_thickness / f).max(1),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct ScreenVertex {
    x: i64,
    y: i64,
    z: f64,
}

#[derive(Debug, Clone, Copy)]
struct SetupTriangle {
    v: [ScreenVertex; 3],
    area: i128,
    owned: [bool; 3],
    cols: (i64, i64),
    rows: (i64, i64),
}

#[inline]
fn snap(u: f64) -> i64 {
    (u.clamp(-COORD_LIMIT, COORD_LIMIT) * SUBPIXEL_STEPS as f64).round() as i64
}

#[inline]
fn edge(a: &ScreenVertex, b: &ScreenVertex, px: i64, py: i64) -> i128 {
    (b.x - a.x) as i128 * (py - a.y) as i128 - (b.y - a.y) as i128 * (px - a.x) as i128
}

/// Top-left ownership for an edge running from `a` to `b` of a positively
/// oriented triangle (y down).
#[inline]
fn owns_edge(a: &ScreenVertex, b: &ScreenVertex) -> bool {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    dy < 0 || (dy == 0 && dx > 0)
}

#[inline]
fn pixel_center_fixed(i: i64) -> i64 {
    i * SUBPIXEL_STEPS + SUBPIXEL_STEPS / 2
}

fn clip_near(tri: [Vector3<f64>; 3]) -> Vec<Vector3<f64>> {
    if tri.iter().all(|p| p.z >= NEAR_PLANE) {
        return tri.to_vec();
    }
    let mut out = Vec::with_capacity(4);
    for i in 0..3 {
        let a = tri[i];
        let b = tri[(i + 1) % 3];
        let a_in = a.z >= NEAR_PLANE;
        let b_in = b.z >= NEAR_PLANE;
        if a_in {
            out.push(a);
        }
        if a_in != b_in {
            let t = (NEAR_PLANE - a.z) / (b.z - a.z);
            let mut p = a + (b - a) * t;
            p.z = NEAR_PLANE;
            out.push(p);
        }
    }
    out
}

fn setup_triangle(
    cam: &CameraFrame,
    pts: [Vector3<f64>; 3],
    out: &mut Vec<SetupTriangle>,
) {
    let poly = clip_near(pts);
    if poly.len() < 3 {
        return;
    }
    let screen: Vec<ScreenVertex> = poly
        .iter()
        .map(|p| {
            let (u, v) = cam.project_camera_space(p);
            ScreenVertex {
                x: snap(u),
                y: snap(v),
                z: p.z,
            }
        })
        .collect();
    let (w, h) = (cam.width as i64, cam.height as i64);
    for k in 1..screen.len() - 1 {
        let mut v = [screen[0], screen[k], screen[k + 1]];
        let mut area = edge(&v[0], &v[1], v[2].x, v[2].y);
        if area == 0 {
            continue;
        }
        if area < 0 {
            v.swap(1, 2);
            area = -area;
        }
        let min_x = v.iter().map(|p| p.x).min().unwrap();
        let max_x = v.iter().map(|p| p.x).max().unwrap();
        let min_y = v.iter().map(|p| p.y).min().unwrap();
        let max_y = v.iter().map(|p| p.y).max().unwrap();
        let half = SUBPIXEL_STEPS / 2;
        let c0 = (min_x - half + SUBPIXEL_STEPS - 1).div_euclid(SUBPIXEL_STEPS).max(0);
        let c1 = (max_x - half).div_euclid(SUBPIXEL_STEPS).min(w - 1);
        let r0 = (min_y - half + SUBPIXEL_STEPS - 1).div_euclid(SUBPIXEL_STEPS).max(0);
        let r1 = (max_y - half).div_euclid(SUBPIXEL_STEPS).min(h - 1);
        if c0 > c1 || r0 > r1 {
            continue;
        }
        out.push(SetupTriangle {
            owned: [
                owns_edge(&v[1], &v[2]),
                owns_edge(&v[2], &v[0]),
                owns_edge(&v[0], &v[1]),
            ],
            v,
            area,
            cols: (c0, c1),
            rows: (r0, r1),
        });
    }
}

fn raster_band(
    tris: &[SetupTriangle],
    ids: &[u32],
    first_row: i64,
    width: usize,
    band: &mut [f64],
) {
    let last_row = first_row + (band.len() / width) as i64 - 1;
    for &id in ids {
        let t = &tris[id as usize];
        let [v0, v1, v2] = &t.v;
        let area = t.area as f64;
        // Constant-depth triangles keep their depth exactly.
        let flat = v0.z == v1.z && v1.z == v2.z;
        let step = [
            -(v2.y - v1.y) as i128 * SUBPIXEL_STEPS as i128,
            -(v0.y - v2.y) as i128 * SUBPIXEL_STEPS as i128,
            -(v1.y - v0.y) as i128 * SUBPIXEL_STEPS as i128,
        ];
        for row in t.rows.0.max(first_row)..=t.rows.1.min(last_row) {
            let py = pixel_center_fixed(row);
            let px = pixel_center_fixed(t.cols.0);
            let mut w = [edge(v1, v2, px, py), edge(v2, v0, px, py), edge(v0, v1, px, py)];
            let line = (row - first_row) as usize * width;
            for col in t.cols.0..=t.cols.1 {
                let inside = (0..3).all(|i| w[i] > 0 || (w[i] == 0 && t.owned[i]));
                if inside {
                    let depth = if flat {
                        v0.z
                    } else {
                        let inv = (w[0] as f64 / area) / v0.z
                            + (w[1] as f64 / area) / v1.z
                            + (w[2] as f64 / area) / v2.z;
                        1.0 / inv
                    };
                    let slot = &mut band[line + col as usize];
                    if depth < *slot {
                        *slot = depth;
                    }
                }
                for i in 0..3 {
                    w[i] += step[i];
                }
            }
        }
    }
}

/// Z-buffered perspective-correct depth render of `mesh` under `cam`.
///
/// A pixel is covered when its center lies inside a triangle, with
/// top-left ownership deciding centers that fall exactly on an edge.
pub fn rasterize_mesh_depth(mesh: &SceneMesh, cam: &CameraFrame) -> FrameBuffer {
    let mut fb = FrameBuffer::new(cam.width, cam.height);
    if mesh.triangles.is_empty() {
        return fb;
    }
    let r = cam.extrinsics.rotation_matrix();
    let t = cam.extrinsics.translation;
    let cam_space: Vec<Vector3<f64>> = mesh
        .vertices
        .par_iter()
        .map(|p| r * p.coords + t)
        .collect();

    let tris: Vec<SetupTriangle> = mesh
        .triangles
        .par_iter()
        .fold(Vec::new, |mut acc, tri| {
            setup_triangle(cam, tri.map(|i| cam_space[i as usize]), &mut acc);
            acc
        })
        .collect::<Vec<Vec<SetupTriangle>>>()
        .concat();

    let width = cam.width as usize;
    let band_count = (cam.height as usize).div_ceil(BAND_ROWS);
    let mut bins: Vec<Vec<u32>> = vec![Vec::new(); band_count];
    for (i, t) in tris.iter().enumerate() {
        let b0 = t.rows.0 as usize / BAND_ROWS;
        let b1 = t.rows.1 as usize / BAND_ROWS;
        for bin in &mut bins[b0..=b1] {
            bin.push(i as u32);
        }
    }

    fb.zbuffer
        .par_chunks_mut(width * BAND_ROWS)
        .zip(bins.par_iter())
        .enumerate()
        .for_each(|(b, (band, ids))| {
            raster_band(&tris, ids, (b * BAND_ROWS) as i64, width, band);
        });
    fb
}

/// Maps one depth frame to gray with fixed extrema.
pub fn normalize_with_range(fb: &FrameBuffer, range: (f64, f64), polarity: DepthPolarity) -> GrayFrame {
    let (lo, hi) = range;
    let span = hi - lo;
    let data = fb
        .zbuffer
        .iter()
        .map(|&d| {
            if !d.is_finite() {
                return 0;
            }
            if span <= 0.0 {
                return 255;
            }
            let level = match polarity {
                DepthPolarity::NearBright => (hi - d) / span,
                DepthPolarity::FarBright => (d - lo) / span,
            };
            (255.0 * level).round().clamp(0.0, 255.0) as u8
        })
        .collect();
    GrayFrame {
        width: fb.width,
        height: fb.height,
        data,
    }
}

/// Depth extrema over every covered pixel of every frame.
pub fn sequence_extrema(frames: &[FrameBuffer]) -> Option<(f64, f64)> {
    merge_extrema(frames.iter().filter_map(FrameBuffer::extrema))
}

/// Normalizes a sequence to gray against the extrema of the whole sequence.
pub fn normalize_depth(
    frames: &[FrameBuffer],
    polarity: DepthPolarity,
) -> Result<Vec<GrayFrame>, RasterError> {
    let range = sequence_extrema(frames).ok_or(RasterError::AllUncovered)?;
    Ok(frames
        .iter()
        .map(|fb| normalize_with_range(fb, range, polarity))
        .collect())
}

fn snap_pixel(u: f64) -> i64 {
    u.clamp(-COORD_LIMIT, COORD_LIMIT).floor() as i64
}

/// Is `(pc, pr)` within `thickness / 2` of the integer segment `a`–`b`?
fn near_segment(a: (i64, i64), b: (i64, i64), p: (i64, i64), thickness: i128) -> bool {
    let (dx, dy) = ((b.0 - a.0) as i128, (b.1 - a.1) as i128);
    let (px, py) = ((p.0 - a.0) as i128, (p.1 - a.1) as i128);
    let len2 = dx * dx + dy * dy;
    let dot = px * dx + py * dy;
    let t2 = thickness * thickness;
    if len2 == 0 || dot <= 0 {
        return 4 * (px * px + py * py) <= t2;
    }
    if dot >= len2 {
        let (qx, qy) = ((p.0 - b.0) as i128, (p.1 - b.1) as i128);
        return 4 * (qx * qx + qy * qy) <= t2;
    }
    // Squared distance to the line is (|p|²·len² − dot²) / len².
    4 * ((px * px + py * py) * len2 - dot * dot) <= t2 * len2
}

/// Draws the skeleton on black under `cam`, skipping joints flagged invalid.
pub fn rasterize_skeleton_masked(
    joints: &[crate::geom::Point3],
    valid: Option<&[bool]>,
    cam: &CameraFrame,
    style: &SkeletonStyle,
) -> RgbFrame {
    let mut frame = RgbFrame::black(cam.width, cam.height);
    let (w, h) = (cam.width as i64, cam.height as i64);
    let projected: Vec<Option<(i64, i64)>> = joints
        .iter()
        .enumerate()
        .map(|(j, p)| {
            if valid.is_some_and(|v| !v[j]) {
                return None;
            }
            cam.project(p)
                .ok()
                .filter(|q| q.u.is_finite() && q.v.is_finite())
                .map(|q| (snap_pixel(q.u), snap_pixel(q.v)))
        })
        .collect();

    let thickness = style.limb_thickness as i64;
    let reach = (thickness + 1) / 2;
    for (&(ja, jb), &color) in style.limbs.iter().zip(&style.limb_colors) {
        let (Some(Some(a)), Some(Some(b))) = (projected.get(ja), projected.get(jb)) else {
            continue;
        };
        let c0 = (a.0.min(b.0) - reach).max(0);
        let c1 = (a.0.max(b.0) + reach).min(w - 1);
        let r0 = (a.1.min(b.1) - reach).max(0);
        let r1 = (a.1.max(b.1) + reach).min(h - 1);
        for row in r0..=r1 {
            for col in c0..=c1 {
                if near_segment(*a, *b, (col, row), thickness as i128) {
                    frame.put(col as usize, row as usize, color);
                }
            }
        }
    }

    if style.joint_radius > 0 {
        let r = style.joint_radius as i64;
        for (j, p) in projected.iter().enumerate() {
            let Some((jc, jr)) = *p else { continue };
            let color = style.joint_colors[j % style.joint_colors.len()];
            for row in (jr - r).max(0)..=(jr + r).min(h - 1) {
                for col in (jc - r).max(0)..=(jc + r).min(w - 1) {
                    let (dc, dr) = (col - jc, row - jr);
                    if dc * dc + dr * dr <= r * r {
                        frame.put(col as usize, row as usize, color);
                    }
                }
            }
        }
    }
    frame
}

pub fn rasterize_skeleton(
    joints: &[crate::geom::Point3],
    cam: &CameraFrame,
    style: &SkeletonStyle,
) -> RgbFrame {
    rasterize_skeleton_masked(joints, None, cam, style)
}

/// Gray depth replicated to RGB with every non-black pose pixel pasted on top.
pub fn compose_conditions(depth: &GrayFrame, pose: &RgbFrame) -> Result<RgbFrame, RasterError> {
    if (depth.width, depth.height) != (pose.width, pose.height) {
        return Err(RasterError::DimensionMismatch(format!(
            "depth {}×{}, pose {}×{}",
            depth.width, depth.height, pose.width, pose.height
        )));
    }
    let mut out = depth.to_rgb();
    for (dst, src) in out.data.chunks_exact_mut(3).zip(pose.data.chunks_exact(3)) {
        if src != [0, 0, 0] {
            dst.copy_from_slice(src);
        }
    }
    Ok(out)
}

/// All signals for one frame of a sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderedFrame {
    pub pose: RgbFrame,
    pub depth: GrayFrame,
    pub pose_depth: RgbFrame,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderedSequence {
    pub pose: Vec<RgbFrame>,
    pub depth: Vec<GrayFrame>,
    pub pose_depth: Vec<RgbFrame>,
}

/// Renders frames of a sequence on demand against precomputed global depth extrema.
///
/// Construction renders every depth frame once to find the extrema; frames
/// requested afterwards are rendered again, which keeps memory flat for long
/// or large sequences.
#[derive(Debug)]
pub struct SequenceRenderer<'a> {
    mesh: &'a SceneMesh,
    motion: &'a MotionSequence,
    cameras: &'a [CameraFrame],
    style: &'a SkeletonStyle,
    polarity: DepthPolarity,
    range: (f64, f64),
}

impl<'a> SequenceRenderer<'a> {
    pub fn new(
        mesh: &'a SceneMesh,
        motion: &'a MotionSequence,
        cameras: &'a [CameraFrame],
        style: &'a SkeletonStyle,
        polarity: DepthPolarity,
    ) -> Result<Self, RasterError> {
        if mesh.triangles.is_empty() {
            return Err(RasterError::EmptyMesh);
        }
        if cameras.len() != motion.frame_count() {
            return Err(RasterError::LengthMismatch(format!(
                "trajectory has {} frames, motion has {}",
                cameras.len(),
                motion.frame_count()
            )));
        }
        style.validate(motion.joint_count())?;
        let range = merge_extrema(
            cameras
                .par_iter()
                .map(|cam| rasterize_mesh_depth(mesh, cam).extrema())
                .collect::<Vec<_>>()
                .into_iter()
                .flatten(),
        )
        .ok_or(RasterError::AllUncovered)?;
        Ok(Self {
            mesh,
            motion,
            cameras,
            style,
            polarity,
            range,
        })
    }

    pub fn len(&self) -> usize {
        self.cameras.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cameras.is_empty()
    }

    pub fn depth_range(&self) -> (f64, f64) {
        self.range
    }

    pub fn pose(&self, index: usize) -> RgbFrame {
        let valid = self.motion.valid.as_ref().map(|v| v[index].as_slice());
        rasterize_skeleton_masked(
            &self.motion.frames[index],
            valid,
            &self.cameras[index],
            self.style,
        )
    }

    pub fn depth(&self, index: usize) -> GrayFrame {
        let fb = rasterize_mesh_depth(self.mesh, &self.cameras[index]);
        normalize_with_range(&fb, self.range, self.polarity)
    }

    pub fn frame(&self, index: usize) -> RenderedFrame {
        let pose = self.pose(index);
        let depth = self.depth(index);
        let pose_depth = compose_conditions(&depth, &pose).expect("same camera, same size");
        RenderedFrame {
            pose,
            depth,
            pose_depth,
        }
    }
}

/// Renders the pose-only and depth+pose signals for every frame of `traj`.
pub fn render_sequence(
    mesh: &SceneMesh,
    motion: &MotionSequence,
    traj: &[CameraFrame],
    style: &SkeletonStyle,
    polarity: DepthPolarity,
) -> Result<RenderedSequence, RasterError> {
    let renderer = SequenceRenderer::new(mesh, motion, traj, style, polarity)?;
    let frames: Vec<RenderedFrame> = (0..traj.len())
        .into_par_iter()
        .map(|i| renderer.frame(i))
        .collect();
    let mut out = RenderedSequence {
        pose: Vec::with_capacity(frames.len()),
        depth: Vec::with_capacity(frames.len()),
        pose_depth: Vec::with_capacity(frames.len()),
    };
    for f in frames {
        out.pose.push(f.pose);
        out.depth.push(f.depth);
        out.pose_depth.push(f.pose_depth);
    }
    Ok(out)
}
