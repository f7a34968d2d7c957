//! Depth rasters and their lifting into triangle meshes.

use crate::geom::{CameraFrame, Point3};
use rayon::prelude::*;
use thiserror::Error;

/// Relative depth jump above which a mesh edge is considered a discontinuity.
pub const DEFAULT_DISCONTINUITY_RATIO: f64 = 0.05;

/// Triangles at or below this area (m²) are dropped as degenerate.
pub const MIN_TRIANGLE_AREA: f64 = 1e-12;

const MAX_RELAX_ITERATIONS: usize = 5000;
const RELAX_TOLERANCE: f64 = 1e-7;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("depth raster is {raster_w}×{raster_h} but camera expects {cam_w}×{cam_h}")]
    DimensionMismatch {
        raster_w: u32,
        raster_h: u32,
        cam_w: u32,
        cam_h: u32,
    },
    #[error("no triangle survived discontinuity culling")]
    EmptyMesh,
    #[error("discontinuity ratio must be positive, got {0}")]
    InvalidRatio(f64),
    #[error("hole covers every valid depth pixel; nothing to fill from")]
    NoBoundaryData,
    #[error("hole mask has {got} entries, expected {expected}")]
    HoleSizeMismatch { expected: usize, got: usize },
    #[error("depth raster has {got} values, expected {expected}")]
    BadLength { expected: usize, got: usize },
}

/// Metric depth on an H×W grid. Invalid pixels hold NaN and are flagged in `valid`.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthRaster {
    width: u32,
    height: u32,
    values: Vec<f32>,
    valid: Vec<bool>,
}

impl DepthRaster {
    /// Builds a raster from row-major values. Non-finite and non-positive
    /// entries become invalid.
    pub fn from_values(width: u32, height: u32, mut values: Vec<f32>) -> Result<Self, MeshError> {
        let expected = width as usize * height as usize;
        if values.len() != expected {
            return Err(MeshError::BadLength {
                expected,
                got: values.len(),
            });
        }
        let valid: Vec<bool> = values.iter().map(|&d| d.is_finite() && d > 0.0).collect();
        for (v, ok) in values.iter_mut().zip(&valid) {
            if !ok {
                *v = f32::NAN;
            }
        }
        Ok(Self {
            width,
            height,
            values,
            valid,
        })
    }

    pub fn constant(width: u32, height: u32, depth: f32) -> Self {
        Self::from_values(width, height, vec![depth; width as usize * height as usize])
            .expect("length matches by construction")
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> f32) -> Self {
        let mut values = Vec::with_capacity(width as usize * height as usize);
        for row in 0..height {
            for col in 0..width {
                values.push(f(col, row));
            }
        }
        Self::from_values(width, height, values).expect("length matches by construction")
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn index(&self, col: u32, row: u32) -> usize {
        row as usize * self.width as usize + col as usize
    }

    #[inline]
    pub fn get(&self, col: u32, row: u32) -> Option<f32> {
        let i = self.index(col, row);
        self.valid[i].then(|| self.values[i])
    }

    /// Raw row-major values; invalid entries are NaN.
    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn valid_mask(&self) -> &[bool] {
        &self.valid
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }

    pub fn invalidate(&mut self, col: u32, row: u32) {
        let i = self.index(col, row);
        self.valid[i] = false;
        self.values[i] = f32::NAN;
    }
}

/// Triangle mesh lifted from a depth raster.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SceneMesh {
    pub vertices: Vec<Point3>,
    pub triangles: Vec<[u32; 3]>,
    /// Pixel each vertex was lifted from.
    pub vertex_source: Vec<(u32, u32)>,
}

impl SceneMesh {
    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn triangle_area(&self, tri: &[u32; 3]) -> f64 {
        let [a, b, c] = tri.map(|i| self.vertices[i as usize]);
        0.5 * (b - a).cross(&(c - a)).norm()
    }
}

#[inline]
fn edge_breaks(da: f32, db: f32, ratio: f64) -> bool {
    let (da, db) = (da as f64, db as f64);
    (da - db).abs() / da.min(db) > ratio
}

/// Lifts `depth` through `cam` into a triangle mesh.
///
/// Every 2×2 block of valid pixels contributes the triangles
/// `(TL, TR, BR)` and `(TL, BR, BL)`; a triangle is dropped when any of its
/// edges joins depths whose relative difference exceeds `discontinuity_ratio`.
/// Output order is row-major and independent of thread count.
pub fn build_mesh(
    depth: &DepthRaster,
    cam: &CameraFrame,
    discontinuity_ratio: f64,
) -> Result<SceneMesh, MeshError> {
    if depth.width != cam.width || depth.height != cam.height {
        return Err(MeshError::DimensionMismatch {
            raster_w: depth.width,
            raster_h: depth.height,
            cam_w: cam.width,
            cam_h: cam.height,
        });
    }
    if !(discontinuity_ratio > 0.0) {
        return Err(MeshError::InvalidRatio(discontinuity_ratio));
    }
    let (w, h) = (depth.width, depth.height);
    if w < 2 || h < 2 {
        return Err(MeshError::EmptyMesh);
    }

    // Lift every valid pixel once; unused ones are compacted away below.
    let lifted: Vec<Option<Point3>> = (0..h)
        .into_par_iter()
        .flat_map_iter(|row| {
            (0..w).map(move |col| {
                depth
                    .get(col, row)
                    .and_then(|d| cam.unproject_pixel(col, row, d as f64).ok())
            })
        })
        .collect();

    let pixel_tris: Vec<[usize; 3]> = (0..h - 1)
        .into_par_iter()
        .flat_map_iter(|row| {
            let lifted = &lifted;
            (0..w - 1).flat_map(move |col| {
                let tl = depth.index(col, row);
                let tr = tl + 1;
                let bl = tl + w as usize;
                let br = bl + 1;
                let d = |i: usize| depth.valid[i].then(|| depth.values[i]);
                let mut out: [Option<[usize; 3]>; 2] = [None, None];
                for (slot, tri) in out.iter_mut().zip([[tl, tr, br], [tl, br, bl]]) {
                    let [Some(a), Some(b), Some(c)] = tri.map(d) else {
                        continue;
                    };
                    if edge_breaks(a, b, discontinuity_ratio)
                        || edge_breaks(b, c, discontinuity_ratio)
                        || edge_breaks(c, a, discontinuity_ratio)
                    {
                        continue;
                    }
                    let [Some(pa), Some(pb), Some(pc)] = tri.map(|i| lifted[i]) else {
                        continue;
                    };
                    if 0.5 * (pb - pa).cross(&(pc - pa)).norm() <= MIN_TRIANGLE_AREA {
                        continue;
                    }
                    *slot = Some(tri);
                }
                out.into_iter().flatten()
            })
        })
        .collect();

    if pixel_tris.is_empty() {
        return Err(MeshError::EmptyMesh);
    }

    let mut remap = vec![u32::MAX; lifted.len()];
    for tri in &pixel_tris {
        for &i in tri {
            remap[i] = 0;
        }
    }
    let mut mesh = SceneMesh::default();
    for (i, slot) in remap.iter_mut().enumerate() {
        if *slot == 0 {
            *slot = mesh.vertices.len() as u32;
            mesh.vertices.push(lifted[i].expect("used pixels are lifted"));
            mesh.vertex_source
                .push(((i % w as usize) as u32, (i / w as usize) as u32));
        }
    }
    mesh.triangles = pixel_tris
        .into_iter()
        .map(|t| t.map(|i| remap[i]))
        .collect();
    Ok(mesh)
}

/// Fills `hole` pixels from the surrounding valid depth.
///
/// Hole pixels are first seeded ring by ring from the average of their
/// already-known 4-neighbors, then relaxed by repeated 4-neighbor averaging
/// (Gauss–Seidel, row-major) until the update falls below tolerance.
/// Pixels outside the hole are returned untouched. Hole values in the input
/// are ignored, so the fill is idempotent.
pub fn fill_holes(depth: &DepthRaster, hole: &[bool]) -> Result<DepthRaster, MeshError> {
    let n = depth.len();
    if hole.len() != n {
        return Err(MeshError::HoleSizeMismatch {
            expected: n,
            got: hole.len(),
        });
    }
    let (w, h) = (depth.width as usize, depth.height as usize);
    let has_boundary = (0..n).any(|i| !hole[i] && depth.valid[i]);
    if !has_boundary {
        return Err(MeshError::NoBoundaryData);
    }

    let mut known: Vec<bool> = (0..n).map(|i| !hole[i] && depth.valid[i]).collect();
    let mut work: Vec<f64> = (0..n)
        .map(|i| if known[i] { depth.values[i] as f64 } else { 0.0 })
        .collect();

    let neighbors = |i: usize| {
        let (col, row) = (i % w, i / w);
        let mut out = [usize::MAX; 4];
        if col > 0 {
            out[0] = i - 1;
        }
        if col + 1 < w {
            out[1] = i + 1;
        }
        if row > 0 {
            out[2] = i - w;
        }
        if row + 1 < h {
            out[3] = i + w;
        }
        out
    };

    let targets: Vec<usize> = (0..n).filter(|&i| hole[i]).collect();
    let mut pending: Vec<usize> = targets.clone();
    while !pending.is_empty() {
        let mut ring = Vec::new();
        let mut rest = Vec::new();
        for &i in &pending {
            let (sum, count) = neighbors(i)
                .into_iter()
                .filter(|&j| j != usize::MAX && known[j])
                .fold((0.0, 0usize), |(s, c), j| (s + work[j], c + 1));
            if count > 0 {
                ring.push((i, sum / count as f64));
            } else {
                rest.push(i);
            }
        }
        if ring.is_empty() {
            log::warn!(
                "{} hole pixels are not connected to valid depth and stay invalid",
                rest.len()
            );
            break;
        }
        for (i, value) in ring {
            work[i] = value;
            known[i] = true;
        }
        pending = rest;
    }

    let relax: Vec<usize> = targets.iter().copied().filter(|&i| known[i]).collect();
    for _ in 0..MAX_RELAX_ITERATIONS {
        let mut max_change = 0.0f64;
        for &i in &relax {
            let (sum, count) = neighbors(i)
                .into_iter()
                .filter(|&j| j != usize::MAX && known[j])
                .fold((0.0, 0usize), |(s, c), j| (s + work[j], c + 1));
            let next = sum / count as f64;
            max_change = max_change.max((next - work[i]).abs() / next.abs().max(1e-12));
            work[i] = next;
        }
        if max_change < RELAX_TOLERANCE {
            break;
        }
    }

    let mut out = depth.clone();
    for &i in &targets {
        if known[i] && work[i] > 0.0 {
            out.values[i] = work[i] as f32;
            out.valid[i] = out.values[i].is_finite() && out.values[i] > 0.0;
        } else {
            out.values[i] = f32::NAN;
            out.valid[i] = false;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{Extrinsics, Intrinsics};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn camera(w: u32, h: u32) -> CameraFrame {
        CameraFrame::new(
            Intrinsics::new(50.0, 50.0, w as f64 / 2.0, h as f64 / 2.0),
            Extrinsics::identity(),
            w,
            h,
        )
        .unwrap()
    }

    /// Counts surviving triangles by walking quads directly.
    fn grid_triangle_oracle(depth: &DepthRaster, ratio: f64) -> usize {
        let mut count = 0;
        for row in 0..depth.height() - 1 {
            for col in 0..depth.width() - 1 {
                let corners = [
                    depth.get(col, row),
                    depth.get(col + 1, row),
                    depth.get(col, row + 1),
                    depth.get(col + 1, row + 1),
                ];
                for tri in [[0, 1, 3], [0, 3, 2]] {
                    let ds: Option<Vec<f64>> =
                        tri.iter().map(|&k| corners[k].map(|d| d as f64)).collect();
                    let Some(ds) = ds else { continue };
                    let ok = (0..3).all(|e| {
                        let (a, b) = (ds[e], ds[(e + 1) % 3]);
                        (a - b).abs() / a.min(b) <= ratio
                    });
                    count += ok as usize;
                }
            }
        }
        count
    }

    #[test]
    fn constant_block_gives_two_triangles() {
        let mesh = build_mesh(&DepthRaster::constant(2, 2, 2.0), &camera(2, 2), 0.1).unwrap();
        assert_eq!(mesh.vertices.len(), 4);
        assert_eq!(mesh.triangles.len(), 2);
    }

    #[test]
    fn far_corner_off_the_diagonal_drops_one_triangle() {
        // Corners listed around the quad: TL, TR, BR = 2 and BL = 10.
        let depth = DepthRaster::from_values(2, 2, vec![2.0, 2.0, 10.0, 2.0]).unwrap();
        let mesh = build_mesh(&depth, &camera(2, 2), 0.1).unwrap();
        assert_eq!(mesh.triangles.len(), 1);
        assert_eq!(mesh.vertices.len(), 3);
        assert!(mesh.vertex_source.iter().all(|&(c, r)| !(c == 0 && r == 1)));
    }

    #[test]
    fn far_corner_on_the_diagonal_drops_both() {
        let depth = DepthRaster::from_values(2, 2, vec![2.0, 2.0, 2.0, 10.0]).unwrap();
        assert_eq!(
            build_mesh(&depth, &camera(2, 2), 0.1).unwrap_err(),
            MeshError::EmptyMesh
        );
    }

    #[test]
    fn smooth_random_depth_triangle_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (a, b, c): (f32, f32, f32) = (
            rng.random_range(2.0..4.0),
            rng.random_range(-0.05..0.05),
            rng.random_range(-0.05..0.05),
        );
        let depth = DepthRaster::from_fn(16, 16, |col, row| a + b * col as f32 + c * row as f32);
        let mesh = build_mesh(&depth, &camera(16, 16), 1e6).unwrap();
        assert_eq!(mesh.triangles.len(), grid_triangle_oracle(&depth, 1e6));
        assert_eq!(mesh.triangles.len(), 450);
    }

    #[test]
    fn counts_match_oracle_on_rough_depth() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let depth = DepthRaster::from_fn(24, 18, |_, _| {
                if rng.random_bool(0.05) {
                    f32::NAN
                } else {
                    rng.random_range(1.0..3.0)
                }
            });
            let ratio = rng.random_range(0.05..1.5);
            let n = build_mesh(&depth, &camera(24, 18), ratio)
                .map(|m| m.triangles.len())
                .unwrap_or(0);
            assert_eq!(n, grid_triangle_oracle(&depth, ratio));
        }
    }

    #[test]
    fn culling_is_monotone_in_ratio() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let depth = DepthRaster::from_fn(20, 20, |_, _| rng.random_range(1.0..4.0));
        let mut last = 0;
        for ratio in [0.01, 0.05, 0.1, 0.3, 0.7, 1.0, 2.0, 5.0] {
            let n = build_mesh(&depth, &camera(20, 20), ratio)
                .map(|m| m.triangles.len())
                .unwrap_or(0);
            assert!(n >= last);
            last = n;
        }
    }

    #[test]
    fn mesh_invariants_hold() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let depth = DepthRaster::from_fn(32, 32, |_, _| rng.random_range(1.0..1.5));
        let cam = camera(32, 32);
        let mesh = build_mesh(&depth, &cam, 0.2).unwrap();
        for tri in &mesh.triangles {
            assert!(tri.iter().all(|&i| (i as usize) < mesh.vertices.len()));
            assert!(tri[0] != tri[1] && tri[1] != tri[2] && tri[0] != tri[2]);
            assert!(mesh.triangle_area(tri) > MIN_TRIANGLE_AREA);
        }
        for (p, &(col, row)) in mesh.vertices.iter().zip(&mesh.vertex_source) {
            let proj = cam.project(p).unwrap();
            assert!((proj.u - (col as f64 + 0.5)).abs() < 1e-6);
            assert!((proj.v - (row as f64 + 0.5)).abs() < 1e-6);
        }
    }

    #[test]
    fn parallel_build_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let depth = DepthRaster::from_fn(40, 30, |_, _| rng.random_range(1.0..2.0));
        let cam = camera(40, 30);
        let single = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| build_mesh(&depth, &cam, 0.3).unwrap());
        let many = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap()
            .install(|| build_mesh(&depth, &cam, 0.3).unwrap());
        assert_eq!(single, many);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            build_mesh(&DepthRaster::constant(3, 2, 1.0), &camera(2, 2), 0.1),
            Err(MeshError::DimensionMismatch { .. })
        ));
        assert_eq!(
            build_mesh(&DepthRaster::constant(2, 2, 1.0), &camera(2, 2), 0.0).unwrap_err(),
            MeshError::InvalidRatio(0.0)
        );
    }

    #[test]
    fn fill_preserves_constants() {
        let depth = DepthRaster::constant(10, 8, 3.0);
        let mut hole = vec![false; 80];
        for i in [11, 12, 13, 22, 23, 45, 79] {
            hole[i] = true;
        }
        let out = fill_holes(&depth, &hole).unwrap();
        assert!(out.values().iter().all(|&v| v == 3.0));
    }

    #[test]
    fn fill_ramp_midpoint() {
        let depth = DepthRaster::from_values(3, 1, vec![1.0, f32::NAN, 3.0]).unwrap();
        let out = fill_holes(&depth, &[false, true, false]).unwrap();
        assert_eq!(out.get(1, 0), Some(2.0));
    }

    #[test]
    fn fill_linear_ramp_hole() {
        let ramp = |col: u32, row: u32| 2.0 + 0.05 * col as f32 + 0.03 * row as f32;
        let depth = DepthRaster::from_fn(32, 32, ramp);
        let mut hole = vec![false; 32 * 32];
        for row in 12..18 {
            for col in 10..16 {
                hole[row * 32 + col] = true;
            }
        }
        let out = fill_holes(&depth, &hole).unwrap();
        for row in 0..32u32 {
            for col in 0..32u32 {
                let truth = ramp(col, row) as f64;
                let got = out.get(col, row).unwrap() as f64;
                assert!((got - truth).abs() / truth < 0.05, "({col},{row}) {got} vs {truth}");
                if !hole[(row * 32 + col) as usize] {
                    assert_eq!(got.to_bits(), (ramp(col, row) as f64).to_bits());
                }
            }
        }
    }

    #[test]
    fn fill_is_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let depth = DepthRaster::from_fn(16, 16, |_, _| rng.random_range(1.0..2.0));
        let hole: Vec<bool> = (0..256).map(|_| rng.random_bool(0.3)).collect();
        let once = fill_holes(&depth, &hole).unwrap();
        let twice = fill_holes(&once, &hole).unwrap();
        assert_eq!(
            once.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            twice.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn fill_without_boundary_fails() {
        let depth = DepthRaster::from_values(2, 1, vec![1.0, f32::NAN]).unwrap();
        assert_eq!(
            fill_holes(&depth, &[true, false]).unwrap_err(),
            MeshError::NoBoundaryData
        );
    }

    #[test]
    fn raster_sentinels() {
        let d = DepthRaster::from_values(2, 2, vec![1.0, -1.0, 0.0, f32::INFINITY]).unwrap();
        assert_eq!(d.valid_count(), 1);
        assert!(d.values()[1].is_nan());
        assert_eq!(d.get(1, 0), None);
    }
}
