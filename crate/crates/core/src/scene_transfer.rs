//! Re-registers the reference character's depth into the background-only scene.
//!
//! The two depth maps (with and without the character) come from independent
//! estimator passes, so they disagree by an unknown depth scale and offset.
//! Both are lifted at the environment pixels outside the character mask,
//! weighted by proximity to the mask, and their weighted centroids define an
//! affine remap of the character's depth:
//!
//! ```text
//! w(u, v)  = exp(-dist((u, v), mask) / decay_length)
//! p_ref    = Σ w·x_ref / Σ w          p_bg = Σ w·x_bg / Σ w
//! z_bg     = (z_ref - p_ref.z) · (p_bg.z / p_ref.z) + p_bg.z
//! ```
//!
//! Only depth changes; every character point stays on its original pixel ray.

use crate::depthmesh::DepthRaster;
use crate::geom::{CameraFrame, GeomError, Point3};
use nalgebra::Vector3;
use thiserror::Error;

pub const DEFAULT_DECAY_LENGTH: f64 = 1.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransferError {
    #[error("character mask has no pixels")]
    EmptyMask,
    #[error("no environment pixel carries weight (mask fills the image or depths never overlap)")]
    ZeroTotalWeight,
    #[error("aligned depth {0} is not positive; centroids are inconsistent")]
    NonPositiveResult(f64),
    #[error("decay length must be positive, got {0}")]
    InvalidDecayLength(f64),
    #[error("size mismatch: {0}")]
    DimensionMismatch(String),
    #[error("centroid depth must be positive (ref z = {ref_z}, bg z = {bg_z})")]
    InvalidParams { ref_z: f64, bg_z: f64 },
    #[error(transparent)]
    Geom(#[from] GeomError),
}

/// Binary character segmentation; `true` marks character pixels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CharacterMask {
    width: u32,
    height: u32,
    inside: Vec<bool>,
}

impl CharacterMask {
    pub fn new(width: u32, height: u32, inside: Vec<bool>) -> Result<Self, TransferError> {
        if inside.len() != width as usize * height as usize {
            return Err(TransferError::DimensionMismatch(format!(
                "mask has {} entries for {}×{}",
                inside.len(),
                width,
                height
            )));
        }
        Ok(Self {
            width,
            height,
            inside,
        })
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> bool) -> Self {
        let mut inside = Vec::with_capacity(width as usize * height as usize);
        for row in 0..height {
            for col in 0..width {
                inside.push(f(col, row));
            }
        }
        Self {
            width,
            height,
            inside,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn inside(&self) -> &[bool] {
        &self.inside
    }

    #[inline]
    pub fn contains(&self, col: u32, row: u32) -> bool {
        self.inside[row as usize * self.width as usize + col as usize]
    }

    pub fn count(&self) -> usize {
        self.inside.iter().filter(|b| **b).count()
    }
}

/// Weighted centroids of the environment points under each depth map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferParams {
    pub p_ref: Point3,
    pub p_bg: Point3,
}

impl TransferParams {
    pub fn identity_at(p: Point3) -> Self {
        Self { p_ref: p, p_bg: p }
    }

    pub fn depth_scale(&self) -> f64 {
        self.p_bg.z / self.p_ref.z
    }
}

/// Exact Euclidean distance (pixels) from every pixel to the nearest mask pixel.
///
/// Two separable passes over squared integer distances (column scan, then the
/// lower envelope of parabolas along each row), so results are exact and
/// match a brute-force search bit for bit.
pub fn distance_transform(mask: &CharacterMask) -> Result<Vec<f64>, TransferError> {
    squared_distance_transform(mask).map(|sq| sq.into_iter().map(|d| (d as f64).sqrt()).collect())
}

/// Squared distances as integers.
pub fn squared_distance_transform(mask: &CharacterMask) -> Result<Vec<u64>, TransferError> {
    if !mask.inside.iter().any(|b| *b) {
        return Err(TransferError::EmptyMask);
    }
    let (w, h) = (mask.width as usize, mask.height as usize);
    let inf = (w + h) as i64;

    // Pass 1: vertical distance to the nearest mask pixel in the same column.
    let mut g = vec![0i64; w * h];
    for x in 0..w {
        g[x] = if mask.inside[x] { 0 } else { inf };
        for y in 1..h {
            let i = y * w + x;
            g[i] = if mask.inside[i] { 0 } else { g[i - w] + 1 };
        }
        for y in (0..h.saturating_sub(1)).rev() {
            let i = y * w + x;
            if g[i + w] < g[i] {
                g[i] = g[i + w] + 1;
            }
        }
    }

    // Pass 2: per row, lower envelope of x ↦ (x - u)² + g(u)².
    let mut out = vec![0u64; w * h];
    let mut s = vec![0i64; w];
    let mut t = vec![0i64; w];
    for y in 0..h {
        let row = &g[y * w..(y + 1) * w];
        let f = |x: i64, u: usize| (x - u as i64).pow(2) + row[u].pow(2);
        let sep = |i: usize, u: usize| {
            let (ii, uu) = (i as i64, u as i64);
            (uu * uu - ii * ii + row[u].pow(2) - row[i].pow(2)).div_euclid(2 * (uu - ii))
        };
        let mut q: i64 = 0;
        s[0] = 0;
        t[0] = 0;
        for u in 1..w {
            while q >= 0 && f(t[q as usize], s[q as usize] as usize) > f(t[q as usize], u) {
                q -= 1;
            }
            if q < 0 {
                q = 0;
                s[0] = u as i64;
            } else {
                let wsep = 1 + sep(s[q as usize] as usize, u);
                if wsep < w as i64 {
                    q += 1;
                    s[q as usize] = u as i64;
                    t[q as usize] = wsep;
                }
            }
        }
        for x in (0..w).rev() {
            let xi = x as i64;
            out[y * w + x] = f(xi, s[q as usize] as usize) as u64;
            if xi == t[q as usize] {
                q -= 1;
            }
        }
    }
    Ok(out)
}

/// Proximity weights `exp(-dist / decay_length)`; mask pixels get 0 and never contribute.
pub fn importance_weights(
    mask: &CharacterMask,
    decay_length: f64,
) -> Result<Vec<f64>, TransferError> {
    if !(decay_length > 0.0) || !decay_length.is_finite() {
        return Err(TransferError::InvalidDecayLength(decay_length));
    }
    let dist = distance_transform(mask)?;
    Ok(dist
        .iter()
        .zip(&mask.inside)
        .map(|(&d, &inside)| if inside { 0.0 } else { (-d / decay_length).exp() })
        .collect())
}

fn check_dims(
    d_ref: &DepthRaster,
    d_bg: &DepthRaster,
    cam: &CameraFrame,
    mask: &CharacterMask,
) -> Result<(), TransferError> {
    let dims = [
        ("reference depth", d_ref.width(), d_ref.height()),
        ("background depth", d_bg.width(), d_bg.height()),
        ("mask", mask.width, mask.height),
    ];
    for (what, w, h) in dims {
        if (w, h) != (cam.width, cam.height) {
            return Err(TransferError::DimensionMismatch(format!(
                "{what} is {w}×{h}, camera is {}×{}",
                cam.width, cam.height
            )));
        }
    }
    Ok(())
}

/// Weighted centroids over environment pixels valid in both rasters.
///
/// Sums run in row-major order.
pub fn weighted_centroids(
    d_ref: &DepthRaster,
    d_bg: &DepthRaster,
    cam: &CameraFrame,
    mask: &CharacterMask,
    decay_length: f64,
) -> Result<TransferParams, TransferError> {
    check_dims(d_ref, d_bg, cam, mask)?;
    let weights = importance_weights(mask, decay_length)?;
    let mut total = 0.0f64;
    let mut sum_ref = Vector3::<f64>::zeros();
    let mut sum_bg = Vector3::<f64>::zeros();
    for row in 0..cam.height {
        for col in 0..cam.width {
            let i = d_ref.index(col, row);
            let w = weights[i];
            if mask.inside[i] || w <= 0.0 {
                continue;
            }
            let (Some(zr), Some(zb)) = (d_ref.get(col, row), d_bg.get(col, row)) else {
                continue;
            };
            let xr = cam.unproject_pixel(col, row, zr as f64)?;
            let xb = cam.unproject_pixel(col, row, zb as f64)?;
            total += w;
            sum_ref += xr.coords * w;
            sum_bg += xb.coords * w;
        }
    }
    if !(total > 0.0) {
        return Err(TransferError::ZeroTotalWeight);
    }
    let params = TransferParams {
        p_ref: Point3::from(sum_ref / total),
        p_bg: Point3::from(sum_bg / total),
    };
    validate_params(&params)?;
    Ok(params)
}

fn validate_params(params: &TransferParams) -> Result<(), TransferError> {
    if !(params.p_ref.z > 0.0 && params.p_bg.z > 0.0) {
        return Err(TransferError::InvalidParams {
            ref_z: params.p_ref.z,
            bg_z: params.p_bg.z,
        });
    }
    Ok(())
}

/// Maps a reference-depth value into the background scene's depth.
pub fn align_character_depth(z_ref: f64, params: &TransferParams) -> Result<f64, TransferError> {
    validate_params(params)?;
    let (pr, pb) = (params.p_ref.z, params.p_bg.z);
    let z = (z_ref - pr) * (pb / pr) + pb;
    if z > 0.0 && z.is_finite() {
        Ok(z)
    } else {
        Err(TransferError::NonPositiveResult(z))
    }
}

/// Character points placed into the background scene.
#[derive(Debug, Clone, PartialEq)]
pub struct CharacterPoints {
    pub params: TransferParams,
    pub points: Vec<Point3>,
    /// Source pixel of each point.
    pub pixels: Vec<(u32, u32)>,
    /// Aligned camera-space depth of each point.
    pub depths: Vec<f64>,
}

impl CharacterPoints {
    /// Aligned depth at a pixel, if a character point was emitted there.
    pub fn depth_at(&self, col: u32, row: u32) -> Option<f64> {
        self.pixels
            .binary_search_by(|&(c, r)| (r, c).cmp(&(row, col)))
            .ok()
            .map(|i| self.depths[i])
    }
}

/// Lifts every masked pixel with valid reference depth at its aligned depth.
pub fn transfer_with_params(
    d_ref: &DepthRaster,
    cam: &CameraFrame,
    mask: &CharacterMask,
    params: TransferParams,
) -> Result<CharacterPoints, TransferError> {
    let mut out = CharacterPoints {
        params,
        points: Vec::new(),
        pixels: Vec::new(),
        depths: Vec::new(),
    };
    for row in 0..cam.height {
        for col in 0..cam.width {
            if !mask.contains(col, row) {
                continue;
            }
            let Some(z) = d_ref.get(col, row) else {
                continue;
            };
            let aligned = align_character_depth(z as f64, &params)?;
            out.points.push(cam.unproject_pixel(col, row, aligned)?);
            out.pixels.push((col, row));
            out.depths.push(aligned);
        }
    }
    Ok(out)
}

pub fn transfer_character(
    d_ref: &DepthRaster,
    d_bg: &DepthRaster,
    cam: &CameraFrame,
    mask: &CharacterMask,
    decay_length: f64,
) -> Result<CharacterPoints, TransferError> {
    let params = weighted_centroids(d_ref, d_bg, cam, mask, decay_length)?;
    transfer_with_params(d_ref, cam, mask, params)
}
