//! File formats: PFM depth, PNG masks and frames, and the versioned JSON schemas.

use crate::depthmesh::DepthRaster;
use crate::geom::{quaternion_from_wxyz, quaternion_to_wxyz, CameraFrame, Extrinsics, Intrinsics, Point3};
use crate::motion_fit::{MotionSequence, Skeleton};
use crate::raster::{DepthPolarity, GrayFrame, RgbFrame};
use crate::scene_transfer::CharacterMask;
use crate::schedule::{ScheduleManifest, MANIFEST_VERSION};
use crate::trajectory::{Keyframe, PresetKind, PresetSpec, Trajectory, TrajectorySpec};
use image::codecs::png::{CompressionType, FilterType, PngEncoder};
use image::{ExtendedColorType, ImageEncoder};
use nalgebra::Vector3;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const SCHEMA_VERSION: u32 = 1;

/// Quaternions further than this from unit norm are rejected rather than normalized.
pub const QUATERNION_TOLERANCE: f64 = 1e-3;

/// Largest accepted raster side, in pixels.
pub const MAX_DIMENSION: u32 = 1 << 15;

pub const FRAME_INDEX_FILE: &str = "index.json";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FormatError {
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("unsupported payload: {0}")]
    NonFloatPayload(String),
    #[error("schema violation at {path}: {message}")]
    SchemaViolation { path: String, message: String },
    #[error("image: {0}")]
    Image(String),
}

fn violation(path: impl Into<String>, message: impl Into<String>) -> FormatError {
    FormatError::SchemaViolation {
        path: path.into(),
        message: message.into(),
    }
}

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{}: {source}", path.display())]
    Format {
        path: PathBuf,
        #[source]
        source: FormatError,
    },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl IoError {
    pub fn path(&self) -> &Path {
        match self {
            IoError::Format { path, .. } | IoError::Io { path, .. } => path,
        }
    }
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>, IoError> {
    std::fs::read(path).map_err(|source| IoError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn read_text(path: &Path) -> Result<String, IoError> {
    let bytes = read_bytes(path)?;
    String::from_utf8(bytes).map_err(|e| IoError::Format {
        path: path.to_path_buf(),
        source: violation("$", format!("not UTF-8: {e}")),
    })
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    std::fs::write(path, bytes).map_err(|source| IoError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes through a sibling temporary file so readers never observe a partial file.
pub fn write_bytes_atomic(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    let tmp = PathBuf::from(tmp);
    write_bytes(&tmp, bytes)?;
    std::fs::rename(&tmp, path).map_err(|source| IoError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn at(path: &Path) -> impl FnOnce(FormatError) -> IoError + '_ {
    move |source| IoError::Format {
        path: path.to_path_buf(),
        source,
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

// ---------------------------------------------------------------------------
// PFM depth

fn header_token<'a>(bytes: &'a [u8], pos: &mut usize, what: &str) -> Result<&'a str, FormatError> {
    let start = *pos;
    while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    if *pos == start {
        return Err(FormatError::MalformedHeader(format!("expected whitespace before {what}")));
    }
    let begin = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() && *pos - begin < 32 {
        *pos += 1;
    }
    if *pos == begin {
        return Err(FormatError::MalformedHeader(format!("missing {what}")));
    }
    std::str::from_utf8(&bytes[begin..*pos])
        .map_err(|_| FormatError::MalformedHeader(format!("{what} is not ASCII")))
}

fn parse_dimension(token: &str, what: &str) -> Result<u32, FormatError> {
    let valid = !token.is_empty()
        && token.bytes().all(|b| b.is_ascii_digit())
        && !(token.len() > 1 && token.starts_with('0'));
    let value = valid.then(|| token.parse::<u32>().ok()).flatten();
    match value {
        Some(v) if (1..=MAX_DIMENSION).contains(&v) => Ok(v),
        _ => Err(FormatError::MalformedHeader(format!(
            "{what} must be an integer in 1..={MAX_DIMENSION}, got {token:?}"
        ))),
    }
}

/// Parses a single-channel portable float map. Rows are stored bottom to top.
pub fn decode_pfm(bytes: &[u8]) -> Result<DepthRaster, FormatError> {
    match bytes.get(..2) {
        Some(b"Pf") => {}
        Some(b"PF") => {
            return Err(FormatError::NonFloatPayload(
                "three-channel PFM; depth must be single-channel (Pf)".into(),
            ))
        }
        _ => return Err(FormatError::MalformedHeader("missing Pf magic".into())),
    }
    let mut pos = 2;
    let width = parse_dimension(header_token(bytes, &mut pos, "width")?, "width")?;
    let height = parse_dimension(header_token(bytes, &mut pos, "height")?, "height")?;
    let scale_tok = header_token(bytes, &mut pos, "scale")?;
    let scale: f64 = scale_tok
        .parse()
        .map_err(|_| FormatError::MalformedHeader(format!("scale {scale_tok:?} is not a number")))?;
    if !scale.is_finite() || scale == 0.0 {
        return Err(FormatError::MalformedHeader(format!("scale must be finite and non-zero, got {scale}")));
    }
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(FormatError::MalformedHeader("missing separator after scale".into())),
    }
    let little_endian = scale < 0.0;
    let expected = width as usize * height as usize * 4;
    let payload = &bytes[pos..];
    if payload.len() != expected {
        return Err(FormatError::MalformedHeader(format!(
            "payload is {} bytes, expected {expected} for {width}×{height}",
            payload.len()
        )));
    }
    let (w, h) = (width as usize, height as usize);
    let mut values = vec![0f32; w * h];
    for (i, chunk) in payload.chunks_exact(4).enumerate() {
        let raw = [chunk[0], chunk[1], chunk[2], chunk[3]];
        let v = if little_endian {
            f32::from_le_bytes(raw)
        } else {
            f32::from_be_bytes(raw)
        };
        let (file_row, col) = (i / w, i % w);
        values[(h - 1 - file_row) * w + col] = v;
    }
    DepthRaster::from_values(width, height, values)
        .map_err(|e| FormatError::MalformedHeader(e.to_string()))
}

/// Little-endian PFM; invalid pixels are written as NaN.
pub fn encode_pfm(raster: &DepthRaster) -> Vec<u8> {
    let (w, h) = (raster.width() as usize, raster.height() as usize);
    let mut out = format!("Pf\n{w} {h}\n-1.0\n").into_bytes();
    out.reserve(w * h * 4);
    let values = raster.values();
    for row in (0..h).rev() {
        for v in &values[row * w..(row + 1) * w] {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn read_depth(path: &Path) -> Result<DepthRaster, IoError> {
    decode_pfm(&read_bytes(path)?).map_err(at(path))
}

pub fn write_depth(raster: &DepthRaster, path: &Path) -> Result<(), IoError> {
    write_bytes(path, &encode_pfm(raster))
}

// ---------------------------------------------------------------------------
// PNG masks and frames

fn encode_png(width: u32, height: u32, data: &[u8], color: ExtendedColorType) -> Vec<u8> {
    let mut out = Vec::new();
    PngEncoder::new_with_quality(&mut out, CompressionType::Default, FilterType::Adaptive)
        .write_image(data, width, height, color)
        .expect("in-memory PNG encoding of a well-sized buffer cannot fail");
    out
}

pub fn encode_rgb_png(frame: &RgbFrame) -> Vec<u8> {
    encode_png(frame.width, frame.height, &frame.data, ExtendedColorType::Rgb8)
}

pub fn encode_gray_png(frame: &GrayFrame) -> Vec<u8> {
    encode_png(frame.width, frame.height, &frame.data, ExtendedColorType::L8)
}

/// Decodes an 8-bit single-channel PNG; values above 127 mark the character.
pub fn decode_mask(bytes: &[u8]) -> Result<CharacterMask, FormatError> {
    let img = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)
        .map_err(|e| FormatError::Image(e.to_string()))?;
    let image::DynamicImage::ImageLuma8(gray) = img else {
        return Err(FormatError::Image(format!(
            "mask must be 8-bit single-channel, got {:?}",
            img.color()
        )));
    };
    let (w, h) = gray.dimensions();
    CharacterMask::new(w, h, gray.as_raw().iter().map(|&v| v > 127).collect())
        .map_err(|e| FormatError::Image(e.to_string()))
}

pub fn encode_mask(mask: &CharacterMask) -> Vec<u8> {
    let data: Vec<u8> = mask.inside().iter().map(|&b| if b { 255 } else { 0 }).collect();
    encode_png(mask.width(), mask.height(), &data, ExtendedColorType::L8)
}

pub fn read_mask(path: &Path) -> Result<CharacterMask, IoError> {
    decode_mask(&read_bytes(path)?).map_err(at(path))
}

/// Decodes any PNG written by this crate back to raw RGB8 or L8 samples.
pub fn decode_png_samples(bytes: &[u8]) -> Result<(u32, u32, Vec<u8>), FormatError> {
    let img = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)
        .map_err(|e| FormatError::Image(e.to_string()))?;
    let (w, h) = (img.width(), img.height());
    Ok((w, h, img.into_bytes()))
}

pub fn frame_file_name(index: usize) -> String {
    format!("frame_{index:05}.png")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameRecord {
    pub file: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameIndex {
    pub version: u32,
    pub count: usize,
    pub width: u32,
    pub height: u32,
    pub frames: Vec<FrameRecord>,
}

/// Writes one encoded frame into `dir` and returns its index record.
pub fn write_frame(dir: &Path, index: usize, png: &[u8]) -> Result<FrameRecord, IoError> {
    let file = frame_file_name(index);
    write_bytes(&dir.join(&file), png)?;
    Ok(FrameRecord {
        file,
        sha256: sha256_hex(png),
    })
}

pub fn write_frame_index(
    dir: &Path,
    width: u32,
    height: u32,
    frames: Vec<FrameRecord>,
) -> Result<FrameIndex, IoError> {
    let index = FrameIndex {
        version: SCHEMA_VERSION,
        count: frames.len(),
        width,
        height,
        frames,
    };
    write_bytes(&dir.join(FRAME_INDEX_FILE), to_json(&index).as_bytes())?;
    Ok(index)
}

pub fn read_frame_index(dir: &Path) -> Result<FrameIndex, IoError> {
    let path = dir.join(FRAME_INDEX_FILE);
    let index: FrameIndex = from_json(&read_text(&path)?).map_err(at(&path))?;
    check_version(index.version).map_err(at(&path))?;
    Ok(index)
}

// ---------------------------------------------------------------------------
// JSON helpers

/// Pretty JSON with a trailing newline. Output is a pure function of the value.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("schema types always serialize");
    s.push('\n');
    s
}

pub fn from_json<T: DeserializeOwned>(text: &str) -> Result<T, FormatError> {
    let mut de = serde_json::Deserializer::from_str(text);
    let value: T = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        let path = if path == "." { "$".to_string() } else { path };
        violation(path, e.into_inner().to_string())
    })?;
    de.end().map_err(|e| violation("$", e.to_string()))?;
    Ok(value)
}

fn check_version(version: u32) -> Result<(), FormatError> {
    if version != SCHEMA_VERSION {
        return Err(violation(
            "version",
            format!("unsupported version {version}, expected {SCHEMA_VERSION}"),
        ));
    }
    Ok(())
}

fn finite3(v: [f64; 3], path: impl FnOnce() -> String) -> Result<[f64; 3], FormatError> {
    if v.iter().all(|c| c.is_finite()) {
        Ok(v)
    } else {
        Err(violation(path(), "coordinates must be finite"))
    }
}

// ---------------------------------------------------------------------------
// Motion

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SkeletonFile {
    name: String,
    joints: Vec<String>,
    limbs: Vec<[usize; 2]>,
    #[serde(default)]
    root: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MotionFile {
    version: u32,
    skeleton: SkeletonFile,
    fps: f64,
    frames: Vec<Vec<[f64; 3]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    valid: Option<Vec<Vec<bool>>>,
}

pub fn decode_motion(text: &str) -> Result<MotionSequence, FormatError> {
    let file: MotionFile = from_json(text)?;
    check_version(file.version)?;
    let j = file.skeleton.joints.len();
    if j == 0 {
        return Err(violation("skeleton.joints", "skeleton has no joints"));
    }
    for (i, name) in file.skeleton.joints.iter().enumerate() {
        if file.skeleton.joints[..i].contains(name) {
            return Err(violation(format!("skeleton.joints[{i}]"), format!("duplicate joint {name:?}")));
        }
    }
    for (i, [a, b]) in file.skeleton.limbs.iter().enumerate() {
        if *a >= j || *b >= j || a == b {
            return Err(violation(
                format!("skeleton.limbs[{i}]"),
                format!("limb ({a}, {b}) is not a pair of distinct joints in 0..{j}"),
            ));
        }
    }
    if file.skeleton.root >= j {
        return Err(violation("skeleton.root", format!("root {} outside 0..{j}", file.skeleton.root)));
    }
    if !(file.fps.is_finite() && file.fps > 0.0) {
        return Err(violation("fps", format!("must be positive, got {}", file.fps)));
    }
    if file.frames.is_empty() {
        return Err(violation("frames", "motion has no frames"));
    }
    let mut frames = Vec::with_capacity(file.frames.len());
    for (t, frame) in file.frames.iter().enumerate() {
        if frame.len() != j {
            return Err(violation(
                format!("frames[{t}]"),
                format!("expected {j} joints, found {}", frame.len()),
            ));
        }
        let pts = frame
            .iter()
            .enumerate()
            .map(|(k, p)| finite3(*p, || format!("frames[{t}][{k}]")).map(Point3::from))
            .collect::<Result<Vec<_>, _>>()?;
        frames.push(pts);
    }
    if let Some(valid) = &file.valid {
        if valid.len() != frames.len() {
            return Err(violation(
                "valid",
                format!("expected {} frames, found {}", frames.len(), valid.len()),
            ));
        }
        if let Some(t) = valid.iter().position(|v| v.len() != j) {
            return Err(violation(format!("valid[{t}]"), format!("expected {j} flags")));
        }
    }
    Ok(MotionSequence {
        skeleton: Skeleton {
            name: file.skeleton.name,
            joints: file.skeleton.joints,
            limbs: file.skeleton.limbs.iter().map(|l| (l[0], l[1])).collect(),
            root: file.skeleton.root,
        },
        fps: file.fps,
        frames,
        valid: file.valid,
    })
}

pub fn encode_motion(motion: &MotionSequence) -> String {
    to_json(&MotionFile {
        version: SCHEMA_VERSION,
        skeleton: SkeletonFile {
            name: motion.skeleton.name.clone(),
            joints: motion.skeleton.joints.clone(),
            limbs: motion.skeleton.limbs.iter().map(|&(a, b)| [a, b]).collect(),
            root: motion.skeleton.root,
        },
        fps: motion.fps,
        frames: motion
            .frames
            .iter()
            .map(|f| f.iter().map(|p| [p.x, p.y, p.z]).collect())
            .collect(),
        valid: motion.valid.clone(),
    })
}

pub fn read_motion(path: &Path) -> Result<MotionSequence, IoError> {
    decode_motion(&read_text(path)?).map_err(at(path))
}

pub fn write_motion(motion: &MotionSequence, path: &Path) -> Result<(), IoError> {
    write_bytes(path, encode_motion(motion).as_bytes())
}

// ---------------------------------------------------------------------------
// Trajectory

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtrinsicsConvention {
    /// `rotation`/`translation` map world points into the camera frame.
    #[default]
    WorldToCamera,
    /// `rotation` is the camera orientation in the world and `translation` its center.
    CameraToWorld,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct IntrinsicsFile {
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CameraFile {
    width: u32,
    height: u32,
    intrinsics: IntrinsicsFile,
    /// `[w, x, y, z]`.
    rotation: [f64; 4],
    translation: [f64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum TrajectoryMode {
    Preset,
    Keyframes,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PresetFile {
    kind: PresetKind,
    magnitude: f64,
    frames: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    anchor: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    up: Option<[f64; 3]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct KeyframeFile {
    frame: usize,
    camera: CameraFile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrajectoryFile {
    version: u32,
    convention: ExtrinsicsConvention,
    mode: TrajectoryMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    base: Option<CameraFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    preset: Option<PresetFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    frames: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    keyframes: Option<Vec<KeyframeFile>>,
}

fn camera_from_file(
    c: &CameraFile,
    convention: ExtrinsicsConvention,
    path: &str,
) -> Result<CameraFrame, FormatError> {
    let q = quaternion_from_wxyz(c.rotation, QUATERNION_TOLERANCE).ok_or_else(|| {
        violation(
            format!("{path}.rotation"),
            format!("quaternion {:?} is not within {QUATERNION_TOLERANCE} of unit norm", c.rotation),
        )
    })?;
    let t = finite3(c.translation, || format!("{path}.translation"))?;
    let extrinsics = match convention {
        ExtrinsicsConvention::WorldToCamera => Extrinsics::new(q, Vector3::from(t)),
        ExtrinsicsConvention::CameraToWorld => Extrinsics::from_camera_to_world(q, Point3::from(t)),
    };
    let k = c.intrinsics;
    CameraFrame::new(Intrinsics::new(k.fx, k.fy, k.cx, k.cy), extrinsics, c.width, c.height)
        .map_err(|e| violation(path, e.to_string()))
        .and_then(|cam| {
            if cam.width > MAX_DIMENSION || cam.height > MAX_DIMENSION {
                Err(violation(path, format!("image side exceeds {MAX_DIMENSION}")))
            } else {
                Ok(cam)
            }
        })
}

fn camera_to_file(cam: &CameraFrame, convention: ExtrinsicsConvention) -> CameraFile {
    let (q, t) = match convention {
        ExtrinsicsConvention::WorldToCamera => (cam.extrinsics.rotation, cam.extrinsics.translation),
        ExtrinsicsConvention::CameraToWorld => {
            (cam.extrinsics.rotation.inverse(), cam.extrinsics.center().coords)
        }
    };
    let k = cam.intrinsics;
    CameraFile {
        width: cam.width,
        height: cam.height,
        intrinsics: IntrinsicsFile {
            fx: k.fx,
            fy: k.fy,
            cx: k.cx,
            cy: k.cy,
        },
        rotation: quaternion_to_wxyz(&q),
        translation: [t.x, t.y, t.z],
    }
}

pub fn decode_trajectory(text: &str) -> Result<Trajectory, FormatError> {
    let file: TrajectoryFile = from_json(text)?;
    check_version(file.version)?;
    let conv = file.convention;
    let traj = match file.mode {
        TrajectoryMode::Preset => {
            if file.frames.is_some() || file.keyframes.is_some() {
                return Err(violation("$", "preset mode does not take frames/keyframes"));
            }
            let base = file.base.as_ref().ok_or_else(|| violation("base", "preset mode requires a base camera"))?;
            let p = file.preset.ok_or_else(|| violation("preset", "preset mode requires a preset"))?;
            let base = camera_from_file(base, conv, "base")?;
            let anchor = p
                .anchor
                .map(|a| finite3(a, || "preset.anchor".into()).map(Point3::from))
                .transpose()?;
            let up = finite3(p.up.unwrap_or([0.0, 1.0, 0.0]), || "preset.up".into())?;
            Trajectory {
                base,
                spec: TrajectorySpec::Preset(PresetSpec {
                    kind: p.kind,
                    magnitude: p.magnitude,
                    anchor,
                    frames: p.frames,
                    up: Vector3::from(up),
                }),
            }
        }
        TrajectoryMode::Keyframes => {
            if file.base.is_some() || file.preset.is_some() {
                return Err(violation(
                    "$",
                    "keyframe mode does not take base/preset; the first keyframe is the base",
                ));
            }
            let frames = file.frames.ok_or_else(|| violation("frames", "keyframe mode requires a frame count"))?;
            let kfs = file.keyframes.as_ref().ok_or_else(|| violation("keyframes", "missing keyframe list"))?;
            let keyframes = kfs
                .iter()
                .enumerate()
                .map(|(i, k)| {
                    Ok(Keyframe {
                        frame: k.frame,
                        camera: camera_from_file(&k.camera, conv, &format!("keyframes[{i}].camera"))?,
                    })
                })
                .collect::<Result<Vec<_>, FormatError>>()?;
            let base = keyframes
                .first()
                .map(|k| k.camera)
                .ok_or_else(|| violation("keyframes", "keyframe list is empty"))?;
            Trajectory {
                base,
                spec: TrajectorySpec::Keyframes { frames, keyframes },
            }
        }
    };
    traj.spec
        .validate()
        .map_err(|e| violation(if file.mode == TrajectoryMode::Preset { "preset" } else { "keyframes" }, e.to_string()))?;
    Ok(traj)
}

pub fn encode_trajectory(traj: &Trajectory, convention: ExtrinsicsConvention) -> String {
    let file = match &traj.spec {
        TrajectorySpec::Preset(p) => TrajectoryFile {
            version: SCHEMA_VERSION,
            convention,
            mode: TrajectoryMode::Preset,
            base: Some(camera_to_file(&traj.base, convention)),
            preset: Some(PresetFile {
                kind: p.kind,
                magnitude: p.magnitude,
                frames: p.frames,
                anchor: p.anchor.map(|a| [a.x, a.y, a.z]),
                up: Some([p.up.x, p.up.y, p.up.z]),
            }),
            frames: None,
            keyframes: None,
        },
        TrajectorySpec::Keyframes { frames, keyframes } => TrajectoryFile {
            version: SCHEMA_VERSION,
            convention,
            mode: TrajectoryMode::Keyframes,
            base: None,
            preset: None,
            frames: Some(*frames),
            keyframes: Some(
                keyframes
                    .iter()
                    .map(|k| KeyframeFile {
                        frame: k.frame,
                        camera: camera_to_file(&k.camera, convention),
                    })
                    .collect(),
            ),
        },
    };
    to_json(&file)
}

pub fn read_trajectory(path: &Path) -> Result<Trajectory, IoError> {
    decode_trajectory(&read_text(path)?).map_err(at(path))
}

pub fn write_trajectory(traj: &Trajectory, convention: ExtrinsicsConvention, path: &Path) -> Result<(), IoError> {
    write_bytes(path, encode_trajectory(traj, convention).as_bytes())
}

// ---------------------------------------------------------------------------
// Reference keypoints

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KeypointSpace {
    /// `[u, v]` image coordinates in the reference (frame-0) camera.
    Pixel,
    /// `[x, y, z]` world coordinates in meters.
    World,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct KeypointsFile {
    version: u32,
    space: KeypointSpace,
    keypoints: Vec<Option<Vec<f64>>>,
}

/// Reference keypoints for the similarity fit; `None` marks an undetected joint.
#[derive(Debug, Clone, PartialEq)]
pub enum ReferenceKeypoints {
    Pixel(Vec<Option<[f64; 2]>>),
    World(Vec<Option<Point3>>),
}

impl ReferenceKeypoints {
    pub fn len(&self) -> usize {
        match self {
            ReferenceKeypoints::Pixel(v) => v.len(),
            ReferenceKeypoints::World(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn decode_keypoints(text: &str) -> Result<ReferenceKeypoints, FormatError> {
    let file: KeypointsFile = from_json(text)?;
    check_version(file.version)?;
    let dims = match file.space {
        KeypointSpace::Pixel => 2,
        KeypointSpace::World => 3,
    };
    for (i, k) in file.keypoints.iter().enumerate() {
        if let Some(v) = k {
            if v.len() != dims {
                return Err(violation(format!("keypoints[{i}]"), format!("expected {dims} coordinates, found {}", v.len())));
            }
            if !v.iter().all(|c| c.is_finite()) {
                return Err(violation(format!("keypoints[{i}]"), "coordinates must be finite"));
            }
        }
    }
    Ok(match file.space {
        KeypointSpace::Pixel => ReferenceKeypoints::Pixel(
            file.keypoints.into_iter().map(|k| k.map(|v| [v[0], v[1]])).collect(),
        ),
        KeypointSpace::World => ReferenceKeypoints::World(
            file.keypoints
                .into_iter()
                .map(|k| k.map(|v| Point3::new(v[0], v[1], v[2])))
                .collect(),
        ),
    })
}

pub fn encode_keypoints(kp: &ReferenceKeypoints) -> String {
    let (space, keypoints) = match kp {
        ReferenceKeypoints::Pixel(v) => (
            KeypointSpace::Pixel,
            v.iter().map(|k| k.map(|p| p.to_vec())).collect(),
        ),
        ReferenceKeypoints::World(v) => (
            KeypointSpace::World,
            v.iter().map(|k| k.map(|p| vec![p.x, p.y, p.z])).collect(),
        ),
    };
    to_json(&KeypointsFile {
        version: SCHEMA_VERSION,
        space,
        keypoints,
    })
}

pub fn read_keypoints(path: &Path) -> Result<ReferenceKeypoints, IoError> {
    decode_keypoints(&read_text(path)?).map_err(at(path))
}

// ---------------------------------------------------------------------------
// Manifest

pub fn encode_manifest(manifest: &ScheduleManifest) -> String {
    to_json(manifest)
}

pub fn decode_manifest(text: &str) -> Result<ScheduleManifest, FormatError> {
    let m: ScheduleManifest = from_json(text)?;
    if m.version != MANIFEST_VERSION {
        return Err(violation("version", format!("unsupported version {}", m.version)));
    }
    let rebuilt = crate::schedule::build_schedule(m.num_steps, m.depth_fraction)
        .map_err(|e| violation("$", e.to_string()))?;
    let frames_ok = m.entries.len() == rebuilt.entries.len()
        && m.entries.iter().zip(&rebuilt.entries).all(|(a, b)| {
            a.step == b.step && a.t == b.t && a.condition == b.condition && !a.frames.is_empty()
        });
    if !frames_ok || m.t_stop != rebuilt.t_stop || m.time_convention != rebuilt.time_convention {
        return Err(violation("entries", "entries are inconsistent with num_steps and depth_fraction"));
    }
    Ok(m)
}

pub fn write_manifest(manifest: &ScheduleManifest, path: &Path) -> Result<(), IoError> {
    write_bytes_atomic(path, encode_manifest(manifest).as_bytes())
}

pub fn read_manifest(path: &Path) -> Result<ScheduleManifest, IoError> {
    decode_manifest(&read_text(path)?).map_err(at(path))
}

// ---------------------------------------------------------------------------
// Project bundle

fn default_decay() -> f64 {
    crate::scene_transfer::DEFAULT_DECAY_LENGTH
}
fn default_ratio() -> f64 {
    crate::depthmesh::DEFAULT_DISCONTINUITY_RATIO
}
fn default_fraction() -> f64 {
    0.2
}
fn default_steps() -> usize {
    50
}
fn default_radius() -> u32 {
    4
}
fn default_thickness() -> u32 {
    4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BundleParams {
    #[serde(default = "default_decay")]
    pub decay_length: f64,
    #[serde(default = "default_ratio")]
    pub discontinuity_ratio: f64,
    #[serde(default = "default_fraction")]
    pub depth_fraction: f64,
    #[serde(default = "default_steps")]
    pub num_steps: usize,
    /// Fill invalid background depth before meshing.
    #[serde(default)]
    pub fill_holes: bool,
    #[serde(default)]
    pub polarity: DepthPolarity,
    #[serde(default = "default_radius")]
    pub joint_radius: u32,
    #[serde(default = "default_thickness")]
    pub limb_thickness: u32,
}

impl Default for BundleParams {
    fn default() -> Self {
        Self {
            decay_length: default_decay(),
            discontinuity_ratio: default_ratio(),
            depth_fraction: default_fraction(),
            num_steps: default_steps(),
            fill_holes: false,
            polarity: DepthPolarity::NearBright,
            joint_radius: default_radius(),
            limb_thickness: default_thickness(),
        }
    }
}

impl BundleParams {
    pub fn validate(&self) -> Result<(), FormatError> {
        if !(self.decay_length.is_finite() && self.decay_length > 0.0) {
            return Err(violation("params.decay_length", "must be positive"));
        }
        if !(self.discontinuity_ratio.is_finite() && self.discontinuity_ratio > 0.0) {
            return Err(violation("params.discontinuity_ratio", "must be positive"));
        }
        if !(0.0..=1.0).contains(&self.depth_fraction) {
            return Err(violation("params.depth_fraction", "must lie in [0, 1]"));
        }
        if self.num_steps < 1 {
            return Err(violation("params.num_steps", "must be at least 1"));
        }
        if self.limb_thickness < 1 {
            return Err(violation("params.limb_thickness", "must be at least 1"));
        }
        Ok(())
    }
}

/// Input paths and parameters for one compile run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectBundle {
    #[serde(default)]
    pub version: Option<u32>,
    /// Depth of the scene with the character removed. When absent the
    /// reference depth is hole-filled under the mask instead.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub background_depth: Option<PathBuf>,
    pub reference_depth: PathBuf,
    pub mask: PathBuf,
    pub motion: PathBuf,
    pub trajectory: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_keypoints: Option<PathBuf>,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub params: BundleParams,
}

impl ProjectBundle {
    /// Resolves relative paths against `root`.
    pub fn resolved(mut self, root: &Path) -> Self {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = root.join(&*p);
            }
        };
        if let Some(p) = self.background_depth.as_mut() {
            fix(p);
        }
        fix(&mut self.reference_depth);
        fix(&mut self.mask);
        fix(&mut self.motion);
        fix(&mut self.trajectory);
        if let Some(p) = self.reference_keypoints.as_mut() {
            fix(p);
        }
        fix(&mut self.output_dir);
        self
    }
}

pub fn decode_bundle(text: &str) -> Result<ProjectBundle, FormatError> {
    let b: ProjectBundle = from_json(text)?;
    check_version(b.version.unwrap_or(SCHEMA_VERSION))?;
    b.params.validate()?;
    Ok(ProjectBundle {
        version: Some(SCHEMA_VERSION),
        ..b
    })
}

pub fn encode_bundle(bundle: &ProjectBundle) -> String {
    to_json(bundle)
}

/// Reads a bundle file; relative paths inside it are taken relative to the file.
pub fn read_bundle(path: &Path) -> Result<ProjectBundle, IoError> {
    let b = decode_bundle(&read_text(path)?).map_err(at(path))?;
    let root = path.parent().unwrap_or(Path::new("."));
    Ok(b.resolved(root))
}

// ---------------------------------------------------------------------------
// Correspondences and evaluation reports

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrespondencePair {
    /// Trajectory frame indices of the two views.
    pub frames: [usize; 2],
    /// `[u, v, u', v']` pixel coordinates in the first and second view.
    pub matches: Vec<[f64; 4]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrespondenceFile {
    pub version: u32,
    pub pairs: Vec<CorrespondencePair>,
}

pub fn decode_correspondences(text: &str) -> Result<CorrespondenceFile, FormatError> {
    let f: CorrespondenceFile = from_json(text)?;
    check_version(f.version)?;
    if f.pairs.is_empty() {
        return Err(violation("pairs", "no view pairs"));
    }
    for (i, p) in f.pairs.iter().enumerate() {
        if p.matches.is_empty() {
            return Err(violation(format!("pairs[{i}].matches"), "no matches"));
        }
        if let Some(k) = p.matches.iter().position(|m| !m.iter().all(|c| c.is_finite())) {
            return Err(violation(format!("pairs[{i}].matches[{k}]"), "coordinates must be finite"));
        }
    }
    Ok(f)
}

pub fn read_correspondences(path: &Path) -> Result<CorrespondenceFile, IoError> {
    decode_correspondences(&read_text(path)?).map_err(at(path))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

impl InputDigest {
    pub fn of_file(path: &Path) -> Result<Self, IoError> {
        Ok(Self {
            path: path.display().to_string(),
            sha256: sha256_hex(&read_bytes(path)?),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MpjpeReport {
    pub version: u32,
    pub metric: String,
    pub units: String,
    /// Pooled mean without root alignment.
    pub value: f64,
    /// Pooled mean in root-relative coordinates.
    pub root_aligned_value: Option<f64>,
    pub root_joint: usize,
    pub joints_compared: usize,
    pub per_frame: Vec<Option<f64>>,
    pub per_frame_root_aligned: Vec<Option<f64>>,
    pub inputs: Vec<InputDigest>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampsonPairReport {
    pub frames: [usize; 2],
    pub matches: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampsonReport {
    pub version: u32,
    pub metric: String,
    pub formula: String,
    /// Mean over all matches of all pairs.
    pub value: f64,
    pub pairs: Vec<SampsonPairReport>,
    pub inputs: Vec<InputDigest>,
}
