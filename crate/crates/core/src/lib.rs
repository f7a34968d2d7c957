//! Camera-aligned pose and depth conditioning signals.
//!
//! The crate turns a depth map, a character mask, a 3D motion sequence and a
//! camera trajectory into per-frame pose-only and depth+pose control images,
//! plus a manifest assigning those signals to denoising steps.

pub mod depthmesh;
pub mod eval;
pub mod geom;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod motion_fit;
pub mod pipeline;
pub mod raster;
pub mod scene_transfer;
pub mod schedule;
pub mod synthetic;
pub mod trajectory;
