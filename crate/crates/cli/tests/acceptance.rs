//! Acceptance suite. Each criterion runs against its own time limit and
//! prints one PASS/FAIL line; the process exits nonzero if any fails.
//!
//! Set `CAMCOND_BLESS_GOLDEN=1` to rewrite `tests/golden/hashes.json` from the
//! current build instead of comparing against it.

use camcond_core::depthmesh::{build_mesh, DepthRaster, SceneMesh};
use camcond_core::geom::{pixel_center, CameraFrame, Extrinsics, Intrinsics, Point3};
use camcond_core::io;
use camcond_core::metrics::{fundamental_from_cameras, homogeneous, mpjpe, sampson_error};
use camcond_core::motion_fit::{fit_to_reference, MotionSequence, Skeleton};
use camcond_core::pipeline::{prepare, MANIFEST_FILE};
use camcond_core::raster::{rasterize_mesh_depth, SequenceRenderer};
use camcond_core::scene_transfer::{
    align_character_depth, squared_distance_transform, transfer_character, weighted_centroids, CharacterMask,
    TransferParams,
};
use camcond_core::schedule::{build_schedule, Condition};
use camcond_core::synthetic::{self, write_bundle, BundleSpec};
use camcond_core::trajectory::{PresetKind, PresetSpec, Trajectory, TrajectorySpec};
use nalgebra::{UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

type Check = Result<(), String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_rotation(rng: &mut ChaCha8Rng) -> UnitQuaternion<f64> {
    let q = nalgebra::Quaternion::new(
        rng.sample::<f64, _>(StandardNormal),
        rng.sample(StandardNormal),
        rng.sample(StandardNormal),
        rng.sample(StandardNormal),
    );
    UnitQuaternion::from_quaternion(q)
}

fn random_vector(rng: &mut ChaCha8Rng, half: f64) -> Vector3<f64> {
    Vector3::from_fn(|_, _| rng.random_range(-half..half))
}

fn random_camera(rng: &mut ChaCha8Rng, width: u32, height: u32) -> CameraFrame {
    let f = rng.random_range(0.5..2.0) * width as f64;
    CameraFrame::new(
        Intrinsics::new(
            f,
            f * rng.random_range(0.9..1.1),
            width as f64 / 2.0 + rng.random_range(-4.0..4.0),
            height as f64 / 2.0 + rng.random_range(-4.0..4.0),
        ),
        Extrinsics::new(random_rotation(rng), random_vector(rng, 3.0)),
        width,
        height,
    )
    .map_err(|e| e.to_string())
    .unwrap()
}

fn schedule_exactness() -> Check {
    let m = build_schedule(10, 0.2).map_err(|e| e.to_string())?;
    let conditions: Vec<Condition> = m.entries.iter().map(|e| e.condition).collect();
    let mut expected = vec![Condition::PoseDepth; 2];
    expected.extend([Condition::Pose; 8]);
    ensure!(conditions == expected, "N=10, f=0.2 gave {conditions:?}");

    let mut r = rng(1);
    for _ in 0..1000 {
        let n = r.random_range(1..=1000usize);
        // Fractions on a percent grid hit the exact-product cases; the rest are arbitrary.
        let f = if r.random_bool(0.5) {
            r.random_range(0..=100u32) as f64 / 100.0
        } else {
            r.random_range(0.0..=1.0)
        };
        let m = build_schedule(n, f).map_err(|e| e.to_string())?;
        // Exact rational ceiling for grid fractions, plain ceil otherwise.
        let want = if (f * 100.0).fract() == 0.0 {
            let pct = (f * 100.0) as usize;
            (pct * n).div_ceil(100)
        } else {
            (f * n as f64).ceil() as usize
        };
        ensure!(m.depth_steps() == want, "N={n}, f={f}: {} depth steps, want {want}", m.depth_steps());
        let prefix = m.entries.iter().take_while(|e| e.condition == Condition::PoseDepth).count();
        ensure!(prefix == want, "N={n}, f={f}: depth steps are not a prefix");
    }
    Ok(())
}

fn scene_transfer_fixed_point() -> Check {
    let mut r = rng(2);
    for _ in 0..10_000 {
        let params = TransferParams {
            p_ref: Point3::new(r.random_range(-2.0..2.0), r.random_range(-2.0..2.0), r.random_range(0.5..10.0)),
            p_bg: Point3::new(r.random_range(-2.0..2.0), r.random_range(-2.0..2.0), r.random_range(0.5..10.0)),
        };
        let z = align_character_depth(params.p_ref.z, &params).map_err(|e| e.to_string())?;
        ensure!(z == params.p_bg.z, "{params:?} maps p_ref.z to {z}");
    }

    let cam = synthetic::fixture_camera(64, 64);
    let mask = synthetic::character_mask(&cam);
    for bg in [synthetic::room_depth(&cam), synthetic::plane_depth(&cam, 3.0)] {
        let d_ref = synthetic::reference_depth(&bg, &mask);
        let params = weighted_centroids(&d_ref, &bg, &cam, &mask, 1.0).map_err(|e| e.to_string())?;
        let z = align_character_depth(params.p_ref.z, &params).map_err(|e| e.to_string())?;
        ensure!(z == params.p_bg.z, "fixture maps p_ref.z to {z}, not {}", params.p_bg.z);

        let same = transfer_character(&d_ref, &d_ref, &cam, &mask, 1.0).map_err(|e| e.to_string())?;
        for (&(c, row), &z) in same.pixels.iter().zip(&same.depths) {
            let z_ref = d_ref.get(c, row).unwrap() as f64;
            ensure!((z - z_ref).abs() <= 1e-9, "identity transfer moved ({c},{row}) from {z_ref} to {z}");
        }
        ensure!(same.pixels.len() == mask.count(), "identity transfer dropped pixels");
    }
    Ok(())
}

fn distance_transform_exact() -> Check {
    let mut r = rng(3);
    for trial in 0..100 {
        let density = r.random_range(0.001..0.3);
        let mut mask = CharacterMask::from_fn(64, 64, |_, _| r.random_bool(density));
        if mask.count() == 0 {
            mask = CharacterMask::from_fn(64, 64, |c, row| (c, row) == (7, 40));
        }
        let got = squared_distance_transform(&mask).map_err(|e| e.to_string())?;
        let inside: Vec<(i64, i64)> = (0..64)
            .flat_map(|row| (0..64).map(move |c| (c, row)))
            .filter(|&(c, row)| mask.contains(c as u32, row as u32))
            .collect();
        for row in 0..64i64 {
            for c in 0..64i64 {
                let want = inside
                    .iter()
                    .map(|&(x, y)| ((x - c) * (x - c) + (y - row) * (y - row)) as u64)
                    .min()
                    .unwrap();
                let have = got[(row * 64 + c) as usize];
                ensure!(have == want, "mask {trial}, pixel ({c},{row}): {have} != {want}");
            }
        }
    }
    Ok(())
}

fn similarity_recovery() -> Check {
    let mut r = rng(4);
    let skeleton = Skeleton::body18();
    for trial in 0..1000 {
        let joints = skeleton.joint_count();
        let source: Vec<Point3> = (0..joints).map(|_| Point3::from(random_vector(&mut r, 1.0))).collect();
        let scale = r.random_range(0.2..=5.0);
        let rotation = random_rotation(&mut r);
        let translation = random_vector(&mut r, 5.0);
        let target: Vec<Point3> = source.iter().map(|p| Point3::from(rotation * p.coords * scale + translation)).collect();
        let seq = MotionSequence {
            skeleton: skeleton.clone(),
            fps: 30.0,
            frames: vec![source],
            valid: None,
        };
        let (fitted, xf) = fit_to_reference(&seq, &target, &vec![true; joints]).map_err(|e| e.to_string())?;
        let angle = xf.rotation.angle_to(&rotation);
        ensure!((xf.scale - scale).abs() <= 1e-6, "trial {trial}: scale {} vs {scale}", xf.scale);
        ensure!(angle <= 1e-6, "trial {trial}: rotation off by {angle} rad");
        ensure!(
            (xf.translation - translation).amax() <= 1e-6,
            "trial {trial}: translation {:?} vs {translation:?}",
            xf.translation
        );
        let residual = fitted.frames[0]
            .iter()
            .zip(&target)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        ensure!(residual <= 1e-9, "trial {trial}: frame-0 residual {residual}");
    }
    Ok(())
}

/// Independent rasterizer oracle: every triangle tested at every pixel
/// center, with vertices snapped to the same 1/256-pixel grid.
fn zbuffer_oracle(mesh: &SceneMesh, cam: &CameraFrame) -> Vec<f64> {
    let mut out = vec![f64::INFINITY; cam.pixel_count()];
    let fixed = |u: f64| (u * 256.0).round() as i128;
    for tri in &mesh.triangles {
        let mut v: Vec<(i128, i128, f64)> = tri
            .iter()
            .map(|&i| {
                let pc = cam.extrinsics.transform_point(&mesh.vertices[i as usize]);
                let u = cam.intrinsics.fx * (pc.x / pc.z) + cam.intrinsics.cx;
                let w = cam.intrinsics.fy * (pc.y / pc.z) + cam.intrinsics.cy;
                (fixed(u), fixed(w), pc.z)
            })
            .collect();
        let e = |a: (i128, i128, f64), b: (i128, i128, f64), x: i128, y: i128| {
            (b.0 - a.0) * (y - a.1) - (b.1 - a.1) * (x - a.0)
        };
        let mut area = e(v[0], v[1], v[2].0, v[2].1);
        if area == 0 {
            continue;
        }
        if area < 0 {
            v.swap(1, 2);
            area = -area;
        }
        for row in 0..cam.height as i128 {
            for col in 0..cam.width as i128 {
                let (x, y) = (col * 256 + 128, row * 256 + 128);
                let mut w = [0i128; 3];
                let mut inside = true;
                for k in 0..3 {
                    let a = v[(k + 1) % 3];
                    let b = v[(k + 2) % 3];
                    w[k] = e(a, b, x, y);
                    let top_left = b.1 < a.1 || (b.1 == a.1 && b.0 > a.0);
                    inside &= w[k] > 0 || (w[k] == 0 && top_left);
                }
                if !inside {
                    continue;
                }
                let af = area as f64;
                let d = if v[0].2 == v[1].2 && v[1].2 == v[2].2 {
                    v[0].2
                } else {
                    1.0 / ((w[0] as f64 / af) / v[0].2 + (w[1] as f64 / af) / v[1].2 + (w[2] as f64 / af) / v[2].2)
                };
                let slot = &mut out[(row * cam.width as i128 + col) as usize];
                if d < *slot {
                    *slot = d;
                }
            }
        }
    }
    out
}

fn random_mesh(r: &mut ChaCha8Rng, cam: &CameraFrame) -> SceneMesh {
    let mut mesh = SceneMesh::default();
    for _ in 0..r.random_range(1..=50) {
        let base = mesh.vertices.len() as u32;
        for _ in 0..3 {
            let u = r.random_range(-16.0..cam.width as f64 + 16.0);
            let v = r.random_range(-16.0..cam.height as f64 + 16.0);
            mesh.vertices.push(cam.unproject(u, v, r.random_range(0.5..8.0)).unwrap());
            mesh.vertex_source.push((0, 0));
        }
        mesh.triangles.push([base, base + 1, base + 2]);
    }
    mesh
}

fn zbuffer_digest(mesh: &SceneMesh, cam: &CameraFrame, threads: usize) -> Result<String, String> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| e.to_string())?;
    let fb = pool.install(|| rasterize_mesh_depth(mesh, cam));
    let bytes: Vec<u8> = fb.zbuffer.iter().flat_map(|d| d.to_le_bytes()).collect();
    Ok(io::sha256_hex(&bytes))
}

fn rasterizer_oracle() -> Check {
    let mut r = rng(5);
    let threads = std::thread::available_parallelism().map_or(4, |n| n.get()).max(2);
    for trial in 0..50 {
        let cam = random_camera(&mut r, 64, 64);
        let mesh = random_mesh(&mut r, &cam);
        let fb = rasterize_mesh_depth(&mesh, &cam);
        let oracle = zbuffer_oracle(&mesh, &cam);
        for (i, (a, b)) in fb.zbuffer.iter().zip(&oracle).enumerate() {
            ensure!(a.to_bits() == b.to_bits(), "mesh {trial}, pixel {i}: {a} != oracle {b}");
        }
        let one = zbuffer_digest(&mesh, &cam, 1)?;
        let many = zbuffer_digest(&mesh, &cam, threads)?;
        ensure!(one == many, "mesh {trial}: 1-thread hash {one} != {threads}-thread hash {many}");
    }
    Ok(())
}

fn round_trip_geometry() -> Check {
    let mut r = rng(6);
    let mut cam = random_camera(&mut r, 640, 480);
    for i in 0..100_000 {
        if i % 1000 == 0 {
            cam = random_camera(&mut r, 640, 480);
        }
        let (u, v) = (r.random_range(-100.0..740.0), r.random_range(-100.0..580.0));
        let depth = r.random_range(0.05..100.0);
        let p = cam.unproject(u, v, depth).map_err(|e| e.to_string())?;
        let q = cam.project(&p).map_err(|e| e.to_string())?;
        let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1.0);
        ensure!(
            rel(q.u, u) <= 1e-6 && rel(q.v, v) <= 1e-6 && rel(q.depth, depth) <= 1e-6,
            "({u}, {v}, {depth}) came back as ({}, {}, {})",
            q.u,
            q.v,
            q.depth
        );
    }

    for seed in 0..4 {
        let mut r = rng(60 + seed);
        let cam = random_camera(&mut r, 96, 72);
        let depth = DepthRaster::from_fn(96, 72, |c, row| 1.0 + 0.02 * c as f32 + 0.01 * row as f32);
        let mesh = build_mesh(&depth, &cam, 0.5).map_err(|e| e.to_string())?;
        ensure!(!mesh.is_empty(), "empty mesh");
        for (p, &(c, row)) in mesh.vertices.iter().zip(&mesh.vertex_source) {
            let q = cam.project(p).map_err(|e| e.to_string())?;
            let (u, v) = pixel_center(c, row);
            ensure!(
                (q.u - u).abs() <= 1e-6 && (q.v - v).abs() <= 1e-6,
                "vertex from ({c},{row}) reprojects to ({}, {})",
                q.u,
                q.v
            );
        }
    }
    Ok(())
}

fn metrics() -> Check {
    // Joints on a dyadic grid and a 3-4-5 offset keep every operation exact.
    let mut r = rng(7);
    let skeleton = Skeleton::body18();
    let frames: Vec<Vec<Point3>> = (0..6)
        .map(|_| {
            (0..skeleton.joint_count())
                .map(|_| Point3::from(Vector3::from_fn(|_, _| r.random_range(-512..512) as f64 / 256.0)))
                .collect()
        })
        .collect();
    let a = MotionSequence {
        skeleton,
        fps: 30.0,
        frames,
        valid: None,
    };
    let mut b = a.clone();
    let offset = Vector3::new(0.1875, 0.25, 0.0);
    for p in b.frames.iter_mut().flatten() {
        *p += offset;
    }
    let value = mpjpe(&a, &b, false).map_err(|e| e.to_string())?;
    ensure!(value == 0.3125, "uniform 0.3125 offset measured as {value}");
    let aligned = mpjpe(&a, &b, true).map_err(|e| e.to_string())?;
    ensure!(aligned == 0.0, "root-aligned offset measured as {aligned}");

    let base = synthetic::fixture_camera(256, 256);
    let cams = Trajectory {
        base,
        spec: TrajectorySpec::Preset(PresetSpec::new(PresetKind::Orbit, 20.0, 2).with_anchor(Point3::new(0.0, 0.0, 4.0))),
    }
    .expand()
    .map_err(|e| e.to_string())?;
    let f = fundamental_from_cameras(&cams[0], &cams[1]).map_err(|e| e.to_string())?;
    let mut exact = Vec::new();
    while exact.len() < 200 {
        let p = Point3::new(r.random_range(-1.5..1.5), r.random_range(-1.5..1.5), r.random_range(2.5..6.0));
        if let (Ok(a), Ok(b)) = (cams[0].project(&p), cams[1].project(&p)) {
            exact.push((homogeneous(a.u, a.v), homogeneous(b.u, b.v)));
        }
    }
    let clean = sampson_error(&f, &exact).map_err(|e| e.to_string())?;
    ensure!(clean <= 1e-12, "exact correspondences give {clean}");

    let noise: Vec<[f64; 2]> = exact
        .iter()
        .map(|_| [StandardNormal.sample(&mut r), StandardNormal.sample(&mut r)])
        .collect();
    let mut last = clean;
    for sigma in [0.5, 1.0, 2.0] {
        let noisy: Vec<_> = exact
            .iter()
            .zip(&noise)
            .map(|((x, xp), n)| (*x, homogeneous(xp.x + sigma * n[0], xp.y + sigma * n[1])))
            .collect();
        let e = sampson_error(&f, &noisy).map_err(|e| e.to_string())?;
        ensure!(e > last, "sigma {sigma}: error {e} does not exceed {last}");
        last = e;
    }
    Ok(())
}

fn tree_hashes(root: &Path) -> Result<BTreeMap<String, String>, String> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).map_err(|e| format!("{}: {e}", dir.display()))? {
            let path = entry.map_err(|e| e.to_string())?.path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_string_lossy().replace('\\', "/");
                let bytes = std::fs::read(&path).map_err(|e| format!("{}: {e}", path.display()))?;
                out.insert(rel, io::sha256_hex(&bytes));
            }
        }
    }
    Ok(out)
}

fn compile_with_binary(bundle: &Path) -> Check {
    let out = Command::new(env!("CARGO_BIN_EXE_camcond"))
        .args(["compile", "--bundle"])
        .arg(bundle)
        .env("CAMCOND_LOG", "warn")
        .output()
        .map_err(|e| e.to_string())?;
    ensure!(
        out.status.success(),
        "compile exited with {}: {}",
        out.status,
        String::from_utf8_lossy(&out.stderr)
    );
    Ok(())
}

fn golden_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/hashes.json")
}

fn golden_fixture() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let bundle = write_bundle(dir.path(), &BundleSpec::golden()).map_err(|e| e.to_string())?;
    compile_with_binary(&bundle)?;
    let out = dir.path().join("out");
    let first = tree_hashes(&out)?;
    ensure!(first.contains_key(MANIFEST_FILE), "no manifest written");

    if std::env::var_os("CAMCOND_BLESS_GOLDEN").is_some() {
        io::write_bytes(&golden_path(), io::to_json(&first).as_bytes()).map_err(|e| e.to_string())?;
    }
    let text = std::fs::read_to_string(golden_path()).map_err(|e| format!("{}: {e}", golden_path().display()))?;
    let golden: BTreeMap<String, String> = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    for (file, hash) in &golden {
        match first.get(file) {
            Some(h) if h == hash => {}
            Some(h) => return Err(format!("{file}: {h} != golden {hash}")),
            None => return Err(format!("{file} missing from output")),
        }
    }
    ensure!(first.len() == golden.len(), "output has {} files, golden has {}", first.len(), golden.len());

    compile_with_binary(&bundle)?;
    ensure!(tree_hashes(&out)? == first, "re-run changed the output");
    Ok(())
}

fn depth_directionality() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let bundle = io::read_bundle(&write_bundle(dir.path(), &BundleSpec::plane(16)).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let scene = prepare(&bundle).map_err(|e| e.to_string())?;
    let cams = scene.trajectory.expand().map_err(|e| e.to_string())?;
    let renderer = SequenceRenderer::new(&scene.mesh, &scene.motion, &cams, &scene.style, scene.polarity)
        .map_err(|e| e.to_string())?;
    let mut last = f64::NEG_INFINITY;
    for (i, cam) in cams.iter().enumerate() {
        let fb = rasterize_mesh_depth(&scene.mesh, cam);
        let frame = renderer.frame(i);

        // Mean brightness of covered pixels outside the skeleton.
        let (mut sum, mut n) = (0.0, 0usize);
        for row in 0..cam.height {
            for c in 0..cam.width {
                if fb.depth(c, row).is_some() && frame.pose.get(c, row) == [0, 0, 0] {
                    sum += frame.pose_depth.get(c, row).iter().map(|&v| v as f64).sum::<f64>() / 3.0;
                    n += 1;
                }
            }
        }
        ensure!(n > 0, "frame {i}: no covered background pixels");
        let mean = sum / n as f64;
        ensure!(mean >= last, "frame {i}: mean brightness {mean} dropped below {last}");
        last = mean;

        // Pose-only frames are black everywhere beyond the projected skeleton's reach.
        let margin = (scene.style.joint_radius.max(scene.style.limb_thickness) + 2) as f64;
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for p in &scene.motion.frames[i] {
            let q = cam.project(p).map_err(|e| e.to_string())?;
            lo = [lo[0].min(q.u), lo[1].min(q.v)];
            hi = [hi[0].max(q.u), hi[1].max(q.v)];
        }
        for row in 0..cam.height {
            for c in 0..cam.width {
                let (u, v) = pixel_center(c, row);
                let near = u >= lo[0] - margin && u <= hi[0] + margin && v >= lo[1] - margin && v <= hi[1] + margin;
                ensure!(
                    near || frame.pose.get(c, row) == [0, 0, 0],
                    "frame {i}: pose-only background pixel ({c},{row}) is lit"
                );
            }
        }
    }
    ensure!(last > 0.0, "depth signal never brightened");
    Ok(())
}

struct Criterion {
    name: &'static str,
    limit: Duration,
    run: fn() -> Check,
}

fn main() -> ExitCode {
    let criteria = [
        Criterion {
            name: "schedule exactness",
            limit: Duration::from_secs(1),
            run: schedule_exactness,
        },
        Criterion {
            name: "scene-transfer fixed point",
            limit: Duration::from_secs(1),
            run: scene_transfer_fixed_point,
        },
        Criterion {
            name: "distance transform equals brute force",
            limit: Duration::from_secs(10),
            run: distance_transform_exact,
        },
        Criterion {
            name: "similarity-fit recovery",
            limit: Duration::from_secs(5),
            run: similarity_recovery,
        },
        Criterion {
            name: "rasterizer oracle and thread determinism",
            limit: Duration::from_secs(30),
            run: rasterizer_oracle,
        },
        Criterion {
            name: "round-trip geometry",
            limit: Duration::from_secs(5),
            run: round_trip_geometry,
        },
        Criterion {
            name: "metrics",
            limit: Duration::from_secs(5),
            run: metrics,
        },
        Criterion {
            name: "end-to-end golden fixture",
            limit: Duration::from_secs(30),
            run: golden_fixture,
        },
        Criterion {
            name: "depth directionality",
            limit: Duration::from_secs(10),
            run: depth_directionality,
        },
    ];
    let mut failed = 0;
    for c in &criteria {
        let start = Instant::now();
        let result = std::panic::catch_unwind(c.run).unwrap_or_else(|_| Err("panicked".into()));
        let elapsed = start.elapsed();
        let verdict = match result {
            Ok(()) if elapsed <= c.limit => Ok(()),
            Ok(()) => Err(format!("took longer than the {:.0?} limit", c.limit)),
            Err(e) => Err(e),
        };
        match verdict {
            Ok(()) => println!("PASS {} ({:.3}s, limit {:.0?})", c.name, elapsed.as_secs_f64(), c.limit),
            Err(e) => {
                failed += 1;
                println!("FAIL {} ({:.3}s, limit {:.0?}): {e}", c.name, elapsed.as_secs_f64(), c.limit);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
