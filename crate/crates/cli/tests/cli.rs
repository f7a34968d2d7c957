use camcond_core::geom::Point3;
use camcond_core::io::{self, CorrespondenceFile, CorrespondencePair, ExtrinsicsConvention};
use camcond_core::synthetic::{fixture_camera, walking_motion, write_bundle, BundleSpec};
use camcond_core::trajectory::{PresetKind, PresetSpec, Trajectory, TrajectorySpec};
use std::path::Path;
use std::process::{Command, Output};

fn camcond(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_camcond"))
        .args(args)
        .env("CAMCOND_LOG", "warn")
        .output()
        .unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout_json(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn compile_writes_both_sequences_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let bundle = write_bundle(dir.path(), &BundleSpec::golden()).unwrap();
    let summary = stdout_json(&camcond(&["compile", "--bundle", path(&bundle)]));
    assert_eq!(summary["frames"], 8);
    let out = dir.path().join("out");
    let manifest = io::read_manifest(&out.join("manifest.json")).unwrap();
    assert_eq!(manifest.num_steps, 50);
    assert_eq!(manifest.depth_steps(), 10);
    for sub in ["pose", "pose_depth", "depth"] {
        let index = io::read_frame_index(&out.join(sub)).unwrap();
        assert_eq!(index.count, 8);
    }
}

#[test]
fn flags_override_the_bundle() {
    let dir = tempfile::tempdir().unwrap();
    let bundle = write_bundle(dir.path(), &BundleSpec::golden()).unwrap();
    let other = dir.path().join("elsewhere");
    let out = camcond(&[
        "compile",
        "--bundle",
        path(&bundle),
        "--output-dir",
        path(&other),
        "--depth-fraction",
        "0",
        "--num-steps",
        "10",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest = io::read_manifest(&other.join("manifest.json")).unwrap();
    assert_eq!(manifest.num_steps, 10);
    assert_eq!(manifest.depth_steps(), 0);
    assert!(other.join("pose").is_dir());
    assert!(!other.join("pose_depth").exists());
    assert!(!dir.path().join("out").exists());
}

#[test]
fn missing_input_exits_2_and_names_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let bundle = write_bundle(dir.path(), &BundleSpec::golden()).unwrap();
    std::fs::remove_file(dir.path().join("mask.png")).unwrap();
    let out = camcond(&["compile", "--bundle", path(&bundle)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("mask.png"));
    assert!(!dir.path().join("out/manifest.json").exists());
}

#[test]
fn invalid_parameter_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let bundle = write_bundle(dir.path(), &BundleSpec::golden()).unwrap();
    let out = camcond(&["compile", "--bundle", path(&bundle), "--depth-fraction", "1.5"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn usage_errors_exit_1_and_help_exits_0() {
    assert_eq!(camcond(&["compile", "--no-such-flag"]).status.code(), Some(1));
    assert_eq!(camcond(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(camcond(&["inspect", "--mask", "m.png"]).status.code(), Some(1));
    let help = camcond(&["--help"]);
    assert_eq!(help.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&help.stdout).contains("compile"));
    assert_eq!(camcond(&["--version"]).status.code(), Some(0));
}

#[test]
fn mpjpe_of_identical_and_offset_motion() {
    let dir = tempfile::tempdir().unwrap();
    let a = walking_motion(6);
    let mut b = a.clone();
    for p in b.frames.iter_mut().flatten() {
        p.y -= 0.5;
    }
    let (pa, pb) = (dir.path().join("a.json"), dir.path().join("b.json"));
    io::write_motion(&a, &pa).unwrap();
    io::write_motion(&b, &pb).unwrap();

    let same = stdout_json(&camcond(&["eval", "mpjpe", "--predicted", path(&pa), "--reference", path(&pa)]));
    assert_eq!(same["value"], 0.0);

    let report_path = dir.path().join("report.json");
    let out = camcond(&[
        "eval",
        "mpjpe",
        "--predicted",
        path(&pa),
        "--reference",
        path(&pb),
        "--output",
        path(&report_path),
    ]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(&report_path).unwrap()).unwrap();
    assert!((report["value"].as_f64().unwrap() - 0.5).abs() < 1e-12);
    assert_eq!(report["inputs"][0]["sha256"].as_str().unwrap(), io::sha256_hex(&std::fs::read(&pa).unwrap()));
}

#[test]
fn sampson_of_exact_projections_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let traj = Trajectory {
        base: fixture_camera(128, 96),
        spec: TrajectorySpec::Preset(PresetSpec::new(PresetKind::Truck, 0.5, 4)),
    };
    let cams = traj.expand().unwrap();
    let points = [
        Point3::new(0.2, 0.1, 3.0),
        Point3::new(-0.6, 0.4, 2.5),
        Point3::new(0.5, -0.3, 5.0),
        Point3::new(0.0, 0.0, 4.0),
    ];
    let matches = points
        .iter()
        .map(|p| {
            let (a, b) = (cams[0].project(p).unwrap(), cams[3].project(p).unwrap());
            [a.u, a.v, b.u, b.v]
        })
        .collect();
    let corr = CorrespondenceFile {
        version: 1,
        pairs: vec![CorrespondencePair { frames: [0, 3], matches }],
    };
    let (pt, pc) = (dir.path().join("traj.json"), dir.path().join("corr.json"));
    io::write_trajectory(&traj, ExtrinsicsConvention::CameraToWorld, &pt).unwrap();
    io::write_bytes(&pc, io::to_json(&corr).as_bytes()).unwrap();
    let report = stdout_json(&camcond(&[
        "eval",
        "sampson",
        "--trajectory",
        path(&pt),
        "--correspondences",
        path(&pc),
    ]));
    assert!(report["value"].as_f64().unwrap() < 1e-12, "{report}");
    assert_eq!(report["pairs"][0]["matches"], 4);
}

#[test]
fn inspect_prints_resolved_bundle() {
    let dir = tempfile::tempdir().unwrap();
    let bundle = write_bundle(dir.path(), &BundleSpec::golden()).unwrap();
    let v = stdout_json(&camcond(&["inspect", "--bundle", path(&bundle), "--joint-radius", "3"]));
    assert_eq!(v["params"]["joint_radius"], 3);
    assert_eq!(v["params"]["discontinuity_ratio"], 0.15);
    let mask = v["mask"].as_str().unwrap();
    assert!(Path::new(mask).is_absolute() && mask.ends_with("mask.png"), "{mask}");
}

#[test]
fn preset_round_trips_through_the_trajectory_reader() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("orbit.json");
    let status = camcond(&[
        "preset",
        "--kind",
        "orbit",
        "--magnitude",
        "-15",
        "--frames",
        "5",
        "--anchor",
        "0,0,3",
        "--width",
        "64",
        "--height",
        "48",
        "--hfov",
        "90",
        "--output",
        path(&out),
    ]);
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let traj = io::read_trajectory(&out).unwrap();
    assert_eq!(traj.frame_count(), 5);
    assert!((traj.base.intrinsics.fx - 32.0).abs() < 1e-12);
    let cams = traj.expand().unwrap();
    // The orbit keeps the anchor in view at the same distance.
    let anchor = Point3::new(0.0, 0.0, 3.0);
    for cam in &cams {
        assert!(((cam.extrinsics.center() - anchor).norm() - 3.0).abs() < 1e-9);
    }

    let named = camcond(&["preset", "--name", "dolly-in", "--frames", "4", "--base", path(&out)]);
    let v = stdout_json(&named);
    assert_eq!(v["preset"]["kind"], "dolly");
    assert_eq!(camcond(&["preset", "--name", "spin", "--frames", "4", "--base", path(&out)]).status.code(), Some(1));
}

fn http_get(port: u16, target: &str) -> Option<(String, Vec<u8>)> {
    use std::io::{Read, Write};
    let mut stream = std::net::TcpStream::connect(("127.0.0.1", port)).ok()?;
    write!(stream, "GET {target} HTTP/1.1\r\nHost: localhost\r\nConnection: close\r\n\r\n").ok()?;
    let mut raw = Vec::new();
    stream.read_to_end(&mut raw).ok()?;
    let split = raw.windows(4).position(|w| w == b"\r\n\r\n")?;
    Some((String::from_utf8_lossy(&raw[..split]).into_owned(), raw[split + 4..].to_vec()))
}

#[test]
fn serve_answers_and_reports_a_busy_port() {
    let dir = tempfile::tempdir().unwrap();
    let bundle = write_bundle(dir.path(), &BundleSpec::golden()).unwrap();
    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let mut child = Command::new(env!("CARGO_BIN_EXE_camcond"))
        .args(["serve", "--bundle", path(&bundle), "--port", &port.to_string()])
        .env("CAMCOND_LOG", "warn")
        .spawn()
        .unwrap();
    let mut state = None;
    for _ in 0..200 {
        if let Some(resp) = http_get(port, "/state") {
            state = Some(resp);
            break;
        }
        std::thread::sleep(std::time::Duration::from_millis(50));
    }
    let busy = camcond(&["serve", "--bundle", path(&bundle), "--port", &port.to_string()]);
    child.kill().unwrap();
    child.wait().unwrap();

    let (head, body) = state.expect("server never answered");
    assert!(head.starts_with("HTTP/1.1 200"), "{head}");
    let v: serde_json::Value = serde_json::from_slice(&body).unwrap();
    assert_eq!(v["revision"], 0);
    assert_eq!(busy.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&busy.stderr).contains(&port.to_string()));
}
