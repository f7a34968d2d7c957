//! `camcond`: compile conditioning signals, evaluate metrics, preview trajectories.

use anyhow::anyhow;
use camcond_core::geom::{CameraFrame, Extrinsics, Intrinsics, Point3};
use camcond_core::io::{self, BundleParams, ExtrinsicsConvention, ProjectBundle};
use camcond_core::pipeline;
use camcond_core::raster::DepthPolarity;
use camcond_core::trajectory::{default_presets, PresetKind, PresetSpec, Trajectory, TrajectorySpec};
use clap::{Args, Parser, Subcommand, ValueEnum};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

/// Environment variable holding the log filter, e.g. `debug` or `camcond_core=trace`.
const LOG_ENV: &str = "CAMCOND_LOG";

const EXIT_USAGE: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_INTERNAL: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "camcond", version, about = "Camera-aligned pose and depth conditioning toolchain")]
#[command(after_help = "Log verbosity is read from CAMCOND_LOG (default: info).\n\
Exit codes: 0 ok, 1 usage error, 2 input error, 3 internal error.")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Render pose and depth+pose frame sequences and write the schedule manifest.
    Compile(BundleArgs),
    /// Compute an evaluation metric and write a JSON report.
    Eval {
        #[command(subcommand)]
        metric: EvalCommand,
    },
    /// Serve trajectory state and rendered frames over HTTP.
    Serve(ServeArgs),
    /// Print the parsed project bundle with defaults filled in.
    Inspect(BundleArgs),
    /// Write a preset camera trajectory file.
    Preset(PresetArgs),
}

/// Bundle file plus per-field overrides; every flag mirrors a bundle field.
#[derive(Debug, Clone, Args)]
struct BundleArgs {
    /// Project bundle JSON. Relative paths inside it resolve against its directory.
    #[arg(long)]
    bundle: Option<PathBuf>,
    /// Depth of the scene without the character (PFM). Hole-filled reference depth is used when absent.
    #[arg(long)]
    background_depth: Option<PathBuf>,
    /// Depth of the reference image (PFM).
    #[arg(long)]
    reference_depth: Option<PathBuf>,
    /// Character mask (8-bit grayscale PNG, >127 marks the character).
    #[arg(long)]
    mask: Option<PathBuf>,
    /// Motion sequence JSON.
    #[arg(long)]
    motion: Option<PathBuf>,
    /// Camera trajectory JSON.
    #[arg(long)]
    trajectory: Option<PathBuf>,
    /// Reference keypoints JSON used to fit the motion to the scene.
    #[arg(long)]
    reference_keypoints: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Decay length of the importance weights, in pixels.
    #[arg(long)]
    decay_length: Option<f64>,
    /// Relative depth jump above which mesh triangles are dropped.
    #[arg(long)]
    discontinuity_ratio: Option<f64>,
    /// Fraction of denoising steps conditioned on depth+pose.
    #[arg(long)]
    depth_fraction: Option<f64>,
    /// Number of denoising steps in the manifest.
    #[arg(long)]
    num_steps: Option<usize>,
    /// Fill invalid background depth before meshing.
    #[arg(long)]
    fill_holes: bool,
    /// Which end of the depth range renders bright.
    #[arg(long, value_enum)]
    polarity: Option<PolarityArg>,
    /// Joint disc radius in pixels; 0 draws no joints.
    #[arg(long)]
    joint_radius: Option<u32>,
    /// Limb thickness in pixels.
    #[arg(long)]
    limb_thickness: Option<u32>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PolarityArg {
    NearBright,
    FarBright,
}

#[derive(Debug, Subcommand)]
enum EvalCommand {
    /// Mean per-joint position error between two motion files.
    Mpjpe {
        #[arg(long)]
        predicted: PathBuf,
        #[arg(long)]
        reference: PathBuf,
        /// Report path; stdout when omitted.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Sampson error of correspondences against the trajectory's epipolar geometry.
    Sampson {
        #[arg(long)]
        trajectory: PathBuf,
        #[arg(long)]
        correspondences: PathBuf,
        /// Report path; stdout when omitted.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[command(flatten)]
    bundle: BundleArgs,
    #[arg(long, default_value = "127.0.0.1")]
    host: std::net::IpAddr,
    #[arg(long, default_value_t = 8765)]
    port: u16,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum KindArg {
    Orbit,
    Dolly,
    Truck,
    Zoom,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ConventionArg {
    WorldToCamera,
    CameraToWorld,
}

#[derive(Debug, Args)]
struct PresetArgs {
    /// One of the stock presets: orbit-left, orbit-right, dolly-in, zoom-in.
    #[arg(long, conflicts_with_all = ["kind", "magnitude"])]
    name: Option<String>,
    #[arg(long, value_enum, requires = "magnitude")]
    kind: Option<KindArg>,
    /// Degrees for orbit, meters for dolly and truck, focal multiplier for zoom.
    #[arg(long, allow_hyphen_values = true)]
    magnitude: Option<f64>,
    #[arg(long)]
    frames: usize,
    /// Orbit pivot as x,y,z in world meters.
    #[arg(long, value_parser = parse_triple, allow_hyphen_values = true)]
    anchor: Option<[f64; 3]>,
    /// Orbit axis as x,y,z.
    #[arg(long, value_parser = parse_triple, allow_hyphen_values = true)]
    up: Option<[f64; 3]>,
    /// Trajectory file whose base camera (or first keyframe) starts the preset.
    #[arg(long, conflicts_with_all = ["width", "height", "hfov"])]
    base: Option<PathBuf>,
    /// Image width for a camera at the origin looking down +z.
    #[arg(long, requires_all = ["height", "hfov"])]
    width: Option<u32>,
    #[arg(long)]
    height: Option<u32>,
    /// Horizontal field of view in degrees.
    #[arg(long)]
    hfov: Option<f64>,
    #[arg(long, value_enum, default_value = "world-to-camera")]
    convention: ConventionArg,
    /// Output path; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
}

/// Failure classified by exit code.
enum Failure {
    Usage(anyhow::Error),
    Input(anyhow::Error),
    Internal(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Input(_) => EXIT_INPUT,
            Failure::Internal(_) => EXIT_INTERNAL,
        }
    }

    fn error(&self) -> &anyhow::Error {
        match self {
            Failure::Usage(e) | Failure::Input(e) | Failure::Internal(e) => e,
        }
    }
}

type Outcome = Result<(), Failure>;

fn input(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Input(e.into())
}

fn internal(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Internal(e.into())
}

impl BundleArgs {
    fn resolve(&self) -> Result<ProjectBundle, Failure> {
        let mut bundle = match &self.bundle {
            Some(path) => io::read_bundle(path).map_err(input)?,
            None => {
                let need = |p: &Option<PathBuf>, flag: &str| {
                    p.clone()
                        .ok_or_else(|| Failure::Usage(anyhow!("--{flag} is required without --bundle")))
                };
                ProjectBundle {
                    version: Some(io::SCHEMA_VERSION),
                    background_depth: None,
                    reference_depth: need(&self.reference_depth, "reference-depth")?,
                    mask: need(&self.mask, "mask")?,
                    motion: need(&self.motion, "motion")?,
                    trajectory: need(&self.trajectory, "trajectory")?,
                    reference_keypoints: None,
                    output_dir: need(&self.output_dir, "output-dir")?,
                    params: BundleParams::default(),
                }
            }
        };
        let set = |dst: &mut PathBuf, src: &Option<PathBuf>| {
            if let Some(p) = src {
                *dst = p.clone();
            }
        };
        set(&mut bundle.reference_depth, &self.reference_depth);
        set(&mut bundle.mask, &self.mask);
        set(&mut bundle.motion, &self.motion);
        set(&mut bundle.trajectory, &self.trajectory);
        set(&mut bundle.output_dir, &self.output_dir);
        if self.background_depth.is_some() {
            bundle.background_depth = self.background_depth.clone();
        }
        if self.reference_keypoints.is_some() {
            bundle.reference_keypoints = self.reference_keypoints.clone();
        }
        let p = &mut bundle.params;
        p.decay_length = self.decay_length.unwrap_or(p.decay_length);
        p.discontinuity_ratio = self.discontinuity_ratio.unwrap_or(p.discontinuity_ratio);
        p.depth_fraction = self.depth_fraction.unwrap_or(p.depth_fraction);
        p.num_steps = self.num_steps.unwrap_or(p.num_steps);
        p.fill_holes |= self.fill_holes;
        if let Some(pol) = self.polarity {
            p.polarity = match pol {
                PolarityArg::NearBright => DepthPolarity::NearBright,
                PolarityArg::FarBright => DepthPolarity::FarBright,
            };
        }
        p.joint_radius = self.joint_radius.unwrap_or(p.joint_radius);
        p.limb_thickness = self.limb_thickness.unwrap_or(p.limb_thickness);
        p.validate().map_err(input)?;
        Ok(bundle)
    }
}

fn emit(text: &str, output: Option<&Path>) -> Outcome {
    match output {
        Some(path) => io::write_bytes(path, text.as_bytes()).map_err(internal),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_compile(args: &BundleArgs) -> Outcome {
    let bundle = args.resolve()?;
    let outcome = pipeline::compile(&bundle).map_err(|e| {
        if e.is_input_error() {
            input(e)
        } else {
            internal(e)
        }
    })?;
    let summary = serde_json::to_string_pretty(&outcome).map_err(internal)?;
    println!("{summary}");
    Ok(())
}

fn cmd_eval(metric: &EvalCommand) -> Outcome {
    use camcond_core::eval::{mpjpe_files, sampson_files};
    // Every eval failure traces back to the files or their contents.
    let classify = input;
    match metric {
        EvalCommand::Mpjpe {
            predicted,
            reference,
            output,
        } => {
            let report = mpjpe_files(predicted, reference).map_err(classify)?;
            log::info!("mpjpe = {} m", report.value);
            emit(&io::to_json(&report), output.as_deref())
        }
        EvalCommand::Sampson {
            trajectory,
            correspondences,
            output,
        } => {
            let report = sampson_files(trajectory, correspondences).map_err(classify)?;
            log::info!("sampson error = {} px²", report.value);
            emit(&io::to_json(&report), output.as_deref())
        }
    }
}

fn cmd_serve(args: &ServeArgs) -> Outcome {
    use camcond_preview::{bind, serve, ServeError, Session, SessionError};
    let bundle = args.bundle.resolve()?;
    let session = Session::from_bundle(&bundle).map_err(|e| match e {
        SessionError::Pipeline(p) if !p.is_input_error() => internal(p),
        other => input(other),
    })?;
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(internal)?;
    runtime.block_on(async {
        let addr = SocketAddr::new(args.host, args.port);
        let listener = bind(addr).await.map_err(input)?;
        let shutdown = async {
            let _ = tokio::signal::ctrl_c().await;
            log::info!("shutting down");
        };
        serve(Arc::new(session), listener, shutdown).await.map_err(|e| match e {
            ServeError::PortInUse { .. } | ServeError::Bind { .. } => input(e),
            other => internal(other),
        })
    })
}

fn cmd_inspect(args: &BundleArgs) -> Outcome {
    let bundle = args.resolve()?;
    print!("{}", io::encode_bundle(&bundle));
    Ok(())
}

fn base_camera(args: &PresetArgs) -> Result<CameraFrame, Failure> {
    if let Some(path) = &args.base {
        return Ok(io::read_trajectory(path).map_err(input)?.base);
    }
    let (Some(w), Some(h), Some(hfov)) = (args.width, args.height, args.hfov) else {
        return Err(Failure::Usage(anyhow!("give either --base or --width, --height and --hfov")));
    };
    if !(hfov > 0.0 && hfov < 180.0) {
        return Err(Failure::Usage(anyhow!("--hfov must lie in (0, 180) degrees")));
    }
    let f = w as f64 / 2.0 / (hfov.to_radians() / 2.0).tan();
    CameraFrame::new(
        Intrinsics::new(f, f, w as f64 / 2.0, h as f64 / 2.0),
        Extrinsics::identity(),
        w,
        h,
    )
    .map_err(input)
}

fn parse_triple(s: &str) -> Result<[f64; 3], String> {
    let parts: Vec<&str> = s.split(',').collect();
    let [x, y, z] = parts.as_slice() else {
        return Err(format!("expected x,y,z, got {s:?}"));
    };
    let num = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}"));
    Ok([num(x)?, num(y)?, num(z)?])
}

fn point(v: &[f64; 3]) -> Point3 {
    Point3::new(v[0], v[1], v[2])
}

fn cmd_preset(args: &PresetArgs) -> Outcome {
    let base = base_camera(args)?;
    let anchor = args.anchor.as_ref().map(point);
    let mut spec = match (&args.name, args.kind, args.magnitude) {
        (Some(name), _, _) => {
            let pivot = anchor.unwrap_or_else(|| base.extrinsics.center() + base.extrinsics.forward() * 3.0);
            default_presets(args.frames, pivot)
                .into_iter()
                .find(|(n, _)| n == name)
                .map(|(_, s)| s)
                .ok_or_else(|| {
                    Failure::Usage(anyhow!(
                        "unknown preset {name:?}; choose orbit-left, orbit-right, dolly-in or zoom-in"
                    ))
                })?
        }
        (None, Some(kind), Some(magnitude)) => {
            let kind = match kind {
                KindArg::Orbit => PresetKind::Orbit,
                KindArg::Dolly => PresetKind::Dolly,
                KindArg::Truck => PresetKind::Truck,
                KindArg::Zoom => PresetKind::Zoom,
            };
            PresetSpec {
                anchor,
                ..PresetSpec::new(kind, magnitude, args.frames)
            }
        }
        _ => return Err(Failure::Usage(anyhow!("give either --name or --kind with --magnitude"))),
    };
    if let Some(up) = &args.up {
        spec.up = point(up).coords;
    }
    let trajectory = Trajectory {
        base,
        spec: TrajectorySpec::Preset(spec),
    };
    trajectory.spec.validate().map_err(input)?;
    let convention = match args.convention {
        ConventionArg::WorldToCamera => ExtrinsicsConvention::WorldToCamera,
        ConventionArg::CameraToWorld => ExtrinsicsConvention::CameraToWorld,
    };
    emit(&io::encode_trajectory(&trajectory, convention), args.output.as_deref())
}

fn run(cli: &Cli) -> Outcome {
    match &cli.command {
        Command::Compile(args) => cmd_compile(args),
        Command::Eval { metric } => cmd_eval(metric),
        Command::Serve(args) => cmd_serve(args),
        Command::Inspect(args) => cmd_inspect(args),
        Command::Preset(args) => cmd_preset(args),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or(LOG_ENV, "info"))
        .format_timestamp_millis()
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match std::panic::catch_unwind(|| run(&cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(failure)) => {
            let err = failure.error();
            log::error!("{err:#}");
            eprintln!("error: {err:#}");
            ExitCode::from(failure.code())
        }
        Err(_) => ExitCode::from(EXIT_INTERNAL),
    }
}
