//! Command-line pipeline for plane-based point cloud registration and
//! localization: segmentation, pairwise registration, relative tracking,
//! globally optimized localization against a prior map, structural initial
//! pose search, trajectory evaluation, monocular scale recovery and a
//! synthetic scene generator for end-to-end verification.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::Vector3;

use planeloc_core::config::load_config;
use planeloc_core::error::{Error, Result};
use planeloc_core::evaluation::{compute_ate, compute_rpe};
use planeloc_core::geometry::{
    apply_transform, Point3, PointCloud, RigidTransform, SourceTag, Trajectory,
};
use planeloc_core::io::{
    format_g7, load_cloud, load_trajectory, load_transform, save_cloud, save_segments,
    save_trajectory, save_transform, segments_to_string, transform_to_string, CloudFormat,
};
use planeloc_core::localization::{
    initial_pose_search, initialize, track_step, GlobalMap, PoseSearch,
};
use planeloc_core::preprocess::{apply_filters, estimate_scale, scale_cloud};
use planeloc_core::registration::{icp_refine, register_segments};
use planeloc_core::segmentation::segment_planes;
use planeloc_core::spatial::KdTree;
use planeloc_core::synth::{
    corridor_rects, line_trajectory, render_scan, render_sequence, room_rects, twin_map_rects,
    two_room_rects, unique_map_rects, SceneSpec, SensorModel,
};
use planeloc_core::Config;

#[derive(Parser)]
#[command(
    name = "planeloc",
    version,
    about = "Plane-segment based registration and localization of 3D point clouds"
)]
struct Cli {
    /// Configuration file (`key = value` lines with [section] headers)
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Print per-stage timing lines of the form `stage=<name> seconds=<float>`
    #[arg(long, global = true)]
    verbose: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract planar segments from a point cloud
    Segment(SegmentArgs),
    /// Register a source cloud onto a target cloud
    Register(RegisterArgs),
    /// Track relative poses over a scan sequence (no map)
    Track(TrackArgs),
    /// Track scans with global optimization against a prior map
    Localize(LocalizeArgs),
    /// Search a map for the pose of a scan without a prior estimate
    InitPose(InitPoseArgs),
    /// Compare an estimated trajectory against a reference
    Evaluate(EvaluateArgs),
    /// Recover monocular scale from a GPS track
    Scale(ScaleArgs),
    /// Generate synthetic scene clouds with ground truth
    Synth(SynthArgs),
}

#[derive(Args)]
struct SegmentArgs {
    /// Input cloud (.ply or .xyz)
    #[arg(long, value_name = "FILE")]
    input: PathBuf,
    /// Segment file destination; stdout when omitted
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Skip the preprocessing filters
    #[arg(long)]
    no_filter: bool,
    /// Override the source tag detected from the file
    #[arg(long, value_enum)]
    tag: Option<TagArg>,
}

#[derive(Args)]
struct RegisterArgs {
    #[arg(long, value_name = "FILE")]
    source: PathBuf,
    #[arg(long, value_name = "FILE")]
    target: PathBuf,
    /// Initial transform guess (4x4 row-major file)
    #[arg(long, value_name = "FILE")]
    hint: Option<PathBuf>,
    /// Odometry translation estimate `tx,ty,tz` for unobserved directions
    #[arg(long, value_name = "T", value_parser = parse_vec3)]
    odom: Option<Vector3<f64>>,
    /// Refine the result with point-to-point ICP
    #[arg(long)]
    icp: bool,
    /// Transform file destination
    #[arg(long, value_name = "FILE", default_value = "transform.txt")]
    out: PathBuf,
    #[arg(long, value_enum)]
    source_tag: Option<TagArg>,
    #[arg(long, value_enum)]
    target_tag: Option<TagArg>,
}

#[derive(Args)]
struct TrackArgs {
    /// Scan files in acquisition order
    #[arg(long, value_name = "FILE", num_args = 1.., required = true)]
    scans: Vec<PathBuf>,
    /// Odometry file: one `tx ty tz` line per scan after the first
    #[arg(long, value_name = "FILE")]
    odometry: Option<PathBuf>,
    /// Initial pose (4x4 transform file); identity when omitted
    #[arg(long, value_name = "FILE")]
    initial_pose: Option<PathBuf>,
    /// Trajectory file destination
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

#[derive(Args)]
struct LocalizeArgs {
    /// Prior global map cloud (vision-derived)
    #[arg(long, value_name = "FILE")]
    map: PathBuf,
    #[arg(long, value_name = "FILE", num_args = 1.., required = true)]
    scans: Vec<PathBuf>,
    #[arg(long, value_name = "FILE")]
    odometry: Option<PathBuf>,
    /// Initial pose file; when omitted the structural search runs
    #[arg(long, value_name = "FILE")]
    initial_pose: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// Export the fused map (vision + localized laser scans)
    #[arg(long, value_name = "FILE")]
    export_cloud: Option<PathBuf>,
}

#[derive(Args)]
struct InitPoseArgs {
    #[arg(long, value_name = "FILE")]
    map: PathBuf,
    #[arg(long, value_name = "FILE")]
    scan: PathBuf,
    /// Write the found pose as a transform file
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long, value_name = "FILE")]
    est: PathBuf,
    #[arg(long = "ref", value_name = "FILE")]
    reference: PathBuf,
    #[arg(long, value_enum, default_value_t = MetricArg::Rpe)]
    metric: MetricArg,
    /// Pose step for the relative pose error
    #[arg(long, default_value_t = 1)]
    delta: usize,
}

#[derive(Args)]
struct ScaleArgs {
    /// Vision (monocular) trajectory
    #[arg(long, value_name = "FILE")]
    vision: PathBuf,
    /// GPS trajectory in local metric coordinates
    #[arg(long, value_name = "FILE")]
    gps: PathBuf,
    /// Cloud to scale by the estimated factor
    #[arg(long, value_name = "FILE")]
    cloud: Option<PathBuf>,
    /// Destination for the scaled cloud
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    /// Scene preset
    #[arg(value_enum)]
    scene: SceneArg,
    /// Surface noise sigma in meters
    #[arg(long, default_value_t = 0.01)]
    noise: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Sampling density, points per square meter
    #[arg(long, default_value_t = 150.0)]
    density: f64,
    /// Laser sensor pose `tx,ty,tz,yaw_deg` (scene default when omitted)
    #[arg(long, value_name = "POSE", value_parser = parse_pose)]
    pose: Option<(Vector3<f64>, f64)>,
    /// Emit a scan sequence of this length along the scene trajectory
    #[arg(long, default_value_t = 0)]
    scans: usize,
    #[arg(long, value_name = "DIR", default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum TagArg {
    Laser,
    Vision,
}

impl From<TagArg> for SourceTag {
    fn from(t: TagArg) -> SourceTag {
        match t {
            TagArg::Laser => SourceTag::Laser,
            TagArg::Vision => SourceTag::Vision,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    Rpe,
    Ate,
}

#[derive(Clone, Copy, ValueEnum)]
enum SceneArg {
    Room,
    Tworooms,
    Corridor,
    UniqueMap,
    TwinMap,
}

fn parse_vec3(s: &str) -> std::result::Result<Vector3<f64>, String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err(format!("expected tx,ty,tz, got `{s}`"));
    }
    let mut v = [0.0; 3];
    for (i, p) in parts.iter().enumerate() {
        v[i] = p
            .trim()
            .parse()
            .map_err(|_| format!("invalid number `{p}`"))?;
    }
    Ok(Vector3::new(v[0], v[1], v[2]))
}

fn parse_pose(s: &str) -> std::result::Result<(Vector3<f64>, f64), String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 4 {
        return Err(format!("expected tx,ty,tz,yaw_deg, got `{s}`"));
    }
    let mut v = [0.0; 4];
    for (i, p) in parts.iter().enumerate() {
        v[i] = p
            .trim()
            .parse()
            .map_err(|_| format!("invalid number `{p}`"))?;
    }
    Ok((Vector3::new(v[0], v[1], v[2]), v[3].to_radians()))
}

struct Stages {
    verbose: bool,
}

impl Stages {
    fn time<T>(&self, name: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        if self.verbose {
            println!("stage={} seconds={:.4}", name, start.elapsed().as_secs_f64());
        }
        out
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{e}");
                    ExitCode::SUCCESS
                }
                _ => {
                    eprint!("{e}");
                    // usage errors per sysexits convention
                    ExitCode::from(64)
                }
            };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    let cfg = load_config(cli.config.as_deref())?;
    let stages = Stages {
        verbose: cli.verbose,
    };
    match cli.command {
        Command::Segment(args) => cmd_segment(args, &cfg, &stages),
        Command::Register(args) => cmd_register(args, &cfg, &stages),
        Command::Track(args) => cmd_track(args, &cfg, &stages),
        Command::Localize(args) => cmd_localize(args, &cfg, &stages),
        Command::InitPose(args) => cmd_init_pose(args, &cfg, &stages),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Scale(args) => cmd_scale(args),
        Command::Synth(args) => cmd_synth(args),
    }
}

fn load_tagged(path: &Path, tag: Option<TagArg>) -> Result<PointCloud> {
    let mut cloud = load_cloud(path)?;
    if let Some(tag) = tag {
        cloud.source_tag = tag.into();
    }
    Ok(cloud)
}

fn preprocess(cloud: &PointCloud, cfg: &Config) -> Result<PointCloud> {
    apply_filters(cloud, cfg.filter_for(cloud.source_tag))
}

fn cmd_segment(args: SegmentArgs, cfg: &Config, stages: &Stages) -> Result<ExitCode> {
    let cloud = load_tagged(&args.input, args.tag)?;
    let cloud = if args.no_filter {
        cloud
    } else {
        stages.time("preprocessing", || preprocess(&cloud, cfg))?
    };
    let segments = stages.time("segmentation", || segment_planes(&cloud, &cfg.segmentation))?;
    match &args.out {
        Some(path) => save_segments(&segments, path)?,
        None => print!("{}", segments_to_string(&segments)),
    }
    eprintln!("planes={}", segments.len());
    Ok(ExitCode::SUCCESS)
}

fn cmd_register(args: RegisterArgs, cfg: &Config, stages: &Stages) -> Result<ExitCode> {
    let source = load_tagged(&args.source, args.source_tag)?;
    let target = load_tagged(&args.target, args.target_tag)?;
    let hint = match &args.hint {
        Some(path) => load_transform(path)?,
        None => RigidTransform::identity(),
    };
    let (source, target) = stages.time("preprocessing", || -> Result<_> {
        Ok((preprocess(&source, cfg)?, preprocess(&target, cfg)?))
    })?;
    let (src_segs, tgt_segs) = stages.time("segmentation", || -> Result<_> {
        Ok((
            segment_planes(&source, &cfg.segmentation)?,
            segment_planes(&target, &cfg.segmentation)?,
        ))
    })?;
    let result = stages.time("registration", || {
        register_segments(
            &src_segs,
            &tgt_segs,
            &cfg.matching,
            cfg.rank_tol,
            &hint,
            args.odom,
            Vector3::zeros(),
        )
    });
    if result.failed {
        eprintln!("warning: no plane correspondences found; writing identity transform");
    }
    let mut transform = result.transform.clone();
    if args.icp && !result.failed {
        let refined = stages.time("icp", || {
            icp_refine(&source, &target, &transform, 50, 4.0 * cfg.laser_filter.voxel_leaf)
        })?;
        if refined.no_overlap {
            eprintln!("warning: icp found no point pairs; keeping the plane-based transform");
        } else {
            transform = refined.transform;
        }
    }
    save_transform(&transform, &args.out)?;
    println!(
        "rank={} pairs={}",
        transform.translation_rank,
        result.correspondences.len()
    );
    Ok(ExitCode::SUCCESS)
}

fn load_odometry(path: &Path) -> Result<Vec<Vector3<f64>>> {
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(Error::Parse {
                path: path.display().to_string(),
                line: idx + 1,
                msg: format!("expected 3 fields, got {}", fields.len()),
            });
        }
        let mut v = [0.0; 3];
        for (k, tok) in fields.iter().enumerate() {
            v[k] = tok.parse().map_err(|_| Error::Parse {
                path: path.display().to_string(),
                line: idx + 1,
                msg: format!("invalid number `{tok}`"),
            })?;
        }
        out.push(Vector3::new(v[0], v[1], v[2]));
    }
    Ok(out)
}

fn run_tracking(
    map: Option<&GlobalMap>,
    scan_paths: &[PathBuf],
    odometry: Option<&Path>,
    initial_pose: Option<RigidTransform>,
    cfg: &Config,
    stages: &Stages,
) -> Result<planeloc_core::localization::TrackerState> {
    let odom = match odometry {
        Some(path) => Some(load_odometry(path)?),
        None => None,
    };
    if let Some(o) = &odom {
        if o.len() + 1 < scan_paths.len() {
            return Err(Error::InvalidInput(format!(
                "odometry file has {} entries for {} scans (needs one per scan after the first)",
                o.len(),
                scan_paths.len()
            )));
        }
    }

    let first = load_cloud(&scan_paths[0])?;
    let first = stages.time("preprocessing", || preprocess(&first, cfg))?;
    let mut state = stages.time("initialize", || {
        initialize(map, first, 0.0, initial_pose, cfg)
    })?;
    for (i, path) in scan_paths.iter().enumerate().skip(1) {
        let scan = load_cloud(path)?;
        let scan = stages.time("preprocessing", || preprocess(&scan, cfg))?;
        let step_odom = odom.as_ref().map(|o| o[i - 1]);
        let report = stages.time("track", || {
            track_step(&mut state, map, scan, i as f64, step_odom, cfg)
        })?;
        if stages.verbose {
            println!(
                "scan={} pairs={} rank={} corrected={} mode={:?}",
                i, report.pairs, report.translation_rank, report.globally_corrected, report.mode
            );
        }
        if report.low_confidence {
            eprintln!("warning: scan {i} pose is low-confidence");
        }
    }
    Ok(state)
}

fn state_trajectory(state: &planeloc_core::localization::TrackerState) -> Trajectory {
    Trajectory::from_poses(state.history.iter().map(|r| r.pose.clone()).collect())
        .expect("scan indices are strictly increasing")
}

fn cmd_track(args: TrackArgs, cfg: &Config, stages: &Stages) -> Result<ExitCode> {
    let initial = match &args.initial_pose {
        Some(path) => Some(load_transform(path)?),
        None => Some(RigidTransform::identity()),
    };
    let state = run_tracking(
        None,
        &args.scans,
        args.odometry.as_deref(),
        initial,
        cfg,
        stages,
    )?;
    save_trajectory(&state_trajectory(&state), &args.out)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_localize(args: LocalizeArgs, cfg: &Config, stages: &Stages) -> Result<ExitCode> {
    let mut map_cloud = load_cloud(&args.map)?;
    map_cloud.source_tag = SourceTag::Vision;
    let map_cloud = stages.time("map-preprocessing", || preprocess(&map_cloud, cfg))?;
    let map = GlobalMap::new(map_cloud)?;
    let initial = match &args.initial_pose {
        Some(path) => Some(load_transform(path)?),
        None => None,
    };
    let state = run_tracking(
        Some(&map),
        &args.scans,
        args.odometry.as_deref(),
        initial,
        cfg,
        stages,
    )?;
    save_trajectory(&state_trajectory(&state), &args.out)?;
    if let Some(path) = &args.export_cloud {
        stages.time("export", || export_merged(&map, &state, path))?;
    }
    Ok(ExitCode::SUCCESS)
}

/// Fused map export: vision points keep their colors, localized laser
/// points are dyed with the color of the nearest vision point; where no
/// color information exists a neutral laser tint marks them.
fn export_merged(
    map: &GlobalMap,
    state: &planeloc_core::localization::TrackerState,
    path: &Path,
) -> Result<()> {
    const DYE_RADIUS: f64 = 1.0;
    const LASER_TINT: [u8; 3] = [230, 230, 230];
    const VISION_TINT: [u8; 3] = [120, 170, 120];

    let mut points: Vec<Point3> = map.cloud.points.clone();
    let mut colors: Vec<[u8; 3]> = match &map.cloud.colors {
        Some(c) => c.clone(),
        None => vec![VISION_TINT; map.cloud.len()],
    };
    let tree = KdTree::build(&map.cloud.points);
    for rec in &state.history {
        let moved = apply_transform(&rec.pose.transform, &rec.cloud);
        for p in &moved.points {
            let color = match tree.nearest(*p) {
                Some((j, d_sq)) if d_sq <= DYE_RADIUS * DYE_RADIUS => map
                    .cloud
                    .colors
                    .as_ref()
                    .map(|c| c[j])
                    .unwrap_or(LASER_TINT),
                _ => LASER_TINT,
            };
            points.push(*p);
            colors.push(color);
        }
    }
    let merged = PointCloud {
        points,
        colors: Some(colors),
        source_tag: SourceTag::Vision,
    };
    let format = if path.extension().map(|e| e.eq_ignore_ascii_case("xyz")).unwrap_or(false) {
        CloudFormat::Xyz
    } else {
        CloudFormat::AsciiPly
    };
    save_cloud(&merged, path, format)
}

fn cmd_init_pose(args: InitPoseArgs, cfg: &Config, stages: &Stages) -> Result<ExitCode> {
    let mut map_cloud = load_cloud(&args.map)?;
    map_cloud.source_tag = SourceTag::Vision;
    let map_cloud = stages.time("map-preprocessing", || preprocess(&map_cloud, cfg))?;
    let map = GlobalMap::new(map_cloud)?;
    let scan = load_cloud(&args.scan)?;
    let scan = stages.time("preprocessing", || preprocess(&scan, cfg))?;
    let outcome = stages.time("cell-search", || initial_pose_search(&map, &scan, cfg))?;
    match outcome {
        PoseSearch::Found { pose, r1, r2 } => {
            print!("{}", transform_to_string(&pose));
            println!("r1={} r2={}", format_g7(r1), format_g7(r2));
            if let Some(path) = &args.out {
                save_transform(&pose, path)?;
            }
            Ok(ExitCode::SUCCESS)
        }
        PoseSearch::Ambiguous { r1, r2 } => {
            println!("AMBIGUOUS r1={} r2={}", format_g7(r1), format_g7(r2));
            Ok(ExitCode::from(2))
        }
        PoseSearch::NotFound => {
            println!("NOT_FOUND");
            Ok(ExitCode::from(3))
        }
    }
}

fn fmt_metric(v: f64) -> String {
    if v == 0.0 {
        "0".to_string()
    } else {
        format_g7(v)
    }
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<ExitCode> {
    let est = load_trajectory(&args.est)?;
    let reference = load_trajectory(&args.reference)?;
    let stats = match args.metric {
        MetricArg::Rpe => compute_rpe(&est, &reference, args.delta)?,
        MetricArg::Ate => compute_ate(&est, &reference)?,
    };
    println!(
        "rmse={} min={} max={}",
        fmt_metric(stats.rmse),
        fmt_metric(stats.min),
        fmt_metric(stats.max)
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_scale(args: ScaleArgs) -> Result<ExitCode> {
    let vision = load_trajectory(&args.vision)?;
    let gps = load_trajectory(&args.gps)?;
    let s = estimate_scale(&vision, &gps)?;
    println!("scale={}", format_g7(s));
    if let Some(cloud_path) = &args.cloud {
        let out = args.out.as_ref().ok_or_else(|| {
            Error::InvalidParam("--cloud requires --out for the scaled cloud".into())
        })?;
        let cloud = load_cloud(cloud_path)?;
        let scaled = scale_cloud(&cloud, s)?;
        let format = if out.extension().map(|e| e.eq_ignore_ascii_case("xyz")).unwrap_or(false) {
            CloudFormat::Xyz
        } else {
            CloudFormat::AsciiPly
        };
        save_cloud(&scaled, out, format)?;
    }
    Ok(ExitCode::SUCCESS)
}

struct ScenePreset {
    rects: Vec<planeloc_core::synth::Rect>,
    pose: RigidTransform,
    max_range: f64,
    /// Trajectory for `--scans` sequences.
    path: (Vector3<f64>, Vector3<f64>, f64),
    name: &'static str,
}

fn scene_preset(scene: SceneArg, density: f64) -> ScenePreset {
    match scene {
        SceneArg::Room => ScenePreset {
            rects: room_rects(density),
            pose: RigidTransform::new(nalgebra::Matrix3::identity(), Vector3::new(0.3, 0.2, 0.0)),
            max_range: 10.0,
            path: (Vector3::new(-0.8, -1.0, 0.0), Vector3::new(0.4, 0.5, 0.0), 0.05),
            name: "room",
        },
        SceneArg::Tworooms => ScenePreset {
            rects: two_room_rects(density),
            pose: RigidTransform::new(
                nalgebra::Matrix3::identity(),
                Vector3::new(1.5, 2.0, 1.4),
            ),
            max_range: 10.0,
            path: (
                Vector3::new(1.5, 2.0, 1.4),
                Vector3::new(1.2, 0.15, 0.0),
                3f64.to_radians(),
            ),
            name: "tworooms",
        },
        SceneArg::Corridor => ScenePreset {
            rects: corridor_rects(density),
            pose: RigidTransform::new(
                nalgebra::Matrix3::identity(),
                Vector3::new(4.0, 0.0, 1.2),
            ),
            max_range: 8.0,
            path: (Vector3::new(2.0, 0.0, 1.2), Vector3::new(1.5, 0.0, 0.0), 0.0),
            name: "corridor",
        },
        SceneArg::UniqueMap => ScenePreset {
            rects: unique_map_rects(density, [0.0, 0.0]),
            pose: RigidTransform::new(
                nalgebra::Matrix3::identity(),
                Vector3::new(0.5, 0.0, 1.2),
            ),
            max_range: 9.0,
            path: (Vector3::new(-1.0, 0.0, 1.2), Vector3::new(1.0, 0.2, 0.0), 0.0),
            name: "unique-map",
        },
        SceneArg::TwinMap => ScenePreset {
            rects: twin_map_rects(density),
            pose: RigidTransform::new(
                nalgebra::Matrix3::identity(),
                Vector3::new(-9.5, 0.0, 1.2),
            ),
            max_range: 9.0,
            path: (Vector3::new(-11.0, 0.0, 1.2), Vector3::new(1.0, 0.2, 0.0), 0.0),
            name: "twin-map",
        },
    }
}

fn cmd_synth(args: SynthArgs) -> Result<ExitCode> {
    let preset = scene_preset(args.scene, args.density);
    std::fs::create_dir_all(&args.out_dir)?;
    let file = |suffix: &str| args.out_dir.join(format!("{}_{}", preset.name, suffix));

    let vision_spec = SceneSpec {
        rects: preset.rects.clone(),
        noise_sigma: args.noise,
        sensor: SensorModel::vision(),
    };
    let vision = render_scan(&vision_spec, &RigidTransform::identity(), args.seed)?;
    let vision_path = file("vision.ply");
    save_cloud(&vision, &vision_path, CloudFormat::AsciiPly)?;
    eprintln!("wrote {}", vision_path.display());

    let laser_spec = SceneSpec {
        rects: preset.rects.clone(),
        noise_sigma: args.noise,
        sensor: SensorModel::LaserLike {
            max_range: preset.max_range,
            ref_range: preset.max_range / 2.0,
        },
    };
    let pose = match args.pose {
        Some((t, yaw)) => RigidTransform::from_axis_angle(Vector3::z(), yaw, t),
        None => preset.pose.clone(),
    };
    let laser = render_scan(&laser_spec, &pose, args.seed.wrapping_add(7))?;
    let laser_path = file("laser.ply");
    save_cloud(&laser, &laser_path, CloudFormat::AsciiPly)?;
    eprintln!("wrote {}", laser_path.display());
    let truth_path = file("truth.txt");
    save_transform(&pose, &truth_path)?;
    eprintln!("wrote {}", truth_path.display());

    if args.scans > 0 {
        let (start, step, yaw) = preset.path;
        let truth = line_trajectory(start, step, yaw, args.scans);
        let scans = render_sequence(&laser_spec, &truth, args.seed.wrapping_add(100))?;
        for (i, scan) in scans.iter().enumerate() {
            let path = file(&format!("scan_{i:03}.ply"));
            save_cloud(scan, &path, CloudFormat::AsciiPly)?;
            eprintln!("wrote {}", path.display());
        }
        let traj_path = file("truth_traj.txt");
        save_trajectory(&truth, &traj_path)?;
        eprintln!("wrote {}", traj_path.display());

        // odometry: relative translations in the previous body frame
        let mut odom = String::from("# tx ty tz per scan after the first\n");
        for w in truth.poses().windows(2) {
            let rel = w[0].transform.invert().compose(&w[1].transform);
            odom.push_str(&format!(
                "{} {} {}\n",
                format_g7(rel.translation.x),
                format_g7(rel.translation.y),
                format_g7(rel.translation.z)
            ));
        }
        let odom_path = file("odom.txt");
        std::fs::write(&odom_path, odom)?;
        eprintln!("wrote {}", odom_path.display());
    }
    Ok(ExitCode::SUCCESS)
}
