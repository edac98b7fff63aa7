use std::collections::HashMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use mulls::backend::{Backend, SubmapBuilder};
use mulls::eval::{kitti_ate_are, mapping_error, timing_summary, MetricReport, SceneSpec};
use mulls::features::{downsample, FeatureClass, FeatureCloud};
use mulls::frontend::OdometryState;
use mulls::io::{
    correct_intrinsic_angle, list_kitti_scans, read_kitti_bin, read_kitti_poses, read_ply, read_trajectory_csv,
    write_ply, write_trajectory_csv, PlyFormat, Trajectory,
};
use mulls::{Point, PointCloud, Pose, RunConfig};

#[derive(Parser)]
#[command(name = "mulls", version, about = "LiDAR odometry and mapping")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Front-end odometry over a directory of KITTI scans.
    Odom(RunArgs),
    /// Odometry plus submap loop closure and pose-graph optimization.
    Slam {
        #[command(flatten)]
        run: RunArgs,
        /// Write the feature map, rebuilt from the corrected poses, as PLY.
        #[arg(long)]
        map: Option<PathBuf>,
        /// Dump the final pose graph as text.
        #[arg(long)]
        graph: Option<PathBuf>,
    },
    /// Trajectory (and optionally map) accuracy against ground truth.
    Eval {
        /// Estimated trajectory: CSV as written by `odom`/`slam`, or KITTI pose text.
        #[arg(long)]
        est: PathBuf,
        /// Ground-truth KITTI pose file, one line per frame id.
        #[arg(long)]
        gt: PathBuf,
        /// Map point cloud (PLY) to compare with `--reference`.
        #[arg(long, requires = "reference")]
        map: Option<PathBuf>,
        #[arg(long)]
        reference: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Render a synthetic sequence to a KITTI-style directory.
    Scene {
        #[command(flatten)]
        source: SceneSource,
        #[arg(long)]
        out: PathBuf,
        /// Override the number of frames.
        #[arg(long)]
        frames: Option<usize>,
    },
    /// Print the configuration (defaults, or a file merged over them) as `key = value` lines.
    Config {
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Per-stage timings of the front-end.
    Bench {
        /// Scan directory; a synthetic preset is rendered in memory otherwise.
        #[arg(long, conflicts_with = "preset")]
        dir: Option<PathBuf>,
        #[arg(long, default_value = "corridor")]
        preset: String,
        #[arg(long, default_value_t = 50)]
        frames: usize,
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Directory of `.bin` scans, or a sequence directory with `velodyne/`.
    dir: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "traj.csv")]
    out: PathBuf,
    /// Process at most this many scans.
    #[arg(long)]
    frames: Option<usize>,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct SceneSource {
    /// JSON scene description.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Built-in scene: structured, corridor or loop.
    #[arg(long)]
    preset: Option<String>,
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Odom(run) => odom(&run),
        Command::Slam { run, map, graph } => slam(&run, map.as_deref(), graph.as_deref()),
        Command::Eval {
            est,
            gt,
            map,
            reference,
            config,
        } => eval(&est, &gt, map.as_deref().zip(reference.as_deref()), config.as_deref()),
        Command::Scene { source, out, frames } => scene(&source, &out, frames),
        Command::Config { config } => {
            print!("{}", load_config(config.as_deref())?.to_text());
            Ok(())
        }
        Command::Bench {
            dir,
            preset,
            frames,
            config,
        } => bench(dir.as_deref(), &preset, frames, config.as_deref()),
    }
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        Some(p) => RunConfig::load(p).with_context(|| format!("loading config {}", p.display())),
        None => Ok(RunConfig::default()),
    }
}

fn scan_paths(dir: &Path, limit: Option<usize>) -> Result<Vec<PathBuf>> {
    let mut scans = list_kitti_scans(dir).with_context(|| format!("listing {}", dir.display()))?;
    if scans.is_empty() {
        bail!("no .bin scans in {}", dir.display());
    }
    if let Some(n) = limit {
        scans.truncate(n);
    }
    Ok(scans)
}

fn load_scan(path: &Path, cfg: &RunConfig) -> Result<PointCloud> {
    let cloud = read_kitti_bin(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(correct_intrinsic_angle(&cloud, cfg.io.intrinsic_correction_deg.to_radians()))
}

fn odom(run: &RunArgs) -> Result<()> {
    let cfg = load_config(run.config.as_deref())?;
    let scans = scan_paths(&run.dir, run.frames)?;
    let mut state = OdometryState::new(cfg.clone());
    let start = Instant::now();
    for (i, path) in scans.iter().enumerate() {
        let out = state.process_frame(&load_scan(path, &cfg)?)?;
        log::debug!("frame {}: {:.1} ms", out.frame_id, out.timings.total_ms);
        if (i + 1) % 100 == 0 {
            log::info!("{} / {} frames", i + 1, scans.len());
        }
    }
    report_run(&state, scans.len(), start);
    write_trajectory_csv(state.trajectory(), &run.out)?;
    log::info!("trajectory written to {}", run.out.display());
    Ok(())
}

fn report_run(state: &OdometryState, frames: usize, start: Instant) {
    let secs = start.elapsed().as_secs_f64();
    log::info!("{frames} frames in {secs:.1} s ({:.1} Hz)", frames as f64 / secs);
    if !state.untracked().is_empty() {
        log::warn!("{} frames extrapolated: {:?}", state.untracked().len(), state.untracked());
    }
}

fn slam(run: &RunArgs, map_out: Option<&Path>, graph_out: Option<&Path>) -> Result<()> {
    let cfg = load_config(run.config.as_deref())?;
    let scans = scan_paths(&run.dir, run.frames)?;
    let mut state = OdometryState::new(cfg.clone());
    let mut builder = SubmapBuilder::new(cfg.clone());
    let handle = Backend::new(cfg.clone()).spawn();
    let mut frame_features: HashMap<u64, FeatureCloud> = HashMap::new();
    let start = Instant::now();

    for (i, path) in scans.iter().enumerate() {
        let out = state.process_frame(&load_scan(path, &cfg)?)?;
        if map_out.is_some() {
            frame_features.insert(out.frame_id, out.features.sparse.clone());
        }
        if let Some(s) = builder.maybe_spawn_submap(&out, state.map()) {
            log::debug!("submap {} at frame {}", s.id, out.frame_id);
            if handle.submit(s).is_err() {
                // The worker stopped early; surface its error.
                handle.finish()?;
                bail!("back-end stopped");
            }
        }
        if (i + 1) % 100 == 0 {
            log::info!(
                "{} / {} frames, corrected trajectory v{}",
                i + 1,
                scans.len(),
                handle.latest().version
            );
        }
    }
    if let Some(s) = builder.flush(state.map()) {
        handle.submit(s)?;
    }
    let backend = handle.finish()?;
    report_run(&state, scans.len(), start);
    let accepted = backend.loops().iter().filter(|l| l.accepted).count();
    log::info!(
        "{} submaps, {} / {} loop closures accepted, {} optimizations",
        backend.submaps().len(),
        accepted,
        backend.loops().len(),
        backend.optimizations()
    );

    let corrected: HashMap<u64, Pose> = backend.corrected().poses.into_iter().collect();
    let mut trajectory: Trajectory = state.into_trajectory();
    for r in trajectory.records_mut() {
        if let Some(p) = corrected.get(&r.frame_id) {
            r.pose = *p;
        }
    }
    write_trajectory_csv(&trajectory, &run.out)?;
    log::info!("trajectory written to {}", run.out.display());

    if let Some(path) = graph_out {
        let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        backend.graph().write_text(BufWriter::new(file))?;
        log::info!("pose graph written to {}", path.display());
    }
    if let Some(path) = map_out {
        let (cloud, labels) = corrected_map(&trajectory, &frame_features, cfg.features.sparse_voxel);
        write_ply(&cloud, Some(&labels), path, PlyFormat::BinaryLittleEndian)?;
        log::info!("{} map points written to {}", cloud.len(), path.display());
    }
    Ok(())
}

/// Per-frame features placed with the final poses, thinned per class.
fn corrected_map(trajectory: &Trajectory, features: &HashMap<u64, FeatureCloud>, voxel: f64) -> (PointCloud, Vec<u8>) {
    let mut world = FeatureCloud::default();
    for r in trajectory.records() {
        if let Some(f) = features.get(&r.frame_id) {
            world.extend(&f.transformed(&r.pose));
        }
    }
    let mut points = Vec::new();
    let mut labels = Vec::new();
    for class in FeatureClass::ALL {
        let pts = world.get(class);
        let pos: Vec<_> = pts.iter().map(|p| p.position).collect();
        let score: Vec<_> = pts.iter().map(|p| p.score).collect();
        for i in downsample::voxel_select(&pos, &score, voxel) {
            let p = &pts[i];
            points.push(Point::new(p.position.x as f32, p.position.y as f32, p.position.z as f32, p.intensity));
            labels.push(class.index() as u8);
        }
    }
    (PointCloud::new(points, 0), labels)
}

fn eval(est: &Path, gt: &Path, maps: Option<(&Path, &Path)>, config: Option<&Path>) -> Result<()> {
    let cfg = load_config(config)?;
    let truth = read_kitti_poses(gt).with_context(|| format!("reading {}", gt.display()))?;
    let is_csv = est.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    let mut report = if is_csv {
        let trajectory = read_trajectory_csv(est).with_context(|| format!("reading {}", est.display()))?;
        let mut gt_poses = Vec::with_capacity(trajectory.len());
        for r in trajectory.records() {
            match truth.get(r.frame_id as usize) {
                Some(p) => gt_poses.push(*p),
                None => bail!("frame {} has no ground-truth pose ({} available)", r.frame_id, truth.len()),
            }
        }
        let mut report = kitti_ate_are(&trajectory.poses(), &gt_poses)?;
        let timings: Vec<_> = trajectory.records().iter().map(|r| r.timings).collect();
        // The CSV keeps only the per-frame stage totals.
        report.timing = timing_summary(&timings)
            .into_iter()
            .filter(|t| !matches!(t.stage, "association" | "transform estimation"))
            .collect();
        report
    } else {
        let poses = read_kitti_poses(est).with_context(|| format!("reading {}", est.display()))?;
        kitti_ate_are(&poses, &truth)?
    };
    if let Some((map, reference)) = maps {
        let positions = |p: &Path| -> Result<Vec<_>> {
            let data = read_ply(p).with_context(|| format!("reading {}", p.display()))?;
            Ok(data.cloud.points.iter().map(|q| q.xyz()).collect())
        };
        report.mapping_error = Some(mapping_error(
            &positions(map)?,
            &positions(reference)?,
            cfg.eval.mapping_max_dist,
        )?);
    }
    print!("{report}");
    Ok(())
}

fn scene_spec(source: &SceneSource) -> Result<SceneSpec> {
    match (&source.spec, &source.preset) {
        (Some(path), _) => SceneSpec::load(path).with_context(|| format!("loading scene {}", path.display())),
        (None, Some(name)) => SceneSpec::preset(name)
            .with_context(|| format!("unknown preset {name:?}; available: {}", SceneSpec::PRESETS.join(", "))),
        (None, None) => bail!("either --spec or --preset is required"),
    }
}

fn scene(source: &SceneSource, out: &Path, frames: Option<usize>) -> Result<()> {
    let mut spec = scene_spec(source)?;
    if let Some(n) = frames {
        spec.frames = n;
    }
    spec.validate()?;
    spec.write_sequence(out)?;
    log::info!("{} frames written to {}", spec.frames, out.display());
    Ok(())
}

fn bench(dir: Option<&Path>, preset: &str, frames: usize, config: Option<&Path>) -> Result<()> {
    let cfg = load_config(config)?;
    let mut state = OdometryState::new(cfg.clone());
    let mut iterations = Vec::new();
    let mut record = |out: mulls::frontend::FrameOutput| {
        if let Some(r) = out.registration {
            iterations.push(r.iterations);
        }
    };
    match dir {
        Some(d) => {
            for path in scan_paths(d, Some(frames))? {
                record(state.process_frame(&load_scan(&path, &cfg)?)?);
            }
        }
        None => {
            let mut spec = scene_spec(&SceneSource {
                spec: None,
                preset: Some(preset.to_string()),
            })?;
            spec.frames = spec.frames.min(frames);
            for i in 0..spec.frames {
                let (cloud, _) = spec.generate_frame(i);
                record(state.process_frame(&cloud)?);
            }
        }
    }
    let timings: Vec<_> = state.trajectory().records().iter().map(|r| r.timings).collect();
    let report = MetricReport {
        timing: timing_summary(&timings),
        ..Default::default()
    };
    println!("{} frames", timings.len());
    for t in &report.timing {
        println!("{:<24} mean {:>8.2} ms  p95 {:>8.2} ms", t.stage, t.mean_ms, t.p95_ms);
    }
    if !iterations.is_empty() {
        let mean = iterations.iter().sum::<usize>() as f64 / iterations.len() as f64;
        println!("{:<24} mean {:>8.1}", "scan-to-map iterations", mean);
    }
    Ok(())
}
