//! Manifest-driven pipeline CLI: annotate sequences, extract submaps,
//! evaluate retrieval and depth estimation, and generate synthetic
//! sequences for end-to-end runs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::Point3;

use wildannot_core::deptheval::{Delta1Convention, DistributionCollector, MetricsAccumulator};
use wildannot_core::error::CoreError;
use wildannot_core::geom::CameraRig;
use wildannot_core::manifest::SequenceManifest;
use wildannot_core::normals::NormalParams;
use wildannot_core::pipeline::{
    annotate_sequence, export_synthetic_sequence, write_submap_sequence, AnnotateOptions,
    GhprConfigOpt, NormalParamsOpt,
};
use wildannot_core::placerec::{
    build_splits, environment_of, evaluate_cross_modal, evaluate_recall, DescriptorSet,
    DistanceMetric, EvalConfig, EvalMode, RecallReport,
};
use wildannot_core::render::decode_depth;
use wildannot_core::submap::SubmapSpec;
use wildannot_core::synth::{gen_forest, gen_plane, gen_sphere, ForestSpec};
use wildannot_core::visibility::GhprConfig;
use wildannot_core::{io, pipeline, Result};

#[derive(Parser)]
#[command(
    name = "wildannot",
    about = "Semi-dense depth/normal annotation from lidar maps, plus retrieval and depth evaluation",
    version
)]
struct Cli {
    /// Worker threads (env fallback WILDANNOT_JOBS; default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render depth + normal images for every frame of a sequence.
    Annotate(AnnotateArgs),
    /// Extract local submaps along the trajectory and write them as PLY.
    Submaps(SubmapsArgs),
    /// Recall@N place-recognition evaluation over descriptor files.
    Eval(EvalArgs),
    /// Depth metrics between prediction and ground-truth directories.
    DepthEval(DepthEvalArgs),
    /// Depth-distribution statistics over a directory of depth images.
    Stats(StatsArgs),
    /// Generate a synthetic sequence (map, trajectory, rig, manifest).
    Synth(SynthArgs),
}

#[derive(Args)]
struct AnnotateArgs {
    /// Sequence manifest JSON.
    #[arg(long)]
    manifest: PathBuf,
    /// Output root; images land in <out>/<sequence>/{depth,normal}.
    #[arg(long)]
    out: PathBuf,
    /// Inversion-kernel exponent (must be < 0).
    #[arg(long, default_value_t = -0.01)]
    gamma: f64,
    /// Working-set radius around the camera, meters.
    #[arg(long, default_value_t = 60.0)]
    crop_radius: f64,
    /// Normal-estimation neighborhood radius, meters.
    #[arg(long, default_value_t = 0.5)]
    normal_radius: f64,
    /// Minimum neighbors (excluding the point) for a valid normal.
    #[arg(long, default_value_t = 5)]
    min_neighbors: usize,
    /// Also write per-frame visibility stage dumps (index,stage_dropped).
    #[arg(long, default_value_t = false)]
    debug_dump: bool,
}

#[derive(Args)]
struct SubmapsArgs {
    /// Sequence manifest JSON.
    #[arg(long)]
    manifest: PathBuf,
    /// Output directory for PLY submaps and the index JSON.
    #[arg(long)]
    out: PathBuf,
    /// Submap radius, meters.
    #[arg(long, default_value_t = 30.0)]
    radius: f64,
    /// Accumulation time window (total width, +/- window/2), seconds.
    #[arg(long, default_value_t = 1.0)]
    window: f64,
    /// Disable time-window filtering (maps without timestamps need this).
    #[arg(long, default_value_t = false)]
    no_time_window: bool,
    /// Spacing between submap centers along the trajectory, seconds.
    #[arg(long, default_value_t = 0.5)]
    stride: f64,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum EvalTask {
    Vpr,
    Lpr,
    Cmpr,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum EvalModeArg {
    Intra,
    Inter,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum MetricArg {
    Euclidean,
    Cosine,
}

#[derive(Args)]
struct EvalArgs {
    /// vpr and lpr use --descriptors; cmpr retrieves submaps for image
    /// queries (--query-descriptors vs --database-descriptors).
    #[arg(long, value_enum)]
    task: EvalTask,
    /// intra: within a sequence (temporal exclusion applies); inter:
    /// held-out sequences against the train split. cmpr is always inter.
    #[arg(long, value_enum, default_value_t = EvalModeArg::Intra)]
    mode: EvalModeArg,
    /// Cross-split fold whose sequences are held out for evaluation (1-4).
    #[arg(long, default_value_t = 1)]
    fold: usize,
    /// Descriptor file (vpr/lpr).
    #[arg(long)]
    descriptors: Option<PathBuf>,
    /// Sidecar JSON mapping id ranges to sequence labels (vpr/lpr).
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Image-query descriptor file (cmpr).
    #[arg(long)]
    query_descriptors: Option<PathBuf>,
    /// Sidecar for the image queries (cmpr).
    #[arg(long)]
    query_labels: Option<PathBuf>,
    /// Submap-database descriptor file (cmpr).
    #[arg(long)]
    database_descriptors: Option<PathBuf>,
    /// Sidecar for the submap database (cmpr).
    #[arg(long)]
    database_labels: Option<PathBuf>,
    /// Correct-match distance, meters (default: 25 for vpr/cmpr, 3 for lpr).
    #[arg(long)]
    threshold: Option<f64>,
    /// Recall cutoffs, comma separated.
    #[arg(long, default_value = "1,5", value_delimiter = ',')]
    recall_at: Vec<usize>,
    /// Intra-mode temporal exclusion window, seconds.
    #[arg(long, default_value_t = 600.0)]
    exclusion_window: f64,
    /// Descriptor distance.
    #[arg(long, value_enum, default_value_t = MetricArg::Euclidean)]
    metric: MetricArg,
    /// Output directory for report.json and report.csv.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DepthEvalArgs {
    /// Directory of predicted 16-bit depth PNGs.
    #[arg(long)]
    pred: PathBuf,
    /// Directory of ground-truth 16-bit depth PNGs (matched by relative path).
    #[arg(long)]
    gt: PathBuf,
    /// Metrics JSON output path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Score |pred-gt|/gt <= 0.25 instead of max-ratio < 1.25.
    #[arg(long, default_value_t = false)]
    delta1_literal: bool,
}

#[derive(Args)]
struct StatsArgs {
    /// Directory of 16-bit depth PNGs (searched recursively).
    #[arg(long)]
    depth: PathBuf,
    /// Output directory for distribution.csv and quantiles.json.
    #[arg(long)]
    out: PathBuf,
    /// Pixel subsampling rate in (0, 1].
    #[arg(long, default_value_t = 0.01)]
    rate: f64,
    /// Subsampling RNG seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum SceneKind {
    Forest,
    Plane,
    Sphere,
}

#[derive(Args)]
struct SynthArgs {
    /// Output directory for the generated sequence files.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = SceneKind::Forest)]
    scene: SceneKind,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Scene extent (side length), meters.
    #[arg(long, default_value_t = 40.0)]
    extent: f64,
    /// Ground sampling spacing, meters.
    #[arg(long, default_value_t = 0.3)]
    spacing: f64,
    /// Trunk count (forest scene).
    #[arg(long, default_value_t = 25)]
    trunks: usize,
    /// Camera frame rate, Hz.
    #[arg(long, default_value_t = 15.0)]
    frame_hz: f64,
    /// Traversal duration, seconds.
    #[arg(long, default_value_t = 4.0)]
    duration: f64,
    /// Sequence label written into the manifest.
    #[arg(long, default_value = "S-01")]
    label: String,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();

    let jobs = cli.jobs.or_else(|| {
        std::env::var("WILDANNOT_JOBS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    if let Some(jobs) = jobs {
        if jobs == 0 {
            eprintln!("error: --jobs must be >= 1");
            return ExitCode::from(1);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
        {
            eprintln!("error: failed to configure {jobs} worker threads: {e}");
            return ExitCode::from(1);
        }
    }

    let result = match cli.command {
        Command::Annotate(args) => cmd_annotate(args),
        Command::Submaps(args) => cmd_submaps(args),
        Command::Eval(args) => cmd_eval(args),
        Command::DepthEval(args) => cmd_depth_eval(args),
        Command::Stats(args) => cmd_stats(args),
        Command::Synth(args) => cmd_synth(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                CoreError::Io(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

fn cmd_annotate(args: AnnotateArgs) -> Result<()> {
    let manifest = SequenceManifest::read(&args.manifest)?;
    let loaded = manifest.load()?;
    let options = AnnotateOptions {
        ghpr: GhprConfigOpt(GhprConfig {
            gamma: args.gamma,
            crop_radius: args.crop_radius,
        }),
        normals: NormalParamsOpt(NormalParams {
            neighborhood_radius: args.normal_radius,
            min_neighbors: args.min_neighbors,
        }),
        debug_dump: args.debug_dump,
    };
    let summary = annotate_sequence(
        &loaded.map,
        &loaded.trajectory,
        &loaded.rig,
        &loaded.frames,
        &manifest.sequence_label,
        &args.out,
        &options,
    )?;
    let c = summary.stage_counts;
    log::info!(
        "{}: {} frames written, {} skipped",
        manifest.sequence_label,
        summary.frames_written,
        summary.frames_skipped
    );
    log::info!(
        "stage counts: candidates {} -> frustum {} -> backface {} -> visible {}",
        c.candidates,
        c.after_frustum,
        c.after_backface,
        c.after_ghpr
    );
    println!("{}", summary.index_path.display());
    Ok(())
}

fn cmd_submaps(args: SubmapsArgs) -> Result<()> {
    let manifest = SequenceManifest::read(&args.manifest)?;
    let loaded = manifest.load()?;
    let spec = SubmapSpec {
        radius: args.radius,
        time_window: if args.no_time_window {
            None
        } else {
            Some(args.window)
        },
        stride: args.stride,
    };
    spec.validate()?;
    let declared = manifest
        .declared_stats
        .as_ref()
        .and_then(|s| s.submap_count);
    let index_path = write_submap_sequence(
        &loaded.map,
        &loaded.trajectory,
        &spec,
        &manifest.sequence_label,
        &args.out,
        declared,
    )?;
    println!("{}", index_path.display());
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let mode = match (args.task, args.mode) {
        (EvalTask::Cmpr, _) => EvalMode::Inter,
        (_, EvalModeArg::Intra) => EvalMode::Intra,
        (_, EvalModeArg::Inter) => EvalMode::Inter,
    };
    let mut config = match args.task {
        EvalTask::Vpr => EvalConfig::vpr(mode),
        EvalTask::Lpr => EvalConfig::lpr(mode),
        EvalTask::Cmpr => EvalConfig::cmpr(),
    };
    if let Some(t) = args.threshold {
        config.positive_threshold = t;
    }
    config.recall_ns = args.recall_at.clone();
    config.intra_exclusion_window = args.exclusion_window;
    config.metric = match args.metric {
        MetricArg::Euclidean => DistanceMetric::Euclidean,
        MetricArg::Cosine => DistanceMetric::Cosine,
    };
    config.validate()?;
    if !(1..=4).contains(&args.fold) {
        return Err(CoreError::InvalidInput(format!(
            "fold must be in 1..=4, got {}",
            args.fold
        )));
    }

    let report = match args.task {
        EvalTask::Vpr | EvalTask::Lpr => {
            let (bin, labels) = match (&args.descriptors, &args.labels) {
                (Some(b), Some(l)) => (b, l),
                _ => {
                    return Err(CoreError::InvalidInput(
                        "vpr/lpr require --descriptors and --labels".into(),
                    ))
                }
            };
            let set = io::read_descriptors(bin, labels)?;
            let folds = build_splits(&set.sequences())?;
            let fold = &folds[args.fold - 1];
            let queries = subset(&set, &fold.test);
            match mode {
                EvalMode::Intra => evaluate_recall(&queries, &queries, &config)?,
                EvalMode::Inter => {
                    let database = subset(&set, &fold.train);
                    let mut report = evaluate_recall(&queries, &database, &config)?;
                    // Cross-forest cells carry no revisits; keep the
                    // same-environment pairs the protocol defines.
                    report.cells.retain(|c| {
                        environment_of(&c.query_sequence) == environment_of(&c.database_group)
                    });
                    report
                }
            }
        }
        EvalTask::Cmpr => {
            let (qb, ql, db, dl) = match (
                &args.query_descriptors,
                &args.query_labels,
                &args.database_descriptors,
                &args.database_labels,
            ) {
                (Some(a), Some(b), Some(c), Some(d)) => (a, b, c, d),
                _ => {
                    return Err(CoreError::InvalidInput(
                        "cmpr requires --query-descriptors/--query-labels and \
                         --database-descriptors/--database-labels"
                            .into(),
                    ))
                }
            };
            let images = io::read_descriptors(qb, ql)?;
            let submaps = io::read_descriptors(db, dl)?;
            let folds = build_splits(&images.sequences())?;
            let fold = &folds[args.fold - 1];
            let queries = subset(&images, &fold.test);
            evaluate_cross_modal(&queries, &submaps, &config)?
        }
    };

    write_report(&args.out, &report, args.task, mode, args.fold)
}

fn subset(set: &DescriptorSet, labels: &[String]) -> DescriptorSet {
    let keep: Vec<usize> = (0..set.len())
        .filter(|&i| labels.contains(&set.sequence_labels[i]))
        .collect();
    let mut vectors = Vec::with_capacity(keep.len() * set.dim);
    for &i in &keep {
        vectors.extend_from_slice(set.vector(i));
    }
    DescriptorSet::new(
        keep.iter().map(|&i| set.ids[i]).collect(),
        vectors,
        set.dim,
        keep.iter().map(|&i| set.poses[i]).collect(),
        keep.iter().map(|&i| set.sequence_labels[i].clone()).collect(),
        keep.iter().map(|&i| set.timestamps[i]).collect(),
    )
    .expect("subset of a valid descriptor set is valid")
}

fn write_report(
    out_dir: &Path,
    report: &RecallReport,
    task: EvalTask,
    mode: EvalMode,
    fold: usize,
) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    let mut json = report.to_json();
    let obj = json.as_object_mut().unwrap();
    obj.insert(
        "task".into(),
        serde_json::json!(match task {
            EvalTask::Vpr => "vpr",
            EvalTask::Lpr => "lpr",
            EvalTask::Cmpr => "cmpr",
        }),
    );
    obj.insert(
        "mode".into(),
        serde_json::json!(match mode {
            EvalMode::Intra => "intra",
            EvalMode::Inter => "inter",
        }),
    );
    obj.insert("fold".into(), serde_json::json!(fold));
    let json_path = out_dir.join("report.json");
    std::fs::write(&json_path, serde_json::to_string_pretty(&json).unwrap() + "\n")?;
    std::fs::write(out_dir.join("report.csv"), report.to_csv())?;
    println!("{}", json_path.display());
    Ok(())
}

/// Recursively collect files with the given extension, sorted by relative
/// path for determinism.
fn collect_files(root: &Path, ext: &str) -> Result<Vec<PathBuf>> {
    fn walk(dir: &Path, ext: &str, out: &mut Vec<PathBuf>) -> std::io::Result<()> {
        for entry in std::fs::read_dir(dir)? {
            let entry = entry?;
            let path = entry.path();
            if path.is_dir() {
                walk(&path, ext, out)?;
            } else if path.extension().and_then(|e| e.to_str()) == Some(ext) {
                out.push(path);
            }
        }
        Ok(())
    }
    let mut files = Vec::new();
    walk(root, ext, &mut files)?;
    files.sort();
    Ok(files)
}

fn cmd_depth_eval(args: DepthEvalArgs) -> Result<()> {
    let convention = if args.delta1_literal {
        Delta1Convention::Literal
    } else {
        Delta1Convention::Ratio
    };
    let gt_files = collect_files(&args.gt, "png")?;
    if gt_files.is_empty() {
        return Err(CoreError::InvalidInput(format!(
            "no ground-truth .png files under {}",
            args.gt.display()
        )));
    }
    let mut per_sequence: BTreeMap<String, MetricsAccumulator> = BTreeMap::new();
    let mut aggregate = MetricsAccumulator::default();
    let mut matched = 0usize;
    let mut skipped = 0usize;
    for gt_path in &gt_files {
        let rel = gt_path.strip_prefix(&args.gt).unwrap();
        let pred_path = args.pred.join(rel);
        if !pred_path.exists() {
            continue;
        }
        let gt = match decode_depth(&std::fs::read(gt_path)?) {
            Ok(f) => f,
            Err(CoreError::Image(m)) => {
                log::warn!("{}: {m}; file skipped", gt_path.display());
                skipped += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        let pred = match decode_depth(&std::fs::read(&pred_path)?) {
            Ok(f) => f,
            Err(CoreError::Image(m)) => {
                log::warn!("{}: {m}; file skipped", pred_path.display());
                skipped += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        let sequence = rel
            .components()
            .next()
            .map(|c| c.as_os_str().to_string_lossy().to_string())
            .unwrap_or_else(|| ".".into());
        let acc = per_sequence.entry(sequence).or_default();
        match acc.add_frame(&pred, &gt, convention) {
            Ok(()) => {
                aggregate.add_frame(&pred, &gt, convention)?;
                matched += 1;
            }
            Err(CoreError::ShapeMismatch(m)) => {
                log::warn!("{}: {m}; pair skipped", rel.display());
                skipped += 1;
            }
            Err(e) => return Err(e),
        }
    }
    if matched == 0 {
        return Err(CoreError::InvalidInput(
            "no prediction/ground-truth pairs matched".into(),
        ));
    }

    let mut seq_json = serde_json::Map::new();
    for (seq, acc) in &per_sequence {
        if acc.pixel_count() > 0 {
            seq_json.insert(seq.clone(), serde_json::to_value(acc.finalize()?).unwrap());
        }
    }
    let json = serde_json::json!({
        "aggregate": aggregate.finalize()?,
        "per_sequence": seq_json,
        "frame_pairs": matched,
        "skipped_pairs": skipped,
        "delta1_convention": if args.delta1_literal { "literal" } else { "ratio" },
    });
    let text = serde_json::to_string_pretty(&json).unwrap() + "\n";
    match &args.out {
        Some(path) => {
            std::fs::write(path, text)?;
            println!("{}", path.display());
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn cmd_stats(args: StatsArgs) -> Result<()> {
    let files = collect_files(&args.depth, "png")?;
    if files.is_empty() {
        return Err(CoreError::InvalidInput(format!(
            "no .png files under {}",
            args.depth.display()
        )));
    }
    let mut collector = DistributionCollector::new(args.rate, args.seed)?;
    let mut frames = 0usize;
    for f in &files {
        match decode_depth(&std::fs::read(f)?) {
            Ok(frame) => {
                collector.add_frame(&frame);
                frames += 1;
            }
            Err(CoreError::Image(m)) => log::warn!("{}: {m}; file skipped", f.display()),
            Err(e) => return Err(e),
        }
    }
    if frames == 0 {
        return Err(CoreError::InvalidInput(
            "no decodable 16-bit depth images found".into(),
        ));
    }
    let dist = collector.finish();
    std::fs::create_dir_all(&args.out)?;
    std::fs::write(args.out.join("distribution.csv"), dist.to_csv())?;
    let quantiles = serde_json::json!({
        "frames": frames,
        "rate": args.rate,
        "seed": args.seed,
        "quantiles": dist.quantiles(),
    });
    let q_path = args.out.join("quantiles.json");
    std::fs::write(&q_path, serde_json::to_string_pretty(&quantiles).unwrap() + "\n")?;
    println!("{}", q_path.display());
    Ok(())
}

fn cmd_synth(args: SynthArgs) -> Result<()> {
    if !(args.frame_hz > 0.0 && args.duration > 0.0) {
        return Err(CoreError::InvalidInput(
            "frame rate and duration must be positive".into(),
        ));
    }
    let scene = match args.scene {
        SceneKind::Forest => gen_forest(
            &ForestSpec {
                extent: args.extent,
                ground_spacing: args.spacing,
                trunk_count: args.trunks,
                sweep_duration: args.duration,
                ..ForestSpec::default()
            },
            args.seed,
        ),
        SceneKind::Plane => gen_plane(args.extent, args.spacing),
        SceneKind::Sphere => gen_sphere(
            Point3::new(0.0, 0.0, args.extent / 2.0),
            args.extent / 6.0,
            50_000,
        ),
    };
    let margin = args.extent * 0.45;
    let trajectory = wildannot_core::synth::straight_trajectory(
        -margin,
        margin,
        0.0,
        1.8,
        0.0,
        args.duration,
        (args.duration.ceil() as usize * 10).max(2),
    )?;
    let rig = CameraRig::new(
        300.0,
        300.0,
        256.0,
        192.0,
        512,
        384,
        wildannot_core::geom::Pose::identity(),
    )?;
    let manifest_path = export_synthetic_sequence(
        &scene,
        &trajectory,
        &rig,
        args.frame_hz,
        &args.label,
        &args.out,
    )?;
    log::info!(
        "scene: {} points, trajectory {:.1} m",
        scene.len(),
        pipeline::trajectory_length(&trajectory)
    );
    println!("{}", manifest_path.display());
    Ok(())
}
