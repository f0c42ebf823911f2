//! Command-line surface for the detection engine: detect, train, eval,
//! bench and pack-inspect.
//!
//! Exit codes: 0 success, 2 usage error, 3 model/image format error,
//! 4 training error, 5 partial failure (some inputs processed, some not).

use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use ccnc::cascade::{DecisionRule, Detection, ExecMode};
use ccnc::eval::{
    group_by_image, parse_detections_jsonl, read_annotations, score_fddb, score_prf1,
    DetectionRecord, Rect, ScoredRect, Shape,
};
use ccnc::imageio::{draw_rect, load_image, write_pgm};
use ccnc::model::{load_model, reference_specs, save_model, CascadeModel, STAGE1_WINDOW};
use ccnc::pack::{default_strip_width, pack_fcnr};
use ccnc::pipeline;
use ccnc::pyramid::{build_pyramid, resize_bilinear};
use ccnc::train::{log_csv, train_network, EpochLog, TrainConfig};
use ccnc::{train_cascade, DetectorParams, Error, ImagePlane, RunStats};
use clap::{Args, Parser, Subcommand, ValueEnum};

const EXIT_USAGE: u8 = 2;
const EXIT_FORMAT: u8 = 3;
const EXIT_TRAINING: u8 = 4;
const EXIT_PARTIAL: u8 = 5;

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Format(_) | Error::Truncated(_) | Error::Geometry(_) | Error::Decode(_)
        | Error::Packing(_) => EXIT_FORMAT,
        Error::Training(_) => EXIT_TRAINING,
        Error::Dimension(_) | Error::Io(_) => EXIT_USAGE,
    }
}

#[derive(Parser)]
#[command(name = "ccnc", version, about = "Compact convolutional cascade face detector")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Detect faces in images; emits detection JSONL and run-statistics CSV
    Detect(DetectArgs),
    /// Train a cascade on the built-in synthetic task or labeled sample dirs
    Train(TrainArgs),
    /// Score a detection file against annotations
    Eval(EvalArgs),
    /// Benchmark execution modes over a set of frames
    Bench(BenchArgs),
    /// Show how an image's pyramid packs into a single strip
    PackInspect(PackInspectArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum RuleArg {
    Strict,
    Weak,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Sync,
    Async,
    Partitioned,
    Patchwork,
}

/// Detector knobs shared by detect and bench.
#[derive(Args)]
struct DetectorArgs {
    /// Smallest face size in pixels (window width at the finest scale)
    #[arg(long, default_value_t = 15)]
    min_size: usize,
    /// Pyramid downscale ratio between levels
    #[arg(long, default_value_t = 1.05)]
    scale_factor: f64,
    /// Stage-1 response threshold
    #[arg(long, default_value_t = 0.0)]
    t1: f32,
    /// Selective-unit response threshold
    #[arg(long, default_value_t = 0.0)]
    t2: f32,
    /// Minimum count of selective responses above T2
    #[arg(long, default_value_t = 1)]
    tm: usize,
    /// Minimum cluster size for a final detection
    #[arg(long, default_value_t = 1)]
    min_neighbors: usize,
    /// Decision rule combining the two selective networks
    #[arg(long, value_enum, default_value_t = RuleArg::Strict)]
    rule: RuleArg,
    /// Execution mode
    #[arg(long, value_enum, default_value_t = ModeArg::Sync)]
    mode: ModeArg,
    /// Worker threads for async/partitioned modes
    #[arg(long, default_value_t = 2)]
    workers: usize,
}

impl DetectorArgs {
    fn params(&self) -> DetectorParams {
        DetectorParams {
            min_size: self.min_size,
            scale_factor: self.scale_factor,
            t1: self.t1,
            t2: self.t2,
            tm: self.tm,
            min_neighbors: self.min_neighbors,
            rule: match self.rule {
                RuleArg::Strict => DecisionRule::Strict,
                RuleArg::Weak => DecisionRule::Weak,
            },
            mode: match self.mode {
                ModeArg::Sync => ExecMode::Sync,
                ModeArg::Async => ExecMode::Async,
                ModeArg::Partitioned => ExecMode::Partitioned,
                ModeArg::Patchwork => ExecMode::Patchwork,
            },
            ..Default::default()
        }
    }
}

#[derive(Args)]
struct DetectArgs {
    /// Model file; defaults to $CCNC_MODEL
    #[arg(long, env = "CCNC_MODEL")]
    model: PathBuf,
    #[command(flatten)]
    detector: DetectorArgs,
    /// Write detection JSONL here instead of stdout
    #[arg(long)]
    output: Option<PathBuf>,
    /// Write per-image run statistics CSV here
    #[arg(long)]
    stats: Option<PathBuf>,
    /// Write copies of the inputs with detection rectangles burned in (PGM)
    #[arg(long)]
    annotate_dir: Option<PathBuf>,
    /// Input images (PNG or PGM)
    #[arg(required = true)]
    images: Vec<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    /// Where to write the trained model
    #[arg(long)]
    output: PathBuf,
    /// Write the per-epoch training log CSV here
    #[arg(long)]
    log: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Small fast configuration (fewer samples and epochs)
    #[arg(long)]
    quick: bool,
    /// Override the number of epochs per network
    #[arg(long)]
    epochs: Option<usize>,
    /// Override the initial learning rate (0 trains nothing)
    #[arg(long)]
    learning_rate: Option<f32>,
    /// Override synthetic training samples per class
    #[arg(long)]
    train_per_class: Option<usize>,
    /// Override hard-negative mining rounds for the scanning net
    #[arg(long)]
    mining_rounds: Option<usize>,
    /// Directory of positive face chips (enables sample-dir training)
    #[arg(long, requires = "neg_dir")]
    pos_dir: Option<PathBuf>,
    /// Directory of negative background chips
    #[arg(long, requires = "pos_dir")]
    neg_dir: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProtocolArg {
    /// Ellipse-list annotations, ROC over score thresholds
    Fddb,
    /// Rectangle CSV annotations (image,x,y,w,h)
    Rect,
}

#[derive(Args)]
struct EvalArgs {
    /// Detection JSONL produced by `ccnc detect`
    #[arg(long)]
    detections: PathBuf,
    /// Annotation file in the chosen protocol's format
    #[arg(long)]
    annotations: PathBuf,
    #[arg(long, value_enum)]
    protocol: ProtocolArg,
    /// IoU threshold for a match
    #[arg(long, default_value_t = 0.5)]
    iou: f64,
    /// Score annotations against scaled detection variants as well
    #[arg(long)]
    multiscale: bool,
    /// Write the ROC CSV (threshold,fp,tpr) here
    #[arg(long)]
    roc_out: Option<PathBuf>,
    /// Write the summary CSV (precision,recall,f1,continuous) here
    #[arg(long)]
    summary_out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Model file; defaults to $CCNC_MODEL
    #[arg(long, env = "CCNC_MODEL")]
    model: PathBuf,
    #[command(flatten)]
    detector: DetectorArgs,
    /// Repetitions per frame/mode pair; the median is reported
    #[arg(long, default_value_t = 5)]
    reps: usize,
    /// Write the bench CSV here instead of stdout
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(required = true)]
    images: Vec<PathBuf>,
}

#[derive(Args)]
struct PackInspectArgs {
    #[arg(long, default_value_t = 15)]
    min_size: usize,
    #[arg(long, default_value_t = 1.05)]
    scale_factor: f64,
    /// Horizontal alignment of placements in the strip
    #[arg(long, default_value_t = 4)]
    align: usize,
    /// Write the packed strip as a PGM image
    #[arg(long)]
    strip_out: Option<PathBuf>,
    image: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Detect(args) => cmd_detect(args),
        Command::Train(args) => cmd_train(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Bench(args) => cmd_bench(args),
        Command::PackInspect(args) => cmd_pack_inspect(args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {}", err);
            ExitCode::from(exit_code(&err))
        }
    }
}

// ---- detect -----------------------------------------------------------

fn detection_record(image: &Path, d: &Detection) -> DetectionRecord {
    DetectionRecord {
        image: image.display().to_string(),
        x: d.x,
        y: d.y,
        w: d.w,
        h: d.h,
        score: d.score,
        neighbors: d.neighbors,
    }
}

fn run_one(
    image: &ImagePlane,
    model: &CascadeModel,
    params: &DetectorParams,
    workers: usize,
) -> ccnc::Result<(Vec<Detection>, RunStats)> {
    pipeline::run(image, model, params, workers)
}

fn cmd_detect(args: DetectArgs) -> ccnc::Result<u8> {
    let model = load_model(&args.model)?;
    let params = args.detector.params();
    params.validate()?;
    if let Some(dir) = &args.annotate_dir {
        fs::create_dir_all(dir)?;
    }

    let mut jsonl = String::new();
    let mut stats_csv = format!("image,{}\n", RunStats::table_csv_header());
    let mut failures = 0usize;
    let mut successes = 0usize;
    for path in &args.images {
        let frame = match load_image(path) {
            Ok(f) => f,
            Err(e) => {
                eprintln!("skipping {}: {}", path.display(), e);
                failures += 1;
                continue;
            }
        };
        let (detections, stats) = run_one(&frame, &model, &params, args.detector.workers)?;
        for d in &detections {
            let record = detection_record(path, d);
            jsonl.push_str(&serde_json::to_string(&record).expect("serializable record"));
            jsonl.push('\n');
        }
        stats_csv.push_str(&format!("{},{}\n", path.display(), stats.table_csv_row()));
        if let Some(dir) = &args.annotate_dir {
            let mut annotated = frame.clone();
            for d in &detections {
                draw_rect(
                    &mut annotated,
                    d.x.round() as i64,
                    d.y.round() as i64,
                    d.w.round() as i64,
                    d.h.round() as i64,
                );
            }
            let stem = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "frame".into());
            write_pgm(&annotated, dir.join(format!("{}.pgm", stem)))?;
        }
        successes += 1;
    }

    match &args.output {
        Some(path) => fs::write(path, jsonl)?,
        None => print!("{}", jsonl),
    }
    if let Some(path) = &args.stats {
        fs::write(path, stats_csv)?;
    }
    if failures > 0 {
        eprintln!("{} of {} images failed", failures, failures + successes);
        return Ok(if successes > 0 { EXIT_PARTIAL } else { EXIT_USAGE });
    }
    Ok(0)
}

// ---- train ------------------------------------------------------------

fn cmd_train(args: TrainArgs) -> ccnc::Result<u8> {
    let mut cfg = if args.quick {
        TrainConfig::quick(args.seed)
    } else {
        TrainConfig {
            seed: args.seed,
            ..TrainConfig::default()
        }
    };
    if let Some(e) = args.epochs {
        cfg.epochs = e;
    }
    if let Some(lr) = args.learning_rate {
        cfg.learning_rate = lr;
    }
    if let Some(t) = args.train_per_class {
        cfg.train_per_class = t;
    }
    if let Some(m) = args.mining_rounds {
        cfg.mining_rounds = m;
    }

    let (model, logs, errors) = match (&args.pos_dir, &args.neg_dir) {
        (Some(pos), Some(neg)) => train_from_dirs(pos, neg, &cfg)?,
        _ => {
            let trained = train_cascade(&cfg)?;
            (trained.model, trained.logs, trained.holdout_errors)
        }
    };
    if logs.iter().any(|l| !l.train_loss.is_finite()) {
        return Err(Error::Training("training diverged: non-finite loss".into()));
    }

    save_model(&model, &args.output)?;
    if let Some(path) = &args.log {
        fs::write(path, log_csv(&logs))?;
    }
    println!(
        "holdout errors: stage1 {:.4}, stage2 {:.4}, stage3 {:.4}",
        errors[0], errors[1], errors[2]
    );
    println!("model written to {}", args.output.display());
    Ok(0)
}

/// Load every image in a directory, sorted by file name for determinism.
fn load_dir(dir: &Path) -> ccnc::Result<Vec<ImagePlane>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .collect();
    paths.sort();
    let mut out = Vec::with_capacity(paths.len());
    for p in &paths {
        out.push(load_image(p)?);
    }
    if out.is_empty() {
        return Err(Error::Dimension(format!(
            "no images found in {}",
            dir.display()
        )));
    }
    Ok(out)
}

/// Train all three networks from user-supplied face and background chips.
/// Chips are resized to each network's receptive field; an 80/20 split
/// provides the holdout set.
fn train_from_dirs(
    pos_dir: &Path,
    neg_dir: &Path,
    cfg: &TrainConfig,
) -> ccnc::Result<(CascadeModel, Vec<EpochLog>, [f64; 3])> {
    cfg.validate()?;
    let pos = load_dir(pos_dir)?;
    let neg = load_dir(neg_dir)?;
    if pos.len() < 5 || neg.len() < 5 {
        return Err(Error::Dimension(
            "need at least 5 samples per class to split off a holdout set".into(),
        ));
    }

    let specs = reference_specs(cfg.pooling);
    let mut logs = Vec::new();
    let mut weights = Vec::with_capacity(3);
    let mut errors = [0.0f64; 3];
    for (net, spec) in specs.iter().enumerate() {
        let (rw, rh) = spec.receptive_field();
        let mut labeled: Vec<(ImagePlane, f32)> = Vec::new();
        let mut holdout: Vec<(ImagePlane, f32)> = Vec::new();
        for (class, target) in [(&pos, 1.0f32), (&neg, -1.0f32)] {
            let cut = class.len() - class.len() / 5;
            for (i, chip) in class.iter().enumerate() {
                let sized = resize_bilinear(chip, rw, rh).normalized();
                if i < cut {
                    labeled.push((sized, target));
                } else {
                    holdout.push((sized, target));
                }
            }
        }
        let (w, e) = train_network(net, spec, &mut labeled, &holdout, cfg, &mut logs)?;
        weights.push(w);
        errors[net] = e;
    }
    let w3 = weights.pop().expect("three networks trained");
    let w2 = weights.pop().expect("three networks trained");
    let w1 = weights.pop().expect("three networks trained");
    let model = CascadeModel::new(specs, [w1, w2, w3])?;
    Ok((model, logs, errors))
}

// ---- eval -------------------------------------------------------------

fn cmd_eval(args: EvalArgs) -> ccnc::Result<u8> {
    let det_text = fs::read_to_string(&args.detections)?;
    let records = parse_detections_jsonl(&det_text)?;
    let annotations = read_annotations(
        &args.annotations,
        matches!(args.protocol, ProtocolArg::Fddb),
    )?;
    let by_image = group_by_image(annotations);

    let mut dets_by_image: BTreeMap<String, Vec<ScoredRect>> = BTreeMap::new();
    for r in &records {
        dets_by_image.entry(r.image.clone()).or_default().push(ScoredRect {
            rect: Rect {
                x: r.x,
                y: r.y,
                w: r.w,
                h: r.h,
            },
            score: r.score,
        });
    }
    // detections naming images absent from the annotations are excluded
    let unknown: Vec<&String> = dets_by_image
        .keys()
        .filter(|k| !by_image.contains_key(*k))
        .collect();
    for image in &unknown {
        eprintln!("warning: detections for unannotated image {} ignored", image);
    }

    let images: Vec<(Vec<Shape>, Vec<ScoredRect>)> = by_image
        .iter()
        .map(|(image, shapes)| {
            (
                shapes.clone(),
                dets_by_image.get(image).cloned().unwrap_or_default(),
            )
        })
        .collect();

    // sweep over the observed score range
    let mut sweep: Vec<f32> = images
        .iter()
        .flat_map(|(_, d)| d.iter().map(|s| s.score))
        .collect();
    sweep.sort_by(|a, b| a.partial_cmp(b).unwrap());
    sweep.dedup();
    if sweep.is_empty() {
        sweep.push(0.0);
    }
    let fddb = score_fddb(&images, &sweep, args.iou);

    let rect_images: Vec<(Vec<Rect>, Vec<Rect>)> = images
        .iter()
        .map(|(shapes, dets)| {
            (
                shapes.iter().map(bounding_rect).collect(),
                dets.iter().map(|d| d.rect).collect(),
            )
        })
        .collect();
    let (precision, recall, f1) = score_prf1(&rect_images, args.multiscale, args.iou);

    let mut roc_csv = String::from("threshold,fp,tpr\n");
    for p in &fddb.roc {
        roc_csv.push_str(&format!(
            "{},{},{:.6}\n",
            p.threshold, p.false_positives, p.true_positive_rate
        ));
    }
    let summary_csv = format!(
        "precision,recall,f1,continuous\n{:.6},{:.6},{:.6},{:.6}\n",
        precision, recall, f1, fddb.continuous
    );

    match &args.roc_out {
        Some(path) => fs::write(path, &roc_csv)?,
        None => print!("{}", roc_csv),
    }
    match &args.summary_out {
        Some(path) => fs::write(path, &summary_csv)?,
        None => print!("{}", summary_csv),
    }
    Ok(0)
}

fn bounding_rect(shape: &Shape) -> Rect {
    match shape {
        Shape::Rect(r) => *r,
        Shape::Ellipse(e) => e.bounding_box(),
    }
}

// ---- bench ------------------------------------------------------------

fn median(mut xs: Vec<Duration>) -> Duration {
    xs.sort();
    xs[xs.len() / 2]
}

fn cmd_bench(args: BenchArgs) -> ccnc::Result<u8> {
    if args.reps == 0 {
        return Err(Error::Dimension("reps must be at least 1".into()));
    }
    let model = load_model(&args.model)?;
    let base = args.detector.params();
    base.validate()?;

    let mut csv = String::from(
        "frame,mode,workers,scan_ms,classify_ms,group_ms,total_ms,sliding,stage1,stage2,stage3,nms,fps\n",
    );
    for path in &args.images {
        let frame = load_image(path)?;
        for mode in [
            ExecMode::Sync,
            ExecMode::Async,
            ExecMode::Partitioned,
            ExecMode::Patchwork,
        ] {
            let params = DetectorParams { mode, ..base };
            let mut scan = Vec::with_capacity(args.reps);
            let mut classify = Vec::with_capacity(args.reps);
            let mut group = Vec::with_capacity(args.reps);
            let mut total = Vec::with_capacity(args.reps);
            let mut last_stats = None;
            for _ in 0..args.reps {
                let (_, stats) = run_one(&frame, &model, &params, args.detector.workers)?;
                scan.push(stats.scan_time);
                classify.push(stats.classify_time);
                group.push(stats.group_time);
                total.push(stats.total_time);
                last_stats = Some(stats);
            }
            let stats = last_stats.expect("at least one repetition");
            let total_med = median(total);
            let fps = if total_med.as_secs_f64() > 0.0 {
                1.0 / total_med.as_secs_f64()
            } else {
                f64::INFINITY
            };
            csv.push_str(&format!(
                "{},{},{},{:.3},{:.3},{:.3},{:.3},{},{:.1}\n",
                path.display(),
                stats.mode,
                stats.workers,
                median(scan).as_secs_f64() * 1e3,
                median(classify).as_secs_f64() * 1e3,
                median(group).as_secs_f64() * 1e3,
                total_med.as_secs_f64() * 1e3,
                stats.table_csv_row(),
                fps
            ));
        }
    }
    match &args.output {
        Some(path) => fs::write(path, &csv)?,
        None => print!("{}", csv),
    }
    Ok(0)
}

// ---- pack-inspect -----------------------------------------------------

fn cmd_pack_inspect(args: PackInspectArgs) -> ccnc::Result<u8> {
    if args.align == 0 {
        return Err(Error::Dimension("align must be at least 1".into()));
    }
    if args.scale_factor <= 1.0 {
        return Err(Error::Dimension("scale-factor must exceed 1".into()));
    }
    let frame = load_image(&args.image)?;
    let levels = build_pyramid(&frame, STAGE1_WINDOW, args.min_size, args.scale_factor);
    if levels.is_empty() {
        println!("image too small for any pyramid level");
        return Ok(0);
    }
    let strip_width = default_strip_width(&levels, args.align);
    let packed = pack_fcnr(&levels, strip_width, args.align)?;

    let used: usize = packed.placements.iter().map(|p| p.w * p.h).sum();
    let area = packed.width() * packed.height();
    println!(
        "{} levels packed into a {}x{} strip ({:.1}% occupancy)",
        levels.len(),
        packed.width(),
        packed.height(),
        100.0 * used as f64 / area.max(1) as f64
    );
    println!("level,scale,x,y,w,h");
    for p in &packed.placements {
        println!(
            "{},{:.4},{},{},{},{}",
            p.level, levels[p.level].scale, p.x, p.y, p.w, p.h
        );
    }
    if let Some(path) = &args.strip_out {
        write_pgm(&packed.strip, path)?;
        println!("strip written to {}", path.display());
    }
    let _ = std::io::stdout().flush();
    Ok(0)
}
