mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use pantrack::io::{self, SequenceDir};
use pantrack::metrics::evaluate_sequence;
use pantrack::oracle::{FileSegmenter, Segmenter};
use pantrack::pipeline::{infer_sequence, oracle_for, track_sequence, Sequence};
use pantrack::projection::{project, project_labels};
use pantrack::render::render_stacked;
use pantrack::simulator::generate_sequence;
use pantrack::{ProjectionMode, Taxonomy, Trio};

use config::{RunConfig, UsageError};

/// LiDAR panoptic tracking: simulate, segment, track, evaluate, render.
#[derive(Parser)]
#[command(name = "pantrack", version)]
struct Cli {
    /// Print nothing but errors.
    #[arg(long, short, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic labelled sequence.
    Simulate(SimulateArgs),
    /// Write oracle predictions for every clip, for later `track --segmenter files`.
    Infer(InferArgs),
    /// Track a sequence and write per-scan global panoptic labels.
    Track(TrackArgs),
    /// Score predicted labels against ground truth.
    Evaluate(EvaluateArgs),
    /// Render one frame's range and panoptic views as a PPM image.
    Render(RenderArgs),
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    frames: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
    /// Flat `key = value` config file; flags win over it.
    #[arg(long)]
    config: Option<PathBuf>,
}

/// Noise applied by the oracle segmenter.
#[derive(Args)]
struct NoiseArgs {
    #[arg(long)]
    confusion: Option<f64>,
    #[arg(long)]
    jitter: Option<u32>,
    #[arg(long)]
    split: Option<f64>,
    #[arg(long)]
    merge: Option<f64>,
    #[arg(long)]
    drop: Option<f64>,
    #[arg(long)]
    score_floor: Option<f64>,
    /// Noise seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct PipelineArgs {
    /// Hand labels to the tracker point by point instead of through the range image.
    #[arg(long)]
    bypass_projection: bool,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct InferArgs {
    #[arg(long)]
    seq: PathBuf,
    /// Defaults to `<seq>/pred`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    noise: NoiseArgs,
    #[command(flatten)]
    pipeline: PipelineArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum SegmenterKind {
    Oracle,
    Files,
}

#[derive(Args)]
struct TrackArgs {
    #[arg(long)]
    seq: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "oracle")]
    segmenter: SegmenterKind,
    /// Prediction directory for `--segmenter files`; defaults to `<seq>/pred`.
    #[arg(long)]
    pred: Option<PathBuf>,
    #[command(flatten)]
    noise: NoiseArgs,
    #[command(flatten)]
    pipeline: PipelineArgs,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Directory of predicted `NNNNNN.label` files.
    #[arg(long)]
    pred: PathBuf,
    /// Directory of ground-truth `NNNNNN.label` files.
    #[arg(long)]
    gt: PathBuf,
    /// Write the full report as JSON.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Defaults to `taxonomy.txt` next to the ground-truth directory, then the built-in taxonomy.
    #[arg(long)]
    taxonomy: Option<PathBuf>,
}

#[derive(Args)]
struct RenderArgs {
    #[arg(long)]
    seq: PathBuf,
    /// Directory holding the frame's `NNNNNN.label`.
    #[arg(long)]
    labels: PathBuf,
    #[arg(long)]
    frame: u32,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
}

fn say(quiet: bool, line: impl AsRef<str>) {
    if !quiet {
        println!("{}", line.as_ref());
    }
}

fn pipeline_config(args: &PipelineArgs, noise: &NoiseArgs) -> anyhow::Result<RunConfig> {
    let mut cfg = RunConfig::load(args.config.as_deref())?;
    if args.bypass_projection {
        cfg.pipeline.mode = ProjectionMode::Bypass;
    }
    let n = &mut cfg.noise;
    n.class_confusion_rate = noise.confusion.unwrap_or(n.class_confusion_rate);
    n.boundary_jitter_px = noise.jitter.unwrap_or(n.boundary_jitter_px);
    n.instance_split_prob = noise.split.unwrap_or(n.instance_split_prob);
    n.instance_merge_prob = noise.merge.unwrap_or(n.instance_merge_prob);
    n.drop_prob = noise.drop.unwrap_or(n.drop_prob);
    n.score_floor = noise.score_floor.unwrap_or(n.score_floor);
    n.seed = noise.seed.unwrap_or(n.seed);
    Ok(cfg)
}

fn simulate(args: SimulateArgs, quiet: bool) -> anyhow::Result<()> {
    let mut cfg = RunConfig::load(args.config.as_deref())?;
    cfg.world.duration_frames = args.frames.unwrap_or(cfg.world.duration_frames);
    cfg.world.seed = args.seed.unwrap_or(cfg.world.seed);
    let s = generate_sequence(&cfg.world, &cfg.beams(), &args.out)?;
    say(
        quiet,
        format!(
            "frames {} points {} tracks {}",
            s.frames, s.points, s.tracks
        ),
    );
    Ok(())
}

fn infer(args: InferArgs, quiet: bool) -> anyhow::Result<()> {
    let cfg = pipeline_config(&args.pipeline, &args.noise)?;
    let dir = SequenceDir::new(&args.seq);
    let seq = Sequence::load(&dir)?;
    let out = args.out.unwrap_or_else(|| dir.pred_dir());
    let mut oracle = oracle_for(&seq, &dir, cfg.noise)?;
    let clips = infer_sequence(&seq, &mut oracle, &cfg.pipeline, &out)?;
    say(quiet, format!("clips {clips}"));
    Ok(())
}

fn track(args: TrackArgs, quiet: bool) -> anyhow::Result<()> {
    let cfg = pipeline_config(&args.pipeline, &args.noise)?;
    let dir = SequenceDir::new(&args.seq);
    let seq = Sequence::load(&dir)?;
    let mut segmenter: Box<dyn Segmenter> = match args.segmenter {
        SegmenterKind::Oracle => Box::new(oracle_for(&seq, &dir, cfg.noise)?),
        SegmenterKind::Files => Box::new(FileSegmenter::new(
            args.pred.unwrap_or_else(|| dir.pred_dir()),
            seq.taxonomy.clone(),
        )?),
    };
    let s = track_sequence(&seq, segmenter.as_mut(), &cfg.pipeline, &args.out)?;
    say(
        quiet,
        format!(
            "frames {} points {} tracks {}",
            s.frames, s.points, s.tracks
        ),
    );
    Ok(())
}

fn taxonomy_for(explicit: Option<&Path>, gt: &Path) -> anyhow::Result<Taxonomy> {
    if let Some(path) = explicit {
        return Ok(io::load_taxonomy(path)?);
    }
    match gt.parent().map(|p| p.join("taxonomy.txt")) {
        Some(path) if path.is_file() => Ok(io::load_taxonomy(&path)?),
        _ => Ok(Taxonomy::panoptic_default()),
    }
}

fn evaluate(args: EvaluateArgs, quiet: bool) -> anyhow::Result<()> {
    let taxonomy = taxonomy_for(args.taxonomy.as_deref(), &args.gt)?;
    let report = evaluate_sequence(&args.pred, &args.gt, &taxonomy)?;
    if let Some(path) = &args.report {
        io::write_atomic(path, report.to_json().as_bytes())?;
    }
    if !quiet {
        print!("{}", report.table());
    }
    Ok(())
}

fn render(args: RenderArgs, quiet: bool) -> anyhow::Result<()> {
    let cfg = RunConfig::load(args.config.as_deref())?;
    let dir = SequenceDir::new(&args.seq);
    let frames = dir.frames()?;
    if !frames.contains(&args.frame) {
        anyhow::bail!(
            "frame {} is not in {} ({} frames)",
            args.frame,
            dir.scans_dir().display(),
            frames.len()
        );
    }
    let scan = dir.load_scan(args.frame)?;
    let label_path = args.labels.join(io::frame_name(args.frame, "label"));
    let labels = io::load_labels(&label_path, scan.len())?;
    let image = project(&Trio::single(&scan), &cfg.pipeline.projection)?;
    let grid = project_labels(&image, &labels, pantrack::PanopticLabel::VOID)?;
    io::write_atomic(&args.out, &render_stacked(&image, &grid))
        .with_context(|| format!("writing {}", args.out.display()))?;
    say(
        quiet,
        format!(
            "wrote {} ({}x{})",
            args.out.display(),
            image.width(),
            image.height() * 2
        ),
    );
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        // help and version exit 0, usage errors 2
        Err(e) => e.exit(),
    };
    let quiet = cli.quiet;
    let result = match cli.command {
        Command::Simulate(a) => simulate(a, quiet),
        Command::Infer(a) => infer(a, quiet),
        Command::Track(a) => track(a, quiet),
        Command::Evaluate(a) => evaluate(a, quiet),
        Command::Render(a) => render(a, quiet),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
