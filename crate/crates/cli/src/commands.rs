//! One function per subcommand.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, ensure, Context, Result};
use clap::Args;
use reltrack::config::{parse_overrides, Config};
use reltrack::eval::{evaluate_report, MetricSet};
use reltrack::fsutil::write_atomic;
use reltrack::head::HeadParams;
use reltrack::mot::{detections_by_frame, read_mot_file, read_seqinfo, track_rows, write_track_rows};
use reltrack::pipeline::{downsample_frames, track_baseline, track_sequence, training_batches};
use reltrack::profile::{normalize, profile_dataset, AttributeVector};
use reltrack::synth::{downsample_fps, generate, ScenarioSpec};
use reltrack::train::{fit, gradcheck as run_gradcheck, trace_csv};
use reltrack::{SequenceMeta, TrackRow};
use serde::{Deserialize, Serialize};

use crate::io::{feature_source, frame_png_name, subdirs, write_png, SequenceDir};
use crate::ConfigArgs;

fn load_config(args: &ConfigArgs) -> Result<Config> {
    let overrides = parse_overrides(&args.overrides)?;
    Ok(Config::load_file(args.config.as_deref(), &overrides)?)
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(())
}

fn write_output(path: &Path, text: &str) -> Result<()> {
    ensure_parent(path)?;
    write_atomic(path, text.as_bytes()).with_context(|| format!("writing {}", path.display()))
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

fn keep_frames(rows: Vec<TrackRow>, k: u32) -> Vec<TrackRow> {
    let k = k.max(1);
    rows.into_iter().filter(|r| (r.frame - 1) % k == 0).collect()
}

#[derive(Debug, Args)]
pub struct TrackArgs {
    /// Detections in MOTChallenge format.
    #[arg(long)]
    det: PathBuf,
    /// Directory of per-frame feature files.
    #[arg(long)]
    features: Option<PathBuf>,
    /// Directory of per-frame grayscale PNGs; descriptors are computed on the fly.
    #[arg(long)]
    images: Option<PathBuf>,
    /// Trained head weights (required unless --baseline).
    #[arg(long)]
    weights: Option<PathBuf>,
    /// Sequence metadata; its length extends the frame range past the last detection.
    #[arg(long)]
    seqinfo: Option<PathBuf>,
    /// Output file for tracks in MOTChallenge format.
    #[arg(long)]
    out: PathBuf,
    /// Process only every k-th frame (original frame numbers are kept).
    #[arg(long, default_value_t = 1)]
    fps_downsample: u32,
    /// Use the motion-only IoU tracker instead of the relation tracker.
    #[arg(long)]
    baseline: bool,
    #[command(flatten)]
    config: ConfigArgs,
}

pub fn track(a: TrackArgs) -> Result<ExitCode> {
    ensure!(a.fps_downsample >= 1, "--fps-downsample must be at least 1");
    let cfg = load_config(&a.config)?;
    let records = read_mot_file(&a.det)?;
    let dets = detections_by_frame(&records);
    let mut last = dets.keys().next_back().copied().unwrap_or(0);
    if let Some(p) = &a.seqinfo {
        last = last.max(read_seqinfo(p)?.length);
    }
    let all: Vec<u32> = (1..=last).collect();
    let frames = downsample_frames(&all, a.fps_downsample);
    let rows = if a.baseline {
        track_baseline(&dets, &frames, cfg.baseline_iou, &cfg.track.assoc)?
    } else {
        let Some(w) = &a.weights else {
            bail!("--weights is required unless --baseline is given");
        };
        let params = HeadParams::load(w).with_context(|| format!("loading {}", w.display()))?;
        let features = feature_source(a.features.as_deref(), a.images.as_deref(), last)?;
        track_sequence(&dets, &frames, &features, &params, &cfg.track)?
    };
    write_output(&a.out, &write_track_rows(&rows))?;
    log::info!(
        "wrote {} rows over {} frames to {}",
        rows.len(),
        frames.len(),
        a.out.display()
    );
    Ok(ExitCode::SUCCESS)
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Sequence directory with gt/gt.txt and features/ or img1/ (repeatable).
    #[arg(long = "seq")]
    seqs: Vec<PathBuf>,
    /// Ground truth of a single sequence (alternative to --seq).
    #[arg(long)]
    gt: Option<PathBuf>,
    /// Feature directory for --gt.
    #[arg(long)]
    features: Option<PathBuf>,
    /// Image directory for --gt.
    #[arg(long)]
    images: Option<PathBuf>,
    /// Output weights file.
    #[arg(long)]
    out: PathBuf,
    /// Optional CSV of the per-epoch loss.
    #[arg(long)]
    loss_csv: Option<PathBuf>,
    /// Train on every k-th frame only.
    #[arg(long, default_value_t = 1)]
    fps_downsample: u32,
    #[command(flatten)]
    config: ConfigArgs,
}

pub fn train(a: TrainArgs) -> Result<ExitCode> {
    ensure!(a.fps_downsample >= 1, "--fps-downsample must be at least 1");
    let cfg = load_config(&a.config)?;
    let rel = cfg.track.relation;
    let mut sources = Vec::new();
    for dir in &a.seqs {
        let seq = SequenceDir::open(dir)?;
        let features = seq.features()?;
        sources.push((seq.gt.clone(), seq.last_frame(), features));
    }
    if let Some(gt) = &a.gt {
        let rows = track_rows(&read_mot_file(gt)?)?;
        let last = rows.iter().map(|r| r.frame).max().unwrap_or(0);
        let features = feature_source(a.features.as_deref(), a.images.as_deref(), last)?;
        sources.push((rows, last, features));
    }
    ensure!(!sources.is_empty(), "no training data: pass --seq or --gt");
    let mut batches = Vec::new();
    for (gt, last, features) in &sources {
        let all: Vec<u32> = (1..=*last).collect();
        let frames = downsample_frames(&all, a.fps_downsample);
        batches.extend(training_batches(gt, &frames, features, &rel)?);
    }
    let init = HeadParams::random(rel.v, rel.channels(), cfg.hidden, cfg.seed);
    let result = fit(&batches, init, &cfg.loss)?;
    ensure_parent(&a.out)?;
    result
        .params
        .save(&a.out)
        .with_context(|| format!("writing {}", a.out.display()))?;
    if let Some(p) = &a.loss_csv {
        write_output(p, &trace_csv(&result.trace))?;
    }
    if let (Some(first), Some(last)) = (result.trace.first(), result.trace.last()) {
        log::info!("{} batches: loss {:.6} -> {:.6}", batches.len(), first.1, last.1);
    }
    Ok(ExitCode::SUCCESS)
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Ground truth in MOTChallenge format.
    #[arg(long)]
    gt: PathBuf,
    /// Tracking results in MOTChallenge format.
    #[arg(long)]
    res: PathBuf,
    /// Comma-separated metric families: clear, idf1, hota.
    #[arg(long, default_value = "clear,idf1,hota")]
    metrics: String,
    /// Score only frames 1, 1+k, 1+2k, … of both files.
    #[arg(long, default_value_t = 1)]
    fps_downsample: u32,
    /// Also write the report as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print JSON instead of a table.
    #[arg(long)]
    json: bool,
}

pub fn eval(a: EvalArgs) -> Result<ExitCode> {
    ensure!(a.fps_downsample >= 1, "--fps-downsample must be at least 1");
    let set: MetricSet = a.metrics.parse()?;
    let gt = keep_frames(track_rows(&read_mot_file(&a.gt)?)?, a.fps_downsample);
    let res = keep_frames(track_rows(&read_mot_file(&a.res)?)?, a.fps_downsample);
    let report = evaluate_report(&gt, &res, set)?;
    let json = to_json(&report)?;
    if let Some(p) = &a.out {
        write_output(p, &json)?;
    }
    if a.json {
        print!("{json}");
    } else {
        print!("{}", report.to_table());
    }
    Ok(ExitCode::SUCCESS)
}

#[derive(Debug, Args)]
pub struct ProfileArgs {
    /// Root with one directory per dataset, each holding sequence
    /// directories (`gt/gt.txt` plus `seqinfo.ini`).
    #[arg(long)]
    gt_root: Option<PathBuf>,
    /// Precomputed raw attributes as CSV with a header row: dataset plus the five attribute names.
    #[arg(long)]
    raw_csv: Option<PathBuf>,
    /// Output JSON (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Debug, Serialize)]
struct DatasetProfile {
    raw: AttributeVector,
    normalized: AttributeVector,
}

#[derive(Debug, Deserialize)]
struct RawRow {
    dataset: String,
    motion_complexity: f64,
    variation_amplitude: f64,
    target_density: f64,
    frame_rate: f64,
    small_target: f64,
}

/// Reads `dataset,motion_complexity,variation_amplitude,target_density,frame_rate,small_target`
/// rows (with that header).
fn parse_raw_csv(path: &Path) -> Result<Vec<(String, AttributeVector)>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let mut out = Vec::new();
    for row in reader.deserialize() {
        let row: RawRow = row.with_context(|| format!("parsing {}", path.display()))?;
        let values = AttributeVector {
            motion_complexity: row.motion_complexity,
            variation_amplitude: row.variation_amplitude,
            target_density: row.target_density,
            frame_rate: row.frame_rate,
            small_target: row.small_target,
        };
        out.push((row.dataset, values));
    }
    Ok(out)
}

fn dataset_sequences(dir: &Path) -> Result<Vec<(SequenceMeta, Vec<TrackRow>)>> {
    let seq_dirs = if dir.join("gt").join("gt.txt").exists() {
        vec![dir.to_path_buf()]
    } else {
        subdirs(dir)?
    };
    let mut out = Vec::new();
    for d in seq_dirs {
        let seq = SequenceDir::open(&d)?;
        let meta = seq
            .meta
            .with_context(|| format!("{} has no seqinfo.ini", d.display()))?;
        out.push((meta, seq.gt));
    }
    Ok(out)
}

pub fn profile(a: ProfileArgs) -> Result<ExitCode> {
    let cfg = load_config(&a.config)?;
    let raw: Vec<(String, AttributeVector)> = match (&a.gt_root, &a.raw_csv) {
        (Some(root), None) => {
            let mut out = Vec::new();
            for d in subdirs(root)? {
                let name = d
                    .file_name()
                    .map(|n| n.to_string_lossy().into_owned())
                    .unwrap_or_default();
                let seqs = dataset_sequences(&d)?;
                let v = profile_dataset(&seqs, &cfg.profile).with_context(|| format!("profiling {name}"))?;
                out.push((name, v));
            }
            out
        }
        (None, Some(csv)) => parse_raw_csv(csv)?,
        (Some(_), Some(_)) => bail!("pass either --gt-root or --raw-csv, not both"),
        (None, None) => bail!("one of --gt-root or --raw-csv is required"),
    };
    ensure!(!raw.is_empty(), "no datasets found");
    let values: Vec<AttributeVector> = raw.iter().map(|r| r.1).collect();
    let normalized = normalize(&values);
    let report: BTreeMap<String, DatasetProfile> = raw
        .into_iter()
        .zip(normalized)
        .map(|((name, raw), normalized)| (name, DatasetProfile { raw, normalized }))
        .collect();
    let json = to_json(&report)?;
    match &a.out {
        Some(p) => write_output(p, &json)?,
        None => print!("{json}"),
    }
    Ok(ExitCode::SUCCESS)
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Scenario description (flat key=value).
    #[arg(long)]
    spec: PathBuf,
    /// Output sequence directory.
    #[arg(long)]
    out: PathBuf,
    /// Keep every k-th frame, renumbered, and divide the frame rate by k.
    #[arg(long, default_value_t = 1)]
    fps_downsample: u32,
    /// Skip rendering `img1/*.png`.
    #[arg(long)]
    no_images: bool,
    /// Skip writing `features/*.p2if`.
    #[arg(long)]
    no_features: bool,
}

pub fn synth(a: SynthArgs) -> Result<ExitCode> {
    ensure!(a.fps_downsample >= 1, "--fps-downsample must be at least 1");
    let text = std::fs::read_to_string(&a.spec).with_context(|| format!("reading {}", a.spec.display()))?;
    let spec = ScenarioSpec::parse(&text)?;
    let mut seq = generate(&spec)?;
    if a.fps_downsample > 1 {
        seq = downsample_fps(&seq, a.fps_downsample);
    }
    seq.write_to(&a.out, !a.no_features)?;
    if !a.no_images {
        let dir = a.out.join("img1");
        std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        for f in seq.frames() {
            write_png(&dir.join(frame_png_name(f)), &seq.render(f))?;
        }
    }
    log::info!(
        "wrote {} frames, {} gt rows to {}",
        seq.meta.length,
        seq.gt.len(),
        a.out.display()
    );
    Ok(ExitCode::SUCCESS)
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    /// Number of random head configurations to check.
    #[arg(long, default_value_t = 10)]
    configs: usize,
    /// Seed for the random configurations.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

pub fn gradcheck(a: GradcheckArgs) -> Result<ExitCode> {
    let report = run_gradcheck(a.configs, a.seed)?;
    print!("{}", to_json(&report)?);
    Ok(if report.passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}
