//! The `thumbforge` command line.
//!
//! Exit codes: 0 success, 2 invalid input, 3 checkpoint or configuration
//! error. Every run prints its resolved configuration to stderr as JSON.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::data_io::image::is_image_path;
use crate::data_io::manifest::GroundTruth;
use crate::data_io::synth::{write_synth_dataset, SynthDataset};
use crate::data_io::tensor_file::read_raw;
use crate::data_io::{load_bundle, read_image, write_ppm, DType, DatasetSplit, FeatureBundle, FeatureDims, Image, VideoManifest};
use crate::error::{Error, Result};
use crate::eval::{compare_reports, pixel_mse, precision_from_distances, EvalReport, Space, EVAL_RESOLUTION};
use crate::filter::synthetic::{synthetic_aesthetic, synthetic_aesthetic_image};
use crate::filter::{
    ablate_depth, aesthetic_samples, read_ava_csv, score_frames, top_k_indices, write_ava_csv,
    AestheticSample, AvaLabel, FilterConfig, FilterNet, FrameSequence,
};
use crate::fusion::{row_mse, select_thumbnail, FusionConfig, FusionNet, SelectionResult};
use crate::training::{ema, load_model, run_training_with, Control, ModelKind, TrainConfig};

#[derive(Debug, Parser, Serialize)]
#[command(name = "thumbforge", version, about = "Multimodal video thumbnail selection")]
pub struct Cli {
    /// Seed for every random choice of the run.
    #[arg(long, global = true, env = "THUMBFORGE_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Worker threads for per-frame and per-video work.
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Score sampled frames of a directory with a filter checkpoint.
    ScoreFrames(ScoreFramesArgs),
    /// List the frames kept by temporal subsampling.
    Sample(SampleArgs),
    /// Train the aesthetic filter on labelled images.
    TrainFilter(TrainFilterArgs),
    /// Train the fusion network on a dataset split.
    TrainFusion(TrainFusionArgs),
    /// Pick the thumbnail of one video.
    Select(SelectArgs),
    /// Precision@θ over the test split.
    Eval(EvalArgs),
    /// Filter depth ablation (per-epoch validation loss by depth).
    AblateDepth(AblateArgs),
    /// Write a synthetic dataset.
    Synth(SynthArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// Full-width network (512/2048/768 features).
    Full,
    /// Narrow network for fast runs.
    Small,
}

impl Preset {
    fn fusion(self) -> FusionConfig {
        match self {
            Preset::Full => FusionConfig::full(),
            Preset::Small => FusionConfig::small(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SpaceArg {
    Pixel,
    Feature,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DTypeArg {
    F32,
    F64,
}

#[derive(Debug, Args, Serialize)]
pub struct ScoreFramesArgs {
    #[arg(long)]
    pub frames: PathBuf,
    #[arg(long)]
    pub filter_checkpoint: PathBuf,
    #[arg(long, default_value_t = 9)]
    pub stride: usize,
    #[arg(long, default_value_t = 1000)]
    pub top_k: usize,
    /// CSV destination; stdout when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct SampleArgs {
    #[arg(long)]
    pub frames: PathBuf,
    #[arg(long, default_value_t = 9)]
    pub stride: usize,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainFilterArgs {
    /// CSV of image_id,count_1..count_10.
    #[arg(long)]
    pub labels: PathBuf,
    /// Directory holding `<image_id>.ppm` or `.png`.
    #[arg(long)]
    pub images: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 5)]
    pub epochs: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 2)]
    pub depth: usize,
    #[arg(long, default_value_t = 32)]
    pub view_size: usize,
    /// Share of images held out for validation.
    #[arg(long, default_value_t = 0.2)]
    pub val_fraction: f64,
    #[arg(long)]
    pub resume: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainFusionArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 20)]
    pub epochs: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub lr: f64,
    #[arg(long, value_enum, default_value_t = Preset::Full)]
    pub preset: Preset,
    #[arg(long)]
    pub no_positional_encoding: bool,
    #[arg(long)]
    pub pad_to_fixed: bool,
    #[arg(long)]
    pub resume: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct SelectArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Candidate count: the best-scoring frames of `--scores`, else the first rows.
    #[arg(long, default_value_t = 1000)]
    pub top_k: usize,
    /// score-frames CSV used to rank candidates.
    #[arg(long)]
    pub scores: Option<PathBuf>,
    #[arg(long)]
    pub emit_ranking: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct EvalArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "500,750,1000")]
    pub theta: Vec<f64>,
    #[arg(long, value_enum, default_value_t = SpaceArg::Pixel)]
    pub space: SpaceArg,
    /// JSON report destination.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Earlier JSON report to compare against.
    #[arg(long)]
    pub compare: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct AblateArgs {
    #[arg(long, value_delimiter = ',', default_value = "2,3,4")]
    pub depths: Vec<usize>,
    #[arg(long, default_value_t = 5)]
    pub epochs: usize,
    /// Synthetic image count when no labels are given.
    #[arg(long, default_value_t = 2000)]
    pub count: usize,
    #[arg(long, default_value_t = 32)]
    pub view_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 0.2)]
    pub val_fraction: f64,
    #[arg(long, requires = "images")]
    pub labels: Option<PathBuf>,
    #[arg(long, requires = "labels")]
    pub images: Option<PathBuf>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 4)]
    pub train: usize,
    #[arg(long, default_value_t = 2)]
    pub test: usize,
    #[arg(long, default_value_t = 20)]
    pub frames: usize,
    #[arg(long, default_value_t = 10)]
    pub audio: usize,
    #[arg(long, value_enum, default_value_t = Preset::Small)]
    pub preset: Preset,
    /// Make every ground-truth frame unlearnable noise.
    #[arg(long)]
    pub no_plant: bool,
    #[arg(long, value_enum, default_value_t = DTypeArg::F64)]
    pub dtype: DTypeArg,
    /// Also write one image per frame and reference it from the manifests.
    #[arg(long)]
    pub images: bool,
    #[arg(long, default_value_t = 32)]
    pub image_size: usize,
    /// Also write this many labelled aesthetic images under `aesthetic/`.
    #[arg(long, default_value_t = 0)]
    pub aesthetic: usize,
}

/// Maps an error onto the exit-code contract.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Checkpoint(_) | Error::Config(_) | Error::NonFinite { .. } => 3,
        _ => 2,
    }
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn execute(cli: &Cli) -> Result<()> {
    eprintln!(
        "config: {}",
        serde_json::to_string(&cli).expect("arguments serialise")
    );
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| match &cli.command {
        Command::ScoreFrames(a) => score_frames_cmd(a),
        Command::Sample(a) => sample_cmd(a),
        Command::TrainFilter(a) => train_filter_cmd(a, cli.seed),
        Command::TrainFusion(a) => train_fusion_cmd(a, cli.seed),
        Command::Select(a) => select_cmd(a),
        Command::Eval(a) => eval_cmd(a),
        Command::AblateDepth(a) => ablate_cmd(a, cli.seed),
        Command::Synth(a) => synth_cmd(a, cli.seed),
    })
}

fn emit(output: Option<&Path>, text: &str) -> Result<()> {
    match output {
        Some(path) => std::fs::write(path, text).map_err(|e| Error::io(path, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Image files of a directory sorted by name; frame id `k` is entry `k`.
pub fn list_frames(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_file() && is_image_path(&path) {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

fn frame_image(dir: &Path, files: &[PathBuf], id: usize) -> Result<Image> {
    let path = files.get(id).ok_or_else(|| {
        Error::Input(format!("frame {id} not found in {} ({} images)", dir.display(), files.len()))
    })?;
    read_image(path)
}

fn sampled_positions(count: usize, stride: usize) -> Result<Vec<usize>> {
    if stride == 0 {
        return Err(Error::Usage("--stride must be at least 1".into()));
    }
    Ok((0..count).step_by(stride).collect())
}

fn score_frames_cmd(a: &ScoreFramesArgs) -> Result<()> {
    let net: FilterNet = load_model(&a.filter_checkpoint)?;
    let files = list_frames(&a.frames)?;
    let mut warnings = 0;
    let mut frames = Vec::new();
    let mut ids = Vec::new();
    for id in sampled_positions(files.len(), a.stride)? {
        match read_image(&files[id]) {
            Ok(img) => {
                frames.push(img);
                ids.push(id);
            }
            Err(e) => {
                warnings += 1;
                eprintln!("warning: skipping frame {id}: {e}");
            }
        }
    }
    let seq = FrameSequence::from_parts(frames, ids)?;
    let scores = score_frames(&seq, &net)?;
    let kept = top_k_indices(&scores, a.top_k.max(1));
    let mut csv = String::from("frame_id,score,kept\n");
    for (pos, (id, _)) in seq.iter().enumerate() {
        let k = kept.binary_search(&pos).is_ok();
        let _ = writeln!(csv, "{id},{},{}", scores[pos], u8::from(k));
    }
    emit(a.output.as_deref(), &csv)?;
    eprintln!(
        "scored {} of {} frames, kept {}, {warnings} warning(s)",
        seq.len(),
        files.len(),
        kept.len()
    );
    Ok(())
}

fn sample_cmd(a: &SampleArgs) -> Result<()> {
    let files = list_frames(&a.frames)?;
    let positions = sampled_positions(files.len(), a.stride)?;
    let mut csv = String::from("frame_id,file\n");
    for id in positions {
        let name = files[id].file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        let _ = writeln!(csv, "{id},{name}");
    }
    emit(a.output.as_deref(), &csv)
}

/// Deterministic train/validation split: every `round(1/fraction)`-th item validates.
fn holdout<T: Clone>(items: &[T], fraction: f64) -> Result<(Vec<T>, Vec<T>)> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(Error::Usage(format!("--val-fraction must be in [0, 1), got {fraction}")));
    }
    if fraction == 0.0 {
        return Ok((items.to_vec(), Vec::new()));
    }
    let n_val = ((items.len() as f64 * fraction).round() as usize).clamp(1, items.len().saturating_sub(1).max(1));
    let split = items.len() - n_val;
    Ok((items[..split].to_vec(), items[split..].to_vec()))
}

fn load_labelled_images(labels: &Path, images: &Path) -> Result<Vec<(Image, AvaLabel)>> {
    let rows = read_ava_csv(labels)?;
    if rows.is_empty() {
        return Err(Error::Input(format!("{} lists no images", labels.display())));
    }
    rows.into_iter()
        .map(|(id, label)| {
            let path = ["ppm", "png", "pnm"]
                .iter()
                .map(|ext| images.join(format!("{id}.{ext}")))
                .find(|p| p.is_file())
                .ok_or_else(|| Error::Input(format!("no image for {id} in {}", images.display())))?;
            Ok((read_image(&path)?, label))
        })
        .collect()
}

fn progress(kind: &str) -> impl FnMut(&[f64], usize, f64, f64) {
    let kind = kind.to_string();
    move |train: &[f64], epoch, train_mse, val_mse| {
        let smooth = ema(train, 0.3).last().copied().unwrap_or(train_mse);
        eprintln!("{kind} epoch {epoch}: train {train_mse:.6} (ema {smooth:.6}) val {val_mse:.6}");
    }
}

fn train_filter_cmd(a: &TrainFilterArgs, seed: u64) -> Result<()> {
    let pairs = load_labelled_images(&a.labels, &a.images)?;
    let config = FilterConfig {
        view_size: a.view_size,
        seed,
        crop_seed: seed,
        ..FilterConfig::with_depth(a.depth)
    };
    let samples = aesthetic_samples(&pairs, &config)?;
    let (train, val) = holdout(&samples, a.val_fraction)?;
    let mut net = FilterNet::new(config)?;
    net.set_head_bias(train.iter().map(|s| s.label).sum::<f64>() / train.len() as f64);
    let train_cfg = train_config(ModelKind::Filter, a.epochs, a.lr, seed, &a.out, a.resume);
    let mut report = progress("filter");
    let mut seen = Vec::new();
    let outcome = run_training_with(net, &train, &val, &train_cfg, |_, r| {
        seen.push(r.train_mse);
        report(&seen, r.epoch, r.train_mse, r.val_mse);
        Control::Continue
    })?;
    println!("best epoch {} val_mse {}", outcome.best_epoch, outcome.best_val);
    Ok(())
}

fn train_config(model: ModelKind, epochs: usize, lr: f64, seed: u64, out: &Path, resume: bool) -> TrainConfig {
    TrainConfig {
        checkpoint_dir: Some(out.to_path_buf()),
        resume,
        ..TrainConfig::new(model, epochs, lr, seed)
    }
}

/// Reads the widths a manifest provides from its tensor headers.
fn manifest_dims(m: &VideoManifest) -> Result<FeatureDims> {
    let width = |p: &Path| -> Result<usize> {
        Ok(read_raw(m.resolve(p))?.dims.last().copied().unwrap_or(0))
    };
    Ok(FeatureDims {
        frame: width(&m.frames)?,
        audio: width(&m.audio)?,
        text: width(&m.title)?,
    })
}

/// Loads a bundle for a network: widths the network cannot take are a
/// configuration mismatch, any other problem is an input error.
fn load_bundle_for(m: &VideoManifest, dims: &FeatureDims) -> Result<FeatureBundle> {
    let provided = manifest_dims(m)?;
    if provided.frame != dims.frame || provided.audio != dims.audio || provided.text != dims.text {
        return Err(Error::Config(format!(
            "video {}: features are {}/{}/{} wide, checkpoint expects {}/{}/{}",
            m.video_id, provided.frame, provided.audio, provided.text, dims.frame, dims.audio, dims.text
        )));
    }
    let mut bundle = load_bundle(m, dims)?;
    if bundle.ground_truth.is_none() {
        bundle.ground_truth = resolve_image_ground_truth(m, &bundle)?;
    }
    Ok(bundle)
}

/// For an image ground truth, the row whose frame image is closest in pixel space.
fn resolve_image_ground_truth(m: &VideoManifest, bundle: &FeatureBundle) -> Result<Option<usize>> {
    let (Some(GroundTruth::Image(_)), Some(dir)) = (&m.ground_truth, m.frames_dir()) else {
        return Ok(None);
    };
    let gt = read_image(m.ground_truth_image().expect("image ground truth"))?;
    let files = list_frames(&dir)?;
    let mut best: Option<(f64, usize, usize)> = None;
    for (row, &id) in bundle.frame_ids.iter().enumerate() {
        let d = pixel_mse(&frame_image(&dir, &files, id)?, &gt, EVAL_RESOLUTION);
        if best.map_or(true, |(bd, bid, _)| d < bd || (d == bd && id < bid)) {
            best = Some((d, id, row));
        }
    }
    Ok(best.map(|(_, _, row)| row))
}

fn train_fusion_cmd(a: &TrainFusionArgs, seed: u64) -> Result<()> {
    let split = DatasetSplit::load(&a.dataset)?;
    let mut config = a.preset.fusion().with_seed(seed);
    config.positional_encoding = !a.no_positional_encoding;
    config.pad_to_fixed = a.pad_to_fixed;
    let load = |ids: &[String]| -> Result<Vec<FeatureBundle>> {
        split
            .load_manifests(ids)?
            .iter()
            .map(|m| load_bundle_for(m, &config.dims))
            .collect()
    };
    let train = load(&split.train)?;
    let val = load(&split.test)?;
    let net = FusionNet::new(config.clone())?;
    let train_cfg = train_config(ModelKind::Fusion, a.epochs, a.lr, seed, &a.out, a.resume);
    let mut report = progress("fusion");
    let mut seen = Vec::new();
    let outcome = run_training_with(net, &train, &val, &train_cfg, |_, r| {
        seen.push(r.train_mse);
        report(&seen, r.epoch, r.train_mse, r.val_mse);
        Control::Continue
    })?;
    println!("best epoch {} val_mse {}", outcome.best_epoch, outcome.best_val);
    Ok(())
}

/// Frame id → score from a score-frames CSV.
fn read_scores(path: &Path) -> Result<Vec<(usize, f64)>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
        let parse_err = || Error::Input(format!("{}: malformed row {:?}", path.display(), record));
        let id: usize = record.get(0).and_then(|s| s.parse().ok()).ok_or_else(parse_err)?;
        let score: f64 = record.get(1).and_then(|s| s.parse().ok()).ok_or_else(parse_err)?;
        out.push((id, score));
    }
    Ok(out)
}

/// Candidate rows of a bundle for `--top-k` / `--scores`.
fn candidate_rows(bundle: &FeatureBundle, top_k: usize, scores: Option<&Path>) -> Result<Vec<usize>> {
    if top_k == 0 {
        return Err(Error::Usage("--top-k must be at least 1".into()));
    }
    match scores {
        None => Ok((0..bundle.num_frames().min(top_k)).collect()),
        Some(path) => {
            let scored = read_scores(path)?;
            let rows: Vec<usize> = scored
                .iter()
                .filter_map(|(id, _)| bundle.frame_ids.iter().position(|f| f == id))
                .collect();
            if rows.is_empty() {
                return Err(Error::Input(format!(
                    "{} scores none of the video's frames",
                    path.display()
                )));
            }
            let row_scores: Vec<f64> = scored
                .iter()
                .filter(|(id, _)| bundle.frame_ids.contains(id))
                .map(|(_, s)| *s)
                .collect();
            let mut keep: Vec<usize> = top_k_indices(&row_scores, top_k).into_iter().map(|i| rows[i]).collect();
            keep.sort_unstable();
            Ok(keep)
        }
    }
}

fn select_rows(net: &FusionNet, bundle: &FeatureBundle, rows: &[usize]) -> Result<SelectionResult> {
    let o = net.predict(bundle)?;
    let ids: Vec<usize> = rows.iter().map(|&r| bundle.frame_ids[r]).collect();
    let mut result = select_thumbnail(&o, &bundle.frames.rows(rows), &ids)?;
    result.selected_row = rows[result.selected_row];
    Ok(result)
}

fn select_cmd(a: &SelectArgs) -> Result<()> {
    let manifest = VideoManifest::load(&a.manifest)?;
    let net: FusionNet = load_model(&a.checkpoint)?;
    let bundle = load_bundle_for(&manifest, &net.dims())?;
    let rows = candidate_rows(&bundle, a.top_k, a.scores.as_deref())?;
    let result = select_rows(&net, &bundle, &rows)?;
    println!("{}", result.selected_frame_id);
    if let Some(path) = &a.emit_ranking {
        let ranking: Vec<_> = result
            .ranking
            .iter()
            .map(|(id, mse)| json!({"frame_id": id, "mse": mse}))
            .collect();
        let doc = json!({
            "video_id": bundle.video_id,
            "selected_frame_id": result.selected_frame_id,
            "ranking": ranking,
        });
        let text = serde_json::to_string_pretty(&doc).expect("ranking serialises") + "\n";
        std::fs::write(path, text).map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

fn eval_distance(m: &VideoManifest, net: &FusionNet, space: Space) -> Result<f64> {
    let bundle = load_bundle_for(m, &net.dims())?;
    let result = net.select(&bundle)?;
    match space {
        Space::Feature => {
            let gt = bundle.ground_truth.ok_or_else(|| {
                Error::Input(format!("video {} has no ground truth", m.video_id))
            })?;
            Ok(row_mse(bundle.frames.row(result.selected_row).data(), bundle.frames.row(gt).data()))
        }
        Space::Pixel => {
            let dir = m.frames_dir().ok_or_else(|| {
                Error::Input(format!("video {}: pixel space needs frames_dir", m.video_id))
            })?;
            let files = list_frames(&dir)?;
            let candidate = frame_image(&dir, &files, result.selected_frame_id)?;
            let gt = match (&m.ground_truth, bundle.ground_truth) {
                (Some(GroundTruth::Image(_)), _) => read_image(m.ground_truth_image().expect("image"))?,
                (_, Some(row)) => frame_image(&dir, &files, bundle.frame_ids[row])?,
                _ => return Err(Error::Input(format!("video {} has no ground truth", m.video_id))),
            };
            Ok(pixel_mse(&candidate, &gt, EVAL_RESOLUTION))
        }
    }
}

fn eval_cmd(a: &EvalArgs) -> Result<()> {
    let split = DatasetSplit::load(&a.dataset)?;
    if split.test.is_empty() {
        return Err(Error::Input(format!("{} has an empty test list", a.dataset.display())));
    }
    let net: FusionNet = load_model(&a.checkpoint)?;
    let manifests = split.load_manifests(&split.test)?;
    let space = match a.space {
        SpaceArg::Pixel => Space::Pixel,
        SpaceArg::Feature => Space::Feature,
    };
    let distances = manifests
        .par_iter()
        .map(|m| eval_distance(m, &net, space))
        .collect::<Result<Vec<f64>>>()?;
    let mut report = precision_from_distances(&distances, &a.theta, space)?;
    if let Some(path) = &a.compare {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        report = compare_reports(&report, &EvalReport::from_json(&text)?)?;
    }
    print!("{}", report.to_text());
    if let Some(path) = &a.output {
        std::fs::write(path, report.to_json()).map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

fn ablate_cmd(a: &AblateArgs, seed: u64) -> Result<()> {
    let pairs = match (&a.labels, &a.images) {
        (Some(labels), Some(images)) => load_labelled_images(labels, images)?,
        _ => synthetic_aesthetic(seed, a.count, a.view_size),
    };
    let base = FilterConfig {
        view_size: a.view_size,
        seed,
        crop_seed: seed,
        ..FilterConfig::default()
    };
    let samples: Vec<AestheticSample> = aesthetic_samples(&pairs, &base)?;
    let (train, val) = holdout(&samples, a.val_fraction)?;
    let report = ablate_depth(&train, &val, &a.depths, a.epochs, &base, a.lr)?;
    print!("{}", report.to_text());
    if let Some(path) = &a.output {
        let text = serde_json::to_string_pretty(&report).expect("report serialises") + "\n";
        std::fs::write(path, text).map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

fn synth_cmd(a: &SynthArgs, seed: u64) -> Result<()> {
    let opts = SynthDataset {
        seed,
        train: a.train,
        test: a.test,
        frames: a.frames,
        audio: a.audio,
        planted: !a.no_plant,
        dims: a.preset.fusion().dims,
        dtype: match a.dtype {
            DTypeArg::F32 => DType::F32,
            DTypeArg::F64 => DType::F64,
        },
    };
    let split = write_synth_dataset(&a.out, &opts)?;
    if a.images {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x1316_AE55);
        for id in split.train.iter().chain(&split.test) {
            let path = split.manifest_path(id);
            let mut manifest = VideoManifest::load(&path)?;
            let rel = Path::new(id).join("frames");
            let dir = manifest.resolve(&rel);
            std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
            for f in 0..a.frames {
                let q: f64 = rng.gen();
                let img = synthetic_aesthetic_image(a.image_size, q, &mut rng);
                write_ppm(dir.join(format!("frame{f:05}.ppm")), &img)?;
            }
            manifest.frames_dir = Some(rel);
            manifest.save(&path)?;
        }
    }
    if a.aesthetic > 0 {
        let dir = a.out.join("aesthetic");
        let images = dir.join("images");
        std::fs::create_dir_all(&images).map_err(|e| Error::io(&images, e))?;
        let pairs = synthetic_aesthetic(seed, a.aesthetic, a.image_size);
        let mut rows = Vec::with_capacity(pairs.len());
        for (i, (img, label)) in pairs.iter().enumerate() {
            let id = format!("img{i:05}");
            write_ppm(images.join(format!("{id}.ppm")), img)?;
            rows.push((id, *label));
        }
        write_ava_csv(dir.join("labels.csv"), &rows)?;
    }
    println!(
        "wrote {} train and {} test videos to {}",
        split.train.len(),
        split.test.len(),
        a.out.display()
    );
    Ok(())
}
