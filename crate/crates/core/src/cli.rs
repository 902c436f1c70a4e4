//! Command-line frontend: `track`, `gen` and `eval`.
//!
//! Exit codes: 0 success, 1 I/O, configuration or usage error, 2 when the
//! query selection cannot be bootstrapped.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::bench::{evaluate, gallery_chips, generate_scenario, GroundTruth, ScenarioSpec, DEFAULT_IOU_THRESHOLD};
use crate::detect::{
    DetectorBackend, ExternalDetector, SyntheticDetector, SyntheticDetectorParams, TemplateDetector, TemplateDetectorParams,
};
use crate::domain::{BoundingBox, EngineConfig, DEFAULT_EMBEDDING_DIM};
use crate::engine::{annotate, run, write_trace, Backends, Timeline};
use crate::verify::{read_chip, write_embedding, EmbedderBackend, ExternalEmbedder, FaceChip, SyntheticEmbedder};
use crate::videoio::{load_image, write_sequence, ImageSequence, VideoSource};

pub const SEED_ENV: &str = "DVT_SEED";

#[derive(Debug, Parser)]
#[command(name = "facetrack", version, about = "Long-term face tracking over image-sequence videos")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Track the selected face through a video and write its timeline.
    Track(TrackArgs),
    /// Render a synthetic scenario to frames, meta.json and truth.json.
    Gen(GenArgs),
    /// Score a timeline against ground truth.
    Eval(EvalArgs),
}

#[derive(Debug, clap::Args)]
struct TrackArgs {
    /// Directory of frame_NNNNNN.ppm/png files plus meta.json.
    #[arg(long)]
    video: PathBuf,
    #[arg(long)]
    query_frame: usize,
    /// Rough selection around the query face as x,y,w,h.
    #[arg(long, value_parser = parse_box)]
    query_box: BoundingBox,
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Write the engine event trace as JSON lines.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Write every timeline frame with its box outlined into this directory.
    #[arg(long)]
    annotate: Option<PathBuf>,
    /// Frames to skip after a detection sweep finds no match.
    #[arg(long)]
    skip_frames: Option<usize>,
    /// Overrides the DVT_SEED environment variable and the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Save the averaged query embedding to this file.
    #[arg(long)]
    save_query: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
struct GenArgs {
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, clap::Args)]
struct EvalArgs {
    #[arg(long)]
    timeline: PathBuf,
    #[arg(long)]
    truth: PathBuf,
    #[arg(long)]
    label: String,
    #[arg(long, default_value_t = DEFAULT_IOU_THRESHOLD)]
    iou: f64,
}

fn parse_box(s: &str) -> Result<BoundingBox, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let [x, y, w, h] = parts.as_slice() else {
        return Err(format!("expected x,y,w,h, got {s:?}"));
    };
    let int = |v: &str| v.parse::<i64>().map_err(|e| format!("{v:?}: {e}"));
    BoundingBox::try_from([int(x)?, int(y)?, int(w)?, int(h)?]).map_err(|e| e.to_string())
}

/// Contents of the `--config` file. Relative paths resolve against the
/// file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfigFile {
    #[serde(default)]
    pub engine: EngineConfig,
    pub detector: DetectorConfig,
    pub embedder: EmbedderConfig,
    /// Raw f32 224x224x3 chip subtracted before embedding.
    #[serde(default)]
    pub mean_image: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DetectorConfig {
    Synthetic {
        truth: PathBuf,
        #[serde(default)]
        miss_rate: f64,
        #[serde(default)]
        jitter: u32,
        #[serde(default)]
        false_positive_rate: f64,
    },
    Template {
        templates: Vec<PathBuf>,
        #[serde(flatten)]
        params: TemplateDetectorParams,
    },
    External {
        command: Vec<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EmbedderConfig {
    Synthetic {
        /// Scenario spec whose identities the embedder recognizes.
        scenario: PathBuf,
        #[serde(default = "default_dim")]
        dim: usize,
        /// Defaults to the scenario's `noise.embed_sigma`.
        #[serde(default)]
        sigma: Option<f64>,
    },
    External {
        command: Vec<String>,
        dim: usize,
    },
}

fn default_dim() -> usize {
    DEFAULT_EMBEDDING_DIM
}

struct Failure {
    code: i32,
    message: String,
}

fn fail(message: impl Into<String>) -> Failure {
    Failure { code: 1, message: message.into() }
}

fn read_text(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| fail(format!("{}: {e}", path.display())))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, Failure> {
    serde_json::from_str(&read_text(path)?).map_err(|e| fail(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| fail(format!("{}: {e}", path.display())))
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Seed precedence: flag, then environment, then config file.
fn effective_seed(flag: Option<u64>, env: Option<String>, file: u64) -> Result<u64, Failure> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match env {
        Some(v) => v.trim().parse().map_err(|e| fail(format!("{SEED_ENV}={v:?}: {e}"))),
        None => Ok(file),
    }
}

/// Entry point shared by the binary and tests. `args` includes the program
/// name.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    let result = match cli.command {
        Command::Track(a) => cmd_track(a),
        Command::Gen(a) => cmd_gen(a),
        Command::Eval(a) => cmd_eval(a),
    };
    match result {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

fn build_detector(cfg: &DetectorConfig, base: &Path, seed: u64) -> Result<Box<dyn DetectorBackend>, Failure> {
    Ok(match cfg {
        DetectorConfig::Synthetic { truth, miss_rate, jitter, false_positive_rate } => {
            let truth: GroundTruth = read_json(&resolve(base, truth))?;
            let params =
                SyntheticDetectorParams { miss_rate: *miss_rate, jitter: *jitter, false_positive_rate: *false_positive_rate, seed };
            Box::new(SyntheticDetector::new(truth, params))
        }
        DetectorConfig::Template { templates, params } => {
            let images = templates
                .iter()
                .map(|p| load_image(&resolve(base, p)).map_err(fail))
                .collect::<Result<Vec<_>, _>>()?;
            Box::new(TemplateDetector::new(&images, params.clone()).map_err(|e| fail(e.to_string()))?)
        }
        DetectorConfig::External { command } => {
            Box::new(ExternalDetector::spawn(command).map_err(|e| fail(e.to_string()))?)
        }
    })
}

fn build_embedder(
    cfg: &EmbedderConfig,
    base: &Path,
    seed: u64,
    mean_image: Option<&FaceChip>,
) -> Result<Box<dyn EmbedderBackend>, Failure> {
    Ok(match cfg {
        EmbedderConfig::Synthetic { scenario, dim, sigma } => {
            let spec: ScenarioSpec = read_json(&resolve(base, scenario))?;
            spec.validate().map_err(|e| fail(e.to_string()))?;
            let gallery = gallery_chips(&spec, mean_image).map_err(|e| fail(e.to_string()))?;
            let sigma = sigma.unwrap_or(spec.noise.embed_sigma);
            Box::new(SyntheticEmbedder::new(gallery, *dim, sigma, seed).map_err(|e| fail(e.to_string()))?)
        }
        EmbedderConfig::External { command, dim } => {
            Box::new(ExternalEmbedder::spawn(command, *dim).map_err(|e| fail(e.to_string()))?)
        }
    })
}

fn cmd_track(args: TrackArgs) -> Result<(), Failure> {
    let file: RunConfigFile = read_json(&args.config)?;
    let base = args.config.parent().map(Path::to_path_buf).unwrap_or_default();
    let seed = effective_seed(args.seed, std::env::var(SEED_ENV).ok(), file.seed)?;
    let video = ImageSequence::open(&args.video).map_err(|e| fail(e.to_string()))?;

    let mut config = file.engine.clone();
    config.frame_rate = video.frame_rate();
    if let Some(k) = args.skip_frames {
        config.skip_frames = k;
    }
    config.validate().map_err(|e| fail(e.to_string()))?;

    let mean_image = match &file.mean_image {
        Some(p) => {
            let p = resolve(&base, p);
            let f = File::open(&p).map_err(|e| fail(format!("{}: {e}", p.display())))?;
            Some(read_chip(std::io::BufReader::new(f)).map_err(|e| fail(format!("{}: {e}", p.display())))?)
        }
        None => None,
    };
    let detector = build_detector(&file.detector, &base, seed)?;
    let embedder = build_embedder(&file.embedder, &base, seed, mean_image.as_ref())?;
    let backends = Backends { detector: detector.as_ref(), embedder: embedder.as_ref(), mean_image: mean_image.as_ref() };

    let out = run(&video, args.query_frame, &args.query_box, &backends, &config).map_err(|e| Failure {
        code: if e.is_bootstrap_failure() { 2 } else { 1 },
        message: e.to_string(),
    })?;

    write_file(&args.out, &out.timeline.to_json())?;
    if let Some(path) = &args.trace {
        let f = File::create(path).map_err(|e| fail(format!("{}: {e}", path.display())))?;
        write_trace(BufWriter::new(f), &out.trace).map_err(|e| fail(format!("{}: {e}", path.display())))?;
    }
    if let Some(path) = &args.save_query {
        let f = File::create(path).map_err(|e| fail(format!("{}: {e}", path.display())))?;
        write_embedding(BufWriter::new(f), &out.query.embedding).map_err(|e| fail(format!("{}: {e}", path.display())))?;
    }
    if let Some(dir) = &args.annotate {
        annotate(&video, &out.timeline, dir).map_err(|e| fail(e.to_string()))?;
    }
    Ok(())
}

fn cmd_gen(args: GenArgs) -> Result<(), Failure> {
    let spec: ScenarioSpec = read_json(&args.spec)?;
    let scenario = generate_scenario(&spec).map_err(|e| fail(e.to_string()))?;
    write_sequence(&scenario.video, &args.out).map_err(|e| fail(e.to_string()))?;
    let truth = serde_json::to_string_pretty(&scenario.truth).expect("truth serializes") + "\n";
    write_file(&args.out.join("truth.json"), &truth)
}

fn cmd_eval(args: EvalArgs) -> Result<(), Failure> {
    let timeline = Timeline::from_json(&read_text(&args.timeline)?).map_err(|e| fail(format!("{}: {e}", args.timeline.display())))?;
    let truth: GroundTruth = read_json(&args.truth)?;
    let pr = evaluate(&timeline, &truth, &args.label, args.iou).map_err(|e| fail(e.to_string()))?;
    println!("{}", serde_json::to_string(&pr).expect("metrics serialize"));
    Ok(())
}
