use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand};
use v2a_core::config::PipelineConfig;
use v2a_core::decision::read_alert_log;
use v2a_core::detection_io::parse_detection_stream;
use v2a_core::evaluation::{
    evaluate_alerts, evaluate_detections, parse_ground_truth, AlertEvalParams, FarMode,
    GroundTruth, DEFAULT_HORIZON, DEFAULT_IOU_THRESHOLD, DEFAULT_WARNING_WINDOW,
};
use v2a_core::frame_io::{list_frames, read_frame};
use v2a_core::lane::{detect_lane, write_lane_line};
use v2a_core::pipeline::{run_pipeline, LaneSource};
use v2a_core::sim::{generate, ScenarioKind, ScenarioSpec};

#[derive(Parser)]
#[command(
    name = "v2a",
    version,
    about = "Vehicle-to-animal collision avoidance engine"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline over a detection stream and write the alert log.
    Run {
        #[arg(long)]
        detections: PathBuf,
        /// Directory of `<video_id>_<frame:06>.pgm|ppm` frames to detect lanes in.
        #[arg(long, conflicts_with = "lanes", required_unless_present = "lanes")]
        frames: Option<PathBuf>,
        /// Precomputed lane file.
        #[arg(long)]
        lanes: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Detect lanes in a frames directory and write a lane file.
    Lanes {
        #[arg(long)]
        frames: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Required when the directory holds frames of several videos.
        #[arg(long)]
        video_id: Option<String>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Precision, recall and per-class AP of a detection stream.
    EvalDet {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long, default_value_t = DEFAULT_IOU_THRESHOLD)]
        iou: f64,
        /// Score cut applied to the counts; AP always ranks every prediction.
        #[arg(long, default_value_t = v2a_core::detection_io::DEFAULT_MIN_SCORE)]
        min_score: f64,
        #[arg(long)]
        report: PathBuf,
    },
    /// PADR and FAR of an alert log against ground-truth entry events.
    EvalAlerts {
        #[arg(long)]
        alerts: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long, default_value_t = DEFAULT_WARNING_WINDOW)]
        window: u64,
        #[arg(long, default_value_t = DEFAULT_HORIZON)]
        horizon: u64,
        /// `decisions` or `episodes`.
        #[arg(long, default_value = "decisions")]
        far_mode: FarMode,
        #[arg(long)]
        report: PathBuf,
    },
    /// Generate a synthetic scenario from a spec file.
    Simulate {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also render lane frames into `<out>/frames`.
        #[arg(long)]
        frames: bool,
    },
    /// Print a random valid scenario spec.
    SampleSpec {
        #[arg(long)]
        kind: ScenarioKind,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a detection stream against the schema.
    Validate {
        #[arg(long)]
        detections: PathBuf,
    },
    /// Print the effective configuration with every default.
    ConfigDump {
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

enum Failure {
    Validation(anyhow::Error),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

fn invalid(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Validation(e.into())
}

fn open(path: &Path) -> anyhow::Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).with_context(|| {
        format!("cannot open {}", path.display())
    })?))
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| {
        format!("cannot create {}", path.display())
    })?))
}

fn load_config(path: Option<&Path>) -> Result<PipelineConfig, Failure> {
    match path {
        None => Ok(PipelineConfig::default()),
        Some(p) => {
            let text =
                fs::read_to_string(p).with_context(|| format!("cannot read {}", p.display()))?;
            PipelineConfig::from_toml(&text).map_err(|e| invalid(anyhow!("{}: {e}", p.display())))
        }
    }
}

fn write_json(path: &Path, value: serde_json::Value) -> anyhow::Result<()> {
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, &value)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

fn load_truth(path: &Path) -> Result<Vec<GroundTruth>, Failure> {
    let text =
        fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let truths =
        parse_ground_truth(&text).map_err(|e| invalid(anyhow!("{}: {e}", path.display())))?;
    for t in &truths {
        t.validate().map_err(invalid)?;
    }
    Ok(truths)
}

fn execute(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Run {
            detections,
            frames,
            lanes,
            out,
            config,
        } => {
            let cfg = load_config(config.as_deref())?;
            let source = match (&frames, &lanes) {
                (Some(dir), _) => LaneSource::Frames(dir),
                (None, Some(path)) => LaneSource::Lanes(Box::new(open(path)?)),
                (None, None) => unreachable!("clap requires one lane source"),
            };
            let mut writer = create(&out)?;
            let summary =
                run_pipeline(open(&detections)?, source, &cfg, &mut writer).map_err(|e| {
                    if e.is_validation() {
                        invalid(e)
                    } else {
                        Failure::Runtime(e.into())
                    }
                })?;
            log::info!("{summary:?}");
        }
        Command::Lanes {
            frames,
            out,
            video_id,
            config,
        } => {
            let params = load_config(config.as_deref())?.lane_params();
            let mut all = list_frames(&frames).context("listing frames")?;
            let videos: std::collections::BTreeSet<String> =
                all.iter().map(|f| f.0.clone()).collect();
            let video = match video_id {
                Some(v) => v,
                None if videos.len() == 1 => videos.into_iter().next().expect("one video"),
                None if videos.is_empty() => {
                    return Err(anyhow!("no frame files in {}", frames.display()).into())
                }
                None => {
                    return Err(
                        anyhow!("several videos in {}: pass --video-id", frames.display()).into(),
                    )
                }
            };
            all.retain(|f| f.0 == video);
            let mut writer = create(&out)?;
            let mut found = 0usize;
            for (_, index, path) in &all {
                let img = read_frame(path).map_err(anyhow::Error::from)?;
                if let Some(model) = detect_lane(&img, *index, &params) {
                    write_lane_line(&mut writer, &model)
                        .with_context(|| format!("writing {}", out.display()))?;
                    found += 1;
                }
            }
            writer
                .flush()
                .with_context(|| format!("writing {}", out.display()))?;
            log::info!("lanes found in {found} of {} frames", all.len());
        }
        Command::EvalDet {
            pred,
            truth,
            iou,
            min_score,
            report,
        } => {
            let frames = parse_detection_stream(open(&pred)?)
                .collect::<Result<Vec<_>, _>>()
                .map_err(invalid)?;
            let truths = load_truth(&truth)?;
            let r = evaluate_detections(&frames, &truths, iou, min_score).map_err(invalid)?;
            write_json(
                &report,
                serde_json::to_value(r).map_err(anyhow::Error::from)?,
            )?;
        }
        Command::EvalAlerts {
            alerts,
            truth,
            window,
            horizon,
            far_mode,
            report,
        } => {
            let log = read_alert_log(open(&alerts)?).map_err(invalid)?;
            let truths = load_truth(&truth)?;
            let [gt] = truths.as_slice() else {
                return Err(invalid(anyhow!(
                    "{}: expected ground truth for exactly one video, found {}",
                    truth.display(),
                    truths.len()
                )));
            };
            let params = AlertEvalParams {
                window,
                horizon,
                far_mode,
            };
            write_json(
                &report,
                serde_json::to_value(evaluate_alerts(&log, gt, &params))
                    .map_err(anyhow::Error::from)?,
            )?;
        }
        Command::Simulate { spec, out, frames } => {
            let text = fs::read_to_string(&spec)
                .with_context(|| format!("cannot read {}", spec.display()))?;
            let spec: ScenarioSpec = serde_json::from_str(&text)
                .map_err(|e| invalid(anyhow!("{}: {e}", spec.display())))?;
            let scenario = generate(&spec).map_err(invalid)?;
            scenario
                .write_to(&out, frames)
                .map_err(anyhow::Error::from)?;
        }
        Command::SampleSpec { kind, seed, out } => {
            let spec = ScenarioSpec::sample(kind, seed).map_err(anyhow::Error::from)?;
            let text = serde_json::to_string_pretty(&spec).map_err(anyhow::Error::from)? + "\n";
            match out {
                Some(p) => {
                    fs::write(&p, text).with_context(|| format!("cannot write {}", p.display()))?
                }
                None => print!("{text}"),
            }
        }
        Command::Validate { detections } => {
            let mut frames = 0u64;
            let mut boxes = 0u64;
            for f in parse_detection_stream(open(&detections)?) {
                let f = f.map_err(invalid)?;
                frames += 1;
                boxes += f.detections.len() as u64;
            }
            println!("ok: {frames} frames, {boxes} detections");
        }
        Command::ConfigDump { config } => {
            print!("{}", load_config(config.as_deref())?.dump());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(e)) => {
            eprintln!("invalid input: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
