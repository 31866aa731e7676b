//! Streaming per-frame orchestration: filter, track, estimate directions, update
//! the lane, decide, and append one alert-log line per input frame.

use std::io::{BufRead, Write};
use std::iter::Peekable;
use std::path::Path;

use thiserror::Error;

use crate::config::{MatchGate, PipelineConfig};
use crate::decision::{decide, write_alert_line, AlertLogLine, AlertType};
use crate::detection_io::{filter_animals, parse_detection_stream, StreamError};
use crate::direction::update_track_direction;
use crate::frame_io::{load_frame, FrameError};
use crate::lane::{
    detect_lane, update_lane_state, LaneFileError, LaneFileReader, LaneModel, LaneParams,
    LaneState, LaneStatus,
};
use crate::tracker::{CentroidTracker, AUTO_GATE_DIAGONAL_FRACTION};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Detections(#[from] StreamError),
    #[error(transparent)]
    LaneFile(#[from] LaneFileError),
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error(
        "frame index mismatch: detection frame {detection_frame}, lane file frame {lane_frame}"
    )]
    FrameMismatch {
        detection_frame: u64,
        lane_frame: u64,
    },
    #[error("lane file has entries past the last detection frame (next lane frame {lane_frame})")]
    TrailingLanes { lane_frame: u64 },
    #[error("detection stream switches video from {expected:?} to {got:?} at frame {frame_index}")]
    VideoChanged {
        expected: String,
        got: String,
        frame_index: u64,
    },
    #[error("alert log write failed: {0}")]
    Output(std::io::Error),
}

impl PipelineError {
    /// Input that failed schema validation, as opposed to a runtime failure.
    pub fn is_validation(&self) -> bool {
        match self {
            PipelineError::Detections(e) => !matches!(e, StreamError::Io(_)),
            PipelineError::LaneFile(e) => !matches!(e, LaneFileError::Io(_)),
            _ => false,
        }
    }
}

/// Where lane geometry comes from.
pub enum LaneSource<'a> {
    /// Detect lanes in `<dir>/<video_id>_<frame_index:06>.pgm|ppm`.
    Frames(&'a Path),
    /// Precomputed lane lines, read in lockstep with the detections.
    Lanes(Box<dyn BufRead + 'a>),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunSummary {
    pub frames: u64,
    pub stop_in_lane: u64,
    pub stop_predicted: u64,
    pub fresh_frames: u64,
    pub held_frames: u64,
    pub unknown_frames: u64,
}

enum LaneStep<'a> {
    Frames { dir: &'a Path, params: LaneParams },
    Lanes(Peekable<LaneFileReader<Box<dyn BufRead + 'a>>>),
}

impl LaneStep<'_> {
    fn next(
        &mut self,
        video_id: &str,
        frame_index: u64,
        tracker: &mut CentroidTracker,
        gate: MatchGate,
    ) -> Result<Option<LaneModel>, PipelineError> {
        match self {
            LaneStep::Frames { dir, params } => {
                let img = load_frame(dir, video_id, frame_index)?;
                if gate == MatchGate::Auto {
                    let diag = (img.width() as f64).hypot(img.height() as f64);
                    tracker.set_default_gate(AUTO_GATE_DIAGONAL_FRACTION * diag);
                }
                Ok(detect_lane(&img, frame_index, params))
            }
            LaneStep::Lanes(reader) => {
                let next_frame = match reader.peek() {
                    None => return Ok(None),
                    Some(Ok(m)) => m.source_frame(),
                    Some(Err(_)) => return Err(reader.next().expect("peeked").unwrap_err().into()),
                };
                if next_frame < frame_index {
                    return Err(PipelineError::FrameMismatch {
                        detection_frame: frame_index,
                        lane_frame: next_frame,
                    });
                }
                if next_frame > frame_index {
                    return Ok(None);
                }
                Ok(Some(reader.next().expect("peeked")?))
            }
        }
    }

    fn finish(&mut self) -> Result<(), PipelineError> {
        if let LaneStep::Lanes(reader) = self {
            match reader.next() {
                None => {}
                Some(Ok(m)) => {
                    return Err(PipelineError::TrailingLanes {
                        lane_frame: m.source_frame(),
                    })
                }
                Some(Err(e)) => return Err(e.into()),
            }
        }
        Ok(())
    }
}

/// Runs the whole chain over one video's detection stream, writing the alert
/// log to `out`. `cfg` is assumed validated.
pub fn run_pipeline<R: BufRead, W: Write>(
    detections: R,
    lanes: LaneSource<'_>,
    cfg: &PipelineConfig,
    out: &mut W,
) -> Result<RunSummary, PipelineError> {
    let filter = cfg.filter();
    let mut tracker = CentroidTracker::new(cfg.tracker());
    let mut lane_state = LaneState::unknown();
    let mut step = match lanes {
        LaneSource::Frames(dir) => LaneStep::Frames {
            dir,
            params: cfg.lane_params(),
        },
        LaneSource::Lanes(r) => LaneStep::Lanes(LaneFileReader::new(r).peekable()),
    };
    let mut video: Option<String> = None;
    let mut summary = RunSummary::default();

    for frame in parse_detection_stream(detections) {
        let frame = frame?;
        match &video {
            None => video = Some(frame.video_id.clone()),
            Some(v) if *v != frame.video_id => {
                return Err(PipelineError::VideoChanged {
                    expected: v.clone(),
                    got: frame.video_id,
                    frame_index: frame.frame_index,
                })
            }
            Some(_) => {}
        }
        let f = frame.frame_index;

        let animals = filter_animals(&frame, &filter);
        tracker.update(&animals);
        for track in tracker.tracks_mut() {
            update_track_direction(track, f, cfg.min_magnitude, cfg.direction_ttl);
        }
        let detected = step.next(&frame.video_id, f, &mut tracker, cfg.max_match_distance)?;
        lane_state = update_lane_state(&lane_state, detected, cfg.hold_limit);
        let decision = decide(f, tracker.tracks(), &lane_state, cfg.toward_min_component);

        summary.frames += 1;
        match decision.lane_status {
            LaneStatus::Fresh => summary.fresh_frames += 1,
            LaneStatus::Held => summary.held_frames += 1,
            LaneStatus::Unknown => summary.unknown_frames += 1,
        }
        for a in &decision.alerts {
            match a.alert_type {
                AlertType::StopInLane => summary.stop_in_lane += 1,
                AlertType::StopPredicted => summary.stop_predicted += 1,
            }
            log::info!(
                "frame {f}: {:?} for track {} ({})",
                a.alert_type,
                a.track_id,
                a.class_name
            );
        }
        write_alert_line(out, &AlertLogLine::from(&decision)).map_err(PipelineError::Output)?;
    }
    step.finish()?;
    out.flush().map_err(PipelineError::Output)?;
    Ok(summary)
}
