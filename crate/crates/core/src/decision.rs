//! Per-frame STOP decisions from lane geometry, track boxes and directions.
//!
//! Rules per visible track, first match wins:
//! 1. lane known (fresh or held) and the box's bottom-centre lies inside the
//!    lane trapezoid: `STOP_IN_LANE`;
//! 2. lane known, box outside the lane, a direction estimate exists, the box's
//!    horizontal midpoint lies between the lane lines' horizontal midpoints and
//!    the animal heads toward the lane centre: `STOP_PREDICTED`;
//! 3. no alert.
//!
//! With no lane at all the engine is blind: it emits nothing and marks the
//! frame `UNKNOWN`.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::direction::DirectionEstimate;
use crate::geometry::{BBox, Point2};
use crate::lane::{LaneModel, LaneState, LaneStatus};
use crate::tracker::TrackState;

pub const DEFAULT_TOWARD_MIN_COMPONENT: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum AlertType {
    StopInLane,
    StopPredicted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlertRecord {
    pub frame_index: u64,
    pub track_id: u64,
    pub class_name: String,
    pub alert_type: AlertType,
    pub bbox: BBox,
    pub direction: Option<DirectionEstimate>,
    pub lane_status: LaneStatus,
}

/// Everything decided for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameDecision {
    pub frame_index: u64,
    pub lane_status: LaneStatus,
    pub alerts: Vec<AlertRecord>,
    /// Visible tracks that were outside the lane and raised no alert.
    pub outside_no_alert: u32,
}

pub fn is_in_lane(b: &BBox, lane: &LaneModel) -> bool {
    point_in_lane(b.bottom_center(), lane)
}

pub fn point_in_lane(p: Point2, lane: &LaneModel) -> bool {
    let (top, bottom) = lane.vertical_extent();
    if p.y < top || p.y > bottom {
        return false;
    }
    lane.left().x_at(p.y) <= p.x && p.x <= lane.right().x_at(p.y)
}

pub fn is_in_vicinity(b: &BBox, lane: &LaneModel) -> bool {
    let cx = b.center_x();
    lane.left().mid_x() <= cx && cx <= lane.right().mid_x()
}

pub fn is_moving_toward_lane(
    direction: &DirectionEstimate,
    b: &BBox,
    lane: &LaneModel,
    toward_min_component: f64,
) -> bool {
    let offset = lane.center_x() - b.center_x();
    if offset == 0.0 {
        return true;
    }
    offset.signum() * direction.dx > toward_min_component
}

pub fn decide(
    frame_index: u64,
    tracks: &[TrackState],
    lane_state: &LaneState,
    toward_min_component: f64,
) -> FrameDecision {
    let status = lane_state.status();
    let mut decision = FrameDecision {
        frame_index,
        lane_status: status,
        alerts: Vec::new(),
        outside_no_alert: 0,
    };
    let Some(lane) = lane_state.current() else {
        return decision;
    };
    for track in tracks.iter().filter(|t| t.is_visible()) {
        let b = track.bbox();
        let alert_type = if is_in_lane(b, lane) {
            Some(AlertType::StopInLane)
        } else {
            match &track.last_direction {
                Some(dir)
                    if is_in_vicinity(b, lane)
                        && is_moving_toward_lane(dir, b, lane, toward_min_component) =>
                {
                    Some(AlertType::StopPredicted)
                }
                _ => None,
            }
        };
        match alert_type {
            Some(alert_type) => decision.alerts.push(AlertRecord {
                frame_index,
                track_id: track.id(),
                class_name: track.class_name().to_string(),
                alert_type,
                bbox: *b,
                direction: track.last_direction,
                lane_status: status,
            }),
            None => decision.outside_no_alert += 1,
        }
    }
    decision
}

/// One alert as it appears in the alert log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlertEntry {
    pub track_id: u64,
    pub class_name: String,
    pub alert_type: AlertType,
    pub bbox: BBox,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction: Option<[f64; 2]>,
}

/// One line of the alert log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlertLogLine {
    pub frame_index: u64,
    pub lane_status: LaneStatus,
    pub alerts: Vec<AlertEntry>,
    #[serde(default)]
    pub outside_no_alert: u32,
}

impl From<&FrameDecision> for AlertLogLine {
    fn from(d: &FrameDecision) -> Self {
        AlertLogLine {
            frame_index: d.frame_index,
            lane_status: d.lane_status,
            alerts: d
                .alerts
                .iter()
                .map(|a| AlertEntry {
                    track_id: a.track_id,
                    class_name: a.class_name.clone(),
                    alert_type: a.alert_type,
                    bbox: a.bbox,
                    direction: a.direction.map(|d| d.as_array()),
                })
                .collect(),
            outside_no_alert: d.outside_no_alert,
        }
    }
}

pub fn write_alert_line<W: Write>(out: &mut W, line: &AlertLogLine) -> std::io::Result<()> {
    serde_json::to_writer(&mut *out, line)?;
    out.write_all(b"\n")
}

#[derive(Debug, thiserror::Error)]
pub enum AlertLogError {
    #[error("alert log line {line}: {message}")]
    Invalid { line: u64, message: String },
    #[error("alert log read failure: {0}")]
    Io(#[from] std::io::Error),
}

pub fn read_alert_log<R: BufRead>(input: R) -> Result<Vec<AlertLogLine>, AlertLogError> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line).map_err(|e| AlertLogError::Invalid {
                line: i as u64 + 1,
                message: e.to_string(),
            })?,
        );
    }
    Ok(out)
}
