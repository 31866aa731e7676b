//! Direction of travel from a track's centroid history.
//!
//! The raw movement vector is the displacement between the newest centroid and
//! the one four matches earlier (a five-entry window). It is normalized only
//! when its length exceeds `min_magnitude`; shorter vectors are treated as
//! jitter of a stationary animal and discarded.

use serde::{Deserialize, Serialize};

use crate::tracker::{CentroidSample, TrackState};

/// Number of consecutive history entries spanned by one estimate.
pub const DIRECTION_WINDOW: usize = 5;
pub const DEFAULT_MIN_MAGNITUDE: f64 = 5.0;
pub const DEFAULT_DIRECTION_TTL: u64 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirectionEstimate {
    /// Unit vector, image coordinates.
    pub dx: f64,
    pub dy: f64,
    /// Length of the raw displacement before normalization, in pixels.
    pub magnitude: f64,
    /// Frame of the newest centroid used.
    pub at_frame: u64,
}

impl DirectionEstimate {
    pub fn as_array(&self) -> [f64; 2] {
        [self.dx, self.dy]
    }
}

/// Length of a displacement vector: `sqrt(i^2 + j^2)`.
pub fn magnitude(i: f64, j: f64) -> f64 {
    (i * i + j * j).sqrt()
}

pub fn compute_direction(
    history: &[CentroidSample],
    min_magnitude: f64,
) -> Option<DirectionEstimate> {
    if history.len() < DIRECTION_WINDOW {
        return None;
    }
    let newest = history[history.len() - 1];
    let oldest = history[history.len() - DIRECTION_WINDOW];
    let (i, j) = (
        newest.centroid.x - oldest.centroid.x,
        newest.centroid.y - oldest.centroid.y,
    );
    let m = magnitude(i, j);
    if m.is_nan() || m <= min_magnitude || m == 0.0 {
        return None;
    }
    Some(DirectionEstimate {
        dx: i / m,
        dy: j / m,
        magnitude: m,
        at_frame: newest.frame_index,
    })
}

/// Refreshes `track.last_direction` for `current_frame`.
///
/// A new estimate is taken only when the track was matched in this frame. An
/// older estimate survives while `current_frame - at_frame < ttl`.
pub fn update_track_direction(
    track: &mut TrackState,
    current_frame: u64,
    min_magnitude: f64,
    ttl: u64,
) {
    let matched_now = track
        .history()
        .last()
        .is_some_and(|s| s.frame_index == current_frame);
    if matched_now {
        if let Some(est) = compute_direction(track.history(), min_magnitude) {
            track.last_direction = Some(est);
            return;
        }
    }
    if let Some(prev) = track.last_direction {
        if current_frame.saturating_sub(prev.at_frame) >= ttl {
            track.last_direction = None;
        }
    }
}
