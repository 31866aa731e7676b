//! Centroid tracker.
//!
//! Every frame: take the centroid of each detection, compute Euclidean
//! distances to the centroids of live tracks, and accept pairs greedily in
//! ascending distance order (ties: lower track id, then lower detection index).
//! Unmatched detections become new tracks with ids from a counter that never
//! rewinds. Unmatched tracks count a miss and are dropped once their misses
//! exceed `max_disappeared`.

use serde::{Deserialize, Serialize};

use crate::detection_io::FrameDetections;
use crate::direction::DirectionEstimate;
use crate::geometry::{centroid, BBox, Point2};

pub const DEFAULT_MAX_DISAPPEARED: u32 = 10;
pub const DEFAULT_HISTORY_LEN: usize = 5;
/// Fraction of the frame diagonal used as the default match gate.
pub const AUTO_GATE_DIAGONAL_FRACTION: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CentroidSample {
    pub frame_index: u64,
    pub centroid: Point2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackerConfig {
    pub max_disappeared: u32,
    /// `None` leaves matching distance unbounded.
    pub max_match_distance: Option<f64>,
    pub history_len: usize,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            max_disappeared: DEFAULT_MAX_DISAPPEARED,
            max_match_distance: None,
            history_len: DEFAULT_HISTORY_LEN,
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.max_disappeared < 1 {
            return Err("max_disappeared must be at least 1".into());
        }
        if self.history_len < 2 {
            return Err("history_len must be at least 2".into());
        }
        if let Some(d) = self.max_match_distance {
            if d.is_nan() || d <= 0.0 {
                return Err("max_match_distance must be positive".into());
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackState {
    id: u64,
    class_name: String,
    centroid: Point2,
    bbox: BBox,
    history: Vec<CentroidSample>,
    history_cap: usize,
    disappeared: u32,
    pub last_direction: Option<DirectionEstimate>,
}

impl TrackState {
    pub fn new(
        id: u64,
        class_name: String,
        bbox: BBox,
        frame_index: u64,
        history_cap: usize,
    ) -> Self {
        let c = centroid(&bbox);
        Self {
            id,
            class_name,
            centroid: c,
            bbox,
            history: vec![CentroidSample {
                frame_index,
                centroid: c,
            }],
            history_cap: history_cap.max(1),
            disappeared: 0,
            last_direction: None,
        }
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn class_name(&self) -> &str {
        &self.class_name
    }

    pub fn centroid(&self) -> Point2 {
        self.centroid
    }

    pub fn bbox(&self) -> &BBox {
        &self.bbox
    }

    /// Matched centroids, oldest first.
    pub fn history(&self) -> &[CentroidSample] {
        &self.history
    }

    pub fn disappeared(&self) -> u32 {
        self.disappeared
    }

    /// Whether the track was matched (or registered) in the latest update.
    pub fn is_visible(&self) -> bool {
        self.disappeared == 0
    }

    pub fn record_match(&mut self, class_name: String, bbox: BBox, frame_index: u64) {
        self.class_name = class_name;
        self.bbox = bbox;
        self.centroid = centroid(&bbox);
        self.disappeared = 0;
        self.history.push(CentroidSample {
            frame_index,
            centroid: self.centroid,
        });
        if self.history.len() > self.history_cap {
            let excess = self.history.len() - self.history_cap;
            self.history.drain(..excess);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Match {
    pub track_id: u64,
    pub detection_index: usize,
    pub distance: f64,
}

/// What happened to tracks and detections in one update.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Assignments {
    pub matches: Vec<Match>,
    /// `(new track id, detection index)`.
    pub registered: Vec<(u64, usize)>,
    pub deregistered: Vec<u64>,
}

impl Assignments {
    /// Track id that ended up owning detection `index`, if any.
    pub fn track_for_detection(&self, index: usize) -> Option<u64> {
        self.matches
            .iter()
            .find(|m| m.detection_index == index)
            .map(|m| m.track_id)
            .or_else(|| self.registered.iter().find(|r| r.1 == index).map(|r| r.0))
    }
}

/// Tracker state for one video stream.
#[derive(Debug, Clone)]
pub struct CentroidTracker {
    cfg: TrackerConfig,
    tracks: Vec<TrackState>,
    next_id: u64,
}

impl CentroidTracker {
    pub fn new(cfg: TrackerConfig) -> Self {
        Self {
            cfg,
            tracks: Vec::new(),
            next_id: 0,
        }
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.cfg
    }

    /// Sets the match gate if none is configured yet.
    pub fn set_default_gate(&mut self, distance: f64) {
        if self.cfg.max_match_distance.is_none() {
            self.cfg.max_match_distance = Some(distance);
        }
    }

    /// Live tracks in ascending id order.
    pub fn tracks(&self) -> &[TrackState] {
        &self.tracks
    }

    pub fn tracks_mut(&mut self) -> &mut [TrackState] {
        &mut self.tracks
    }

    /// Consumes one animal-filtered frame.
    pub fn update(&mut self, frame: &FrameDetections) -> Assignments {
        let centroids: Vec<Point2> = frame.detections.iter().map(|d| centroid(&d.bbox)).collect();

        let mut pairs: Vec<(f64, usize, usize)> =
            Vec::with_capacity(self.tracks.len() * centroids.len());
        for (ti, track) in self.tracks.iter().enumerate() {
            for (di, c) in centroids.iter().enumerate() {
                let d = track.centroid.distance(c);
                if self.cfg.max_match_distance.is_none_or(|gate| d <= gate) {
                    pairs.push((d, ti, di));
                }
            }
        }
        // tracks are kept in id order, so the track index breaks ties by id
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

        let mut track_used = vec![false; self.tracks.len()];
        let mut det_used = vec![false; centroids.len()];
        let mut out = Assignments::default();
        for (d, ti, di) in pairs {
            if track_used[ti] || det_used[di] {
                continue;
            }
            track_used[ti] = true;
            det_used[di] = true;
            let det = &frame.detections[di];
            let track = &mut self.tracks[ti];
            track.record_match(det.class_name.clone(), det.bbox, frame.frame_index);
            out.matches.push(Match {
                track_id: track.id,
                detection_index: di,
                distance: d,
            });
        }

        for (ti, track) in self.tracks.iter_mut().enumerate() {
            if !track_used[ti] {
                track.disappeared += 1;
            }
        }
        let max_disappeared = self.cfg.max_disappeared;
        self.tracks.retain(|t| {
            let drop = t.disappeared > max_disappeared;
            if drop {
                out.deregistered.push(t.id);
            }
            !drop
        });

        for (di, det) in frame.detections.iter().enumerate() {
            if det_used[di] {
                continue;
            }
            let id = self.next_id;
            self.next_id += 1;
            self.tracks.push(TrackState::new(
                id,
                det.class_name.clone(),
                det.bbox,
                frame.frame_index,
                self.cfg.history_len,
            ));
            out.registered.push((id, di));
        }

        if !out.registered.is_empty() || !out.deregistered.is_empty() {
            log::debug!(
                "frame {}: registered {:?}, deregistered {:?}",
                frame.frame_index,
                out.registered,
                out.deregistered
            );
        }
        out
    }
}
