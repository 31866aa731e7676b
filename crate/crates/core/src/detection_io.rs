//! Line-delimited detection stream: one JSON object per frame.
//!
//! ```text
//! {"video_id": "a", "frame_index": 0, "detections": [{"class_name": "cow", "score": 0.9, "bbox": [x1, y1, x2, y2], "mask_ref": "optional"}]}
//! ```
//!
//! The reader validates every record as it goes and never buffers more than one
//! line.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::BBox;

/// Animal vocabulary the detector is expected to report.
pub const DEFAULT_ANIMAL_CLASSES: [&str; 9] = [
    "cat", "dog", "horse", "sheep", "cow", "elephant", "bear", "zebra", "giraffe",
];

pub const DEFAULT_MIN_SCORE: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub class_name: String,
    pub score: f64,
    pub bbox: BBox,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask_ref: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameDetections {
    pub video_id: String,
    pub frame_index: u64,
    pub detections: Vec<DetectionRecord>,
}

#[derive(Debug, Error)]
pub enum StreamError {
    #[error("line {line}: parse error: {message}")]
    Parse { line: u64, message: String },
    #[error("line {line}: invalid field {field}: {message}")]
    Validation {
        line: u64,
        field: String,
        message: String,
    },
    #[error("read failure: {0}")]
    Io(#[from] std::io::Error),
}

impl StreamError {
    /// Name of the offending field, for validation errors.
    pub fn field(&self) -> Option<&str> {
        match self {
            StreamError::Validation { field, .. } => Some(field),
            _ => None,
        }
    }

    pub fn line(&self) -> Option<u64> {
        match self {
            StreamError::Parse { line, .. } | StreamError::Validation { line, .. } => Some(*line),
            StreamError::Io(_) => None,
        }
    }
}

// Wire shapes with every field optional so that a missing field surfaces as a
// validation error naming it rather than as an opaque parse error.
#[derive(Deserialize)]
struct RawFrame {
    video_id: Option<String>,
    frame_index: Option<i64>,
    detections: Option<Vec<RawDetection>>,
}

#[derive(Deserialize)]
struct RawDetection {
    class_name: Option<String>,
    score: Option<f64>,
    bbox: Option<[f64; 4]>,
    mask_ref: Option<String>,
}

/// Incremental reader over a detection stream.
///
/// Yields one validated [`FrameDetections`] per non-blank line. `frame_index`
/// must strictly increase per `video_id`.
pub struct DetectionStream<R> {
    input: R,
    line_no: u64,
    buf: String,
    last_index: BTreeMap<String, u64>,
    failed: bool,
}

impl<R: BufRead> DetectionStream<R> {
    pub fn new(input: R) -> Self {
        Self {
            input,
            line_no: 0,
            buf: String::new(),
            last_index: BTreeMap::new(),
            failed: false,
        }
    }

    fn validation(&self, field: &str, message: impl Into<String>) -> StreamError {
        StreamError::Validation {
            line: self.line_no,
            field: field.to_string(),
            message: message.into(),
        }
    }

    fn parse_line(&mut self, text: &str) -> Result<FrameDetections, StreamError> {
        let raw: RawFrame = serde_json::from_str(text).map_err(|e| StreamError::Parse {
            line: self.line_no,
            message: e.to_string(),
        })?;
        let video_id = raw
            .video_id
            .ok_or_else(|| self.validation("video_id", "missing"))?;
        let frame_index = raw
            .frame_index
            .ok_or_else(|| self.validation("frame_index", "missing"))?;
        let frame_index = u64::try_from(frame_index)
            .map_err(|_| self.validation("frame_index", "must be non-negative"))?;
        let raw_dets = raw
            .detections
            .ok_or_else(|| self.validation("detections", "missing"))?;

        let mut detections = Vec::with_capacity(raw_dets.len());
        for (i, d) in raw_dets.into_iter().enumerate() {
            let class_name = d.class_name.ok_or_else(|| {
                self.validation(&format!("detections[{i}].class_name"), "missing")
            })?;
            let score = d
                .score
                .ok_or_else(|| self.validation(&format!("detections[{i}].score"), "missing"))?;
            if !(0.0..=1.0).contains(&score) {
                return Err(self.validation(
                    &format!("detections[{i}].score"),
                    format!("{score} outside [0, 1]"),
                ));
            }
            let coords = d
                .bbox
                .ok_or_else(|| self.validation(&format!("detections[{i}].bbox"), "missing"))?;
            let bbox = BBox::try_from(coords)
                .map_err(|e| self.validation(&format!("detections[{i}].bbox"), e.to_string()))?;
            detections.push(DetectionRecord {
                class_name,
                score,
                bbox,
                mask_ref: d.mask_ref,
            });
        }

        if let Some(&prev) = self.last_index.get(&video_id) {
            if frame_index <= prev {
                return Err(self.validation(
                    "frame_index",
                    format!("{frame_index} does not increase after {prev} for video {video_id:?}"),
                ));
            }
        }
        self.last_index.insert(video_id.clone(), frame_index);

        Ok(FrameDetections {
            video_id,
            frame_index,
            detections,
        })
    }
}

impl<R: BufRead> Iterator for DetectionStream<R> {
    type Item = Result<FrameDetections, StreamError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        loop {
            self.buf.clear();
            match self.input.read_line(&mut self.buf) {
                Ok(0) => return None,
                Ok(_) => {}
                Err(e) => {
                    self.failed = true;
                    return Some(Err(e.into()));
                }
            }
            self.line_no += 1;
            let text = std::mem::take(&mut self.buf);
            let trimmed = text.trim();
            if trimmed.is_empty() {
                self.buf = text;
                continue;
            }
            let result = self.parse_line(trimmed);
            self.buf = text;
            if result.is_err() {
                self.failed = true;
            }
            return Some(result);
        }
    }
}

/// Convenience wrapper around [`DetectionStream::new`].
pub fn parse_detection_stream<R: BufRead>(input: R) -> DetectionStream<R> {
    DetectionStream::new(input)
}

/// Writes one frame as a single line (newline-terminated).
pub fn write_frame<W: Write>(out: &mut W, frame: &FrameDetections) -> std::io::Result<()> {
    serde_json::to_writer(&mut *out, frame)?;
    out.write_all(b"\n")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterConfig {
    pub animal_classes: BTreeSet<String>,
    pub min_score: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            animal_classes: DEFAULT_ANIMAL_CLASSES
                .iter()
                .map(|s| s.to_string())
                .collect(),
            min_score: DEFAULT_MIN_SCORE,
        }
    }
}

/// Keeps detections whose class is whitelisted and whose score reaches
/// `min_score`, preserving order.
pub fn filter_animals(frame: &FrameDetections, cfg: &FilterConfig) -> FrameDetections {
    FrameDetections {
        video_id: frame.video_id.clone(),
        frame_index: frame.frame_index,
        detections: frame
            .detections
            .iter()
            .filter(|d| cfg.animal_classes.contains(&d.class_name) && d.score >= cfg.min_score)
            .cloned()
            .collect(),
    }
}
