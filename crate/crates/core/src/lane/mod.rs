//! Straight-line lane boundary detection on grayscale road frames, plus the
//! hold logic that bridges frames where detection fails.
//!
//! Detection stages: region-of-interest masking, 5x5 Gaussian blur, gradient
//! edges with hysteresis, (rho, theta) voting into segments, partition by slope
//! sign, and a length-weighted line per side extrapolated from the image bottom
//! up to the horizon row.

mod edges;
mod hough;

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Point2;

pub const MIN_FRAME_SIDE: usize = 16;

#[derive(Debug, Error, PartialEq)]
pub enum LaneError {
    #[error("image {width}x{height} smaller than {MIN_FRAME_SIDE}x{MIN_FRAME_SIDE}")]
    TooSmall { width: usize, height: usize },
    #[error("pixel buffer holds {got} values, expected {expected}")]
    BufferSize { got: usize, expected: usize },
    #[error("lane segment bottom end lies above its top end")]
    SegmentOrientation,
    #[error("left lane line is not left of the right lane line")]
    SideOrder,
    #[error("non-finite lane coordinate")]
    NonFinite,
}

/// Row-major 8-bit luminance image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self, LaneError> {
        if width < MIN_FRAME_SIDE || height < MIN_FRAME_SIDE {
            return Err(LaneError::TooSmall { width, height });
        }
        if pixels.len() != width * height {
            return Err(LaneError::BufferSize {
                got: pixels.len(),
                expected: width * height,
            });
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Result<Self, LaneError> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [u8] {
        &mut self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: u8) {
        self.pixels[y * self.width + x] = v;
    }
}

/// One lane boundary, from its bottom end (near the vehicle) to its top end.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[Point2; 2]", into = "[Point2; 2]")]
pub struct LaneSegment {
    pub bottom: Point2,
    pub top: Point2,
}

impl From<[Point2; 2]> for LaneSegment {
    fn from([bottom, top]: [Point2; 2]) -> Self {
        Self { bottom, top }
    }
}

impl From<LaneSegment> for [Point2; 2] {
    fn from(s: LaneSegment) -> Self {
        [s.bottom, s.top]
    }
}

impl LaneSegment {
    pub fn new(bottom: Point2, top: Point2) -> Self {
        Self { bottom, top }
    }

    /// Horizontal midpoint of the segment.
    pub fn mid_x(&self) -> f64 {
        (self.bottom.x + self.top.x) / 2.0
    }

    /// x of the segment's supporting line at row `y` (linear inter/extrapolation).
    pub fn x_at(&self, y: f64) -> f64 {
        let dy = self.bottom.y - self.top.y;
        if dy == 0.0 {
            return self.mid_x();
        }
        self.top.x + (self.bottom.x - self.top.x) * (y - self.top.y) / dy
    }

    pub fn length(&self) -> f64 {
        self.bottom.distance(&self.top)
    }
}

/// Left and right boundaries of the ego lane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LaneRecord", into = "LaneRecord")]
pub struct LaneModel {
    left: LaneSegment,
    right: LaneSegment,
    source_frame: u64,
}

#[derive(Serialize, Deserialize)]
struct LaneRecord {
    frame_index: u64,
    left: LaneSegment,
    right: LaneSegment,
}

impl TryFrom<LaneRecord> for LaneModel {
    type Error = LaneError;

    fn try_from(r: LaneRecord) -> Result<Self, Self::Error> {
        LaneModel::new(r.left, r.right, r.frame_index)
    }
}

impl From<LaneModel> for LaneRecord {
    fn from(m: LaneModel) -> Self {
        LaneRecord {
            frame_index: m.source_frame,
            left: m.left,
            right: m.right,
        }
    }
}

impl LaneModel {
    pub fn new(
        left: LaneSegment,
        right: LaneSegment,
        source_frame: u64,
    ) -> Result<Self, LaneError> {
        let coords = [left.bottom, left.top, right.bottom, right.top];
        if !coords.iter().all(|p| p.x.is_finite() && p.y.is_finite()) {
            return Err(LaneError::NonFinite);
        }
        if left.bottom.y < left.top.y || right.bottom.y < right.top.y {
            return Err(LaneError::SegmentOrientation);
        }
        if left.bottom.x >= right.bottom.x || left.mid_x() >= right.mid_x() {
            return Err(LaneError::SideOrder);
        }
        Ok(Self {
            left,
            right,
            source_frame,
        })
    }

    pub fn left(&self) -> &LaneSegment {
        &self.left
    }

    pub fn right(&self) -> &LaneSegment {
        &self.right
    }

    pub fn source_frame(&self) -> u64 {
        self.source_frame
    }

    pub fn with_source_frame(mut self, frame: u64) -> Self {
        self.source_frame = frame;
        self
    }

    /// Vertical extent `[top, bottom]` covered by both boundaries.
    pub fn vertical_extent(&self) -> (f64, f64) {
        (
            self.left.top.y.max(self.right.top.y),
            self.left.bottom.y.min(self.right.bottom.y),
        )
    }

    /// Midpoint between the two boundaries' horizontal midpoints.
    pub fn center_x(&self) -> f64 {
        (self.left.mid_x() + self.right.mid_x()) / 2.0
    }
}

/// Region of interest as fractions of the frame size. Bottom corners sit on the
/// last image row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoiFractions {
    pub bottom_left_x: f64,
    pub bottom_right_x: f64,
    pub top_left_x: f64,
    pub top_right_x: f64,
    pub top_y: f64,
}

impl Default for RoiFractions {
    fn default() -> Self {
        Self {
            bottom_left_x: 0.05,
            bottom_right_x: 0.95,
            top_left_x: 0.45,
            top_right_x: 0.55,
            top_y: 0.6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaneParams {
    pub blur_kernel: usize,
    pub blur_sigma: f64,
    pub edge_low: f64,
    pub edge_high: f64,
    pub roi: RoiFractions,
    pub rho_res: f64,
    pub theta_res_deg: f64,
    pub vote_threshold: u32,
    pub min_segment_len: f64,
    pub max_line_gap: usize,
    pub min_abs_slope: f64,
    pub horizon_frac: f64,
}

impl Default for LaneParams {
    fn default() -> Self {
        Self {
            blur_kernel: 5,
            blur_sigma: 1.0,
            edge_low: 50.0,
            edge_high: 150.0,
            roi: RoiFractions::default(),
            rho_res: 2.0,
            theta_res_deg: 1.0,
            vote_threshold: 15,
            min_segment_len: 40.0,
            max_line_gap: 20,
            min_abs_slope: 0.5,
            horizon_frac: 0.6,
        }
    }
}

/// Convex quadrilateral given clockwise in image coordinates (y down).
#[derive(Debug, Clone, Copy)]
pub struct Trapezoid {
    vertices: [Point2; 4],
}

impl Trapezoid {
    pub fn from_fractions(roi: &RoiFractions, width: usize, height: usize) -> Self {
        let (w, h) = (width as f64, height as f64);
        Self {
            vertices: [
                Point2::new(roi.bottom_left_x * w, h),
                Point2::new(roi.top_left_x * w, roi.top_y * h),
                Point2::new(roi.top_right_x * w, roi.top_y * h),
                Point2::new(roi.bottom_right_x * w, h),
            ],
        }
    }

    /// Smallest signed distance from `p` to the four edges; positive inside.
    pub fn inset_distance(&self, p: Point2) -> f64 {
        let mut best = f64::INFINITY;
        for i in 0..4 {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % 4];
            let (ex, ey) = (b.x - a.x, b.y - a.y);
            let len = ex.hypot(ey);
            if len == 0.0 {
                continue;
            }
            // clockwise on screen => interior lies to the right of each edge
            let d = (ex * (p.y - a.y) - ey * (p.x - a.x)) / len;
            best = best.min(d);
        }
        best
    }

    /// Whether pixel `(x, y)` has its centre inside the region.
    pub fn contains_pixel(&self, x: usize, y: usize) -> bool {
        self.inset_distance(Point2::new(x as f64 + 0.5, y as f64 + 0.5)) >= 0.0
    }
}

/// Detects the ego-lane boundaries. Returns `None` when either side has no
/// qualifying segment or the fitted lines do not form a valid [`LaneModel`].
///
/// Pixels outside the region of interest are zeroed before any filtering, and
/// edges closer to the region border than the filter footprint are discarded,
/// so exterior pixels cannot affect the result.
pub fn detect_lane(frame: &GrayImage, frame_index: u64, params: &LaneParams) -> Option<LaneModel> {
    let (w, h) = (frame.width, frame.height);
    let roi = Trapezoid::from_fractions(&params.roi, w, h);
    let margin = (params.blur_kernel / 2 + 2) as f64;

    let mut masked = vec![0f32; w * h];
    let mut inner = vec![false; w * h];
    for y in 0..h {
        for x in 0..w {
            let d = roi.inset_distance(Point2::new(x as f64 + 0.5, y as f64 + 0.5));
            if d >= 0.0 {
                masked[y * w + x] = f32::from(frame.get(x, y));
            }
            inner[y * w + x] = d >= margin;
        }
    }

    let kernel = edges::gaussian_kernel(params.blur_kernel, params.blur_sigma);
    let blurred = edges::blur(&masked, w, h, &kernel);
    let mut edge_map = edges::edges(
        &blurred,
        w,
        h,
        params.edge_low as f32,
        params.edge_high as f32,
    );
    for (e, keep) in edge_map.iter_mut().zip(&inner) {
        *e &= *keep;
    }

    let segments = hough::segments(
        &edge_map,
        w,
        h,
        &hough::HoughConfig {
            rho_res: params.rho_res,
            theta_res_deg: params.theta_res_deg,
            threshold: params.vote_threshold,
            min_length: params.min_segment_len,
            max_gap: params.max_line_gap,
        },
    );

    // (sum of weight * slope, sum of weight * intercept, sum of weight)
    let mut left = (0.0, 0.0, 0.0);
    let mut right = (0.0, 0.0, 0.0);
    for seg in &segments {
        let dx = seg.b.x - seg.a.x;
        if dx == 0.0 {
            continue;
        }
        let slope = (seg.b.y - seg.a.y) / dx;
        if slope.abs() < params.min_abs_slope {
            continue;
        }
        let intercept = seg.a.y - slope * seg.a.x;
        let len = seg.length();
        let acc = if slope < 0.0 { &mut left } else { &mut right };
        acc.0 += len * slope;
        acc.1 += len * intercept;
        acc.2 += len;
    }
    if left.2 == 0.0 || right.2 == 0.0 {
        return None;
    }

    let y_bottom = h as f64;
    let y_top = params.horizon_frac * h as f64;
    let side = |(ms, bs, ws): (f64, f64, f64)| {
        let (m, b) = (ms / ws, bs / ws);
        LaneSegment::new(
            Point2::new((y_bottom - b) / m, y_bottom),
            Point2::new((y_top - b) / m, y_top),
        )
    };
    LaneModel::new(side(left), side(right), frame_index).ok()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum LaneStatus {
    Fresh,
    Held,
    Unknown,
}

/// Lane knowledge carried across frames.
#[derive(Debug, Clone, PartialEq)]
pub struct LaneState {
    current: Option<LaneModel>,
    age: u32,
    status: LaneStatus,
}

impl Default for LaneState {
    fn default() -> Self {
        Self {
            current: None,
            age: 0,
            status: LaneStatus::Unknown,
        }
    }
}

impl LaneState {
    pub fn unknown() -> Self {
        Self::default()
    }

    pub fn fresh(model: LaneModel) -> Self {
        Self {
            current: Some(model),
            age: 0,
            status: LaneStatus::Fresh,
        }
    }

    pub fn current(&self) -> Option<&LaneModel> {
        self.current.as_ref()
    }

    pub fn age(&self) -> u32 {
        self.age
    }

    pub fn status(&self) -> LaneStatus {
        self.status
    }
}

pub const DEFAULT_HOLD_LIMIT: u32 = 30;

/// Advances the lane state by one frame.
pub fn update_lane_state(
    state: &LaneState,
    detected: Option<LaneModel>,
    hold_limit: u32,
) -> LaneState {
    match (detected, state.current) {
        (Some(model), _) => LaneState::fresh(model),
        (None, Some(model)) if state.age < hold_limit => LaneState {
            current: Some(model),
            age: state.age + 1,
            status: LaneStatus::Held,
        },
        (None, _) => LaneState {
            current: None,
            age: state.age.saturating_add(1),
            status: LaneStatus::Unknown,
        },
    }
}

#[derive(Debug, Error)]
pub enum LaneFileError {
    #[error("lane file line {line}: {message}")]
    Invalid { line: u64, message: String },
    #[error("lane file line {line}: frame_index {got} does not increase after {prev}")]
    Order { line: u64, prev: u64, got: u64 },
    #[error("lane file read failure: {0}")]
    Io(#[from] std::io::Error),
}

/// Streaming reader over a lane file (one [`LaneModel`] per line, ascending
/// `frame_index`).
pub struct LaneFileReader<R> {
    input: R,
    line_no: u64,
    last: Option<u64>,
    buf: String,
}

impl<R: BufRead> LaneFileReader<R> {
    pub fn new(input: R) -> Self {
        Self {
            input,
            line_no: 0,
            last: None,
            buf: String::new(),
        }
    }
}

impl<R: BufRead> Iterator for LaneFileReader<R> {
    type Item = Result<LaneModel, LaneFileError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            self.buf.clear();
            match self.input.read_line(&mut self.buf) {
                Ok(0) => return None,
                Ok(_) => {}
                Err(e) => return Some(Err(e.into())),
            }
            self.line_no += 1;
            let text = self.buf.trim();
            if text.is_empty() {
                continue;
            }
            let model: LaneModel = match serde_json::from_str(text) {
                Ok(m) => m,
                Err(e) => {
                    return Some(Err(LaneFileError::Invalid {
                        line: self.line_no,
                        message: e.to_string(),
                    }))
                }
            };
            if let Some(prev) = self.last {
                if model.source_frame <= prev {
                    return Some(Err(LaneFileError::Order {
                        line: self.line_no,
                        prev,
                        got: model.source_frame,
                    }));
                }
            }
            self.last = Some(model.source_frame);
            return Some(Ok(model));
        }
    }
}

pub fn write_lane_line<W: Write>(out: &mut W, model: &LaneModel) -> std::io::Result<()> {
    serde_json::to_writer(&mut *out, model)?;
    out.write_all(b"\n")
}
