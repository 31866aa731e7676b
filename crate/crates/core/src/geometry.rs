//! Planar primitives shared by every stage: boxes, points, centroids and overlap.
//!
//! Coordinates are image pixels with the origin at the top-left corner, x to the
//! right and y downwards. Values may be fractional.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Reasons a coordinate quadruple is not a valid [`BBox`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum BoxError {
    #[error("box: non-finite coordinate")]
    NonFinite,
    #[error("box: negative coordinate")]
    Negative,
    #[error("box: x2 < x1")]
    XInverted,
    #[error("box: y2 < y1")]
    YInverted,
}

/// A point in image coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

impl From<[f64; 2]> for Point2 {
    fn from([x, y]: [f64; 2]) -> Self {
        Self { x, y }
    }
}

impl From<Point2> for [f64; 2] {
    fn from(p: Point2) -> Self {
        [p.x, p.y]
    }
}

/// Axis-aligned box `[x1, y1, x2, y2]` with `x1 <= x2`, `y1 <= y2` and all
/// coordinates finite and non-negative.
///
/// Width and height follow the boundary-exclusive convention `x2 - x1`, so a box
/// with `x1 == x2` has zero area. Zero-area boxes are legal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct BBox {
    x1: f64,
    y1: f64,
    x2: f64,
    y2: f64,
}

impl BBox {
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Result<Self, BoxError> {
        if ![x1, y1, x2, y2].iter().all(|v| v.is_finite()) {
            return Err(BoxError::NonFinite);
        }
        if x1 < 0.0 || y1 < 0.0 || x2 < 0.0 || y2 < 0.0 {
            return Err(BoxError::Negative);
        }
        if x2 < x1 {
            return Err(BoxError::XInverted);
        }
        if y2 < y1 {
            return Err(BoxError::YInverted);
        }
        Ok(Self { x1, y1, x2, y2 })
    }

    pub fn x1(&self) -> f64 {
        self.x1
    }

    pub fn y1(&self) -> f64 {
        self.y1
    }

    pub fn x2(&self) -> f64 {
        self.x2
    }

    pub fn y2(&self) -> f64 {
        self.y2
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.x1, self.y1, self.x2, self.y2]
    }

    pub fn width(&self) -> f64 {
        self.x2 - self.x1
    }

    pub fn height(&self) -> f64 {
        self.y2 - self.y1
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    /// Horizontal midpoint of the box.
    pub fn center_x(&self) -> f64 {
        (self.x1 + self.x2) / 2.0
    }

    /// Middle of the bottom edge; the ground-contact proxy used for lane tests.
    pub fn bottom_center(&self) -> Point2 {
        Point2::new(self.center_x(), self.y2)
    }

    /// Clips the box to `[0, width] x [0, height]`. Returns `None` when nothing
    /// of the box remains inside the image.
    pub fn clip_to(&self, width: f64, height: f64) -> Option<BBox> {
        let x1 = self.x1.min(width);
        let x2 = self.x2.min(width);
        let y1 = self.y1.min(height);
        let y2 = self.y2.min(height);
        if x2 <= x1 || y2 <= y1 {
            return None;
        }
        BBox::new(x1, y1, x2, y2).ok()
    }
}

impl TryFrom<[f64; 4]> for BBox {
    type Error = BoxError;

    fn try_from([x1, y1, x2, y2]: [f64; 4]) -> Result<Self, Self::Error> {
        BBox::new(x1, y1, x2, y2)
    }
}

impl From<BBox> for [f64; 4] {
    fn from(b: BBox) -> Self {
        b.as_array()
    }
}

/// Centroid of a box: the crossing point of the lines through the middles of
/// opposite edges.
pub fn centroid(b: &BBox) -> Point2 {
    Point2::new((b.x1 + b.x2) / 2.0, (b.y1 + b.y2) / 2.0)
}

/// Intersection over union of two boxes. Disjoint boxes give 0, and so does a
/// pair whose union has zero area.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let iw = (a.x2.min(b.x2) - a.x1.max(b.x1)).max(0.0);
    let ih = (a.y2.min(b.y2) - a.y1.max(b.y1)).max(0.0);
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}
