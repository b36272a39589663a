use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

/// Axis-aligned box in pixel corner form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
}

impl BBox {
    pub const fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Self {
        Self { x1, y1, x2, y2 }
    }

    pub fn from_center(cx: f64, cy: f64, w: f64, h: f64) -> Self {
        Self::new(cx - w / 2.0, cy - h / 2.0, cx + w / 2.0, cy + h / 2.0)
    }

    pub fn width(&self) -> f64 {
        (self.x2 - self.x1).max(0.0)
    }

    pub fn height(&self) -> f64 {
        (self.y2 - self.y1).max(0.0)
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> (f64, f64) {
        ((self.x1 + self.x2) / 2.0, (self.y1 + self.y2) / 2.0)
    }

    pub fn is_valid(&self) -> bool {
        self.x2 >= self.x1 && self.y2 >= self.y1
    }

    pub fn clip(&self, width: f64, height: f64) -> Self {
        Self::new(
            self.x1.clamp(0.0, width),
            self.y1.clamp(0.0, height),
            self.x2.clamp(0.0, width),
            self.y2.clamp(0.0, height),
        )
    }

    pub fn translate(&self, dx: f64, dy: f64) -> Self {
        Self::new(self.x1 + dx, self.y1 + dy, self.x2 + dx, self.y2 + dy)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::new(self.x1 * s, self.y1 * s, self.x2 * s, self.y2 * s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub bbox: BBox,
    pub class: usize,
    pub confidence: f64,
}

impl Detection {
    pub fn new(bbox: BBox, class: usize, confidence: f64) -> Self {
        Self {
            bbox,
            class,
            confidence,
        }
    }

    /// Total order used wherever detections are ranked: confidence
    /// descending, then x1, y1, x2, y2, class ascending.
    pub fn rank(&self, other: &Self) -> Ordering {
        other
            .confidence
            .total_cmp(&self.confidence)
            .then(self.bbox.x1.total_cmp(&other.bbox.x1))
            .then(self.bbox.y1.total_cmp(&other.bbox.y1))
            .then(self.bbox.x2.total_cmp(&other.bbox.x2))
            .then(self.bbox.y2.total_cmp(&other.bbox.y2))
            .then(self.class.cmp(&other.class))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub bbox: BBox,
    pub class: usize,
}

impl GroundTruth {
    pub fn new(bbox: BBox, class: usize) -> Self {
        Self { bbox, class }
    }
}
