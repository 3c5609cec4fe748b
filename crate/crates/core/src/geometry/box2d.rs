use serde::{Deserialize, Serialize};

/// Axis-aligned image-space box in pixels, serialized as `[x_min, y_min, x_max, y_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct Box2D {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl From<[f64; 4]> for Box2D {
    fn from([x_min, y_min, x_max, y_max]: [f64; 4]) -> Self {
        Self { x_min, y_min, x_max, y_max }
    }
}

impl From<Box2D> for [f64; 4] {
    fn from(b: Box2D) -> Self {
        [b.x_min, b.y_min, b.x_max, b.y_max]
    }
}

impl Box2D {
    pub const fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Self {
        Self { x_min, y_min, x_max, y_max }
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width().max(0.0) * self.height().max(0.0)
    }

    pub fn is_ordered(&self) -> bool {
        self.x_min <= self.x_max && self.y_min <= self.y_max
    }

    pub fn is_finite(&self) -> bool {
        [self.x_min, self.y_min, self.x_max, self.y_max].iter().all(|v| v.is_finite())
    }

    /// Clamp every coordinate into `[0, width] x [0, height]`.
    pub fn clamped_to(&self, width: f64, height: f64) -> Self {
        Self {
            x_min: self.x_min.clamp(0.0, width),
            y_min: self.y_min.clamp(0.0, height),
            x_max: self.x_max.clamp(0.0, width),
            y_max: self.y_max.clamp(0.0, height),
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self::new(self.x_min * s, self.y_min * s, self.x_max * s, self.y_max * s)
    }
}

/// Intersection of `b` with `region`, or `None` when they share no area.
///
/// Boxes that only touch along an edge are disjoint.
pub fn clip_box2d(b: &Box2D, region: &Box2D) -> Option<Box2D> {
    let clipped = Box2D {
        x_min: b.x_min.max(region.x_min),
        y_min: b.y_min.max(region.y_min),
        x_max: b.x_max.min(region.x_max),
        y_max: b.y_max.min(region.y_max),
    };
    (clipped.x_min < clipped.x_max && clipped.y_min < clipped.y_max).then_some(clipped)
}

pub fn iou2d(a: &Box2D, b: &Box2D) -> f64 {
    let inter = clip_box2d(a, b).map_or(0.0, |c| c.area());
    if inter == 0.0 {
        return 0.0;
    }
    let union = a.area() + b.area() - inter;
    (inter / union).clamp(0.0, 1.0)
}
