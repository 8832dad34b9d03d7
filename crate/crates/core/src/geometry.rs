//! Coordinate frames.
//!
//! Ground truth is stored in a resolution-independent frame where both axes run
//! over `[0, 1000]`, and is rescaled to the pixel frame of the image at hand.
//! Pixel coordinates are reals measured from the top-left corner.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Upper bound of the normalized frame on both axes.
pub const NORMALIZED_EXTENT: f64 = 1000.0;

/// Absolute slack applied to containment tests so that targets which only
/// survive a normalize/denormalize round trip up to floating point error still
/// hit when the prediction lands exactly on the boundary.
pub const HIT_SLACK_PX: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PixelPoint {
    pub x: f64,
    pub y: f64,
}

impl PixelPoint {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &PixelPoint) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn in_frame(&self, width: u32, height: u32) -> bool {
        self.x >= 0.0 && self.y >= 0.0 && self.x < f64::from(width) && self.y < f64::from(height)
    }

    /// Rounds both coordinates half away from zero, the form in which a
    /// previous prediction is quoted back to the model.
    pub fn rounded(&self) -> (i64, i64) {
        (self.x.round() as i64, self.y.round() as i64)
    }
}

/// Axis-aligned box in the normalized `[0, 1000]` frame, corner form.
///
/// Degenerate boxes (`x0 == x1` and/or `y0 == y1`) are legal and encode cursor
/// boundaries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBox")]
pub struct NormalizedBox {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

#[derive(Deserialize)]
struct RawBox {
    x0: f64,
    y0: f64,
    x1: f64,
    y1: f64,
}

impl TryFrom<RawBox> for NormalizedBox {
    type Error = Error;

    fn try_from(raw: RawBox) -> Result<Self> {
        NormalizedBox::new(raw.x0, raw.y0, raw.x1, raw.y1)
    }
}

impl NormalizedBox {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self> {
        let ordered = |a: f64, b: f64| 0.0 <= a && a <= b && b <= NORMALIZED_EXTENT;
        if !(ordered(x0, x1) && ordered(y0, y1)) {
            return Err(Error::InvalidArgument(format!(
                "normalized box ({x0}, {y0}, {x1}, {y1}) violates 0 <= min <= max <= 1000"
            )));
        }
        Ok(Self { x0, y0, x1, y1 })
    }

    /// Degenerate box at a single normalized point.
    pub fn point(x: f64, y: f64) -> Result<Self> {
        Self::new(x, y, x, y)
    }

    pub fn is_degenerate(&self) -> bool {
        self.x0 == self.x1 || self.y0 == self.y1
    }
}

/// Box in the pixel frame of a particular image.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PixelBox {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl PixelBox {
    pub fn point(p: PixelPoint) -> Self {
        Self {
            x0: p.x,
            y0: p.y,
            x1: p.x,
            y1: p.y,
        }
    }

    pub fn center(&self) -> PixelPoint {
        PixelPoint::new((self.x0 + self.x1) / 2.0, (self.y0 + self.y1) / 2.0)
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn expand(&self, tolerance: Tolerance) -> PixelBox {
        PixelBox {
            x0: self.x0 - tolerance.x,
            y0: self.y0 - tolerance.y,
            x1: self.x1 + tolerance.x,
            y1: self.y1 + tolerance.y,
        }
    }

    /// Inclusive containment.
    pub fn contains(&self, p: PixelPoint) -> bool {
        p.x >= self.x0 - HIT_SLACK_PX
            && p.x <= self.x1 + HIT_SLACK_PX
            && p.y >= self.y0 - HIT_SLACK_PX
            && p.y <= self.y1 + HIT_SLACK_PX
    }

    /// Euclidean distance to the nearest point of the box, zero inside.
    pub fn distance_to(&self, p: PixelPoint) -> f64 {
        let dx = (self.x0 - p.x).max(0.0).max(p.x - self.x1);
        let dy = (self.y0 - p.y).max(0.0).max(p.y - self.y1);
        dx.hypot(dy)
    }
}

fn check_dims(width: u32, height: u32) -> Result<(f64, f64)> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidArgument(format!(
            "image dimensions must be positive, got {width}x{height}"
        )));
    }
    Ok((f64::from(width), f64::from(height)))
}

/// Rescales a normalized box into the pixel frame of a `width` x `height` image.
///
/// Each coordinate maps to `c * dimension / 1000`. The product is taken before
/// the division so that integral inputs stay exact.
pub fn denormalize(b: &NormalizedBox, width: u32, height: u32) -> Result<PixelBox> {
    let (w, h) = check_dims(width, height)?;
    Ok(PixelBox {
        x0: b.x0 * w / NORMALIZED_EXTENT,
        y0: b.y0 * h / NORMALIZED_EXTENT,
        x1: b.x1 * w / NORMALIZED_EXTENT,
        y1: b.y1 * h / NORMALIZED_EXTENT,
    })
}

/// Inverse of [`denormalize`].
pub fn normalize(b: &PixelBox, width: u32, height: u32) -> Result<NormalizedBox> {
    let (w, h) = check_dims(width, height)?;
    NormalizedBox::new(
        b.x0 * NORMALIZED_EXTENT / w,
        b.y0 * NORMALIZED_EXTENT / h,
        b.x1 * NORMALIZED_EXTENT / w,
        b.y1 * NORMALIZED_EXTENT / h,
    )
}

/// Converts a CSS-pixel point to physical pixels.
pub fn physical_point(p: PixelPoint, device_pixel_ratio: f64) -> Result<PixelPoint> {
    if !device_pixel_ratio.is_finite() || device_pixel_ratio <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "device pixel ratio must be positive, got {device_pixel_ratio}"
        )));
    }
    Ok(PixelPoint::new(p.x * device_pixel_ratio, p.y * device_pixel_ratio))
}

/// Per-axis hit tolerance in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Tolerance {
    pub x: f64,
    pub y: f64,
}

impl Tolerance {
    pub fn new(x: f64, y: f64) -> Result<Self> {
        if !(x >= 0.0 && y >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "tolerances must be non-negative, got ({x}, {y})"
            )));
        }
        Ok(Self { x, y })
    }

    pub fn uniform(px: f64) -> Result<Self> {
        Self::new(px, px)
    }
}

/// The target box grown by the tolerance on each axis, then tested for
/// inclusive containment. The same rule applies to degenerate and area boxes.
pub fn hit_test(point: PixelPoint, target: &PixelBox, tolerance: Tolerance) -> bool {
    target.expand(tolerance).contains(point)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Distances {
    pub to_box: f64,
    pub to_center: f64,
}

pub fn distances(point: PixelPoint, target: &PixelBox) -> Distances {
    Distances {
        to_box: target.distance_to(point),
        to_center: point.distance(&target.center()),
    }
}
