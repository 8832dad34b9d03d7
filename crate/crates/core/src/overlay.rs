//! Red cross-hair feedback marker.
//!
//! The marker is two axis-aligned bars centered on the pixel containing the
//! (rounded, clamped) point. The horizontal bar spans `round(arm_fraction * width)`
//! pixels in total, the vertical bar `round(arm_fraction * height)`, both
//! `stroke_width` thick. Every covered pixel is blended once:
//! `out = round(alpha * color + (1 - alpha) * src)` per channel.

use image::{Rgb, RgbImage};
use serde::{Deserialize, Serialize};

use crate::geometry::PixelPoint;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverlaySpec {
    pub color: [u8; 3],
    pub alpha: f64,
    pub arm_fraction: f64,
    pub stroke_width: u32,
}

impl Default for OverlaySpec {
    fn default() -> Self {
        Self {
            color: [0xFF, 0x00, 0x00],
            alpha: 0.6,
            arm_fraction: 0.05,
            stroke_width: 3,
        }
    }
}

impl OverlaySpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::InvalidArgument(format!("alpha {} not in (0, 1]", self.alpha)));
        }
        if !(self.arm_fraction > 0.0 && self.arm_fraction < 0.5) {
            return Err(Error::InvalidArgument(format!(
                "arm fraction {} not in (0, 0.5)",
                self.arm_fraction
            )));
        }
        if self.stroke_width == 0 {
            return Err(Error::InvalidArgument("stroke width must be at least 1".into()));
        }
        Ok(())
    }

    /// Total bar lengths `(horizontal, vertical)` for a `width` x `height` image.
    pub fn arm_lengths(&self, width: u32, height: u32) -> (u32, u32) {
        let len = |dim: u32| (self.arm_fraction * f64::from(dim)).round().max(1.0) as u32;
        (len(width), len(height))
    }
}

/// Half-open pixel span of `len` pixels centered on `center`.
fn span(center: i64, len: u32) -> (i64, i64) {
    let len = i64::from(len);
    let start = center - (len - 1) / 2;
    (start, start + len)
}

/// Pixel the marker is centered on: the rounded point, clamped into the frame.
pub fn anchor_pixel(point: PixelPoint, width: u32, height: u32) -> (u32, u32) {
    let clamp = |v: f64, dim: u32| -> u32 {
        let r = v.round();
        if r.is_nan() || r < 0.0 {
            0
        } else {
            (r as u64).min(u64::from(dim) - 1) as u32
        }
    };
    let anchor = (clamp(point.x, width), clamp(point.y, height));
    if !point.in_frame(width, height) {
        tracing::debug!(x = point.x, y = point.y, ?anchor, "cross-hair point clamped into frame");
    }
    anchor
}

/// Pixels covered by the marker, clipped to the image, each listed once.
pub fn cross_pixels(point: PixelPoint, width: u32, height: u32, spec: &OverlaySpec) -> Vec<(u32, u32)> {
    let (cx, cy) = anchor_pixel(point, width, height);
    let (cx, cy) = (i64::from(cx), i64::from(cy));
    let (h_len, v_len) = spec.arm_lengths(width, height);
    let in_horizontal = |x: i64, y: i64| {
        let (x0, x1) = span(cx, h_len);
        let (y0, y1) = span(cy, spec.stroke_width);
        x >= x0 && x < x1 && y >= y0 && y < y1
    };
    let in_vertical = |x: i64, y: i64| {
        let (x0, x1) = span(cx, spec.stroke_width);
        let (y0, y1) = span(cy, v_len);
        x >= x0 && x < x1 && y >= y0 && y < y1
    };
    let (bx0, bx1) = span(cx, h_len.max(spec.stroke_width));
    let (by0, by1) = span(cy, v_len.max(spec.stroke_width));
    let mut out = Vec::new();
    for y in by0.max(0)..by1.min(i64::from(height)) {
        for x in bx0.max(0)..bx1.min(i64::from(width)) {
            if in_horizontal(x, y) || in_vertical(x, y) {
                out.push((x as u32, y as u32));
            }
        }
    }
    out
}

fn blend(src: u8, color: u8, alpha: f64) -> u8 {
    (alpha * f64::from(color) + (1.0 - alpha) * f64::from(src))
        .round()
        .clamp(0.0, 255.0) as u8
}

/// Returns a marked copy of `image`; the input is left untouched.
pub fn mark(image: &RgbImage, point: PixelPoint, spec: &OverlaySpec) -> Result<RgbImage> {
    spec.validate()?;
    let (width, height) = image.dimensions();
    if width == 0 || height == 0 {
        return Err(Error::InvalidArgument("cannot mark an empty image".into()));
    }
    let mut out = image.clone();
    for (x, y) in cross_pixels(point, width, height, spec) {
        let src = image.get_pixel(x, y).0;
        let px = [
            blend(src[0], spec.color[0], spec.alpha),
            blend(src[1], spec.color[1], spec.alpha),
            blend(src[2], spec.color[2], spec.alpha),
        ];
        out.put_pixel(x, y, Rgb(px));
    }
    Ok(out)
}
