// SPDX-License-Identifier: Apache-2.0

//! Axis-aligned box arithmetic.
//!
//! Boxes are stored in center-offset form `(w, h, cx, cy)`; [`CornerBox`]
//! is the equivalent `(left, top, right, bottom)` form.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An axis-aligned rectangle given by its size and center offset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub w: f64,
    pub h: f64,
    pub cx: f64,
    pub cy: f64,
}

/// An axis-aligned rectangle given by its top-left and bottom-right corners.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CornerBox {
    pub left: f64,
    pub top: f64,
    pub right: f64,
    pub bottom: f64,
}

impl BBox {
    /// Builds a box, rejecting non-finite fields and non-positive extents.
    pub fn new(w: f64, h: f64, cx: f64, cy: f64) -> Result<Self> {
        let b = BBox { w, h, cx, cy };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("w", self.w),
            ("h", self.h),
            ("cx", self.cx),
            ("cy", self.cy),
        ];
        if let Some((name, v)) = fields.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidBox(format!("{name} is not finite ({v})")));
        }
        if self.w <= 0.0 || self.h <= 0.0 {
            return Err(Error::InvalidBox(format!(
                "extent must be positive, got w={} h={}",
                self.w, self.h
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    #[inline]
    pub fn left(&self) -> f64 {
        self.cx - 0.5 * self.w
    }

    #[inline]
    pub fn right(&self) -> f64 {
        self.cx + 0.5 * self.w
    }

    #[inline]
    pub fn top(&self) -> f64 {
        self.cy - 0.5 * self.h
    }

    #[inline]
    pub fn bottom(&self) -> f64 {
        self.cy + 0.5 * self.h
    }

    pub fn translated(&self, dx: f64, dy: f64) -> BBox {
        BBox {
            cx: self.cx + dx,
            cy: self.cy + dy,
            ..*self
        }
    }

    pub fn to_corners(&self) -> CornerBox {
        CornerBox {
            left: self.left(),
            top: self.top(),
            right: self.right(),
            bottom: self.bottom(),
        }
    }

    pub fn from_corners(c: &CornerBox) -> Result<Self> {
        c.validate()?;
        BBox::new(
            c.right - c.left,
            c.bottom - c.top,
            0.5 * (c.left + c.right),
            0.5 * (c.top + c.bottom),
        )
    }
}

impl CornerBox {
    pub fn new(left: f64, top: f64, right: f64, bottom: f64) -> Result<Self> {
        let c = CornerBox {
            left,
            top,
            right,
            bottom,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let all_finite = [self.left, self.top, self.right, self.bottom]
            .iter()
            .all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::InvalidBox("corner is not finite".into()));
        }
        if self.right <= self.left || self.bottom <= self.top {
            return Err(Error::InvalidBox(format!(
                "degenerate corners ({}, {}, {}, {})",
                self.left, self.top, self.right, self.bottom
            )));
        }
        Ok(())
    }

    pub fn area(&self) -> f64 {
        (self.right - self.left) * (self.bottom - self.top)
    }
}

#[inline]
fn clamp_positive(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

/// Intersection area of two boxes.
#[inline]
pub fn intersection(a: &BBox, b: &BBox) -> f64 {
    let l = a.left().max(b.left());
    let r = a.right().min(b.right());
    let t = a.top().max(b.top());
    let btm = a.bottom().min(b.bottom());
    clamp_positive(r - l) * clamp_positive(btm - t)
}

/// Intersection-over-union of two valid boxes, in `[0, 1]`.
///
/// Areas are taken from the corner extents so that `iou(a, a)` is exactly 1.
#[inline]
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let (al, ar, at, ab) = (a.left(), a.right(), a.top(), a.bottom());
    let (bl, br, bt, bb) = (b.left(), b.right(), b.top(), b.bottom());
    let inter = clamp_positive(ar.min(br) - al.max(bl)) * clamp_positive(ab.min(bb) - at.max(bt));
    if inter == 0.0 {
        return 0.0;
    }
    let area_a = (ar - al) * (ab - at);
    let area_b = (br - bl) * (bb - bt);
    (inter / (area_a + area_b - inter)).min(1.0)
}

/// IoU computed directly on corner boxes.
pub fn iou_corners(a: &CornerBox, b: &CornerBox) -> f64 {
    let w = clamp_positive(a.right.min(b.right) - a.left.max(b.left));
    let h = clamp_positive(a.bottom.min(b.bottom) - a.top.max(b.top));
    let inter = w * h;
    if inter == 0.0 {
        return 0.0;
    }
    (inter / (a.area() + b.area() - inter)).min(1.0)
}
