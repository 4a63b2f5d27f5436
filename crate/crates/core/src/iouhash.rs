// SPDX-License-Identifier: Apache-2.0

//! IoU-metric hashing of boxes into discrete cells.
//!
//! Width and height are binned on a log scale with ratio `alpha` between
//! adjacent bin centers; the center offsets are then binned on a linear grid
//! whose pitch is proportional to the width (height) bin center. Any two boxes
//! placed at adjacent bin centers along a single dimension have IoU `alpha`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::BBox;

/// Largest `alpha` accepted by [`HashParams::new`]. Above this the offset
/// pitch collapses and offset indices overflow for ordinary image sizes.
pub const MAX_ALPHA: f64 = 0.95;

/// Inclusive range of every [`HashCode`] field.
pub const CODE_MIN: i32 = i16::MIN as i32;
pub const CODE_MAX: i32 = i16::MAX as i32;

const CODE_BIAS: i64 = 1 << 15;

/// Parameters of one IoUHash function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HashParams {
    pub alpha: f64,
    pub w0: f64,
    pub h0: f64,
    pub bx: f64,
    pub by: f64,
}

impl HashParams {
    pub fn new(alpha: f64, w0: f64, h0: f64, bx: f64, by: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= MAX_ALPHA) {
            return Err(Error::InvalidParams(format!(
                "alpha must be in (0, {MAX_ALPHA}], got {alpha}"
            )));
        }
        Self::new_unbounded_alpha(alpha, w0, h0, bx, by)
    }

    /// `alpha = a`, `w0 = h0 = 1`, `bx = by = 0`.
    pub fn canonical(alpha: f64) -> Result<Self> {
        Self::new(alpha, 1.0, 1.0, 0.0, 0.0)
    }

    /// Like [`HashParams::new`] but allows any `alpha` in `(0, 1)`. Used by
    /// the bound computation, which is defined on the whole open interval.
    pub(crate) fn new_unbounded_alpha(
        alpha: f64,
        w0: f64,
        h0: f64,
        bx: f64,
        by: f64,
    ) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidParams(format!(
                "alpha must be in (0, 1), got {alpha}"
            )));
        }
        if !(w0 > 0.0 && w0.is_finite() && h0 > 0.0 && h0.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "w0 and h0 must be positive and finite, got w0={w0} h0={h0}"
            )));
        }
        if !(bx.is_finite() && by.is_finite()) {
            return Err(Error::InvalidParams("bx and by must be finite".into()));
        }
        Ok(HashParams {
            alpha,
            w0,
            h0,
            bx,
            by,
        })
    }
}

/// Cell indices `(i, j, m, n)`: width bin, height bin, x-offset bin, y-offset bin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct HashCode {
    pub i: i32,
    pub j: i32,
    pub m: i32,
    pub n: i32,
}

impl HashCode {
    pub const fn new(i: i32, j: i32, m: i32, n: i32) -> Self {
        HashCode { i, j, m, n }
    }

    fn fields(&self) -> [(char, i32); 4] {
        [('i', self.i), ('j', self.j), ('m', self.m), ('n', self.n)]
    }
}

impl std::fmt::Display for HashCode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} {} {} {}", self.i, self.j, self.m, self.n)
    }
}

/// Bin centers and offset pitches for a width/height cell pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellGeometry {
    pub wi: f64,
    pub hj: f64,
    pub delta_i: f64,
    pub delta_j: f64,
}

/// Ratio of the offset pitch to the size bin center.
#[inline]
pub fn pitch_ratio(alpha: f64) -> f64 {
    (1.0 - alpha) / (1.0 + alpha)
}

/// Size bin center `base / alpha^index`.
#[inline]
pub(crate) fn size_center(base: f64, alpha: f64, index: f64) -> f64 {
    base * alpha.powf(-index)
}

pub fn cell_geometry(i: i32, j: i32, p: &HashParams) -> CellGeometry {
    let wi = size_center(p.w0, p.alpha, i as f64);
    let hj = size_center(p.h0, p.alpha, j as f64);
    let ratio = pitch_ratio(p.alpha);
    CellGeometry {
        wi,
        hj,
        delta_i: wi * ratio,
        delta_j: hj * ratio,
    }
}

fn checked_index(dimension: char, value: f64) -> Result<i32> {
    // f64::round rounds half away from zero.
    let r = value.round();
    if !r.is_finite() || r < CODE_MIN as f64 || r > CODE_MAX as f64 {
        return Err(Error::IndexOverflow { dimension, value });
    }
    Ok(r as i32)
}

/// Maps a box to its IoUHash cell.
pub fn iou_hash(b: &BBox, p: &HashParams) -> Result<HashCode> {
    let log_alpha = p.alpha.ln();
    let i = checked_index('i', (p.w0.ln() - b.w.ln()) / log_alpha)?;
    let j = checked_index('j', (p.h0.ln() - b.h.ln()) / log_alpha)?;
    let g = cell_geometry(i, j, p);
    let m = checked_index('m', b.cx / g.delta_i - p.bx)?;
    let n = checked_index('n', b.cy / g.delta_j - p.by)?;
    Ok(HashCode { i, j, m, n })
}

/// Hashes every box; stops at the first overflow.
pub fn hash_batch(boxes: &[BBox], p: &HashParams) -> Result<Vec<HashCode>> {
    boxes.iter().map(|b| iou_hash(b, p)).collect()
}

/// Data-parallel [`hash_batch`]. Output is identical to the sequential form;
/// on overflow the error for the lowest failing index is returned.
pub fn hash_batch_par(boxes: &[BBox], p: &HashParams) -> Result<Vec<HashCode>> {
    let codes: Vec<Result<HashCode>> = boxes.par_iter().map(|b| iou_hash(b, p)).collect();
    codes.into_iter().collect()
}

/// The `k_count` staggered hash functions used by multi-pass HNMS.
///
/// Member `k` shifts the log-size grid and the offset grid by `k / k_count`
/// of a cell; member 0 is always the canonical parameter set.
pub fn hash_family(alpha: f64, k_count: usize) -> Result<Vec<HashParams>> {
    if k_count < 1 {
        return Err(Error::InvalidArgument(
            "hash family size must be >= 1".into(),
        ));
    }
    // Validate alpha once up front.
    HashParams::canonical(alpha)?;
    let neg_log_alpha = -alpha.ln();
    (0..k_count)
        .map(|k| {
            let frac = k as f64 / k_count as f64;
            let base = (neg_log_alpha * frac).exp();
            HashParams::new(alpha, base, base, frac, frac)
        })
        .collect()
}

/// Injective 64-bit key: each field biased by 2^15 into its own 16-bit lane.
pub fn pack_code(c: &HashCode) -> Result<u64> {
    let mut key = 0u64;
    for (lane, (dimension, v)) in c.fields().into_iter().enumerate() {
        if !(CODE_MIN..=CODE_MAX).contains(&v) {
            return Err(Error::CodeOutOfRange {
                dimension,
                value: v as i64,
                min: CODE_MIN as i64,
                max: CODE_MAX as i64,
            });
        }
        key |= ((v as i64 + CODE_BIAS) as u64) << (16 * lane);
    }
    Ok(key)
}

/// Inverse of [`pack_code`].
pub fn unpack_code(key: u64) -> HashCode {
    let lane = |k: usize| (((key >> (16 * k)) & 0xFFFF) as i64 - CODE_BIAS) as i32;
    HashCode {
        i: lane(0),
        j: lane(1),
        m: lane(2),
        n: lane(3),
    }
}

/// Largest magnitude accepted per field by [`representative_value`].
pub const REPRESENTATIVE_FIELD_MAX: i32 = 9_999;

/// Decimal cell key `i + j*10^4 + m*10^8 + n*10^12`.
///
/// Not injective when fields are negative or exceed four digits; kept only
/// for comparison with implementations that use this encoding. Internal
/// keys use [`pack_code`].
pub fn representative_value(c: &HashCode) -> Result<i64> {
    let mut value = 0i64;
    let mut scale = 1i64;
    for (dimension, v) in c.fields() {
        if v.abs() > REPRESENTATIVE_FIELD_MAX {
            return Err(Error::CodeOutOfRange {
                dimension,
                value: v as i64,
                min: -(REPRESENTATIVE_FIELD_MAX as i64),
                max: REPRESENTATIVE_FIELD_MAX as i64,
            });
        }
        value += v as i64 * scale;
        scale *= 10_000;
    }
    Ok(value)
}
