// SPDX-License-Identifier: Apache-2.0

//! Lower bound on the IoU of two boxes that share a hash cell.
//!
//! Each box in a cell is described by its fractional distance to the cell
//! center along every dimension, in `[-0.5, 0.5)`. The IoU of a pair only
//! depends on `alpha` and those eight fractions, and its minimum sits on a
//! corner of the fraction hypercube, so enumerating the 2^8 corners is exact.

use std::collections::HashMap;
use std::sync::{OnceLock, RwLock};

use crate::error::{Error, Result};
use crate::geometry::{iou, BBox};
use crate::iouhash::{cell_geometry, pitch_ratio, size_center, HashCode, HashParams};

/// Fractional position of one box relative to its cell center.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CellOffset {
    pub i: f64,
    pub j: f64,
    pub m: f64,
    pub n: f64,
}

/// A corner of the offset hypercube: every fraction of both boxes is ±0.5.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CornerConfig {
    offsets: [CellOffset; 2],
}

impl CornerConfig {
    pub const COUNT: usize = 256;

    /// Decodes a config from the low 8 bits of `bits`; bit set means +0.5.
    /// Bits 0..4 are `(i, j, m, n)` of the first box, bits 4..8 the second.
    pub fn from_bits(bits: u8) -> Self {
        let half = |k: u32| if bits >> k & 1 == 1 { 0.5 } else { -0.5 };
        let offset = |base: u32| CellOffset {
            i: half(base),
            j: half(base + 1),
            m: half(base + 2),
            n: half(base + 3),
        };
        CornerConfig {
            offsets: [offset(0), offset(4)],
        }
    }

    /// Builds a config from explicit offsets; every field must be ±0.5.
    pub fn new(first: CellOffset, second: CellOffset) -> Result<Self> {
        let ok = [first, second]
            .iter()
            .flat_map(|o| [o.i, o.j, o.m, o.n])
            .all(|v| v == 0.5 || v == -0.5);
        if !ok {
            return Err(Error::InvalidArgument(
                "corner offsets must be +-0.5".into(),
            ));
        }
        Ok(CornerConfig {
            offsets: [first, second],
        })
    }

    pub fn all() -> impl Iterator<Item = CornerConfig> {
        (0..=u8::MAX).map(CornerConfig::from_bits)
    }

    pub fn offsets(&self) -> [CellOffset; 2] {
        self.offsets
    }

    pub fn swapped(&self) -> Self {
        CornerConfig {
            offsets: [self.offsets[1], self.offsets[0]],
        }
    }
}

/// Places a box inside `cell` at fractional offset `o` from the cell center.
pub fn materialize_offset(o: &CellOffset, p: &HashParams, cell: &HashCode) -> BBox {
    let g = cell_geometry(cell.i, cell.j, p);
    BBox {
        w: size_center(p.w0, p.alpha, cell.i as f64 + o.i),
        h: size_center(p.h0, p.alpha, cell.j as f64 + o.j),
        cx: (p.bx + cell.m as f64 + o.m) * g.delta_i,
        cy: (p.by + cell.n as f64 + o.n) * g.delta_j,
    }
}

/// The two boxes described by a corner configuration.
pub fn materialize_config(cfg: &CornerConfig, p: &HashParams, cell: &HashCode) -> (BBox, BBox) {
    let [a, b] = cfg.offsets;
    (
        materialize_offset(&a, p, cell),
        materialize_offset(&b, p, cell),
    )
}

/// Whether two boxes in the same cell always overlap:
/// `(1 - alpha) / (1 + alpha) < sqrt(alpha)`.
pub fn nonzero_condition(alpha: f64) -> bool {
    pitch_ratio(alpha) < alpha.sqrt()
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "alpha must be in (0, 1), got {alpha}"
        )))
    }
}

/// Corner enumeration without memoization.
pub fn lower_bound_uncached(alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if !nonzero_condition(alpha) {
        return Ok(0.0);
    }
    let p = HashParams::new_unbounded_alpha(alpha, 1.0, 1.0, 0.0, 0.0)?;
    let cell = HashCode::new(0, 0, 0, 0);
    let min = CornerConfig::all()
        .map(|cfg| {
            let (a, b) = materialize_config(&cfg, &p, &cell);
            iou(&a, &b)
        })
        .fold(1.0f64, f64::min);
    Ok(min)
}

fn cache() -> &'static RwLock<HashMap<u64, f64>> {
    static CACHE: OnceLock<RwLock<HashMap<u64, f64>>> = OnceLock::new();
    CACHE.get_or_init(Default::default)
}

/// Minimum IoU of two boxes hashed to the same cell, for any parameters
/// sharing `alpha`. Returns 0 when same-cell boxes may be disjoint.
///
/// Results are memoized per `alpha`; concurrent first calls compute the
/// same value and the later insert is a no-op overwrite.
pub fn lower_bound(alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let key = alpha.to_bits();
    if let Some(v) = cache().read().ok().and_then(|m| m.get(&key).copied()) {
        return Ok(v);
    }
    let v = lower_bound_uncached(alpha)?;
    if let Ok(mut m) = cache().write() {
        m.insert(key, v);
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nonzero_condition_examples() {
        assert!(nonzero_condition(0.3));
        assert!(!nonzero_condition(0.25));
        assert!(nonzero_condition(0.73));
    }

    #[test]
    fn bound_values() {
        // Frozen from an independent corner enumeration written in Python.
        let b = lower_bound(0.73).unwrap();
        assert!((b - 0.501_541_960_247_03).abs() < 1e-12, "{b}");
        let b = lower_bound(0.3).unwrap();
        assert!((b - 1.429_645_588_208_5e-4).abs() < 1e-15, "{b}");
        assert_eq!(lower_bound(0.25).unwrap(), 0.0);
        assert!(lower_bound(0.0).is_err());
        assert!(lower_bound(1.0).is_err());
        assert!(lower_bound(f64::NAN).is_err());
    }

    #[test]
    fn memoized_equals_uncached() {
        for alpha in [0.31, 0.5, 0.97] {
            assert_eq!(
                lower_bound(alpha).unwrap(),
                lower_bound_uncached(alpha).unwrap()
            );
            assert_eq!(
                lower_bound(alpha).unwrap(),
                lower_bound_uncached(alpha).unwrap()
            );
        }
    }

    #[test]
    fn concurrent_first_calls_agree() {
        let handles: Vec<_> = (0..8)
            .map(|_| std::thread::spawn(|| lower_bound(0.612).unwrap()))
            .collect();
        let vals: Vec<f64> = handles.into_iter().map(|h| h.join().unwrap()).collect();
        assert!(vals.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn equal_configs_give_identical_boxes() {
        let p = HashParams::canonical(0.73).unwrap();
        let cell = HashCode::new(0, 0, 0, 0);
        let (a, b) = materialize_config(&CornerConfig::from_bits(0), &p, &cell);
        assert_eq!(a, b);
        assert_eq!(iou(&a, &b), 1.0);
    }

    #[test]
    fn offset_corners_are_one_pitch_apart() {
        let p = HashParams::canonical(0.73).unwrap();
        let cell = HashCode::new(0, 0, 0, 0);
        let first = CellOffset {
            i: -0.5,
            j: -0.5,
            m: -0.5,
            n: -0.5,
        };
        let second = CellOffset { m: 0.5, ..first };
        let cfg = CornerConfig::new(first, second).unwrap();
        let (a, b) = materialize_config(&cfg, &p, &cell);
        assert!((b.cx - a.cx - 0.27 / 1.73).abs() < 1e-15);
        assert!((b.cx - a.cx - 0.15607).abs() < 1e-5);
        assert_eq!((a.w, a.h, a.cy), (b.w, b.h, b.cy));
    }

    #[test]
    fn swapping_halves_keeps_iou() {
        let p = HashParams::canonical(0.6).unwrap();
        let cell = HashCode::new(3, -2, 7, 1);
        for cfg in CornerConfig::all() {
            let (a, b) = materialize_config(&cfg, &p, &cell);
            let (c, d) = materialize_config(&cfg.swapped(), &p, &cell);
            assert_eq!(iou(&a, &b), iou(&c, &d));
        }
    }

    #[test]
    fn rejects_interior_corner_offsets() {
        let o = CellOffset {
            i: 0.1,
            ..Default::default()
        };
        assert!(CornerConfig::new(o, o).is_err());
    }
}
