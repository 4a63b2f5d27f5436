// SPDX-License-Identifier: Apache-2.0

//! Suppression over flat numeric buffers.
//!
//! Boxes are a row-major `N x 4` buffer with columns `(w, h, cx, cy)`;
//! scores are a length-`N` buffer. Inputs are only borrowed.

use crate::bench::Algorithm;
use crate::error::{Error, Result};
use crate::geometry::BBox;
use crate::suppress::{Detections, KeepResult};

pub const BOX_COLUMNS: usize = 4;

/// Builds detections from a `rows x columns` box buffer and a score buffer.
pub fn detections_from_flat(boxes: &[f64], columns: usize, scores: &[f64]) -> Result<Detections> {
    let n = scores.len();
    if columns != BOX_COLUMNS || boxes.len() != n * BOX_COLUMNS {
        let rows = boxes.len().checked_div(columns).unwrap_or(0);
        return Err(Error::Shape {
            expected: format!("({n}, {BOX_COLUMNS})"),
            got: format!("({rows}, {columns})"),
        });
    }
    let parsed = boxes
        .chunks_exact(BOX_COLUMNS)
        .map(|r| BBox {
            w: r[0],
            h: r[1],
            cx: r[2],
            cy: r[3],
        })
        .collect();
    Detections::new(parsed, scores.to_vec())
}

/// Runs `algo` on flat buffers. Results equal running it on the equivalent
/// [`Detections`].
pub fn suppress_flat(
    boxes: &[f64],
    columns: usize,
    scores: &[f64],
    algo: &Algorithm,
) -> Result<KeepResult> {
    let d = detections_from_flat(boxes, columns, scores)?;
    algo.run(&d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lower_bound;

    const ABC: [f64; 12] = [
        100.0, 100.0, 54.1, 50.0, //
        100.0, 100.0, 79.1, 50.0, //
        100.0, 100.0, 96.1, 50.0,
    ];

    #[test]
    fn hnms_on_flat_buffers() {
        let keep =
            suppress_flat(&ABC, 4, &[0.9, 0.8, 0.7], &Algorithm::Hnms { alpha: 0.73 }).unwrap();
        assert_eq!(keep.kept, vec![0, 1]);
        assert!((lower_bound(0.73).unwrap() - 0.5015).abs() <= 5e-4);
    }

    #[test]
    fn empty_buffers() {
        let keep = suppress_flat(&[], 4, &[], &Algorithm::Nms { threshold: 0.5 }).unwrap();
        assert!(keep.kept.is_empty());
    }

    #[test]
    fn three_column_buffer_is_rejected() {
        let err = suppress_flat(
            &ABC[..9],
            3,
            &[0.9, 0.8, 0.7],
            &Algorithm::Hnms { alpha: 0.73 },
        )
        .unwrap_err();
        match err {
            Error::Shape { expected, got } => {
                assert_eq!(expected, "(3, 4)");
                assert_eq!(got, "(3, 3)");
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(detections_from_flat(&ABC, 4, &[0.9]).is_err());
    }

    #[test]
    fn inputs_are_not_mutated() {
        let boxes = ABC;
        let scores = [0.9, 0.8, 0.7];
        let soft = Algorithm::Soft(crate::SoftNmsParams::linear());
        let keep = suppress_flat(&boxes, 4, &scores, &soft).unwrap();
        assert_eq!(boxes, ABC);
        assert_eq!(scores, [0.9, 0.8, 0.7]);
        assert_eq!(keep.rescored.unwrap().len(), 3);
    }
}
