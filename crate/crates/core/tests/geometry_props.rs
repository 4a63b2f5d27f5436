// SPDX-License-Identifier: Apache-2.0

use boxhash::geometry::iou_corners;
use boxhash::{iou, BBox};
use proptest::prelude::*;

fn arb_box() -> impl Strategy<Value = BBox> {
    (
        0.1f64..500.0,
        0.1f64..500.0,
        -1000.0f64..1000.0,
        -1000.0f64..1000.0,
    )
        .prop_map(|(w, h, cx, cy)| BBox::new(w, h, cx, cy).unwrap())
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-300) || (a - b).abs() <= 1e-15
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn iou_is_symmetric_and_bounded(a in arb_box(), b in arb_box()) {
        let v = iou(&a, &b);
        prop_assert_eq!(v, iou(&b, &a));
        prop_assert!((0.0..=1.0).contains(&v));
        prop_assert_eq!(iou(&a, &a), 1.0);
    }

    #[test]
    fn center_and_corner_forms_agree(a in arb_box(), b in arb_box()) {
        let center = iou(&a, &b);
        let corner = iou_corners(&a.to_corners(), &b.to_corners());
        prop_assert!(close(center, corner, 1e-12), "{} vs {}", center, corner);
    }

    #[test]
    fn translation_invariance(a in arb_box(), dx in -20.0f64..20.0, dy in -20.0f64..20.0, sx in -30.0f64..30.0, sy in -30.0f64..30.0) {
        // Keep the pair overlapping often so the check is not vacuous.
        let b = BBox { cx: a.cx + sx, cy: a.cy + sy, ..a };
        let moved = iou(&a.translated(dx, dy), &b.translated(dx, dy));
        let base = iou(&a, &b);
        prop_assert!(close(moved, base, 1e-12) || (moved - base).abs() < 1e-12, "{} vs {}", moved, base);
    }

    #[test]
    fn corner_round_trip(a in arb_box()) {
        let back = BBox::from_corners(&a.to_corners()).unwrap();
        let scale = a.cx.abs().max(a.cy.abs()) + a.w.max(a.h);
        for (x, y) in [(a.w, back.w), (a.h, back.h), (a.cx, back.cx), (a.cy, back.cy)] {
            prop_assert!((x - y).abs() <= f64::EPSILON * scale, "{} vs {}", x, y);
        }
    }
}
