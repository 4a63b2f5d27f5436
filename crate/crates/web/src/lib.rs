// SPDX-License-Identifier: Apache-2.0

//! Browser demo bindings. Each exported function returns a JSON string that
//! `www/index.html` draws on a canvas; the plain-Rust `*_data` functions
//! behind them are what the tests exercise.
//!
//! `std::time::Instant` is unavailable on wasm32, so timings are taken in
//! JavaScript around the calls.

use boxhash::bench::{generate_scene, jaccard, SceneSpec};
use boxhash::iouhash::{cell_geometry, pitch_ratio};
use boxhash::{iou_hash, lower_bound, multi_hnms, nms, nonzero_condition, BBox, HashParams};
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Debug, Serialize, PartialEq)]
pub struct CurvePoint {
    pub alpha: f64,
    pub bound: f64,
    pub nonzero: bool,
}

/// Lower bound sampled at `steps` evenly spaced `alpha` in `[from, to]`.
pub fn bound_curve_data(from: f64, to: f64, steps: usize) -> Result<Vec<CurvePoint>, String> {
    if steps < 2 || from.partial_cmp(&to) != Some(std::cmp::Ordering::Less) {
        return Err("need from < to and at least 2 steps".into());
    }
    (0..steps)
        .map(|k| {
            let alpha = from + (to - from) * k as f64 / (steps - 1) as f64;
            let bound = lower_bound(alpha).map_err(|e| e.to_string())?;
            Ok(CurvePoint {
                alpha,
                bound,
                nonzero: nonzero_condition(alpha),
            })
        })
        .collect()
}

#[derive(Debug, Serialize)]
pub struct CellView {
    pub code: [i32; 4],
    /// Bin centers of the box's width/height cell.
    pub cell_w: f64,
    pub cell_h: f64,
    /// Extremes of widths and heights that hash to the same size cell.
    pub min_w: f64,
    pub max_w: f64,
    pub min_h: f64,
    pub max_h: f64,
    /// Offset cell center and the half-pitch around it.
    pub center_x: f64,
    pub center_y: f64,
    pub half_pitch_x: f64,
    pub half_pitch_y: f64,
    /// Offset grid points within `extent` of the box center.
    pub grid_x: Vec<f64>,
    pub grid_y: Vec<f64>,
    pub bound: f64,
}

pub fn hash_cell_data(
    alpha: f64,
    w: f64,
    h: f64,
    cx: f64,
    cy: f64,
    extent: f64,
) -> Result<CellView, String> {
    let p = HashParams::canonical(alpha).map_err(|e| e.to_string())?;
    let b = BBox::new(w, h, cx, cy).map_err(|e| e.to_string())?;
    let code = iou_hash(&b, &p).map_err(|e| e.to_string())?;
    let g = cell_geometry(code.i, code.j, &p);
    let half = alpha.sqrt();
    let grid = |center: f64, pitch: f64, bias: f64| -> Vec<f64> {
        let lo = ((center - extent) / pitch - bias).ceil() as i64;
        let hi = ((center + extent) / pitch - bias).floor() as i64;
        (lo..=hi)
            .take(400)
            .map(|m| (bias + m as f64) * pitch)
            .collect()
    };
    Ok(CellView {
        code: [code.i, code.j, code.m, code.n],
        cell_w: g.wi,
        cell_h: g.hj,
        min_w: g.wi * half,
        max_w: g.wi / half,
        min_h: g.hj * half,
        max_h: g.hj / half,
        center_x: (p.bx + code.m as f64) * g.delta_i,
        center_y: (p.by + code.n as f64) * g.delta_j,
        half_pitch_x: 0.5 * g.delta_i,
        half_pitch_y: 0.5 * g.delta_j,
        grid_x: grid(cx, g.delta_i, p.bx),
        grid_y: grid(cy, g.delta_j, p.by),
        bound: lower_bound(alpha).map_err(|e| e.to_string())?,
    })
}

#[derive(Debug, Serialize)]
pub struct SceneView {
    /// Rows of `[w, h, cx, cy, score]`.
    pub boxes: Vec<[f64; 5]>,
    pub nms_kept: Vec<usize>,
    pub hnms_kept: Vec<usize>,
    pub jaccard: f64,
    pub bound: f64,
    pub pitch_ratio: f64,
}

#[allow(clippy::too_many_arguments)]
pub fn scene_data(
    truths: usize,
    per_truth: usize,
    jitter: f64,
    seed: u64,
    image: f64,
    alpha: f64,
    k: usize,
    threshold: f64,
) -> Result<SceneView, String> {
    let spec = SceneSpec {
        ground_truth_count: truths,
        proposals_per_truth: per_truth,
        image_w: image,
        image_h: image,
        jitter_scale: jitter,
        seed,
        ..Default::default()
    };
    let d = generate_scene(&spec).map_err(|e| e.to_string())?;
    let nms_kept = nms(&d, threshold).map_err(|e| e.to_string())?.kept;
    let hnms_kept = multi_hnms(&d, alpha, k).map_err(|e| e.to_string())?.kept;
    let boxes = d
        .boxes()
        .iter()
        .zip(d.scores())
        .map(|(b, &s)| [b.w, b.h, b.cx, b.cy, s])
        .collect();
    Ok(SceneView {
        boxes,
        jaccard: jaccard(&nms_kept, &hnms_kept),
        nms_kept,
        hnms_kept,
        bound: lower_bound(alpha).map_err(|e| e.to_string())?,
        pitch_ratio: pitch_ratio(alpha),
    })
}

fn to_js<T: Serialize>(r: Result<T, String>) -> Result<String, JsValue> {
    r.and_then(|v| serde_json::to_string(&v).map_err(|e| e.to_string()))
        .map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn bound_curve(from: f64, to: f64, steps: usize) -> Result<String, JsValue> {
    to_js(bound_curve_data(from, to, steps))
}

#[wasm_bindgen]
pub fn hash_cell(
    alpha: f64,
    w: f64,
    h: f64,
    cx: f64,
    cy: f64,
    extent: f64,
) -> Result<String, JsValue> {
    to_js(hash_cell_data(alpha, w, h, cx, cy, extent))
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn suppress_scene(
    truths: usize,
    per_truth: usize,
    jitter: f64,
    seed: u32,
    image: f64,
    alpha: f64,
    k: usize,
    threshold: f64,
) -> Result<String, JsValue> {
    to_js(scene_data(
        truths,
        per_truth,
        jitter,
        seed as u64,
        image,
        alpha,
        k,
        threshold,
    ))
}
