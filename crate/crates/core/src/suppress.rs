// SPDX-License-Identifier: Apache-2.0

//! Suppression algorithms: greedy NMS, SoftNMS, hashing-based NMS (single and
//! multi-pass) and the hashing pre-filter pipeline.
//!
//! Every algorithm returns kept indices into its input, ascending.

use std::collections::HashMap;
use std::hash::{BuildHasherDefault, Hasher};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{iou, BBox};
use crate::iouhash::{hash_batch, hash_batch_par, hash_family, pack_code, HashCode, HashParams};

/// Boxes and their confidence scores for one image.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Detections {
    boxes: Vec<BBox>,
    scores: Vec<f64>,
}

impl Detections {
    pub fn new(boxes: Vec<BBox>, scores: Vec<f64>) -> Result<Self> {
        if boxes.len() != scores.len() {
            return Err(Error::InvalidDetections(format!(
                "{} boxes but {} scores",
                boxes.len(),
                scores.len()
            )));
        }
        for (k, b) in boxes.iter().enumerate() {
            b.validate()
                .map_err(|e| Error::InvalidDetections(format!("box {k}: {e}")))?;
        }
        if let Some(k) = scores.iter().position(|s| !(0.0..=1.0).contains(s)) {
            return Err(Error::InvalidDetections(format!(
                "score {k} = {} outside [0, 1]",
                scores[k]
            )));
        }
        Ok(Detections { boxes, scores })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.boxes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }

    pub fn boxes(&self) -> &[BBox] {
        &self.boxes
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    /// The detections at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Detections {
        Detections {
            boxes: indices.iter().map(|&k| self.boxes[k]).collect(),
            scores: indices.iter().map(|&k| self.scores[k]).collect(),
        }
    }
}

/// Indices of the kept detections, ascending. SoftNMS also reports the
/// decayed score of every input detection.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct KeepResult {
    pub kept: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rescored: Option<Vec<f64>>,
}

impl KeepResult {
    fn from_indices(mut kept: Vec<usize>) -> Self {
        kept.sort_unstable();
        KeepResult {
            kept,
            rescored: None,
        }
    }
}

fn check_threshold(t: f64) -> Result<()> {
    if (0.0..=1.0).contains(&t) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "IoU threshold must be in [0, 1], got {t}"
        )))
    }
}

/// Indices sorted by descending score; equal scores keep ascending index.
fn descending_order(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order
}

/// Greedy NMS: visit boxes by descending score and suppress every
/// lower-ranked unsuppressed box whose IoU with the visited one is strictly
/// greater than `iou_threshold`.
pub fn nms(d: &Detections, iou_threshold: f64) -> Result<KeepResult> {
    check_threshold(iou_threshold)?;
    let order = descending_order(&d.scores);
    let boxes = &d.boxes;
    let mut suppressed = vec![false; d.len()];
    let mut kept = Vec::new();
    for (rank, &top) in order.iter().enumerate() {
        if suppressed[top] {
            continue;
        }
        kept.push(top);
        let anchor = &boxes[top];
        for &other in &order[rank + 1..] {
            if !suppressed[other] && iou(anchor, &boxes[other]) > iou_threshold {
                suppressed[other] = true;
            }
        }
    }
    Ok(KeepResult::from_indices(kept))
}

/// Score decay applied to neighbours of a visited box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum SoftDecay {
    /// `score *= 1 - iou`
    Linear,
    /// `score *= exp(-iou^2 / sigma)`
    Gaussian { sigma: f64 },
}

impl SoftDecay {
    #[inline]
    fn factor(&self, overlap: f64) -> f64 {
        match *self {
            SoftDecay::Linear => 1.0 - overlap,
            SoftDecay::Gaussian { sigma } => (-overlap * overlap / sigma).exp(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SoftNmsParams {
    pub decay: SoftDecay,
    pub score_floor: f64,
}

impl SoftNmsParams {
    pub const DEFAULT_SIGMA: f64 = 0.5;
    pub const DEFAULT_SCORE_FLOOR: f64 = 1e-3;

    pub fn linear() -> Self {
        SoftNmsParams {
            decay: SoftDecay::Linear,
            score_floor: Self::DEFAULT_SCORE_FLOOR,
        }
    }

    pub fn gaussian(sigma: f64) -> Self {
        SoftNmsParams {
            decay: SoftDecay::Gaussian { sigma },
            score_floor: Self::DEFAULT_SCORE_FLOOR,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let SoftDecay::Gaussian { sigma } = self.decay {
            if !(sigma > 0.0 && sigma.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "sigma must be > 0, got {sigma}"
                )));
            }
        }
        if !(0.0..1.0).contains(&self.score_floor) {
            return Err(Error::InvalidArgument(format!(
                "score floor must be in [0, 1), got {}",
                self.score_floor
            )));
        }
        Ok(())
    }
}

impl Default for SoftNmsParams {
    fn default() -> Self {
        Self::gaussian(Self::DEFAULT_SIGMA)
    }
}

/// SoftNMS: repeatedly move the highest-rescored unvisited box to the
/// visited list and decay the scores of the remaining unvisited boxes by
/// their overlap with it. A box whose score drops below `score_floor` is
/// discarded and no longer decays others. The kept set is the visited set.
pub fn soft_nms(d: &Detections, params: &SoftNmsParams) -> Result<KeepResult> {
    params.validate()?;
    let boxes = &d.boxes;
    let mut rescored = d.scores.clone();
    let mut active: Vec<usize> = (0..d.len())
        .filter(|&k| rescored[k] >= params.score_floor)
        .collect();
    let mut kept = Vec::new();
    while !active.is_empty() {
        let mut best = 0;
        for pos in 1..active.len() {
            let (cand, cur) = (active[pos], active[best]);
            if rescored[cand] > rescored[cur] || (rescored[cand] == rescored[cur] && cand < cur) {
                best = pos;
            }
        }
        let top = active.swap_remove(best);
        kept.push(top);
        let anchor = boxes[top];
        active.retain(|&k| {
            let overlap = iou(&anchor, &boxes[k]);
            if overlap > 0.0 {
                rescored[k] *= params.decay.factor(overlap);
            }
            rescored[k] >= params.score_floor
        });
    }
    let mut out = KeepResult::from_indices(kept);
    out.rescored = Some(rescored);
    Ok(out)
}

/// Work done by one hashing NMS pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct HnmsCounters {
    pub hashes: usize,
    pub map_updates: usize,
}

/// Multiply-xorshift hasher for packed cell keys, which are already
/// well-spread integers; SipHash dominates the hashing pass otherwise.
#[derive(Default)]
struct CellKeyHasher(u64);

impl Hasher for CellKeyHasher {
    fn finish(&self) -> u64 {
        self.0
    }

    fn write(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.write_u64(b as u64);
        }
    }

    fn write_u64(&mut self, key: u64) {
        let x = (self.0 ^ key).wrapping_mul(0x9E37_79B9_7F4A_7C15);
        self.0 = x ^ (x >> 29);
    }
}

type CellMap = HashMap<u64, usize, BuildHasherDefault<CellKeyHasher>>;

/// Per-cell argmax over precomputed codes. The earlier index wins ties.
/// Returns the winners in ascending order.
fn cell_argmax(
    codes: &[HashCode],
    scores: &[f64],
    counters: &mut HnmsCounters,
) -> Result<Vec<usize>> {
    let mut best = CellMap::with_capacity_and_hasher(codes.len(), Default::default());
    for (k, code) in codes.iter().enumerate() {
        let key = pack_code(code)?;
        match best.get_mut(&key) {
            Some(prev) => {
                if scores[*prev] < scores[k] {
                    *prev = k;
                    counters.map_updates += 1;
                }
            }
            None => {
                best.insert(key, k);
                counters.map_updates += 1;
            }
        }
    }
    let mut winner = vec![false; codes.len()];
    for k in best.into_values() {
        winner[k] = true;
    }
    Ok((0..codes.len()).filter(|&k| winner[k]).collect())
}

/// Hashing NMS with operation counters.
pub fn hnms_counted(d: &Detections, p: &HashParams) -> Result<(KeepResult, HnmsCounters)> {
    let codes = hash_batch(&d.boxes, p)?;
    let mut counters = HnmsCounters {
        hashes: codes.len(),
        ..Default::default()
    };
    let kept = cell_argmax(&codes, &d.scores, &mut counters)?;
    Ok((
        KeepResult {
            kept,
            rescored: None,
        },
        counters,
    ))
}

/// Hashing NMS: keep the highest-scoring box of every hash cell, ties going
/// to the smaller index. Linear in the number of boxes.
pub fn hnms(d: &Detections, p: &HashParams) -> Result<KeepResult> {
    let (keep, counters) = hnms_counted(d, p)?;
    debug_assert_eq!(counters.hashes, d.len());
    debug_assert!(counters.map_updates <= d.len());
    Ok(keep)
}

/// [`hnms`] with the hashing phase spread over the rayon pool. The result is
/// identical to the sequential version.
pub fn hnms_par(d: &Detections, p: &HashParams) -> Result<KeepResult> {
    let codes = hash_batch_par(&d.boxes, p)?;
    let kept = cell_argmax(&codes, &d.scores, &mut HnmsCounters::default())?;
    Ok(KeepResult {
        kept,
        rescored: None,
    })
}

/// Applies `k_count` hashing passes with the staggered hash family, each
/// pass running on the previous pass's survivors.
pub fn multi_hnms(d: &Detections, alpha: f64, k_count: usize) -> Result<KeepResult> {
    let family = hash_family(alpha, k_count)?;
    let mut survivors: Vec<usize> = (0..d.len()).collect();
    let mut current = d.clone();
    for p in &family {
        let pass = hnms(&current, p)?;
        survivors = pass.kept.iter().map(|&k| survivors[k]).collect();
        current = current.select(&pass.kept);
    }
    Ok(KeepResult::from_indices(survivors))
}

/// Exact suppression run on the pre-filter's survivors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Stage2 {
    Nms { threshold: f64 },
    SoftNms(SoftNmsParams),
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StageTimings {
    pub prefilter: Duration,
    pub stage2: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineResult {
    /// Kept indices into the original input. For a SoftNMS stage,
    /// `rescored` covers every input box; boxes removed by the pre-filter
    /// report 0.
    pub keep: KeepResult,
    /// Number of boxes handed to the second stage.
    pub stage2_input: usize,
    pub timings: StageTimings,
}

/// Multi-pass hashing NMS followed by `stage2` on the survivors.
pub fn prefilter_pipeline(
    d: &Detections,
    alpha: f64,
    k_count: usize,
    stage2: &Stage2,
) -> Result<PipelineResult> {
    let t0 = Instant::now();
    let survivors = multi_hnms(d, alpha, k_count)?.kept;
    let reduced = d.select(&survivors);
    let t1 = Instant::now();
    let inner = match stage2 {
        Stage2::Nms { threshold } => nms(&reduced, *threshold)?,
        Stage2::SoftNms(params) => soft_nms(&reduced, params)?,
    };
    let t2 = Instant::now();

    let kept = inner.kept.iter().map(|&k| survivors[k]).collect();
    let mut keep = KeepResult::from_indices(kept);
    if let Some(inner_scores) = inner.rescored {
        let mut rescored = vec![0.0; d.len()];
        for (pos, &orig) in survivors.iter().enumerate() {
            rescored[orig] = inner_scores[pos];
        }
        keep.rescored = Some(rescored);
    }
    Ok(PipelineResult {
        keep,
        stage2_input: survivors.len(),
        timings: StageTimings {
            prefilter: t1 - t0,
            stage2: t2 - t1,
        },
    })
}
