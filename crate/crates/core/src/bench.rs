// SPDX-License-Identifier: Apache-2.0

//! Synthetic crowded scenes, oracle agreement and timing.
//!
//! Scenes are drawn with `ChaCha8Rng` seeded from [`SceneSpec::seed`], so a
//! spec always produces the same detections on every platform.
//!
//! CSV reports use the fixed column order
//! `algorithm,n_boxes,mean_ms,std_ms,kept_count,jaccard_vs_nms_oracle`.

use std::collections::BTreeSet;
use std::io::Write;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{iou, BBox};
use crate::iouhash::HashParams;
use crate::suppress::{
    hnms, multi_hnms, nms, prefilter_pipeline, soft_nms, Detections, KeepResult, SoftNmsParams,
    Stage2,
};
use crate::SCHEMA_VERSION;

/// Ground-truth box sides are drawn log-uniformly from this range (pixels).
pub const TRUTH_SIZE_RANGE: (f64, f64) = (24.0, 96.0);

/// Std of the gaussian noise added to IoU-correlated scores.
pub const SCORE_NOISE_STD: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ScoreModel {
    /// `clamp(iou(proposal, truth) + noise, 0, 1)`
    #[default]
    IouCorrelated,
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneSpec {
    pub ground_truth_count: usize,
    pub proposals_per_truth: usize,
    pub image_w: f64,
    pub image_h: f64,
    /// Std of center and log-size noise, as a fraction of the truth size.
    pub jitter_scale: f64,
    pub score_model: ScoreModel,
    pub seed: u64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        SceneSpec {
            ground_truth_count: 100,
            proposals_per_truth: 90,
            image_w: 1000.0,
            image_h: 1000.0,
            jitter_scale: 0.1,
            score_model: ScoreModel::IouCorrelated,
            seed: 0,
        }
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        if self.ground_truth_count < 1 || self.proposals_per_truth < 1 {
            return Err(Error::InvalidArgument("scene counts must be >= 1".into()));
        }
        if !(self.jitter_scale >= 0.0 && self.jitter_scale.is_finite()) {
            return Err(Error::InvalidArgument("jitter_scale must be >= 0".into()));
        }
        if !(self.image_w > 0.0 && self.image_h > 0.0) {
            return Err(Error::InvalidArgument(
                "image dimensions must be > 0".into(),
            ));
        }
        Ok(())
    }

    pub fn box_count(&self) -> usize {
        self.ground_truth_count * self.proposals_per_truth
    }

    /// Same spec with the image scaled so that `factor` times as many truths
    /// keep the same density.
    pub fn scaled(&self, factor: usize) -> SceneSpec {
        let side = (factor as f64).sqrt();
        SceneSpec {
            ground_truth_count: self.ground_truth_count * factor,
            image_w: self.image_w * side,
            image_h: self.image_h * side,
            ..self.clone()
        }
    }
}

/// Draws a scene: jittered proposals around uniformly placed ground truths.
pub fn generate_scene(spec: &SceneSpec) -> Result<Detections> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let (lo, hi) = (TRUTH_SIZE_RANGE.0.ln(), TRUTH_SIZE_RANGE.1.ln());

    let mut boxes = Vec::with_capacity(spec.box_count());
    let mut scores = Vec::with_capacity(spec.box_count());
    for _ in 0..spec.ground_truth_count {
        let truth = BBox {
            w: rng.gen_range(lo..hi).exp(),
            h: rng.gen_range(lo..hi).exp(),
            cx: rng.gen_range(0.0..spec.image_w),
            cy: rng.gen_range(0.0..spec.image_h),
        };
        for _ in 0..spec.proposals_per_truth {
            let j = spec.jitter_scale;
            let proposal = BBox {
                w: truth.w * (j * unit.sample(&mut rng)).exp(),
                h: truth.h * (j * unit.sample(&mut rng)).exp(),
                cx: truth.cx + j * truth.w * unit.sample(&mut rng),
                cy: truth.cy + j * truth.h * unit.sample(&mut rng),
            };
            let score = match spec.score_model {
                ScoreModel::IouCorrelated => (iou(&proposal, &truth)
                    + SCORE_NOISE_STD * unit.sample(&mut rng))
                .clamp(0.0, 1.0),
                ScoreModel::Uniform => rng.gen_range(0.0..=1.0),
            };
            boxes.push(proposal);
            scores.push(score);
        }
    }
    Detections::new(boxes, scores)
}

/// An algorithm under benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm", rename_all = "snake_case")]
pub enum Algorithm {
    Nms {
        threshold: f64,
    },
    Soft(SoftNmsParams),
    Hnms {
        alpha: f64,
    },
    Multi {
        alpha: f64,
        k: usize,
    },
    Pipeline {
        alpha: f64,
        k: usize,
        stage2: Stage2,
    },
}

/// Settings used to turn bare labels into [`Algorithm`]s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlgorithmDefaults {
    pub alpha: f64,
    pub k: usize,
    pub threshold: f64,
    pub soft: SoftNmsParams,
}

impl Default for AlgorithmDefaults {
    fn default() -> Self {
        AlgorithmDefaults {
            alpha: 0.7,
            k: 1,
            threshold: 0.7,
            soft: SoftNmsParams::default(),
        }
    }
}

impl Algorithm {
    pub const LABELS: [&'static str; 5] = ["nms", "soft", "hnms", "multi", "pipeline"];

    pub fn from_label(label: &str, defaults: &AlgorithmDefaults) -> Result<Self> {
        let AlgorithmDefaults {
            alpha,
            k,
            threshold,
            soft,
        } = *defaults;
        Ok(match label.trim() {
            "nms" => Algorithm::Nms { threshold },
            "soft" => Algorithm::Soft(soft),
            "hnms" => Algorithm::Hnms { alpha },
            "multi" => Algorithm::Multi { alpha, k },
            "pipeline" => Algorithm::Pipeline {
                alpha,
                k,
                stage2: Stage2::Nms { threshold },
            },
            other => return Err(Error::UnknownAlgorithm(other.to_string())),
        })
    }

    pub fn label(&self) -> &'static str {
        match self {
            Algorithm::Nms { .. } => "nms",
            Algorithm::Soft(_) => "soft",
            Algorithm::Hnms { .. } => "hnms",
            Algorithm::Multi { .. } => "multi",
            Algorithm::Pipeline { .. } => "pipeline",
        }
    }

    pub fn run(&self, d: &Detections) -> Result<KeepResult> {
        match self {
            Algorithm::Nms { threshold } => nms(d, *threshold),
            Algorithm::Soft(params) => soft_nms(d, params),
            Algorithm::Hnms { alpha } => hnms(d, &HashParams::canonical(*alpha)?),
            Algorithm::Multi { alpha, k } => multi_hnms(d, *alpha, *k),
            Algorithm::Pipeline { alpha, k, stage2 } => {
                Ok(prefilter_pipeline(d, *alpha, *k, stage2)?.keep)
            }
        }
    }
}

/// Jaccard similarity of two index sets; two empty sets are identical.
pub fn jaccard(a: &[usize], b: &[usize]) -> f64 {
    let a: BTreeSet<usize> = a.iter().copied().collect();
    let b: BTreeSet<usize> = b.iter().copied().collect();
    let union = a.union(&b).count();
    if union == 0 {
        return 1.0;
    }
    a.intersection(&b).count() as f64 / union as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchConfig {
    pub repetitions: usize,
    pub warmup: usize,
    /// IoU threshold of the reference NMS used for agreement.
    pub oracle_threshold: f64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            repetitions: 5,
            warmup: 1,
            oracle_threshold: 0.7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub algorithm: String,
    pub n_boxes: usize,
    pub mean_ms: f64,
    pub std_ms: f64,
    pub kept_count: usize,
    pub jaccard_vs_nms_oracle: f64,
}

/// Sample mean and standard deviation (n - 1 denominator).
pub fn mean_std(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    if samples.len() < 2 {
        return (mean, 0.0);
    }
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Times one algorithm; returns per-repetition wall-clock milliseconds and
/// the kept set of the last repetition.
pub fn time_algorithm(
    algo: &Algorithm,
    d: &Detections,
    repetitions: usize,
    warmup: usize,
) -> Result<(Vec<f64>, KeepResult)> {
    for _ in 0..warmup {
        algo.run(d)?;
    }
    let mut samples = Vec::with_capacity(repetitions);
    let mut last = KeepResult::default();
    for _ in 0..repetitions {
        let t = Instant::now();
        last = algo.run(d)?;
        samples.push(t.elapsed().as_secs_f64() * 1e3);
    }
    Ok((samples, last))
}

/// Benchmarks each algorithm on `d`, single-threaded and in list order.
pub fn run_bench(
    d: &Detections,
    algorithms: &[Algorithm],
    cfg: &BenchConfig,
) -> Result<Vec<BenchReport>> {
    if cfg.repetitions < 3 {
        return Err(Error::InvalidArgument(format!(
            "at least 3 repetitions required, got {}",
            cfg.repetitions
        )));
    }
    let oracle = nms(d, cfg.oracle_threshold)?;
    algorithms
        .iter()
        .map(|algo| {
            let (samples, keep) = time_algorithm(algo, d, cfg.repetitions, cfg.warmup)?;
            let (mean_ms, std_ms) = mean_std(&samples);
            Ok(BenchReport {
                algorithm: algo.label().to_string(),
                n_boxes: d.len(),
                mean_ms,
                std_ms,
                kept_count: keep.kept.len(),
                jaccard_vs_nms_oracle: jaccard(&keep.kept, &oracle.kept),
            })
        })
        .collect()
}

pub fn write_csv<W: Write>(reports: &[BenchReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in reports {
        w.serialize(r)
            .map_err(|e| Error::Serialization(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::Serialization(e.to_string()))
}

#[derive(Serialize)]
struct ReportFile<'a> {
    schema_version: u32,
    reports: &'a [BenchReport],
}

pub fn write_json<W: Write>(reports: &[BenchReport], out: W) -> Result<()> {
    let file = ReportFile {
        schema_version: SCHEMA_VERSION,
        reports,
    };
    serde_json::to_writer_pretty(out, &file).map_err(|e| Error::Serialization(e.to_string()))
}
